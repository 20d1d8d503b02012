//! F0 tracks in cents: voicing interpolation, median smoothing, vibrato
//! decompositions and pitch normalization.

mod vibrato;

pub use vibrato::{
    extract_vibrato_diff, extract_vibrato_sine, render_vibrato_sine, DiffVibrato,
    SineVibratoParams, VibratoConfig, VibratoSection,
};

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interp::fill_gaps;

/// Default median window, 225 ms at a 5 ms shift.
pub const DEFAULT_MEDIAN_WINDOW: usize = 45;

/// Cents are stored on a grid of `2^-24`. Sums and differences of grid
/// values below `2^28` cents in magnitude are then exact in `f64`, which
/// keeps `smoothed + diff == original` bitwise.
const GRID: f64 = 16_777_216.0;

pub fn quantize_cents(c: f64) -> f64 {
    (c * GRID).round() / GRID
}

pub fn hz_to_cents(hz: f64) -> f64 {
    1200.0 * (hz / 440.0).log2()
}

pub fn cents_to_hz(c: f64) -> f64 {
    440.0 * (c / 1200.0).exp2()
}

#[derive(Debug, Error, PartialEq)]
pub enum F0Error {
    #[error("F0 track has no voiced frame")]
    Unvoiced,
    #[error("median window must be odd and at least 3, got {0}")]
    Window(usize),
    #[error("length mismatch: {what} has {got} frames, expected {expected}")]
    Length {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("non-finite cents at frame {0}")]
    NonFinite(usize),
    #[error("F0 file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("vibrato sections {0} and {1} overlap or are out of order")]
    Overlap(usize, usize),
    #[error("vibrato section {0} is empty or out of range")]
    Section(usize),
}

fn check_len(what: &'static str, got: usize, expected: usize) -> Result<(), F0Error> {
    if got != expected {
        return Err(F0Error::Length {
            what,
            got,
            expected,
        });
    }
    Ok(())
}

/// Log-scale pitch in cents relative to A4, with a voicing mask.
/// Unvoiced frames hold NaN until interpolated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F0Track {
    cents: Vec<f64>,
    voiced: Vec<bool>,
}

impl F0Track {
    /// Voiced frames must be finite; unvoiced values are kept as given.
    pub fn new(cents: Vec<f64>, voiced: Vec<bool>) -> Result<Self, F0Error> {
        check_len("voicing mask", voiced.len(), cents.len())?;
        let mut cents = cents;
        for (t, (c, &v)) in cents.iter_mut().zip(&voiced).enumerate() {
            if v && !c.is_finite() {
                return Err(F0Error::NonFinite(t));
            }
            *c = quantize_cents(*c);
        }
        Ok(Self { cents, voiced })
    }

    /// Fully voiced track.
    pub fn voiced(cents: Vec<f64>) -> Result<Self, F0Error> {
        let voiced = vec![true; cents.len()];
        Self::new(cents, voiced)
    }

    /// Hz values with 0 (or anything non-positive) marking unvoiced frames.
    pub fn from_hz(hz: &[f64]) -> Result<Self, F0Error> {
        let voiced: Vec<bool> = hz.iter().map(|&h| h > 0.0).collect();
        let cents = hz
            .iter()
            .map(|&h| if h > 0.0 { hz_to_cents(h) } else { f64::NAN })
            .collect();
        Self::new(cents, voiced)
    }

    /// One Hz value per line; blank lines and `#` comments are skipped.
    pub fn parse_hz(text: &str) -> Result<Self, F0Error> {
        let mut hz = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let v: f64 = line.parse().map_err(|_| F0Error::Parse {
                line: i + 1,
                message: format!("not a number: {line:?}"),
            })?;
            if !v.is_finite() || v < 0.0 {
                return Err(F0Error::Parse {
                    line: i + 1,
                    message: format!("invalid frequency {v}"),
                });
            }
            hz.push(v);
        }
        Self::from_hz(&hz)
    }

    /// Hz per line, 0 on unvoiced frames.
    pub fn to_hz_text(&self) -> String {
        let mut s = String::with_capacity(self.len() * 10);
        for (c, &v) in self.cents.iter().zip(&self.voiced) {
            let hz = if v { cents_to_hz(*c) } else { 0.0 };
            let _ = writeln!(s, "{hz:.6}");
        }
        s
    }

    pub fn len(&self) -> usize {
        self.cents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cents.is_empty()
    }

    pub fn cents(&self) -> &[f64] {
        &self.cents
    }

    pub fn voiced_mask(&self) -> &[bool] {
        &self.voiced
    }

    pub fn into_cents(self) -> Vec<f64> {
        self.cents
    }

    pub fn is_finite(&self) -> bool {
        self.cents.iter().all(|c| c.is_finite())
    }
}

/// Linear interpolation across unvoiced frames, holding the edge values.
/// The voicing mask is kept unchanged.
pub fn interpolate_unvoiced(track: &F0Track) -> Result<F0Track, F0Error> {
    let mut cents = track.cents.clone();
    if !fill_gaps(&mut cents, &track.voiced) {
        return Err(F0Error::Unvoiced);
    }
    cents.iter_mut().for_each(|c| *c = quantize_cents(*c));
    Ok(F0Track {
        cents,
        voiced: track.voiced.clone(),
    })
}

/// How the running median handles frames closer than half a window to
/// either end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MedianEdge {
    /// Use whatever part of the window lies inside the track.
    #[default]
    Truncate,
    /// Shrink the window symmetrically, so the end frames keep their value.
    Shrink,
}

/// Running median. Even-sized windows (truncated edges) take the lower
/// middle value so the output is always one of the inputs.
pub fn median_filter(values: &[f64], window: usize, edge: MedianEdge) -> Result<Vec<f64>, F0Error> {
    if window < 3 || window % 2 == 0 {
        return Err(F0Error::Window(window));
    }
    let n = values.len();
    let h = window / 2;
    let mut buf = Vec::with_capacity(window);
    let mut out = Vec::with_capacity(n);
    for t in 0..n {
        let (lo, hi) = match edge {
            MedianEdge::Truncate => (t.saturating_sub(h), (t + h + 1).min(n)),
            MedianEdge::Shrink => {
                let r = h.min(t).min(n - 1 - t);
                (t - r, t + r + 1)
            }
        };
        buf.clear();
        buf.extend_from_slice(&values[lo..hi]);
        let mid = (buf.len() - 1) / 2;
        let (_, m, _) = buf.select_nth_unstable_by(mid, f64::total_cmp);
        out.push(*m);
    }
    Ok(out)
}

/// Median-smoothed copy of an interpolated track.
pub fn smooth_f0(track: &F0Track, window: usize) -> Result<F0Track, F0Error> {
    if let Some(t) = track.cents.iter().position(|c| !c.is_finite()) {
        return Err(F0Error::NonFinite(t));
    }
    Ok(F0Track {
        cents: median_filter(&track.cents, window, MedianEdge::Truncate)?,
        voiced: track.voiced.clone(),
    })
}

/// Residual of the track around the note pitch. The pitch is snapped to
/// the cents grid so [`pitch_denormalize`] undoes this exactly.
pub fn pitch_normalize(track: &F0Track, pitch: &[f64]) -> Result<Vec<f64>, F0Error> {
    check_len("note pitch", pitch.len(), track.len())?;
    Ok(track
        .cents
        .iter()
        .zip(pitch)
        .map(|(c, p)| c - quantize_cents(*p))
        .collect())
}

/// `p + mu (+ b)` as a fully voiced track.
pub fn pitch_denormalize(
    mu: &[f64],
    pitch: &[f64],
    bias: Option<&[f64]>,
) -> Result<F0Track, F0Error> {
    check_len("note pitch", pitch.len(), mu.len())?;
    if let Some(b) = bias {
        check_len("pitch bias", b.len(), mu.len())?;
    }
    let cents = (0..mu.len())
        .map(|t| {
            let base = quantize_cents(pitch[t]) + mu[t];
            match bias {
                Some(b) => base + b[t],
                None => base,
            }
        })
        .collect();
    F0Track::voiced(cents)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn interpolation_examples() {
        let t = F0Track::new(
            vec![100.0, f64::NAN, f64::NAN, 400.0],
            vec![true, false, false, true],
        )
        .unwrap();
        let i = interpolate_unvoiced(&t).unwrap();
        assert_eq!(i.cents(), &[100.0, 200.0, 300.0, 400.0]);
        assert_eq!(i.voiced_mask(), &[true, false, false, true]);
        let lead = F0Track::from_hz(&[0.0, 0.0, 440.0, 880.0]).unwrap();
        assert_eq!(interpolate_unvoiced(&lead).unwrap().cents(), &[0.0, 0.0, 0.0, 1200.0]);
        let all = F0Track::voiced(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(interpolate_unvoiced(&all).unwrap(), all);
        let none = F0Track::from_hz(&[0.0, 0.0]).unwrap();
        assert_eq!(interpolate_unvoiced(&none), Err(F0Error::Unvoiced));
    }

    #[test]
    fn hz_file_round_trip() {
        let t = F0Track::parse_hz("# f0\n0\n220.0\n\n440\n0.0\n").unwrap();
        assert_eq!(t.voiced_mask(), &[false, true, true, false]);
        assert_eq!(t.cents()[1], -1200.0);
        let back = F0Track::parse_hz(&t.to_hz_text()).unwrap();
        assert_eq!(back.voiced_mask(), t.voiced_mask());
        assert!((back.cents()[2] - t.cents()[2]).abs() < 1e-4);
        assert!(matches!(F0Track::parse_hz("1\nabc\n"), Err(F0Error::Parse { line: 2, .. })));
    }

    #[test]
    fn smoothing_examples() {
        let c = F0Track::voiced(vec![50.0; 20]).unwrap();
        assert_eq!(smooth_f0(&c, 5).unwrap(), c);
        let mut spike = vec![50.0; 20];
        spike[7] = 900.0;
        let s = smooth_f0(&F0Track::voiced(spike).unwrap(), 5).unwrap();
        assert!(s.cents().iter().all(|&v| v == 50.0));
        assert_eq!(smooth_f0(&c, 4), Err(F0Error::Window(4)));
        assert_eq!(smooth_f0(&c, 1), Err(F0Error::Window(1)));
    }

    #[test]
    fn median_of_sinusoid_stays_near_base() {
        // 5 Hz at 5 ms is 40 frames per cycle
        let x: Vec<f64> = (0..400)
            .map(|t| 300.0 + 100.0 * (2.0 * std::f64::consts::PI * 5.0 * 0.005 * t as f64).sin())
            .collect();
        let track = F0Track::voiced(x).unwrap();
        for w in [41, 81] {
            let s = smooth_f0(&track, w).unwrap();
            for &v in &s.cents()[w / 2..400 - w / 2] {
                assert!((v - 300.0).abs() < 5.0, "{w}: {v}");
            }
        }
    }

    #[test]
    fn shrink_keeps_end_frames() {
        let x = [0.0, 10.0, 20.0, 0.0, 0.0, 0.0, 50.0];
        let s = median_filter(&x, 5, MedianEdge::Shrink).unwrap();
        assert_eq!(s[0], 0.0);
        assert_eq!(s[6], 50.0);
        assert_eq!(s[1], 10.0);
        let t = median_filter(&x, 5, MedianEdge::Truncate).unwrap();
        // [0, 10, 20] -> 10; [0, 0, 50] -> 0
        assert_eq!(t[0], 10.0);
        assert_eq!(t[6], 0.0);
    }

    #[test]
    fn normalization_examples() {
        let t = F0Track::voiced(vec![50.0, 50.0]).unwrap();
        assert_eq!(pitch_normalize(&t, &[0.0, 0.0]).unwrap(), vec![50.0, 50.0]);
        let p = [0.0, 100.0, 100.0];
        let mu = [5.0, -3.0, 1.0];
        let b = [0.0, 30.0, 30.0];
        let out = pitch_denormalize(&mu, &p, Some(&b)).unwrap();
        assert_eq!(out.cents(), &[5.0, 127.0, 131.0]);
        assert!(matches!(
            pitch_normalize(&t, &[0.0]),
            Err(F0Error::Length { .. })
        ));
    }

    proptest! {
        #[test]
        fn normalize_round_trip_is_exact(
            x in prop::collection::vec(-3000.0f64..3000.0, 1..200),
            p in prop::collection::vec(-3000.0f64..3000.0, 200),
        ) {
            let t = F0Track::voiced(x).unwrap();
            let p = &p[..t.len()];
            let mu = pitch_normalize(&t, p).unwrap();
            prop_assert_eq!(pitch_denormalize(&mu, p, None).unwrap(), t);
        }

        #[test]
        fn interpolation_is_idempotent_and_keeps_voiced(
            x in prop::collection::vec(-3000.0f64..3000.0, 1..200),
            v in prop::collection::vec(any::<bool>(), 200),
        ) {
            let mut v = v[..x.len()].to_vec();
            v[0] = true;
            let t = F0Track::new(x, v).unwrap();
            let once = interpolate_unvoiced(&t).unwrap();
            prop_assert!(once.is_finite());
            for i in 0..t.len() {
                if t.voiced_mask()[i] {
                    prop_assert_eq!(once.cents()[i], t.cents()[i]);
                }
            }
            prop_assert_eq!(interpolate_unvoiced(&once).unwrap(), once);
        }
    }
}
