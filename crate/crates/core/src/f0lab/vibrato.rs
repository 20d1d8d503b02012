//! Vibrato as sinusoid parameters over detected sections, or as the
//! difference between a track and its median-smoothed version.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{check_len, median_filter, smooth_f0, F0Error, F0Track, MedianEdge};
use super::DEFAULT_MEDIAN_WINDOW;
use crate::interp::fill_gaps;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VibratoConfig {
    pub frame_shift_s: f64,
    pub window: usize,
    pub amp_min: f64,
    pub amp_max: f64,
    pub rate_min: f64,
    pub rate_max: f64,
    /// Consecutive qualifying half-cycles needed for a section.
    pub min_half_cycles: usize,
    /// Re-run detection with a median window spanning a whole number of
    /// the detected vibrato periods.
    pub period_matched: bool,
}

impl Default for VibratoConfig {
    fn default() -> Self {
        Self {
            frame_shift_s: 0.005,
            window: DEFAULT_MEDIAN_WINDOW,
            amp_min: 30.0,
            amp_max: 300.0,
            rate_min: 4.0,
            rate_max: 9.0,
            min_half_cycles: 3,
            period_matched: true,
        }
    }
}

/// Half-open frame range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VibratoSection {
    pub start: usize,
    pub end: usize,
}

impl VibratoSection {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// Per-frame amplitude (cents) and rate (Hz). Values outside sections are
/// interpolated from the sections around them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SineVibratoParams {
    pub m_a: Vec<f64>,
    pub m_f: Vec<f64>,
    pub vib_flag: Vec<bool>,
}

impl SineVibratoParams {
    pub fn zeros(frames: usize) -> Self {
        Self {
            m_a: vec![0.0; frames],
            m_f: vec![0.0; frames],
            vib_flag: vec![false; frames],
        }
    }

    pub fn len(&self) -> usize {
        self.m_a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m_a.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
struct HalfCycle {
    from: f64,
    to: f64,
    amp: f64,
    rate: f64,
}

/// Sub-frame positions where `r` changes sign. Exact zeros are skipped.
fn zero_crossings(r: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    let mut last: Option<usize> = None;
    for (t, &v) in r.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        if let Some(i) = last {
            if (r[i] > 0.0) != (v > 0.0) {
                out.push(i as f64 + (t - i) as f64 * r[i] / (r[i] - v));
            }
        }
        last = Some(t);
    }
    out
}

fn half_cycles(r: &[f64], frame_shift_s: f64) -> Vec<HalfCycle> {
    zero_crossings(r)
        .windows(2)
        .map(|w| {
            let (from, to) = (w[0], w[1]);
            let lo = from.floor() as usize + 1;
            let hi = (to.ceil() as usize).min(r.len());
            let amp = r[lo.min(hi)..hi].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            HalfCycle {
                from,
                to,
                amp,
                rate: 1.0 / (2.0 * (to - from) * frame_shift_s),
            }
        })
        .collect()
}

struct Detection {
    cycles: Vec<HalfCycle>,
    runs: Vec<(usize, usize)>,
}

fn detect(x: &[f64], window: usize, cfg: &VibratoConfig) -> Result<Detection, F0Error> {
    let smooth = median_filter(x, window, MedianEdge::Truncate)?;
    let r: Vec<f64> = x.iter().zip(&smooth).map(|(a, b)| a - b).collect();
    let cycles = half_cycles(&r, cfg.frame_shift_s);
    let ok = |c: &HalfCycle| {
        (cfg.amp_min..=cfg.amp_max).contains(&c.amp)
            && (cfg.rate_min..=cfg.rate_max).contains(&c.rate)
    };
    let mut runs = Vec::new();
    let mut i = 0;
    while i < cycles.len() {
        if !ok(&cycles[i]) {
            i += 1;
            continue;
        }
        let mut j = i;
        while j < cycles.len() && ok(&cycles[j]) {
            j += 1;
        }
        if j - i >= cfg.min_half_cycles.max(1) {
            runs.push((i, j));
        }
        i = j;
    }
    Ok(Detection { cycles, runs })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[(v.len() - 1) / 2]
}

/// Sinusoidal vibrato parameters from the intersections of the track with
/// its median-smoothed version. Between two intersections the amplitude is
/// the largest deviation and the rate is one over twice the interval.
/// Frames belong to a section when enough consecutive half-cycles have
/// amplitude and rate inside the configured ranges.
pub fn extract_vibrato_sine(
    track: &F0Track,
    cfg: &VibratoConfig,
) -> Result<(SineVibratoParams, Vec<VibratoSection>), F0Error> {
    if let Some(t) = track.cents().iter().position(|c| !c.is_finite()) {
        return Err(F0Error::NonFinite(t));
    }
    let x = track.cents();
    let n = x.len();
    let mut det = detect(x, cfg.window, cfg)?;
    if cfg.period_matched && !det.runs.is_empty() {
        let periods: Vec<f64> = det
            .runs
            .iter()
            .flat_map(|&(i, j)| det.cycles[i..j].iter().map(|c| 2.0 * (c.to - c.from)))
            .collect();
        let p = median(periods);
        let k = (0.9 * cfg.window as f64 / p).ceil().max(1.0);
        let mut w = (k * p).round() as usize;
        if w % 2 == 0 {
            w += 1;
        }
        if w >= 3 && w != cfg.window {
            let second = detect(x, w, cfg)?;
            if !second.runs.is_empty() {
                det = second;
            }
        }
    }

    let mut params = SineVibratoParams::zeros(n);
    let mut sections = Vec::new();
    for &(i, j) in &det.runs {
        let start = det.cycles[i].from.ceil() as usize;
        let end = ((det.cycles[j - 1].to.floor() as usize) + 1).min(n);
        if start >= end {
            continue;
        }
        for c in &det.cycles[i..j] {
            let lo = (c.from.ceil() as usize).max(start);
            let hi = ((c.to.floor() as usize) + 1).min(end);
            for t in lo..hi {
                params.m_a[t] = c.amp;
                params.m_f[t] = c.rate;
                params.vib_flag[t] = true;
            }
        }
        sections.push(VibratoSection { start, end });
    }
    let known = params.vib_flag.clone();
    fill_gaps(&mut params.m_a, &known);
    fill_gaps(&mut params.m_f, &known);
    Ok((params, sections))
}

fn check_sections(sections: &[VibratoSection], frames: usize) -> Result<(), F0Error> {
    for (i, s) in sections.iter().enumerate() {
        if s.is_empty() || s.end > frames {
            return Err(F0Error::Section(i));
        }
        if i > 0 && sections[i - 1].end > s.start {
            return Err(F0Error::Overlap(i - 1, i));
        }
    }
    Ok(())
}

/// `m_a(t) sin(2π m_f(t) f_s (t − t_s))` inside each section, zero outside.
/// The rate is taken frame by frame rather than integrated into a phase.
pub fn render_vibrato_sine(
    params: &SineVibratoParams,
    sections: &[VibratoSection],
    frame_shift_s: f64,
) -> Result<Vec<f64>, F0Error> {
    let n = params.len();
    check_len("vibrato rate", params.m_f.len(), n)?;
    check_sections(sections, n)?;
    let mut out = vec![0.0; n];
    for s in sections {
        for t in s.start..s.end {
            let phase = 2.0 * PI * params.m_f[t] * frame_shift_s * (t - s.start) as f64;
            out[t] = params.m_a[t] * phase.sin();
        }
    }
    Ok(out)
}

/// Track minus its median-smoothed version, in cents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffVibrato {
    pub diff: Vec<f64>,
}

impl DiffVibrato {
    /// `smoothed + alpha * diff`.
    pub fn apply(&self, smoothed: &[f64], alpha: f64) -> Result<Vec<f64>, F0Error> {
        check_len("smoothed track", smoothed.len(), self.diff.len())?;
        Ok(smoothed
            .iter()
            .zip(&self.diff)
            .map(|(s, d)| if alpha == 1.0 { s + d } else { s + alpha * d })
            .collect())
    }
}

/// Splits an interpolated track into its median-smoothed version and the
/// remainder. `smoothed + diff` reproduces the track bit for bit.
pub fn extract_vibrato_diff(
    track: &F0Track,
    window: usize,
) -> Result<(DiffVibrato, F0Track), F0Error> {
    let smoothed = smooth_f0(track, window)?;
    let diff = track
        .cents()
        .iter()
        .zip(smoothed.cents())
        .map(|(x, s)| x - s)
        .collect();
    Ok((DiffVibrato { diff }, smoothed))
}
