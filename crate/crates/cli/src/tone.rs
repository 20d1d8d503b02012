//! `--preview-tone`: a plain harmonic tone following the F0 contour, for
//! listening to a generated contour. It is a debugging aid, not a vocoder.

use std::f64::consts::TAU;
use std::io::Cursor;

use svs_core::f0lab::{cents_to_hz, F0Track};

pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;
const HARMONICS: usize = 6;
const PEAK: f64 = 0.3;
/// Fade applied at voicing on/offsets to avoid clicks, seconds.
const FADE_S: f64 = 0.01;

/// Renders the tone as 16-bit mono samples.
pub fn render(f0: &F0Track, frame_shift_s: f64, sample_rate: u32) -> Vec<i16> {
    let per_frame = frame_shift_s * sample_rate as f64;
    let n = (f0.len() as f64 * per_frame).round() as usize;
    let step = 1.0 / (FADE_S * sample_rate as f64);
    let norm: f64 = (1..=HARMONICS).map(|k| 1.0 / k as f64).sum();
    let mut phase = 0.0f64;
    let mut gain = 0.0f64;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let frame = ((i as f64 / per_frame) as usize).min(f0.len().saturating_sub(1));
        let voiced = f0.voiced_mask()[frame];
        let hz = if voiced { cents_to_hz(f0.cents()[frame]) } else { 0.0 };
        gain = if voiced { (gain + step).min(1.0) } else { (gain - step).max(0.0) };
        if hz > 0.0 {
            phase = (phase + TAU * hz / sample_rate as f64) % TAU;
        }
        let mut v = 0.0;
        for k in 1..=HARMONICS {
            let h = hz * k as f64;
            if h < sample_rate as f64 / 2.0 {
                v += (phase * k as f64).sin() / k as f64;
            }
        }
        let sample = PEAK * gain * v / norm;
        out.push((sample * i16::MAX as f64).round() as i16);
    }
    out
}

pub fn wav_bytes(samples: &[i16], sample_rate: u32) -> Result<Vec<u8>, hound::Error> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut cursor = Cursor::new(Vec::new());
    {
        let mut w = hound::WavWriter::new(&mut cursor, spec)?;
        for &s in samples {
            w.write_sample(s)?;
        }
        w.finalize()?;
    }
    Ok(cursor.into_inner())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tone_length_and_silence() {
        let mut cents = vec![0.0; 200];
        let mut voiced = vec![true; 200];
        for t in 100..200 {
            cents[t] = f64::NAN;
            voiced[t] = false;
        }
        let f0 = F0Track::new(cents, voiced).unwrap();
        let s = render(&f0, 0.005, 16_000);
        assert_eq!(s.len(), 16_000);
        assert!(s[..8000].iter().any(|&v| v.abs() > 1000));
        assert!(s[8200..].iter().all(|&v| v == 0));
        let bytes = wav_bytes(&s, 16_000).unwrap();
        let r = hound::WavReader::new(Cursor::new(bytes)).unwrap();
        assert_eq!(r.spec().sample_rate, 16_000);
        assert_eq!(r.len(), 16_000);
    }

    #[test]
    fn fundamental_matches_f0() {
        // 440 Hz for one second: count upward zero crossings of the tone
        let f0 = F0Track::voiced(vec![0.0; 200]).unwrap();
        let s = render(&f0, 0.005, 16_000);
        let crossings = s
            .windows(2)
            .skip(800)
            .filter(|w| w[0] < 0 && w[1] >= 0)
            .count();
        assert!((crossings as i64 - 418).abs() <= 4, "{crossings}");
    }
}
