//! Objective metrics and the synthetic singing generator.

mod synth;

pub use synth::{
    generate_corpus, generate_synthetic_song, CorpusSpec, SynthCorpus, SynthError, SynthLedger,
    SynthNote, SynthSpec, SyntheticSong, TimingSpec, TransientSpec, VibratoSpec,
};

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::PhonemeAlignment;
use crate::f0lab::F0Track;
use crate::score::Score;
use crate::seq::Seq;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("length mismatch: {0} vs {1}")]
    Length(usize, usize),
    #[error("no frames selected")]
    Empty,
    #[error("correlation undefined: a series is constant over the selected frames")]
    Constant,
    #[error("alignment: {0}")]
    Alignment(String),
}

/// Which frames F0 metrics compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameSelection {
    /// Frames voiced in both tracks.
    #[default]
    VoicedBoth,
    All,
}

pub fn frame_mask(a: &F0Track, b: &F0Track, sel: FrameSelection) -> Result<Vec<bool>, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::Length(a.len(), b.len()));
    }
    Ok(match sel {
        FrameSelection::All => vec![true; a.len()],
        FrameSelection::VoicedBoth => a
            .voiced_mask()
            .iter()
            .zip(b.voiced_mask())
            .map(|(x, y)| *x && *y)
            .collect(),
    })
}

fn selected<'a>(
    a: &'a [f64],
    b: &'a [f64],
    mask: Option<&'a [bool]>,
) -> Result<impl Iterator<Item = (f64, f64)> + 'a, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::Length(a.len(), b.len()));
    }
    if let Some(m) = mask {
        if m.len() != a.len() {
            return Err(MetricError::Length(a.len(), m.len()));
        }
    }
    Ok((0..a.len())
        .filter(move |&t| mask.is_none_or(|m| m[t]))
        .map(move |t| (a[t], b[t])))
}

pub fn rmse_cents(a: &[f64], b: &[f64], mask: Option<&[bool]>) -> Result<f64, MetricError> {
    let (mut s, mut n) = (0.0, 0usize);
    for (x, y) in selected(a, b, mask)? {
        s += (x - y) * (x - y);
        n += 1;
    }
    if n == 0 {
        return Err(MetricError::Empty);
    }
    Ok((s / n as f64).sqrt())
}

pub fn pearson_corr(a: &[f64], b: &[f64], mask: Option<&[bool]>) -> Result<f64, MetricError> {
    let pairs: Vec<(f64, f64)> = selected(a, b, mask)?.collect();
    if pairs.is_empty() {
        return Err(MetricError::Empty);
    }
    let n = pairs.len() as f64;
    let ma = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mb = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in &pairs {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return Err(MetricError::Constant);
    }
    Ok((cov / (va * vb).sqrt()).clamp(-1.0, 1.0))
}

/// Mel-cepstral distortion in dB, `(10 / ln 10) sqrt(2 Σ_{d≥1} Δ_d²)`
/// averaged over frames. The 0-th coefficient is excluded.
pub fn mcd(a: &Seq, b: &Seq) -> Result<f64, MetricError> {
    if a.frames() != b.frames() || a.dim() != b.dim() {
        return Err(MetricError::Length(a.frames(), b.frames()));
    }
    if a.frames() == 0 {
        return Err(MetricError::Empty);
    }
    let k = 10.0 / std::f64::consts::LN_10;
    let total: f64 = a
        .rows()
        .zip(b.rows())
        .map(|(x, y)| {
            let s: f64 = x.iter().zip(y).skip(1).map(|(p, q)| (p - q) * (p - q)).sum();
            k * (2.0 * s).sqrt()
        })
        .sum();
    Ok(total / a.frames() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DurationRow {
    pub rmse: f64,
    /// `None` when either series is constant.
    pub corr: Option<f64>,
}

pub fn duration_row(pred: &[usize], reference: &[usize]) -> Result<DurationRow, MetricError> {
    let p: Vec<f64> = pred.iter().map(|&v| v as f64).collect();
    let r: Vec<f64> = reference.iter().map(|&v| v as f64).collect();
    let rmse = rmse_cents(&p, &r, None)?;
    let corr = match pearson_corr(&p, &r, None) {
        Ok(c) => Some(c),
        Err(MetricError::Constant) => None,
        Err(e) => return Err(e),
    };
    Ok(DurationRow { rmse, corr })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DurationMetrics {
    pub phoneme: DurationRow,
    pub note: DurationRow,
}

/// Phoneme and note duration errors between two alignments of one score.
/// Note durations are sung note spans (first phoneme start to last phoneme
/// end).
pub fn duration_metrics(
    score: &Score,
    pred: &PhonemeAlignment,
    reference: &PhonemeAlignment,
) -> Result<DurationMetrics, MetricError> {
    let err = |e: crate::alignment::AlignmentError| MetricError::Alignment(e.to_string());
    let note_lens = |a: &PhonemeAlignment| -> Result<Vec<usize>, MetricError> {
        Ok(a.note_spans(score).map_err(err)?.iter().map(|s| s.len()).collect())
    };
    Ok(DurationMetrics {
        phoneme: duration_row(&pred.durations(), &reference.durations())?,
        note: duration_row(&note_lens(pred)?, &note_lens(reference)?)?,
    })
}

/// Every field is optional; a report lists what was measured.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rmse_note: Option<f64>,
    pub rmse_nat: Option<f64>,
    pub corr_note: Option<f64>,
    pub corr_nat: Option<f64>,
    pub mcd: Option<f64>,
    pub dur_rmse_note: Option<f64>,
    pub dur_rmse_phoneme: Option<f64>,
    pub dur_corr_note: Option<f64>,
    pub dur_corr_phoneme: Option<f64>,
}

impl MetricsReport {
    fn rows(&self) -> [(&'static str, &'static str, Option<f64>); 9] {
        [
            ("rmse_note", "cents", self.rmse_note),
            ("rmse_nat", "cents", self.rmse_nat),
            ("corr_note", "", self.corr_note),
            ("corr_nat", "", self.corr_nat),
            ("mcd", "dB", self.mcd),
            ("dur_rmse_note", "frames", self.dur_rmse_note),
            ("dur_rmse_phoneme", "frames", self.dur_rmse_phoneme),
            ("dur_corr_note", "", self.dur_corr_note),
            ("dur_corr_phoneme", "", self.dur_corr_phoneme),
        ]
    }

    /// One `name value unit` line per measured metric.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (name, unit, v) in self.rows() {
            if let Some(v) = v {
                let line = format!("{name:<18} {v:>12.6} {unit}");
                s.push_str(line.trim_end());
                s.push('\n');
            }
        }
        s
    }

    /// Tab-separated `metric value unit` with a header; unmeasured metrics
    /// are written as `NA`.
    pub fn to_table(&self) -> String {
        let mut s = String::from("metric\tvalue\tunit\n");
        for (name, unit, v) in self.rows() {
            match v {
                Some(v) => {
                    let _ = writeln!(s, "{name}\t{v:.9}\t{unit}");
                }
                None => {
                    let _ = writeln!(s, "{name}\tNA\t{unit}");
                }
            }
        }
        s
    }
}
