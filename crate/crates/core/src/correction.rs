//! Pitch-correction configurations: which note pitch the acoustic model is
//! trained against (the score, a heuristic pseudo pitch, or the score plus
//! a trainable per-note bias) and whether the F0 prior is on. Synthesis
//! always uses the score pitch and no bias.

use serde::{Deserialize, Serialize};

use crate::f0lab::{interpolate_unvoiced, median_filter, MedianEdge, DEFAULT_MEDIAN_WINDOW};
use crate::nnet::Checkpoint;
use crate::pipeline::{
    generate_acoustic, train_acoustic, AcousticOutput, AcousticSetup, F0Training, PipelineError,
    SongData,
};
use crate::score::ScoreFeatureSchema;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NotePitchMode {
    #[default]
    Original,
    Heuristic,
    Bias,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeuristicConfig {
    pub window: usize,
    /// Largest frame-to-frame change of the smoothed F0 still counted as
    /// flat, cents.
    pub slope: f64,
    pub min_run: usize,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        Self {
            window: DEFAULT_MEDIAN_WINDOW,
            slope: 10.0,
            min_run: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorrectionConfig {
    pub mode: NotePitchMode,
    /// Prior standard deviation in cents; absent means no prior.
    pub sigma_p: Option<f64>,
    pub w_max: f64,
    pub ramp: f64,
    pub heuristic: HeuristicConfig,
}

impl Default for CorrectionConfig {
    fn default() -> Self {
        Self {
            mode: NotePitchMode::Original,
            sigma_p: None,
            w_max: 1.0,
            ramp: 10.0,
            heuristic: HeuristicConfig::default(),
        }
    }
}

impl CorrectionConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if let Some(s) = self.sigma_p {
            if !(s > 0.0 && s.is_finite()) {
                return Err(PipelineError::Data(format!("sigma_p must be positive, got {s}")));
            }
        }
        if !(self.w_max >= 0.0) || !(self.ramp >= 0.0) {
            return Err(PipelineError::Data("w_max and ramp must be non-negative".into()));
        }
        let h = &self.heuristic;
        if h.window < 3 || h.window % 2 == 0 || !(h.slope > 0.0) || h.min_run == 0 {
            return Err(PipelineError::Data("invalid heuristic settings".into()));
        }
        Ok(())
    }

    /// Short name such as `Org`, `Heur+Prior` or `Bias+Prior`.
    pub fn label(&self) -> String {
        let base = match self.mode {
            NotePitchMode::Original => "Org",
            NotePitchMode::Heuristic => "Heur",
            NotePitchMode::Bias => "Bias",
        };
        match self.sigma_p {
            Some(s) => format!("{base}+Prior({s})"),
            None => base.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PseudoSource {
    Heuristic,
    Bias,
}

/// One value per pitched note, cents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoNotePitch {
    pub values: Vec<f64>,
    pub source: PseudoSource,
    /// Set for notes without a flat run (or without voiced frames).
    pub fallback: Vec<bool>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[(v.len() - 1) / 2]
}

/// Pseudo pitch from the flat parts of each note: the note's F0 is median
/// smoothed, frames whose smoothed slope stays under the threshold for at
/// least `min_run` frames are flat, and the pseudo pitch is the median of
/// the smoothed F0 there. Notes without a flat run use the median of their
/// voiced frames; notes without voiced frames keep the score pitch. Both
/// fallbacks are flagged.
pub fn heuristic_pseudo_note_pitch(
    song: &SongData,
    cfg: &HeuristicConfig,
) -> Result<PseudoNotePitch, PipelineError> {
    let score = &song.score;
    let spans = song.alignment.reference_spans(score)?;
    let f0 = interpolate_unvoiced(&song.f0)?;
    let voiced = song.f0.voiced_mask();
    let mut values = Vec::with_capacity(score.pitched_count());
    let mut fallback = Vec::with_capacity(score.pitched_count());
    for (note, span) in score.notes.iter().zip(&spans) {
        let Some(cents) = note.cents() else {
            continue;
        };
        let frames: Vec<usize> = (span.start..span.end).filter(|&t| voiced[t]).collect();
        if frames.is_empty() {
            values.push(cents);
            fallback.push(true);
            continue;
        }
        let x: Vec<f64> = frames.iter().map(|&t| f0.cents()[t]).collect();
        let smooth = if x.len() >= 3 {
            median_filter(&x, cfg.window, MedianEdge::Shrink)?
        } else {
            x.clone()
        };
        let mut flat = vec![false; x.len()];
        let mut i = 0;
        while i + 1 < x.len() {
            let mut j = i;
            while j + 1 < x.len()
                && frames[j + 1] == frames[j] + 1
                && (smooth[j + 1] - smooth[j]).abs() < cfg.slope
            {
                j += 1;
            }
            if j + 1 - i >= cfg.min_run {
                flat[i..=j].fill(true);
            }
            i = j + 1;
        }
        let flat_values: Vec<f64> = (0..x.len()).filter(|&k| flat[k]).map(|k| smooth[k]).collect();
        if flat_values.is_empty() {
            values.push(median(x));
            fallback.push(true);
        } else {
            values.push(median(flat_values));
            fallback.push(false);
        }
    }
    Ok(PseudoNotePitch {
        values,
        source: PseudoSource::Heuristic,
        fallback,
    })
}

/// A trained acoustic model under one correction configuration.
#[derive(Debug, Clone)]
pub struct CorrectionSystem {
    pub config: CorrectionConfig,
    pub model: Checkpoint,
    /// Note pitches used in training (heuristic mode), one vector per song.
    pub pseudo: Option<Vec<PseudoNotePitch>>,
}

impl CorrectionSystem {
    /// Learned biases as pseudo pitches (bias mode only): score pitch plus
    /// bias for every pitched note of the training songs.
    pub fn bias_pitch(&self, songs: &[SongData]) -> Option<Vec<PseudoNotePitch>> {
        if self.config.mode != NotePitchMode::Bias {
            return None;
        }
        Some(
            songs
                .iter()
                .zip(&self.model.bias)
                .map(|(s, b)| PseudoNotePitch {
                    values: s.score.pitched_cents().iter().zip(b).map(|(p, b)| p + b).collect(),
                    source: PseudoSource::Bias,
                    fallback: vec![false; b.len()],
                })
                .collect(),
        )
    }

    /// Generates acoustic features for a timed score. The score pitch and
    /// a zero bias are used regardless of the training configuration; the
    /// returned trace records both.
    pub fn synthesize(
        &self,
        song: &SongData,
        schema: &ScoreFeatureSchema,
    ) -> Result<AcousticOutput, PipelineError> {
        generate_acoustic(&song.score, &song.alignment, schema, &self.model, 1.0)
    }
}

/// Trains the acoustic model of one configuration.
pub fn run_configuration(
    config: &CorrectionConfig,
    songs: &[SongData],
    schema: &ScoreFeatureSchema,
    setup: &AcousticSetup,
) -> Result<CorrectionSystem, PipelineError> {
    config.validate()?;
    let pseudo = match config.mode {
        NotePitchMode::Heuristic => Some(
            songs
                .iter()
                .map(|s| heuristic_pseudo_note_pitch(s, &config.heuristic))
                .collect::<Result<Vec<_>, _>>()?,
        ),
        _ => None,
    };
    let pitch: Option<Vec<Vec<f64>>> = pseudo
        .as_ref()
        .map(|p| p.iter().map(|x| x.values.clone()).collect());
    let f0 = F0Training {
        sigma_p: config.sigma_p,
        w_max: config.w_max,
        ramp: config.ramp,
        bias: config.mode == NotePitchMode::Bias,
    };
    let model = train_acoustic(songs, schema, setup, f0, pitch.as_deref())?;
    Ok(CorrectionSystem {
        config: *config,
        model,
        pseudo,
    })
}

/// Mean absolute F0 training residual (cents) under a configuration's
/// note pitch source, over pitched frames.
pub fn mean_abs_residual(
    songs: &[SongData],
    schema: &ScoreFeatureSchema,
    setup: &AcousticSetup,
    pseudo: Option<&[PseudoNotePitch]>,
) -> Result<f64, PipelineError> {
    let (mut sum, mut n) = (0.0, 0usize);
    for (i, s) in songs.iter().enumerate() {
        let p = pseudo.map(|p| p[i].values.as_slice());
        let r = crate::pipeline::acoustic_record(s, schema, setup, p)?;
        let rest = s.score.rest_flags();
        for (span, &is_rest) in r.note_spans.iter().zip(&rest) {
            if is_rest {
                continue;
            }
            for t in span.start..span.end {
                sum += r.targets.get(t, 0).abs();
                n += 1;
            }
        }
    }
    Ok(if n == 0 { 0.0 } else { sum / n as f64 })
}
