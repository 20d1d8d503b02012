//! Training data preparation and generation for the time-lag, duration and
//! acoustic models.
//!
//! Acoustic targets are frame-aligned on the reference spans of the
//! alignment (see [`PhonemeAlignment::reference_spans`]). Column 0 is the
//! F0 residual from the note pitch, optionally followed by the difference
//! vibrato stream and spectral coefficients.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::{AlignmentError, PhonemeAlignment};
use crate::evalkit::SyntheticSong;
use crate::f0lab::{
    extract_vibrato_diff, interpolate_unvoiced, pitch_denormalize, pitch_normalize, F0Error,
    F0Track, DEFAULT_MEDIAN_WINDOW,
};
use crate::nnet::{
    mlpg, train, Activation, Checkpoint, Criterion, F0Stream, MlpgError, ModelKind,
    NetworkError, OptimizerConfig, TrainError, TrainOutcome, TrainRecord, TrainSetup, WindowSet,
    FORMAT_VERSION,
};
use crate::score::{
    encode_features, encode_note_features, encode_phoneme_features, NoteExpansion, Score,
    ScoreError, ScoreFeatureSchema, Span, SILENCE,
};
use crate::seq::Seq;
use crate::timing::{
    adjust_note_lengths, allocate_score, compute_time_lag_targets, predict_durations,
    predict_time_lags, AllocationMethod, RepairMode, TimingError,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Alignment(#[from] AlignmentError),
    #[error(transparent)]
    F0(#[from] F0Error),
    #[error(transparent)]
    Timing(#[from] TimingError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Mlpg(#[from] MlpgError),
    #[error("{0}")]
    Data(String),
    #[error("model: {0}")]
    Model(String),
}

/// One song of training or evaluation data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SongData {
    pub name: String,
    pub score: Score,
    pub alignment: PhonemeAlignment,
    pub f0: F0Track,
    pub mgc: Option<Seq>,
}

impl SongData {
    pub fn from_synthetic(name: impl Into<String>, song: &SyntheticSong) -> Self {
        Self {
            name: name.into(),
            score: song.score.clone(),
            alignment: song.alignment.clone(),
            f0: song.f0.clone(),
            mgc: Some(song.mgc.clone()),
        }
    }

    fn check(&self) -> Result<(), PipelineError> {
        let frames = self.alignment.total_frames();
        if frames != self.score.total_frames() {
            return Err(PipelineError::Data(format!(
                "{}: alignment has {frames} frames, score has {}",
                self.name,
                self.score.total_frames()
            )));
        }
        if self.f0.len() != frames {
            return Err(PipelineError::Data(format!(
                "{}: F0 has {} frames, alignment has {frames}",
                self.name,
                self.f0.len()
            )));
        }
        if let Some(m) = &self.mgc {
            if m.frames() != frames {
                return Err(PipelineError::Data(format!(
                    "{}: spectral features have {} frames, alignment has {frames}",
                    self.name,
                    m.frames()
                )));
            }
        }
        Ok(())
    }
}

/// Which streams follow the F0 residual in the acoustic targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcousticLayout {
    pub vibrato: bool,
    pub mgc_dim: usize,
}

pub const F0_STREAM: &str = "lf0_residual";
pub const VIBRATO_STREAM: &str = "vibrato_diff";

impl AcousticLayout {
    pub fn dim(&self) -> usize {
        1 + usize::from(self.vibrato) + self.mgc_dim
    }

    pub fn streams(&self) -> Vec<String> {
        let mut s = vec![F0_STREAM.to_string()];
        if self.vibrato {
            s.push(VIBRATO_STREAM.to_string());
        }
        s.extend((0..self.mgc_dim).map(|d| format!("mgc{d}")));
        s
    }

    pub fn from_streams(streams: &[String]) -> Result<Self, PipelineError> {
        if streams.first().map(String::as_str) != Some(F0_STREAM) {
            return Err(PipelineError::Model(
                "acoustic model must start with the F0 residual stream".into(),
            ));
        }
        let vibrato = streams.get(1).map(String::as_str) == Some(VIBRATO_STREAM);
        let layout = Self {
            vibrato,
            mgc_dim: streams.len() - 1 - usize::from(vibrato),
        };
        if layout.streams() != streams {
            return Err(PipelineError::Model(format!("unknown stream layout {streams:?}")));
        }
        Ok(layout)
    }

    fn mgc_offset(&self) -> usize {
        1 + usize::from(self.vibrato)
    }
}

/// Network and optimizer settings shared by all models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSetup {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
}

impl Default for ModelSetup {
    fn default() -> Self {
        Self {
            hidden: vec![32, 32],
            activation: Activation::Tanh,
            optimizer: OptimizerConfig::default(),
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcousticSetup {
    pub model: ModelSetup,
    pub criterion: Criterion,
    pub windows: WindowSet,
    pub layout: AcousticLayout,
    /// Hidden layer receiving the note pitch.
    pub skip_target: Option<usize>,
    pub median_window: usize,
}

impl Default for AcousticSetup {
    fn default() -> Self {
        Self {
            model: ModelSetup::default(),
            criterion: Criterion::StaticOutDynamic,
            windows: WindowSet::standard(),
            layout: AcousticLayout {
                vibrato: true,
                mgc_dim: 0,
            },
            skip_target: Some(0),
            median_window: DEFAULT_MEDIAN_WINDOW,
        }
    }
}

/// Per-frame note pitch on the given spans from one value per pitched note.
pub fn expand_note_values(score: &Score, spans: &[Span], values: &[f64]) -> Vec<f64> {
    NoteExpansion::new(spans, &score.rest_flags()).expand(values)
}

/// Note-level features and time-lag targets.
pub fn timelag_record(
    song: &SongData,
    schema: &ScoreFeatureSchema,
) -> Result<TrainRecord, PipelineError> {
    song.check()?;
    let features = encode_note_features(&song.score, schema)?;
    let lags = compute_time_lag_targets(&song.score, &song.alignment)?;
    Ok(TrainRecord {
        name: song.name.clone(),
        note_pitch: vec![0.0; features.frames()],
        features,
        targets: Seq::from_column(&lags),
        note_spans: Vec::new(),
        rest: Vec::new(),
    })
}

/// Phoneme-level features and aligned durations in frames.
pub fn duration_record(
    song: &SongData,
    schema: &ScoreFeatureSchema,
) -> Result<TrainRecord, PipelineError> {
    song.check()?;
    song.alignment.check_against(&song.score)?;
    let features = encode_phoneme_features(&song.score, schema)?;
    let durations: Vec<f64> = song.alignment.durations().iter().map(|&d| d as f64).collect();
    Ok(TrainRecord {
        name: song.name.clone(),
        note_pitch: vec![0.0; features.frames()],
        features,
        targets: Seq::from_column(&durations),
        note_spans: Vec::new(),
        rest: Vec::new(),
    })
}

/// Frame-level features and acoustic targets. `pseudo_pitch`, one value
/// per pitched note, replaces the score pitch as the normalization and
/// skip-connection input.
pub fn acoustic_record(
    song: &SongData,
    schema: &ScoreFeatureSchema,
    setup: &AcousticSetup,
    pseudo_pitch: Option<&[f64]>,
) -> Result<TrainRecord, PipelineError> {
    song.check()?;
    let layout = setup.layout;
    let score = &song.score;
    let spans = song.alignment.reference_spans(score)?;
    let note_values = match pseudo_pitch {
        Some(p) if p.len() != score.pitched_count() => {
            return Err(PipelineError::Data(format!(
                "{}: {} pseudo pitches for {} pitched notes",
                song.name,
                p.len(),
                score.pitched_count()
            )))
        }
        Some(p) => p.to_vec(),
        None => score.pitched_cents(),
    };
    let pitch = expand_note_values(score, &spans, &note_values);
    let f0 = interpolate_unvoiced(&song.f0)?;
    let (diff, smooth) = extract_vibrato_diff(&f0, setup.median_window)?;
    let residual = pitch_normalize(&smooth, &pitch)?;
    let frames = f0.len();
    let mut targets = Seq::zeros(frames, layout.dim());
    targets.set_column(0, &residual);
    if layout.vibrato {
        targets.set_column(1, &diff.diff);
    }
    if layout.mgc_dim > 0 {
        let mgc = song.mgc.as_ref().ok_or_else(|| {
            PipelineError::Data(format!("{}: no spectral features", song.name))
        })?;
        if mgc.dim() != layout.mgc_dim {
            return Err(PipelineError::Data(format!(
                "{}: {} spectral coefficients, expected {}",
                song.name,
                mgc.dim(),
                layout.mgc_dim
            )));
        }
        for d in 0..layout.mgc_dim {
            targets.set_column(layout.mgc_offset() + d, &mgc.column(d));
        }
    }
    let features = encode_features(score, schema, &song.alignment.durations())?;
    Ok(TrainRecord {
        name: song.name.clone(),
        features,
        note_pitch: pitch,
        targets,
        note_spans: spans,
        rest: score.rest_flags(),
    })
}

fn checkpoint(
    kind: ModelKind,
    schema: &ScoreFeatureSchema,
    setup: &TrainSetup,
    outcome: TrainOutcome,
    streams: Vec<String>,
) -> Checkpoint {
    Checkpoint {
        format_version: FORMAT_VERSION,
        kind,
        schema_hash: schema.hash(),
        criterion: setup.criterion,
        shapes: outcome.network.layer_shapes(),
        network: outcome.network,
        windows: setup.windows.clone(),
        global_variance: outcome.global_variance,
        streams,
        bias: outcome.bias,
        loss_curve: outcome.loss_curve,
    }
}

fn plain_setup(model: &ModelSetup, criterion: Criterion) -> TrainSetup {
    TrainSetup {
        criterion,
        windows: WindowSet::static_only(),
        f0: None,
        optimizer: model.optimizer.clone(),
        hidden: model.hidden.clone(),
        activation: model.activation,
        skip_target: None,
        seed: model.seed,
    }
}

pub fn train_timelag(
    songs: &[SongData],
    schema: &ScoreFeatureSchema,
    model: &ModelSetup,
) -> Result<Checkpoint, PipelineError> {
    let records = songs
        .iter()
        .map(|s| timelag_record(s, schema))
        .collect::<Result<Vec<_>, _>>()?;
    let setup = plain_setup(model, Criterion::Static);
    let outcome = train(&setup, &records)?;
    Ok(checkpoint(ModelKind::TimeLag, schema, &setup, outcome, vec!["lag".into()]))
}

pub fn train_duration(
    songs: &[SongData],
    schema: &ScoreFeatureSchema,
    model: &ModelSetup,
) -> Result<Checkpoint, PipelineError> {
    let records = songs
        .iter()
        .map(|s| duration_record(s, schema))
        .collect::<Result<Vec<_>, _>>()?;
    let setup = plain_setup(model, Criterion::Mdn);
    let outcome = train(&setup, &records)?;
    Ok(checkpoint(ModelKind::Duration, schema, &setup, outcome, vec!["duration".into()]))
}

/// Settings of the F0 stream for acoustic training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F0Training {
    pub sigma_p: Option<f64>,
    pub w_max: f64,
    pub ramp: f64,
    pub bias: bool,
}

impl Default for F0Training {
    fn default() -> Self {
        Self {
            sigma_p: None,
            w_max: 1.0,
            ramp: 10.0,
            bias: false,
        }
    }
}

/// Trains the acoustic model. `pseudo_pitch` holds one vector per song.
pub fn train_acoustic(
    songs: &[SongData],
    schema: &ScoreFeatureSchema,
    setup: &AcousticSetup,
    f0: F0Training,
    pseudo_pitch: Option<&[Vec<f64>]>,
) -> Result<Checkpoint, PipelineError> {
    if let Some(p) = pseudo_pitch {
        if p.len() != songs.len() {
            return Err(PipelineError::Data("one pseudo pitch vector per song".into()));
        }
    }
    let records = songs
        .iter()
        .enumerate()
        .map(|(i, s)| acoustic_record(s, schema, setup, pseudo_pitch.map(|p| p[i].as_slice())))
        .collect::<Result<Vec<_>, _>>()?;
    let train_setup = TrainSetup {
        criterion: setup.criterion,
        windows: setup.windows.clone(),
        f0: Some(F0Stream {
            column: 0,
            sigma_p: f0.sigma_p,
            w_max: f0.w_max,
            ramp: f0.ramp,
            bias: f0.bias,
        }),
        optimizer: setup.model.optimizer.clone(),
        hidden: setup.model.hidden.clone(),
        activation: setup.model.activation,
        skip_target: setup.skip_target,
        seed: setup.model.seed,
    };
    let outcome = train(&train_setup, &records)?;
    Ok(checkpoint(
        ModelKind::Acoustic,
        schema,
        &train_setup,
        outcome,
        setup.layout.streams(),
    ))
}

fn expect_kind(ckpt: &Checkpoint, kind: ModelKind) -> Result<(), PipelineError> {
    if ckpt.kind != kind {
        return Err(PipelineError::Model(format!(
            "expected a {kind:?} model, got {:?}",
            ckpt.kind
        )));
    }
    Ok(())
}

fn check_schema(ckpt: &Checkpoint, schema: &ScoreFeatureSchema) -> Result<(), PipelineError> {
    if ckpt.schema_hash != schema.hash() {
        return Err(PipelineError::Model(format!(
            "model was trained with feature schema {}, current schema is {}",
            ckpt.schema_hash,
            schema.hash()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingOutput {
    pub lags: Vec<f64>,
    pub l_hat: Vec<usize>,
    pub alignment: PhonemeAlignment,
    /// Some lag or duration needed clamping.
    pub repaired: bool,
}

/// Predicts lags and phoneme durations and builds the alignment.
pub fn generate_timing(
    score: &Score,
    schema: &ScoreFeatureSchema,
    timelag: &Checkpoint,
    duration: &Checkpoint,
    method: AllocationMethod,
    mode: RepairMode,
) -> Result<TimingOutput, PipelineError> {
    expect_kind(timelag, ModelKind::TimeLag)?;
    expect_kind(duration, ModelKind::Duration)?;
    check_schema(timelag, schema)?;
    check_schema(duration, schema)?;
    let note_x = encode_note_features(score, schema)?;
    let lags = predict_time_lags(&note_x, &[], &timelag.network)?;
    let adjusted = adjust_note_lengths(&score.note_lengths(), &lags, mode)?;
    let ph_x = encode_phoneme_features(score, schema)?;
    let dist = predict_durations(&ph_x, &[], &duration.network)?;
    let (frames, repaired) = allocate_score(score, &adjusted.l_hat, &dist, method, mode)?;
    let layout = score.phoneme_layout()?;
    let symbols: Vec<&str> = layout.iter().map(|s| s.phoneme.symbol.as_str()).collect();
    let alignment = PhonemeAlignment::from_durations(&symbols, &frames)?;
    Ok(TimingOutput {
        lags,
        l_hat: adjusted.l_hat,
        alignment,
        repaired: repaired || adjusted.repaired,
    })
}

/// What generation fed into denormalization; lets callers check that only
/// the score pitch and a zero bias were used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisTrace {
    pub note_pitch: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcousticOutput {
    /// Final F0 with vibrato; unvoiced on silence.
    pub f0: F0Track,
    /// `p + μ` before vibrato.
    pub f0_smooth: Vec<f64>,
    pub vibrato: Vec<f64>,
    pub mgc: Option<Seq>,
    pub trace: SynthesisTrace,
}

/// Runs the acoustic model over a timed score. The F0 is always
/// denormalized with the score's note pitch and no bias.
pub fn generate_acoustic(
    score: &Score,
    alignment: &PhonemeAlignment,
    schema: &ScoreFeatureSchema,
    acoustic: &Checkpoint,
    vibrato_scale: f64,
) -> Result<AcousticOutput, PipelineError> {
    expect_kind(acoustic, ModelKind::Acoustic)?;
    check_schema(acoustic, schema)?;
    let layout = AcousticLayout::from_streams(&acoustic.streams)?;
    let spans = alignment.reference_spans(score)?;
    let pitch = expand_note_values(score, &spans, &score.pitched_cents());
    let x = encode_features(score, schema, &alignment.durations())?;
    let out = acoustic.network.forward_seq(&x, &pitch)?;
    let d = layout.dim();
    let means = match acoustic.criterion {
        Criterion::Static | Criterion::StaticOutDynamic => out,
        Criterion::Mdn => out.select_columns(&(0..d).collect::<Vec<_>>()),
        Criterion::DynamicTarget => {
            mlpg(&out, &acoustic.global_variance.values, &acoustic.windows)?
        }
    };
    let trace = SynthesisTrace {
        note_pitch: pitch.clone(),
        bias: vec![0.0; pitch.len()],
    };
    let smooth = pitch_denormalize(&means.column(0), &trace.note_pitch, Some(&trace.bias))?;
    let vibrato: Vec<f64> = if layout.vibrato {
        means.column(1).iter().map(|v| v * vibrato_scale).collect()
    } else {
        vec![0.0; pitch.len()]
    };
    let mut voiced = vec![true; pitch.len()];
    for seg in &alignment.segments {
        if seg.phoneme == SILENCE {
            voiced[seg.start..seg.end].fill(false);
        }
    }
    let cents: Vec<f64> = smooth.cents().iter().zip(&vibrato).map(|(s, v)| s + v).collect();
    let mgc = (layout.mgc_dim > 0).then(|| {
        means.select_columns(&(layout.mgc_offset()..d).collect::<Vec<_>>())
    });
    Ok(AcousticOutput {
        f0: F0Track::new(cents, voiced)?,
        f0_smooth: smooth.into_cents(),
        vibrato,
        mgc,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Models {
    pub timelag: Checkpoint,
    pub duration: Checkpoint,
    pub acoustic: Checkpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerateOptions {
    pub allocation: AllocationMethod,
    pub repair: RepairMode,
    pub vibrato_scale: f64,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        Self {
            allocation: AllocationMethod::Ml,
            repair: RepairMode::Strict,
            vibrato_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generated {
    pub timing: TimingOutput,
    pub acoustic: AcousticOutput,
}

/// Score to acoustic features: time-lags, adjusted note lengths, phoneme
/// durations, frame features, acoustic regression, denormalization and
/// vibrato.
pub fn generate(
    score: &Score,
    schema: &ScoreFeatureSchema,
    models: &Models,
    opts: &GenerateOptions,
) -> Result<Generated, PipelineError> {
    let timing = generate_timing(
        score,
        schema,
        &models.timelag,
        &models.duration,
        opts.allocation,
        opts.repair,
    )?;
    let acoustic = generate_acoustic(
        score,
        &timing.alignment,
        schema,
        &models.acoustic,
        opts.vibrato_scale,
    )?;
    Ok(Generated { timing, acoustic })
}
