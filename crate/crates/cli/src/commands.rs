use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use svs_core::alignment::PhonemeAlignment;
use svs_core::correction::run_configuration;
use svs_core::evalkit::{
    duration_row, frame_mask, generate_corpus, generate_synthetic_song, mcd, pearson_corr,
    rmse_cents, CorpusSpec, FrameSelection, MetricError, MetricsReport, SynthSpec,
};
use svs_core::f0lab::F0Track;
use svs_core::nnet::{Checkpoint, ModelKind};
use svs_core::pipeline::{
    generate, generate_acoustic, train_duration, train_timelag, Generated, Models, TimingOutput,
};
use svs_core::score::{
    encode_features, encode_note_features, note_pitch_sequence_on, write_musicxml, FeatureLevel,
    Score,
};

use crate::config::{Paths, Project, ProjectConfig};
use crate::error::{CliError, CliResult};
use crate::io::{
    format_table, list_scores, load_f0, load_labels, load_score, load_songs, load_table,
    read_text, require_dir, require_file, write_atomic, Need,
};
use crate::plot::{Plot, Series};
use crate::tone;

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn report(quiet: bool, line: impl AsRef<str>) {
    if !quiet {
        println!("{}", line.as_ref());
    }
}

/// `parse`: MusicXML to the internal score representation.
pub fn parse(project: &Project, out: Option<&Path>, quiet: bool) -> CliResult<()> {
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| project.features_dir());
    let scores = list_scores(&project.scores_dir())?;
    let lines = scores
        .par_iter()
        .map(|(name, path)| {
            let score = load_score(project, path)?;
            write_atomic(&out.join(format!("{name}.score.json")), json(&score).as_bytes())?;
            Ok(format!(
                "{name}\tnotes={}\tpitched={}\tframes={}",
                score.notes.len(),
                score.pitched_count(),
                score.total_frames()
            ))
        })
        .collect::<CliResult<Vec<_>>>()?;
    for l in lines {
        report(quiet, l);
    }
    Ok(())
}

/// `features`: note-level and frame-level context features of every song.
pub fn features(project: &Project, out: Option<&Path>, quiet: bool) -> CliResult<()> {
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| project.features_dir());
    let songs = load_songs(project, Need::Timing)?;
    let schema = &project.schema;
    let note_header = schema.slot_names(FeatureLevel::Note);
    let frame_header = schema.slot_names(FeatureLevel::Frame);
    write_atomic(&out.join("schema.txt"), schema.to_text().as_bytes())?;
    let lines = songs
        .par_iter()
        .map(|song| {
            let fail = |e: svs_core::score::ScoreError| CliError::data(format!("{}: {e}", song.name));
            let notes = encode_note_features(&song.score, schema).map_err(fail)?;
            let frames =
                encode_features(&song.score, schema, &song.alignment.durations()).map_err(fail)?;
            write_atomic(
                &out.join(format!("{}.note.tsv", song.name)),
                format_table(&notes, Some(&note_header)).as_bytes(),
            )?;
            write_atomic(
                &out.join(format!("{}.frame.tsv", song.name)),
                format_table(&frames, Some(&frame_header)).as_bytes(),
            )?;
            Ok(format!(
                "{}\tnote_rows={}\tframe_rows={}\tdim={}",
                song.name,
                notes.frames(),
                frames.frames(),
                frames.dim()
            ))
        })
        .collect::<CliResult<Vec<_>>>()?;
    for l in lines {
        report(quiet, l);
    }
    report(quiet, format!("schema {}", schema.hash()));
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelChoice {
    Timelag,
    Duration,
    Acoustic,
}

impl ModelChoice {
    pub fn file_name(self) -> &'static str {
        match self {
            ModelChoice::Timelag => "timelag.json",
            ModelChoice::Duration => "duration.json",
            ModelChoice::Acoustic => "acoustic.json",
        }
    }
}

fn final_loss(ckpt: &Checkpoint) -> String {
    ckpt.loss_curve
        .last()
        .map(|l| format!("{l:.6}"))
        .unwrap_or_else(|| "n/a".into())
}

/// `train`: fits one model and writes its checkpoint.
pub fn train(project: &Project, which: ModelChoice, out: Option<&Path>, quiet: bool) -> CliResult<()> {
    let out = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| project.checkpoints_dir().join(which.file_name()));
    let cfg = &project.config;
    let ckpt = match which {
        ModelChoice::Timelag => {
            let songs = load_songs(project, Need::Timing)?;
            train_timelag(&songs, &project.schema, &cfg.timelag)?
        }
        ModelChoice::Duration => {
            let songs = load_songs(project, Need::Timing)?;
            train_duration(&songs, &project.schema, &cfg.duration)?
        }
        ModelChoice::Acoustic => {
            let songs = load_songs(project, Need::Acoustic)?;
            let mut acoustic = cfg.acoustic.clone();
            acoustic.layout.mgc_dim = match songs.first().and_then(|s| s.mgc.as_ref()) {
                Some(m) => m.dim(),
                None => 0,
            };
            let system = run_configuration(&cfg.correction, &songs, &project.schema, &acoustic)?;
            let mut table = String::from("song\tnote\tscore_cents\ttrain_cents\tsource\tfallback\n");
            let pitch = match &system.pseudo {
                Some(p) => Some(p.clone()),
                None => system.bias_pitch(&songs),
            };
            if let Some(pitch) = pitch {
                for (song, p) in songs.iter().zip(&pitch) {
                    for (k, ((s, v), f)) in song
                        .score
                        .pitched_cents()
                        .iter()
                        .zip(&p.values)
                        .zip(&p.fallback)
                        .enumerate()
                    {
                        let _ = writeln!(
                            table,
                            "{}\t{k}\t{s}\t{v:.6}\t{:?}\t{f}",
                            song.name,
                            p.source
                        );
                    }
                }
                write_atomic(&project.reports_dir().join("note_pitch.tsv"), table.as_bytes())?;
            }
            report(quiet, format!("configuration {}", cfg.correction.label()));
            system.model
        }
    };
    write_atomic(&out, ckpt.to_json().as_bytes())?;
    report(
        quiet,
        format!(
            "{:?} model: {} parameters, final loss {}, written to {}",
            ckpt.kind,
            ckpt.network.param_count(),
            final_loss(&ckpt),
            out.display()
        ),
    );
    Ok(())
}

fn load_checkpoint(path: &Path, project: &Project, kind: ModelKind) -> CliResult<Checkpoint> {
    require_file(path, "checkpoint")?;
    let ckpt = Checkpoint::from_json(&read_text(path)?, &project.schema.hash())
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    if ckpt.kind != kind {
        return Err(CliError::data(format!(
            "{}: expected a {kind:?} model, found {:?}",
            path.display(),
            ckpt.kind
        )));
    }
    Ok(ckpt)
}

#[derive(Debug, Clone, Default)]
pub struct GenerateArgs {
    pub scores: Option<PathBuf>,
    pub models: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Use the project's labels instead of predicted timing.
    pub oracle_timing: bool,
    pub preview_tone: bool,
    pub sample_rate: u32,
}

fn fmt_cents(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        "nan".into()
    }
}

/// Per-frame table: score note pitch (nan on rests), F0 before vibrato,
/// vibrato, final F0 (nan when unvoiced).
fn cents_table(score: &Score, alignment: &PhonemeAlignment, g: &svs_core::pipeline::AcousticOutput) -> CliResult<String> {
    let spans = alignment.reference_spans(score).map_err(|e| CliError::data(e.to_string()))?;
    let notes = note_pitch_sequence_on(score, &spans).map_err(|e| CliError::data(e.to_string()))?;
    let mut s = String::from("# frame\tnote_pitch\tf0_smooth\tvibrato\tf0\n");
    for t in 0..g.f0.len() {
        let note = if notes.rest_mask[t] { f64::NAN } else { notes.cents_per_frame[t] };
        let f0 = if g.f0.voiced_mask()[t] { g.f0.cents()[t] } else { f64::NAN };
        let _ = writeln!(
            s,
            "{t}\t{}\t{}\t{}\t{}",
            fmt_cents(note),
            fmt_cents(g.f0_smooth[t]),
            fmt_cents(g.vibrato[t]),
            fmt_cents(f0)
        );
    }
    Ok(s)
}

fn timing_table(score: &Score, timing: &TimingOutput) -> String {
    let mut s = String::from("note\tmidi\tscore_frames\tlag\tadjusted_frames\n");
    for (i, n) in score.notes.iter().enumerate() {
        let midi = n.midi.map(|m| m.to_string()).unwrap_or_else(|| "rest".into());
        let _ = writeln!(
            s,
            "{i}\t{midi}\t{}\t{:.6}\t{}",
            n.length_frames, timing.lags[i], timing.l_hat[i]
        );
    }
    s
}

/// `generate`: score to acoustic feature files.
pub fn generate_cmd(project: &Project, args: &GenerateArgs, quiet: bool) -> CliResult<()> {
    let scores_dir = args
        .scores
        .as_ref()
        .map(|p| p.to_path_buf())
        .unwrap_or_else(|| project.scores_dir());
    let models_dir = args.models.clone().unwrap_or_else(|| project.checkpoints_dir());
    let out = args.out.clone().unwrap_or_else(|| project.generated_dir());
    require_dir(&models_dir, "model")?;
    let acoustic = load_checkpoint(&models_dir.join("acoustic.json"), project, ModelKind::Acoustic)?;
    let timing_models = if args.oracle_timing {
        None
    } else {
        Some((
            load_checkpoint(&models_dir.join("timelag.json"), project, ModelKind::TimeLag)?,
            load_checkpoint(&models_dir.join("duration.json"), project, ModelKind::Duration)?,
        ))
    };
    let scores = list_scores(&scores_dir)?;
    if args.oracle_timing {
        for (name, _) in &scores {
            require_file(&project.labels_dir().join(format!("{name}.lab")), "label file")?;
        }
    }
    let opts = project.config.generate;
    let lines = scores
        .par_iter()
        .map(|(name, path)| {
            let score = load_score(project, path)?;
            let (alignment, timing, acoustic_out) = match &timing_models {
                Some((timelag, duration)) => {
                    let models = Models {
                        timelag: timelag.clone(),
                        duration: duration.clone(),
                        acoustic: acoustic.clone(),
                    };
                    let Generated { timing, acoustic } =
                        generate(&score, &project.schema, &models, &opts)
                            .map_err(|e| CliError::from(e).context(name))?;
                    (timing.alignment.clone(), Some(timing), acoustic)
                }
                None => {
                    let alignment = load_labels(project, &project.labels_dir().join(format!("{name}.lab")))?;
                    let a = generate_acoustic(&score, &alignment, &project.schema, &acoustic, opts.vibrato_scale)
                        .map_err(|e| CliError::from(e).context(name))?;
                    (alignment, None, a)
                }
            };
            if let Some(t) = &timing {
                let expected: usize = t.l_hat.iter().sum();
                if acoustic_out.f0.len() != expected {
                    return Err(CliError::numeric(format!(
                        "{name}: {} frames generated for {expected} adjusted frames",
                        acoustic_out.f0.len()
                    )));
                }
                write_atomic(&out.join(format!("{name}.timing.tsv")), timing_table(&score, t).as_bytes())?;
            }
            if !acoustic_out.f0.is_finite() {
                return Err(CliError::numeric(format!("{name}: generated F0 is not finite")));
            }
            write_atomic(&out.join(format!("{name}.f0")), acoustic_out.f0.to_hz_text().as_bytes())?;
            write_atomic(
                &out.join(format!("{name}.cents.tsv")),
                cents_table(&score, &alignment, &acoustic_out)?.as_bytes(),
            )?;
            write_atomic(&out.join(format!("{name}.lab")), alignment.to_labels().as_bytes())?;
            if let Some(m) = &acoustic_out.mgc {
                write_atomic(&out.join(format!("{name}.mgc")), format_table(m, None).as_bytes())?;
            }
            if args.preview_tone {
                let samples = tone::render(&acoustic_out.f0, project.config.frame_shift_s, args.sample_rate);
                let bytes = tone::wav_bytes(&samples, args.sample_rate)
                    .map_err(|e| CliError::data(format!("{name}: {e}")))?;
                write_atomic(&out.join(format!("{name}.wav")), &bytes)?;
            }
            let repaired = timing.as_ref().is_some_and(|t| t.repaired);
            Ok(format!(
                "{name}\tframes={}{}",
                acoustic_out.f0.len(),
                if repaired { "\trepaired" } else { "" }
            ))
        })
        .collect::<CliResult<Vec<_>>>()?;
    for l in lines {
        report(quiet, l);
    }
    Ok(())
}

/// Values pooled over songs for one metric pair.
#[derive(Default)]
struct Pool {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl Pool {
    fn push_masked(&mut self, a: &[f64], b: &[f64], mask: &[bool]) {
        for t in 0..mask.len() {
            if mask[t] {
                self.a.push(a[t]);
                self.b.push(b[t]);
            }
        }
    }

    fn rmse(&self) -> Option<f64> {
        rmse_cents(&self.a, &self.b, None).ok()
    }

    fn corr(&self) -> Option<f64> {
        pearson_corr(&self.a, &self.b, None).ok()
    }
}

#[derive(Default)]
struct Measured {
    note: Pool,
    nat: Pool,
    mcd: Vec<(f64, usize)>,
    dur_note: (Vec<usize>, Vec<usize>),
    dur_phoneme: (Vec<usize>, Vec<usize>),
}

impl Measured {
    fn merge(mut self, other: Measured) -> Measured {
        self.note.a.extend(other.note.a);
        self.note.b.extend(other.note.b);
        self.nat.a.extend(other.nat.a);
        self.nat.b.extend(other.nat.b);
        self.mcd.extend(other.mcd);
        self.dur_note.0.extend(other.dur_note.0);
        self.dur_note.1.extend(other.dur_note.1);
        self.dur_phoneme.0.extend(other.dur_phoneme.0);
        self.dur_phoneme.1.extend(other.dur_phoneme.1);
        self
    }

    fn report(&self) -> MetricsReport {
        let dur = |(p, r): &(Vec<usize>, Vec<usize>)| {
            if p.is_empty() {
                None
            } else {
                duration_row(p, r).ok()
            }
        };
        let frames: usize = self.mcd.iter().map(|(_, n)| n).sum();
        let dn = dur(&self.dur_note);
        let dp = dur(&self.dur_phoneme);
        MetricsReport {
            rmse_note: self.note.rmse(),
            rmse_nat: self.nat.rmse(),
            corr_note: self.note.corr(),
            corr_nat: self.nat.corr(),
            mcd: (frames > 0)
                .then(|| self.mcd.iter().map(|(v, n)| v * *n as f64).sum::<f64>() / frames as f64),
            dur_rmse_note: dn.map(|r| r.rmse),
            dur_rmse_phoneme: dp.map(|r| r.rmse),
            dur_corr_note: dn.and_then(|r| r.corr),
            dur_corr_phoneme: dp.and_then(|r| r.corr),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct EvalArgs {
    pub generated: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub all_frames: bool,
    /// Score the note pitch against the F0 before vibrato, read from
    /// `<name>.cents.tsv`.
    pub without_vibrato: bool,
}

fn metric_err(name: &str) -> impl Fn(MetricError) -> CliError + '_ {
    move |e| CliError::data(format!("{name}: {e}"))
}

/// The `f0_smooth` column of a cents table, voiced where `f0` is.
fn bare_f0(path: &Path, f0: &F0Track) -> CliResult<F0Track> {
    let table = load_table(path)?;
    if table.dim() != 5 || table.frames() != f0.len() {
        return Err(CliError::data(format!(
            "{}: expected {} rows of 5 columns",
            path.display(),
            f0.len()
        )));
    }
    let voiced = f0.voiced_mask().to_vec();
    let cents = (0..f0.len())
        .map(|t| if voiced[t] { table.get(t, 2) } else { f64::NAN })
        .collect();
    F0Track::new(cents, voiced).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

/// `eval`: objective metrics of generated files against the score and the
/// project's natural recordings.
pub fn eval(project: &Project, args: &EvalArgs, quiet: bool) -> CliResult<()> {
    let generated = args.generated.clone().unwrap_or_else(|| project.generated_dir());
    let out = args.out.clone().unwrap_or_else(|| project.reports_dir());
    require_dir(&generated, "generated")?;
    let selection = if args.all_frames {
        FrameSelection::All
    } else {
        FrameSelection::VoicedBoth
    };
    let scores = list_scores(&project.scores_dir())?;
    let scores: Vec<_> = scores
        .into_iter()
        .filter(|(name, _)| generated.join(format!("{name}.f0")).is_file())
        .collect();
    if scores.is_empty() {
        return Err(CliError::data(format!("no generated F0 files in {}", generated.display())));
    }
    let per_song = scores
        .par_iter()
        .map(|(name, path)| {
            let score = load_score(project, path)?;
            let f0 = load_f0(&generated.join(format!("{name}.f0")))?;
            let gen_lab = generated.join(format!("{name}.lab"));
            let ref_lab = project.labels_dir().join(format!("{name}.lab"));
            let gen_alignment = if gen_lab.is_file() {
                Some(load_labels(project, &gen_lab)?)
            } else {
                None
            };
            let ref_alignment = if ref_lab.is_file() {
                Some(load_labels(project, &ref_lab)?)
            } else {
                None
            };
            let mut m = Measured::default();

            // F0 against the score's note pitch on the generated timing
            let spans = match &gen_alignment {
                Some(a) => a.reference_spans(&score).map_err(|e| CliError::data(format!("{name}: {e}")))?,
                None => score.note_spans(),
            };
            let notes = note_pitch_sequence_on(&score, &spans).map_err(|e| CliError::data(format!("{name}: {e}")))?;
            if notes.cents_per_frame.len() != f0.len() {
                return Err(CliError::data(format!(
                    "{name}: generated F0 has {} frames, timing has {}",
                    f0.len(),
                    notes.cents_per_frame.len()
                )));
            }
            let note_track = F0Track::new(
                notes
                    .cents_per_frame
                    .iter()
                    .zip(&notes.rest_mask)
                    .map(|(&c, &r)| if r { f64::NAN } else { c })
                    .collect(),
                notes.rest_mask.iter().map(|r| !r).collect(),
            )
            .map_err(|e| CliError::data(format!("{name}: {e}")))?;
            let note_f0 = if args.without_vibrato {
                bare_f0(&generated.join(format!("{name}.cents.tsv")), &f0)?
            } else {
                f0.clone()
            };
            let mask = frame_mask(&note_f0, &note_track, FrameSelection::VoicedBoth).map_err(metric_err(name))?;
            m.note.push_masked(note_f0.cents(), note_track.cents(), &mask);

            // F0 against the natural recording when the frames line up
            let nat_path = project.f0_dir().join(format!("{name}.f0"));
            let mut notes_out = Vec::new();
            if nat_path.is_file() {
                let nat = load_f0(&nat_path)?;
                if nat.len() == f0.len() {
                    let mask = frame_mask(&f0, &nat, selection).map_err(metric_err(name))?;
                    let (a, b) = if selection == FrameSelection::All {
                        let a = svs_core::f0lab::interpolate_unvoiced(&f0).map_err(|e| CliError::data(e.to_string()))?;
                        let b = svs_core::f0lab::interpolate_unvoiced(&nat).map_err(|e| CliError::data(e.to_string()))?;
                        (a.into_cents(), b.into_cents())
                    } else {
                        (f0.cents().to_vec(), nat.cents().to_vec())
                    };
                    m.nat.push_masked(&a, &b, &mask);
                } else {
                    notes_out.push(format!(
                        "{name}: natural F0 has {} frames, generated {}; rmse_nat skipped",
                        nat.len(),
                        f0.len()
                    ));
                }
            }

            if let Some(dir) = project.mgc_dir() {
                let (g, r) = (generated.join(format!("{name}.mgc")), dir.join(format!("{name}.mgc")));
                if g.is_file() && r.is_file() {
                    let (g, r) = (load_table(&g)?, load_table(&r)?);
                    if g.frames() == r.frames() && g.dim() == r.dim() {
                        m.mcd.push((mcd(&g, &r).map_err(metric_err(name))?, g.frames()));
                    } else {
                        notes_out.push(format!("{name}: spectral frames differ; mcd skipped"));
                    }
                }
            }

            if let (Some(g), Some(r)) = (&gen_alignment, &ref_alignment) {
                if g.durations().len() == r.durations().len() {
                    let spans = |a: &PhonemeAlignment| -> CliResult<Vec<usize>> {
                        Ok(a.note_spans(&score)
                            .map_err(|e| CliError::data(format!("{name}: {e}")))?
                            .iter()
                            .map(|s| s.len())
                            .collect())
                    };
                    m.dur_note = (spans(g)?, spans(r)?);
                    m.dur_phoneme = (g.durations(), r.durations());
                }
            }
            Ok((name.clone(), m, notes_out))
        })
        .collect::<CliResult<Vec<_>>>()?;

    let mut table = String::from("song\tmetric\tvalue\tunit\n");
    let mut total = Measured::default();
    for (name, m, warnings) in per_song {
        for w in warnings {
            eprintln!("warning: {w}");
        }
        for line in m.report().to_table().lines().skip(1) {
            let _ = writeln!(table, "{name}\t{line}");
        }
        total = total.merge(m);
    }
    let overall = total.report();
    for line in overall.to_table().lines().skip(1) {
        let _ = writeln!(table, "all\t{line}");
    }
    write_atomic(&out.join("metrics.txt"), overall.to_text().as_bytes())?;
    write_atomic(&out.join("metrics.tsv"), table.as_bytes())?;
    if !quiet {
        print!("{}", overall.to_text());
    }
    Ok(())
}

/// Input of `synthdata`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthDataSpec {
    pub corpus: CorpusSpec,
    /// Explicit songs added after the random corpus.
    pub song: Vec<SynthSpec>,
    /// Written to `svs.toml`; the data paths are always set by the command.
    pub project: ProjectConfig,
}

#[derive(Serialize)]
struct CorpusLedger<'a> {
    spec: &'a CorpusSpec,
    /// Habit detune per MIDI pitch, cents.
    habit: &'a std::collections::BTreeMap<i32, f64>,
}

/// `synthdata`: a complete synthetic project with ground-truth ledgers.
pub fn synthdata(spec_path: &Path, out: &Path, quiet: bool) -> CliResult<()> {
    let text = std::fs::read_to_string(spec_path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", spec_path.display())))?;
    let spec: SynthDataSpec =
        toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", spec_path.display())))?;
    let corpus = generate_corpus(&spec.corpus).map_err(|e| CliError::config(e.to_string()))?;
    let mut songs: Vec<(String, SynthSpec)> = corpus
        .specs
        .iter()
        .enumerate()
        .map(|(i, s)| (format!("song{i:03}"), s.clone()))
        .collect();
    for (i, s) in spec.song.iter().enumerate() {
        let name = if s.name.is_empty() { format!("extra{i:03}") } else { s.name.clone() };
        songs.push((name, s.clone()));
    }
    let mut project = spec.project.clone();
    project.paths = Paths {
        mgc: None,
        ..Paths::default()
    };
    project.frame_shift_s = spec.corpus.frame_shift_s;
    project.default_tempo = None;
    let generated = songs
        .par_iter()
        .map(|(name, s)| {
            generate_synthetic_song(s)
                .map(|g| (name.clone(), g))
                .map_err(|e| CliError::config(format!("{name}: {e}")))
        })
        .collect::<CliResult<Vec<_>>>()?;
    if generated.iter().any(|(_, g)| g.mgc.dim() > 0) {
        project.paths.mgc = Some("mgc".into());
    }
    for (name, song) in &generated {
        let write = |dir: &str, ext: &str, bytes: &[u8]| write_atomic(&out.join(dir).join(format!("{name}.{ext}")), bytes);
        write("scores", "musicxml", write_musicxml(&song.score).as_bytes())?;
        write("labels", "lab", song.alignment.to_labels().as_bytes())?;
        write("f0", "f0", song.f0.to_hz_text().as_bytes())?;
        if project.paths.mgc.is_some() {
            write("mgc", "mgc", format_table(&song.mgc, None).as_bytes())?;
        }
        write("ledger", "json", json(&song.ledger).as_bytes())?;
        report(
            quiet,
            format!("{name}\tnotes={}\tframes={}", song.score.notes.len(), song.f0.len()),
        );
    }
    write_atomic(
        &out.join("ledger").join("corpus.json"),
        json(&CorpusLedger {
            spec: &spec.corpus,
            habit: &corpus.habit,
        })
        .as_bytes(),
    )?;
    let config = toml::to_string(&project).map_err(|e| CliError::config(e.to_string()))?;
    write_atomic(&out.join("svs.toml"), config.as_bytes())?;
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct PlotArgs {
    pub song: String,
    pub generated: Option<PathBuf>,
    pub reference: bool,
    pub out: Option<PathBuf>,
}

/// `plot`: SVG of note pitch, generated F0 with and without vibrato and
/// optionally the natural F0.
pub fn plot(project: &Project, args: &PlotArgs, quiet: bool) -> CliResult<()> {
    let generated = args.generated.clone().unwrap_or_else(|| project.generated_dir());
    let table_path = generated.join(format!("{}.cents.tsv", args.song));
    require_file(&table_path, "generated F0 table")?;
    let table = load_table(&table_path)?;
    if table.dim() != 5 {
        return Err(CliError::data(format!("{}: expected 5 columns", table_path.display())));
    }
    let column = |d: usize| -> Vec<Option<f64>> {
        table.column(d).into_iter().map(|v| v.is_finite().then_some(v)).collect()
    };
    let f0 = column(4);
    let smooth: Vec<Option<f64>> = column(2).into_iter().zip(&f0).map(|(s, v)| v.and(s)).collect();
    let mut series = vec![
        Series {
            class: "note-pitch",
            label: "note pitch",
            steps: true,
            cents: column(1),
        },
        Series {
            class: "f0-smooth",
            label: "F0 without vibrato",
            steps: false,
            cents: smooth,
        },
        Series {
            class: "f0",
            label: "generated F0",
            steps: false,
            cents: f0,
        },
    ];
    if args.reference {
        let p = project.f0_dir().join(format!("{}.f0", args.song));
        require_file(&p, "reference F0")?;
        let nat = load_f0(&p)?;
        series.push(Series {
            class: "f0-reference",
            label: "natural F0",
            steps: false,
            cents: nat
                .cents()
                .iter()
                .zip(nat.voiced_mask())
                .map(|(&c, &v)| v.then_some(c))
                .collect(),
        });
    }
    let plot = Plot {
        title: args.song.clone(),
        frame_shift_s: project.config.frame_shift_s,
        series,
    };
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| project.reports_dir().join(format!("{}.svg", args.song)));
    write_atomic(&out, plot.to_svg().as_bytes())?;
    report(quiet, format!("wrote {}", out.display()));
    Ok(())
}
