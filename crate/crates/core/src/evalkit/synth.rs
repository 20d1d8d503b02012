//! Seeded synthetic songs with every injected F0 component recorded.
//!
//! A song is a note plan plus per-note detune. Sung timing shifts each
//! note's reference phoneme by a random lag and places its consonants
//! before that onset. F0 is the note pitch plus detune, overshoot and
//! preparation transients at pitch changes, vibrato, and white noise.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::alignment::{PhonemeAlignment, Segment};
use crate::f0lab::{quantize_cents, F0Track, VibratoSection};
use crate::score::{
    midi_to_cents, NoteEvent, NoteFlags, PhonemeInventory, Score, ScoreError, Span,
    DEFAULT_FRAME_SHIFT,
};
use crate::seq::Seq;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("synthetic spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error("alignment: {0}")]
    Alignment(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthNote {
    /// `None` is a rest.
    pub midi: Option<i32>,
    pub frames: usize,
    /// Romanized syllable, e.g. `ka`; ignored for rests.
    #[serde(default)]
    pub lyric: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VibratoSpec {
    pub amplitude: f64,
    pub rate: f64,
    /// Vibrato starts this fraction of the way into a note.
    pub onset_fraction: f64,
    /// Notes shorter than this get no vibrato.
    pub min_frames: usize,
}

impl Default for VibratoSpec {
    fn default() -> Self {
        Self {
            amplitude: 0.0,
            rate: 5.5,
            onset_fraction: 0.4,
            min_frames: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TransientSpec {
    pub cents: f64,
    pub decay_frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimingSpec {
    /// Standard deviation of the reference-phoneme lag, frames.
    pub lag_sd: f64,
    pub lag_max: i64,
    /// Consonant lengths vary uniformly by up to this many frames.
    pub consonant_jitter: usize,
}

impl Default for TimingSpec {
    fn default() -> Self {
        Self {
            lag_sd: 0.0,
            lag_max: 6,
            consonant_jitter: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub name: String,
    pub seed: u64,
    pub frame_shift_s: f64,
    pub notes: Vec<SynthNote>,
    /// Cents per note; empty means no detune. Entries for rests are ignored.
    pub detune: Vec<f64>,
    pub vibrato: VibratoSpec,
    pub overshoot: TransientSpec,
    pub preparation: TransientSpec,
    pub noise_sd: f64,
    pub timing: TimingSpec,
    pub mgc_dim: usize,
    pub mgc_noise_sd: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            name: "song".into(),
            seed: 0,
            frame_shift_s: DEFAULT_FRAME_SHIFT,
            notes: Vec::new(),
            detune: Vec::new(),
            vibrato: VibratoSpec::default(),
            overshoot: TransientSpec::default(),
            preparation: TransientSpec::default(),
            noise_sd: 0.0,
            timing: TimingSpec::default(),
            mgc_dim: 4,
            mgc_noise_sd: 0.0,
        }
    }
}

/// Every component of the emitted F0, frame by frame, in cents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthLedger {
    pub note_pitch: Vec<f64>,
    pub detune: Vec<f64>,
    pub transient: Vec<f64>,
    pub vibrato: Vec<f64>,
    pub noise: Vec<f64>,
    pub voiced: Vec<bool>,
    /// Detune per note (0 for rests).
    pub note_detune: Vec<f64>,
    /// Lag of every note's reference phoneme, frames; the first is 0.
    pub lags: Vec<i64>,
    pub reference_spans: Vec<Span>,
    pub vibrato_sections: Vec<VibratoSection>,
}

impl SynthLedger {
    /// The emitted cents, summed in the generator's order.
    pub fn reconstruct(&self) -> Vec<f64> {
        (0..self.note_pitch.len())
            .map(|t| {
                quantize_cents(
                    self.note_pitch[t]
                        + self.detune[t]
                        + self.transient[t]
                        + self.vibrato[t]
                        + self.noise[t],
                )
            })
            .collect()
    }

    /// Emitted F0 without vibrato and noise.
    pub fn without_vibrato(&self) -> Vec<f64> {
        (0..self.note_pitch.len())
            .map(|t| self.note_pitch[t] + self.detune[t] + self.transient[t])
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSong {
    pub score: Score,
    pub alignment: PhonemeAlignment,
    pub f0: F0Track,
    pub mgc: Seq,
    pub ledger: SynthLedger,
}

fn consonant_frames(symbol: &str) -> usize {
    match symbol {
        "s" | "sh" | "ch" | "ts" => 10,
        "h" | "f" => 8,
        "k" | "t" | "p" => 6,
        "r" => 3,
        "y" | "w" => 5,
        _ => 6,
    }
}

/// Fixed per-symbol spectral centroid, independent of any seed.
fn centroid(symbol: &str, dim: usize) -> Vec<f64> {
    let digest = Sha256::digest(symbol.as_bytes());
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    let mut rng = ChaCha8Rng::from_seed(seed);
    let n = Normal::new(0.0, 1.0).expect("valid");
    (0..dim).map(|_| n.sample(&mut rng)).collect()
}

fn build_score(spec: &SynthSpec) -> Result<Score, SynthError> {
    let inv = PhonemeInventory::japanese();
    let mut notes = Vec::with_capacity(spec.notes.len());
    for (i, n) in spec.notes.iter().enumerate() {
        if n.frames == 0 {
            return Err(SynthError::Spec(format!("note {i} has no frames")));
        }
        let phonemes = match n.midi {
            Some(_) => inv.segment(&n.lyric)?,
            None => Vec::new(),
        };
        if n.midi.is_some() {
            let vowels = phonemes.iter().filter(|p| p.is_vowel()).count();
            let last_is_vowel = phonemes.last().is_some_and(|p| p.is_vowel());
            if vowels != 1 || !last_is_vowel {
                return Err(SynthError::Spec(format!(
                    "note {i}: lyric '{}' must be consonants followed by one vowel",
                    n.lyric
                )));
            }
        }
        notes.push(NoteEvent {
            index: i,
            midi: n.midi,
            length_frames: n.frames,
            syllable: if n.midi.is_some() { n.lyric.clone() } else { String::new() },
            phonemes,
            flags: NoteFlags::default(),
        });
    }
    Ok(Score {
        tempo_bpm: 120.0,
        frame_shift_s: spec.frame_shift_s,
        notes,
    })
}

/// Generates one song. Identical specs give bit-identical songs.
pub fn generate_synthetic_song(spec: &SynthSpec) -> Result<SyntheticSong, SynthError> {
    if spec.notes.is_empty() {
        return Err(SynthError::Spec("no notes".into()));
    }
    if !spec.detune.is_empty() && spec.detune.len() != spec.notes.len() {
        return Err(SynthError::Spec(format!(
            "{} detune values for {} notes",
            spec.detune.len(),
            spec.notes.len()
        )));
    }
    if !(spec.frame_shift_s > 0.0) {
        return Err(SynthError::Spec("frame shift must be positive".into()));
    }
    let score = build_score(spec)?;
    if score.pitched_count() == 0 {
        return Err(SynthError::Score(ScoreError::AllRests));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_notes = score.notes.len();
    let total = score.total_frames();

    // sung timing
    let lag_dist = Normal::new(0.0, spec.timing.lag_sd.max(0.0))
        .map_err(|e| SynthError::Spec(e.to_string()))?;
    let mut lags = vec![0i64; n_notes];
    for lag in lags.iter_mut().skip(1) {
        let g = if spec.timing.lag_sd > 0.0 {
            lag_dist.sample(&mut rng).round() as i64
        } else {
            0
        };
        *lag = g.clamp(-spec.timing.lag_max, spec.timing.lag_max);
    }
    let mut cons: Vec<Vec<usize>> = Vec::with_capacity(n_notes);
    for note in &score.notes {
        let mut c = Vec::new();
        for p in note.sung_phonemes().iter().take(note.reference_phoneme()) {
            let j = spec.timing.consonant_jitter as i64;
            let d = consonant_frames(&p.symbol) as i64
                + if j > 0 { rng.random_range(-j..=j) } else { 0 };
            c.push(d.max(1) as usize);
        }
        cons.push(c);
    }
    let onsets: Vec<usize> = score.note_spans().iter().map(|s| s.start).collect();
    let mut refs = Vec::with_capacity(n_notes);
    for i in 0..n_notes {
        let lead: usize = cons[i].iter().sum();
        let r = onsets[i] as i64 + lags[i];
        let r = if i == 0 { lead as i64 } else { r };
        if r < lead as i64 {
            return Err(SynthError::Spec(format!("note {i}: consonants start before frame 0")));
        }
        refs.push(r as usize);
    }
    let mut segments = Vec::new();
    for i in 0..n_notes {
        let note = &score.notes[i];
        let phonemes = note.sung_phonemes();
        let lead: usize = cons[i].iter().sum();
        let mut t = refs[i] - lead;
        if i == 0 {
            t = 0;
        }
        for (k, p) in phonemes.iter().enumerate() {
            let len = if k < cons[i].len() {
                cons[i][k]
            } else {
                // the reference phoneme runs until the next note's
                // consonants begin
                let next_start = if i + 1 < n_notes {
                    refs[i + 1] as i64 - cons[i + 1].iter().sum::<usize>() as i64
                } else {
                    total as i64
                };
                let len = next_start - t as i64;
                if len < 1 {
                    return Err(SynthError::Spec(format!(
                        "note {i} is too short for its lags and consonants"
                    )));
                }
                len as usize
            };
            segments.push(Segment {
                start: t,
                end: t + len,
                phoneme: p.symbol.clone(),
            });
            t += len;
        }
    }
    let alignment =
        PhonemeAlignment::new(segments).map_err(|e| SynthError::Alignment(e.to_string()))?;
    let spans = alignment
        .reference_spans(&score)
        .map_err(|e| SynthError::Alignment(e.to_string()))?;

    // pitch and detune per frame; rest spans take the next pitched note
    let note_detune: Vec<f64> = (0..n_notes)
        .map(|i| match score.notes[i].midi {
            Some(_) => spec.detune.get(i).copied().unwrap_or(0.0),
            None => 0.0,
        })
        .collect();
    let mut pitch_of = vec![(0.0, 0.0); n_notes];
    let mut next: Option<(f64, f64)> = None;
    for i in (0..n_notes).rev() {
        if let Some(m) = score.notes[i].midi {
            next = Some((midi_to_cents(m), note_detune[i]));
        }
        pitch_of[i] = next.unwrap_or((0.0, 0.0));
    }
    let mut prev = None;
    for i in 0..n_notes {
        if score.notes[i].midi.is_some() {
            prev = Some(pitch_of[i]);
        } else if next_pitched(&score, i).is_none() {
            pitch_of[i] = prev.unwrap_or((0.0, 0.0));
        }
    }
    let mut note_pitch = vec![0.0; total];
    let mut detune = vec![0.0; total];
    for (i, s) in spans.iter().enumerate() {
        note_pitch[s.start..s.end].fill(pitch_of[i].0);
        detune[s.start..s.end].fill(pitch_of[i].1);
    }

    let mut transient = vec![0.0; total];
    for i in 1..n_notes {
        let (Some(a), Some(b)) = (score.notes[i - 1].midi, score.notes[i].midi) else {
            continue;
        };
        if a == b {
            continue;
        }
        let sign = if b > a { 1.0 } else { -1.0 };
        let at = spans[i].start;
        let o = &spec.overshoot;
        for k in 0..o.decay_frames.min(total - at) {
            let x = 1.0 - k as f64 / o.decay_frames as f64;
            transient[at + k] += sign * o.cents * x * x;
        }
        let p = &spec.preparation;
        for k in 0..p.decay_frames.min(at) {
            let x = 1.0 - k as f64 / p.decay_frames as f64;
            transient[at - 1 - k] -= sign * p.cents * x * x;
        }
    }

    let mut vibrato = vec![0.0; total];
    let mut sections = Vec::new();
    let v = &spec.vibrato;
    if v.amplitude != 0.0 {
        for (i, s) in spans.iter().enumerate() {
            if score.notes[i].is_rest() || s.len() < v.min_frames.max(2) {
                continue;
            }
            let start = s.start + (v.onset_fraction.clamp(0.0, 1.0) * s.len() as f64) as usize;
            if start >= s.end {
                continue;
            }
            for (t, out) in vibrato.iter_mut().enumerate().take(s.end).skip(start) {
                let phase = 2.0 * std::f64::consts::PI * v.rate * spec.frame_shift_s;
                *out = v.amplitude * (phase * (t - start) as f64).sin();
            }
            sections.push(VibratoSection { start, end: s.end });
        }
    }

    let noise_dist =
        Normal::new(0.0, spec.noise_sd.max(0.0)).map_err(|e| SynthError::Spec(e.to_string()))?;
    let noise: Vec<f64> = (0..total)
        .map(|_| {
            if spec.noise_sd > 0.0 {
                noise_dist.sample(&mut rng)
            } else {
                0.0
            }
        })
        .collect();

    let mut voiced = vec![true; total];
    for seg in &alignment.segments {
        if seg.phoneme == crate::score::SILENCE {
            voiced[seg.start..seg.end].fill(false);
        }
    }

    let ledger = SynthLedger {
        note_pitch,
        detune,
        transient,
        vibrato,
        noise,
        voiced,
        note_detune,
        lags: {
            let mut l = lags;
            l[0] = 0;
            l
        },
        reference_spans: spans,
        vibrato_sections: sections,
    };
    let cents: Vec<f64> = ledger
        .reconstruct()
        .into_iter()
        .zip(&ledger.voiced)
        .map(|(c, &v)| if v { c } else { f64::NAN })
        .collect();
    let f0 = F0Track::new(cents, ledger.voiced.clone()).expect("voiced frames are finite");

    let mgc_noise = Normal::new(0.0, spec.mgc_noise_sd.max(0.0))
        .map_err(|e| SynthError::Spec(e.to_string()))?;
    let mut mgc = Seq::zeros(total, spec.mgc_dim);
    let mut centroids: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for seg in &alignment.segments {
        let c = centroids
            .entry(seg.phoneme.as_str())
            .or_insert_with(|| centroid(&seg.phoneme, spec.mgc_dim))
            .clone();
        for t in seg.start..seg.end {
            for (d, value) in mgc.row_mut(t).iter_mut().enumerate() {
                let e = if spec.mgc_noise_sd > 0.0 {
                    mgc_noise.sample(&mut rng)
                } else {
                    0.0
                };
                *value = c[d] + e;
            }
        }
    }

    Ok(SyntheticSong {
        score,
        alignment,
        f0,
        mgc,
        ledger,
    })
}

fn next_pitched(score: &Score, i: usize) -> Option<usize> {
    (i + 1..score.notes.len()).find(|&j| score.notes[j].midi.is_some())
}

/// Random songs sharing one singer: detunes come from a per-pitch habit
/// table, so they are a function of the score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusSpec {
    pub seed: u64,
    pub songs: usize,
    pub notes_per_song: usize,
    pub frame_shift_s: f64,
    pub midi_low: i32,
    pub midi_high: i32,
    /// Note lengths are drawn from these, frames.
    pub lengths: Vec<usize>,
    pub rest_probability: f64,
    /// Frames of the rests opening and closing every song.
    pub edge_rest: usize,
    pub syllables: Vec<String>,
    /// Standard deviation of the habit table, cents.
    pub detune_sd: f64,
    /// Extra per-note detune on top of the habit, cents.
    pub detune_jitter_sd: f64,
    pub vibrato: VibratoSpec,
    pub overshoot: TransientSpec,
    pub preparation: TransientSpec,
    pub noise_sd: f64,
    pub timing: TimingSpec,
    pub mgc_dim: usize,
    pub mgc_noise_sd: f64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            seed: 1,
            songs: 8,
            notes_per_song: 24,
            frame_shift_s: DEFAULT_FRAME_SHIFT,
            midi_low: 60,
            midi_high: 71,
            lengths: vec![40, 60, 80, 100, 120],
            rest_probability: 0.08,
            edge_rest: 40,
            syllables: ["a", "ka", "sa", "ta", "na", "ma", "ra", "i", "ki", "shi", "u", "ku", "su",
                "e", "ke", "se", "o", "ko", "so", "to", "no", "mo", "ro", "ha", "ya", "wa"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            detune_sd: 40.0,
            detune_jitter_sd: 0.0,
            vibrato: VibratoSpec {
                amplitude: 40.0,
                ..VibratoSpec::default()
            },
            overshoot: TransientSpec {
                cents: 40.0,
                decay_frames: 15,
            },
            preparation: TransientSpec {
                cents: 20.0,
                decay_frames: 8,
            },
            noise_sd: 3.0,
            timing: TimingSpec {
                lag_sd: 3.0,
                lag_max: 8,
                consonant_jitter: 1,
            },
            mgc_dim: 4,
            mgc_noise_sd: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthCorpus {
    /// Detune in cents for every MIDI pitch in range.
    pub habit: BTreeMap<i32, f64>,
    pub specs: Vec<SynthSpec>,
}

impl SynthCorpus {
    pub fn generate(&self) -> Result<Vec<SyntheticSong>, SynthError> {
        self.specs.iter().map(generate_synthetic_song).collect()
    }
}

/// Song specs for a corpus. Each song gets its own seed derived from the
/// corpus seed.
pub fn generate_corpus(spec: &CorpusSpec) -> Result<SynthCorpus, SynthError> {
    if spec.midi_low > spec.midi_high || spec.lengths.is_empty() || spec.syllables.is_empty() {
        return Err(SynthError::Spec(
            "corpus needs a pitch range, note lengths and syllables".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let habit_dist =
        Normal::new(0.0, spec.detune_sd.max(0.0)).map_err(|e| SynthError::Spec(e.to_string()))?;
    let jitter =
        Normal::new(0.0, spec.detune_jitter_sd.max(0.0)).map_err(|e| SynthError::Spec(e.to_string()))?;
    let habit: BTreeMap<i32, f64> = (spec.midi_low..=spec.midi_high)
        .map(|m| (m, habit_dist.sample(&mut rng)))
        .collect();
    let mut specs = Vec::with_capacity(spec.songs);
    for s in 0..spec.songs {
        let mut notes = vec![SynthNote {
            midi: None,
            frames: spec.edge_rest.max(1),
            lyric: String::new(),
        }];
        let mut detune = vec![0.0];
        let mut midi = rng.random_range(spec.midi_low..=spec.midi_high);
        for k in 0..spec.notes_per_song {
            let frames = spec.lengths[rng.random_range(0..spec.lengths.len())];
            let rest = k > 0
                && k + 1 < spec.notes_per_song
                && notes.last().is_some_and(|n: &SynthNote| n.midi.is_some())
                && rng.random::<f64>() < spec.rest_probability;
            if rest {
                notes.push(SynthNote {
                    midi: None,
                    frames,
                    lyric: String::new(),
                });
                detune.push(0.0);
                continue;
            }
            let step: i32 = rng.random_range(-4..=4);
            midi = (midi + step).clamp(spec.midi_low, spec.midi_high);
            let lyric = spec.syllables[rng.random_range(0..spec.syllables.len())].clone();
            let extra = if spec.detune_jitter_sd > 0.0 {
                jitter.sample(&mut rng)
            } else {
                0.0
            };
            notes.push(SynthNote {
                midi: Some(midi),
                frames,
                lyric,
            });
            detune.push(habit[&midi] + extra);
        }
        notes.push(SynthNote {
            midi: None,
            frames: spec.edge_rest.max(1),
            lyric: String::new(),
        });
        detune.push(0.0);
        specs.push(SynthSpec {
            name: format!("song{s:03}"),
            seed: rng.random(),
            frame_shift_s: spec.frame_shift_s,
            notes,
            detune,
            vibrato: spec.vibrato.clone(),
            overshoot: spec.overshoot.clone(),
            preparation: spec.preparation.clone(),
            noise_sd: spec.noise_sd,
            timing: spec.timing.clone(),
            mgc_dim: spec.mgc_dim,
            mgc_noise_sd: spec.mgc_noise_sd,
        });
    }
    Ok(SynthCorpus { habit, specs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timing::compute_time_lag_targets;

    fn plan(notes: &[(Option<i32>, usize, &str)]) -> SynthSpec {
        SynthSpec {
            notes: notes
                .iter()
                .map(|&(midi, frames, lyric)| SynthNote {
                    midi,
                    frames,
                    lyric: lyric.into(),
                })
                .collect(),
            ..Default::default()
        }
    }

    #[test]
    fn zero_spec_is_a_staircase() {
        let spec = plan(&[(Some(60), 50, "a"), (Some(64), 50, "ka"), (Some(62), 40, "o")]);
        let song = generate_synthetic_song(&spec).unwrap();
        let c = song.f0.cents();
        let spans = &song.ledger.reference_spans;
        for (i, want) in [-900.0, -500.0, -700.0].iter().enumerate() {
            assert!(c[spans[i].start..spans[i].end].iter().all(|v| v == want));
        }
        // no lag: the vowel of the second note starts on the score onset
        assert_eq!(spans[1].start, 50);
        assert_eq!(song.alignment.durations(), vec![44, 6, 50, 40]);
    }

    #[test]
    fn detune_shifts_the_note() {
        let mut spec = plan(&[(Some(60), 50, "a"), (Some(62), 60, "a"), (Some(60), 50, "a")]);
        spec.detune = vec![0.0, 40.0, 0.0];
        spec.noise_sd = 5.0;
        let song = generate_synthetic_song(&spec).unwrap();
        let s = song.ledger.reference_spans[1];
        let mut v = song.f0.cents()[s.start..s.end].to_vec();
        v.sort_by(f64::total_cmp);
        let median = v[v.len() / 2];
        assert!((median - (-700.0 + 40.0)).abs() < 3.0, "{median}");
    }

    #[test]
    fn overshoot_peak() {
        let mut spec = plan(&[(Some(60), 50, "a"), (Some(62), 60, "a")]);
        spec.overshoot = TransientSpec {
            cents: 80.0,
            decay_frames: 20,
        };
        spec.noise_sd = 2.0;
        let song = generate_synthetic_song(&spec).unwrap();
        let at = song.ledger.reference_spans[1].start;
        let peak = song.f0.cents()[at..at + 20]
            .iter()
            .map(|c| c - (-700.0))
            .fold(f64::MIN, f64::max);
        assert!((70.0..=90.0).contains(&peak), "{peak}");
    }

    #[test]
    fn ledger_reconstructs_exactly_and_is_deterministic() {
        let corpus = generate_corpus(&CorpusSpec {
            songs: 2,
            ..Default::default()
        })
        .unwrap();
        let songs = corpus.generate().unwrap();
        let again = corpus.generate().unwrap();
        assert_eq!(format!("{songs:?}"), format!("{again:?}"));
        for song in &songs {
            let rec = song.ledger.reconstruct();
            for t in 0..rec.len() {
                if song.ledger.voiced[t] {
                    assert_eq!(rec[t].to_bits(), song.f0.cents()[t].to_bits());
                }
            }
            assert_eq!(song.alignment.total_frames(), song.score.total_frames());
            let lags = compute_time_lag_targets(&song.score, &song.alignment).unwrap();
            let want: Vec<f64> = song.ledger.lags.iter().map(|&g| g as f64).collect();
            assert_eq!(lags, want);
            assert!(!song.ledger.vibrato_sections.is_empty());
        }
    }

    #[test]
    fn habit_table_drives_detune() {
        let corpus = generate_corpus(&CorpusSpec::default()).unwrap();
        for spec in &corpus.specs {
            for (n, d) in spec.notes.iter().zip(&spec.detune) {
                match n.midi {
                    Some(m) => assert_eq!(*d, corpus.habit[&m]),
                    None => assert_eq!(*d, 0.0),
                }
            }
        }
    }
}
