//! Context feature encoding.
//!
//! A schema file lists the features to emit, in order:
//!
//! ```text
//! schema v1
//! # kind     name
//! categorical phoneme
//! numeric     note_pitch
//! duration    pos_in_phoneme
//! ```
//!
//! Categorical features expand to one-hot groups whose vocabularies come
//! from the phoneme inventory. Duration features exist only at frame level.

use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use super::{NoteEvent, PhonemeClass, PhonemeInventory, PhonemeSlot, Score, ScoreError};
use crate::seq::Seq;

/// Placeholder symbol for "no neighbour".
const NONE_SYMBOL: &str = "xx";
const PITCH_CLASSES: [&str; 13] = [
    "C", "Cs", "D", "Ds", "E", "F", "Fs", "G", "Gs", "A", "As", "B", "rest",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Categorical,
    Numeric,
    Duration,
}

impl FeatureKind {
    fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Categorical => "categorical",
            FeatureKind::Numeric => "numeric",
            FeatureKind::Duration => "duration",
        }
    }
}

/// Granularity of an encoded sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureLevel {
    /// One row per note, described by its reference phoneme.
    Note,
    /// One row per phoneme of the flattened score.
    Phoneme,
    /// One row per frame, with duration features.
    Frame,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Feature {
    Phoneme,
    PrevPhoneme,
    NextPhoneme,
    PhonemeClass,
    NoteRest,
    Slur,
    BreathMark,
    LongVowel,
    PitchClass,
    NotePitch,
    NoteLength,
    PrevInterval,
    NextInterval,
    PhonemesInNote,
    PhonemeIndex,
    NotePosition,
    PosInPhoneme,
    PosInPhonemeBwd,
    PosInNote,
    PosInNoteBwd,
    PhonemeFrames,
    NoteFramesAligned,
}

const ALL_FEATURES: [(Feature, FeatureKind, &str); 22] = [
    (Feature::Phoneme, FeatureKind::Categorical, "phoneme"),
    (
        Feature::PrevPhoneme,
        FeatureKind::Categorical,
        "prev_phoneme",
    ),
    (
        Feature::NextPhoneme,
        FeatureKind::Categorical,
        "next_phoneme",
    ),
    (
        Feature::PhonemeClass,
        FeatureKind::Categorical,
        "phoneme_class",
    ),
    (Feature::NoteRest, FeatureKind::Categorical, "note_rest"),
    (Feature::Slur, FeatureKind::Categorical, "slur"),
    (Feature::BreathMark, FeatureKind::Categorical, "breath_mark"),
    (Feature::LongVowel, FeatureKind::Categorical, "long_vowel"),
    (Feature::PitchClass, FeatureKind::Categorical, "pitch_class"),
    (Feature::NotePitch, FeatureKind::Numeric, "note_pitch"),
    (Feature::NoteLength, FeatureKind::Numeric, "note_length"),
    (Feature::PrevInterval, FeatureKind::Numeric, "prev_interval"),
    (Feature::NextInterval, FeatureKind::Numeric, "next_interval"),
    (
        Feature::PhonemesInNote,
        FeatureKind::Numeric,
        "phonemes_in_note",
    ),
    (Feature::PhonemeIndex, FeatureKind::Numeric, "phoneme_index"),
    (Feature::NotePosition, FeatureKind::Numeric, "note_position"),
    (
        Feature::PosInPhoneme,
        FeatureKind::Duration,
        "pos_in_phoneme",
    ),
    (
        Feature::PosInPhonemeBwd,
        FeatureKind::Duration,
        "pos_in_phoneme_bwd",
    ),
    (Feature::PosInNote, FeatureKind::Duration, "pos_in_note"),
    (
        Feature::PosInNoteBwd,
        FeatureKind::Duration,
        "pos_in_note_bwd",
    ),
    (
        Feature::PhonemeFrames,
        FeatureKind::Duration,
        "phoneme_frames",
    ),
    (
        Feature::NoteFramesAligned,
        FeatureKind::Duration,
        "note_frames_aligned",
    ),
];

fn describe(f: Feature) -> (FeatureKind, &'static str) {
    let (_, kind, name) = ALL_FEATURES.iter().find(|(g, _, _)| *g == f).unwrap();
    (*kind, name)
}

/// Ordered list of context features plus the phoneme vocabulary used by
/// the categorical groups.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreFeatureSchema {
    features: Vec<Feature>,
    vocab: Vec<String>,
}

impl ScoreFeatureSchema {
    pub const VERSION: u32 = 1;

    /// Every known feature, in table order.
    pub fn full(inventory: &PhonemeInventory) -> Self {
        Self {
            features: ALL_FEATURES.iter().map(|(f, _, _)| *f).collect(),
            vocab: vocabulary(inventory),
        }
    }

    pub fn empty(inventory: &PhonemeInventory) -> Self {
        Self {
            features: Vec::new(),
            vocab: vocabulary(inventory),
        }
    }

    pub fn parse(text: &str, inventory: &PhonemeInventory) -> Result<Self, ScoreError> {
        let mut lines = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty());
        match lines.next() {
            Some(h) if h == format!("schema v{}", Self::VERSION) => {}
            Some(h) => return Err(ScoreError::Schema(format!("unsupported header '{h}'"))),
            None => return Err(ScoreError::Schema("empty schema file".into())),
        }
        let mut features = Vec::new();
        for line in lines {
            let mut it = line.split_whitespace();
            let (Some(kind), Some(name), None) = (it.next(), it.next(), it.next()) else {
                return Err(ScoreError::Schema(format!(
                    "expected 'kind name', got '{line}'"
                )));
            };
            let Some(&(f, k, _)) = ALL_FEATURES.iter().find(|(_, _, n)| *n == name) else {
                return Err(ScoreError::Schema(format!("unknown feature '{name}'")));
            };
            if k.as_str() != kind {
                return Err(ScoreError::Schema(format!(
                    "feature '{name}' is {}, not {kind}",
                    k.as_str()
                )));
            }
            if features.contains(&f) {
                return Err(ScoreError::Schema(format!("duplicate feature '{name}'")));
            }
            features.push(f);
        }
        Ok(Self {
            features,
            vocab: vocabulary(inventory),
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("schema v{}\n", Self::VERSION);
        for &f in &self.features {
            let (kind, name) = describe(f);
            let _ = writeln!(out, "{} {name}", kind.as_str());
        }
        out
    }

    fn included(&self, level: FeatureLevel) -> impl Iterator<Item = Feature> + '_ {
        self.features.iter().copied().filter(move |&f| {
            level == FeatureLevel::Frame || describe(f).0 != FeatureKind::Duration
        })
    }

    fn group_labels(&self, f: Feature) -> Vec<String> {
        let binary = || vec!["no".to_string(), "yes".to_string()];
        match f {
            Feature::Phoneme | Feature::PrevPhoneme | Feature::NextPhoneme => self.vocab.clone(),
            Feature::PhonemeClass => PhonemeClass::ALL.iter().map(|c| c.to_string()).collect(),
            Feature::NoteRest | Feature::Slur | Feature::BreathMark | Feature::LongVowel => {
                binary()
            }
            Feature::PitchClass => PITCH_CLASSES.iter().map(|s| s.to_string()).collect(),
            _ => Vec::new(),
        }
    }

    fn group_width(&self, f: Feature) -> usize {
        match f {
            Feature::Phoneme | Feature::PrevPhoneme | Feature::NextPhoneme => self.vocab.len(),
            Feature::PhonemeClass => PhonemeClass::ALL.len(),
            Feature::NoteRest | Feature::Slur | Feature::BreathMark | Feature::LongVowel => 2,
            Feature::PitchClass => PITCH_CLASSES.len(),
            _ => 1,
        }
    }

    /// Names of the individual slots, `name=label` for one-hot slots.
    pub fn slot_names(&self, level: FeatureLevel) -> Vec<String> {
        let mut out = Vec::new();
        for f in self.included(level) {
            let (kind, name) = describe(f);
            if kind == FeatureKind::Categorical {
                out.extend(self.group_labels(f).iter().map(|l| format!("{name}={l}")));
            } else {
                out.push(name.to_string());
            }
        }
        out
    }

    pub fn arity(&self, level: FeatureLevel) -> usize {
        self.included(level).map(|f| self.group_width(f)).sum()
    }

    /// Hex SHA-256 of the frame-level slot names; identifies the encoding a
    /// model was trained against.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("schema v{}\n", Self::VERSION));
        for name in self.slot_names(FeatureLevel::Frame) {
            h.update(name.as_bytes());
            h.update(b"\n");
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn vocabulary(inventory: &PhonemeInventory) -> Vec<String> {
    std::iter::once(NONE_SYMBOL.to_string())
        .chain(inventory.symbols().map(str::to_string))
        .collect()
}

/// Per-row context for one phoneme occurrence.
struct Ctx<'a> {
    score: &'a Score,
    layout: &'a [PhonemeSlot],
    counts: &'a [usize],
    slot: usize,
}

/// Frame-level extras for duration features.
#[derive(Clone, Copy, Default)]
struct FramePos {
    in_phoneme: usize,
    phoneme_len: usize,
    in_note: usize,
    note_len: usize,
}

fn prev_pitched(score: &Score, n: usize) -> Option<i32> {
    score.notes[..n].iter().rev().find_map(|x| x.midi)
}

fn next_pitched(score: &Score, n: usize) -> Option<i32> {
    score.notes[n + 1..].iter().find_map(|x| x.midi)
}

impl ScoreFeatureSchema {
    fn vocab_index(&self, symbol: &str) -> Result<usize, ScoreError> {
        self.vocab
            .iter()
            .position(|s| s == symbol)
            .ok_or_else(|| ScoreError::Schema(format!("phoneme '{symbol}' not in inventory")))
    }

    fn write_row(
        &self,
        level: FeatureLevel,
        ctx: &Ctx,
        pos: FramePos,
        row: &mut [f64],
    ) -> Result<(), ScoreError> {
        let slot = &ctx.layout[ctx.slot];
        let note: &NoteEvent = &ctx.score.notes[slot.note];
        let note_count = ctx.score.notes.len();
        let phonemes_in_note = ctx.counts[slot.note];
        let flag = |b: bool| usize::from(b);
        let mut col = 0;
        for f in self.included(level) {
            let hot = match f {
                Feature::Phoneme => Some(self.vocab_index(&slot.phoneme.symbol)?),
                Feature::PrevPhoneme => Some(match ctx.slot.checked_sub(1) {
                    Some(i) => self.vocab_index(&ctx.layout[i].phoneme.symbol)?,
                    None => 0,
                }),
                Feature::NextPhoneme => Some(match ctx.layout.get(ctx.slot + 1) {
                    Some(s) => self.vocab_index(&s.phoneme.symbol)?,
                    None => 0,
                }),
                Feature::PhonemeClass => Some(
                    PhonemeClass::ALL
                        .iter()
                        .position(|&c| c == slot.phoneme.class)
                        .unwrap(),
                ),
                Feature::NoteRest => Some(flag(note.is_rest())),
                Feature::Slur => Some(flag(note.flags.slur)),
                Feature::BreathMark => Some(flag(note.flags.breath_mark)),
                Feature::LongVowel => Some(flag(note.flags.long_vowel_symbol)),
                Feature::PitchClass => Some(match note.midi {
                    Some(m) => m.rem_euclid(12) as usize,
                    None => 12,
                }),
                _ => None,
            };
            if let Some(h) = hot {
                let width = self.group_width(f);
                row[col..col + width].fill(0.0);
                row[col + h] = 1.0;
                col += width;
                continue;
            }
            let frac = |i: usize, n: usize| {
                if n > 1 {
                    i as f64 / (n - 1) as f64
                } else {
                    0.0
                }
            };
            row[col] = match f {
                Feature::NotePitch => note.midi.map_or(0.0, |m| f64::from(m - 69)),
                Feature::NoteLength => note.length_frames as f64 / 100.0,
                Feature::PrevInterval => match (note.midi, prev_pitched(ctx.score, slot.note)) {
                    (Some(a), Some(b)) => f64::from(a - b),
                    _ => 0.0,
                },
                Feature::NextInterval => match (note.midi, next_pitched(ctx.score, slot.note)) {
                    (Some(a), Some(b)) => f64::from(b - a),
                    _ => 0.0,
                },
                Feature::PhonemesInNote => phonemes_in_note as f64,
                Feature::PhonemeIndex => slot.index_in_note as f64,
                Feature::NotePosition => frac(slot.note, note_count),
                Feature::PosInPhoneme => frac(pos.in_phoneme, pos.phoneme_len),
                Feature::PosInPhonemeBwd => {
                    if pos.phoneme_len > 1 {
                        1.0 - frac(pos.in_phoneme, pos.phoneme_len)
                    } else {
                        0.0
                    }
                }
                Feature::PosInNote => frac(pos.in_note, pos.note_len),
                Feature::PosInNoteBwd => {
                    if pos.note_len > 1 {
                        1.0 - frac(pos.in_note, pos.note_len)
                    } else {
                        0.0
                    }
                }
                Feature::PhonemeFrames => pos.phoneme_len as f64 / 100.0,
                Feature::NoteFramesAligned => pos.note_len as f64 / 100.0,
                _ => unreachable!("categorical handled above"),
            };
            col += 1;
        }
        Ok(())
    }
}

fn per_note_counts(score: &Score, layout: &[PhonemeSlot]) -> Vec<usize> {
    let mut counts = vec![0; score.notes.len()];
    for s in layout {
        counts[s.note] += 1;
    }
    counts
}

/// One row per note, each described by its reference phoneme.
pub fn encode_note_features(score: &Score, schema: &ScoreFeatureSchema) -> Result<Seq, ScoreError> {
    let layout = score.phoneme_layout()?;
    let counts = per_note_counts(score, &layout);
    let dim = schema.arity(FeatureLevel::Note);
    let mut out = Seq::zeros(score.notes.len(), dim);
    let mut first = 0;
    for (n, note) in score.notes.iter().enumerate() {
        let ctx = Ctx {
            score,
            layout: &layout,
            counts: &counts,
            slot: first + note.reference_phoneme(),
        };
        schema.write_row(
            FeatureLevel::Note,
            &ctx,
            FramePos::default(),
            out.row_mut(n),
        )?;
        first += counts[n];
    }
    Ok(out)
}

/// One row per phoneme of the flattened score.
pub fn encode_phoneme_features(
    score: &Score,
    schema: &ScoreFeatureSchema,
) -> Result<Seq, ScoreError> {
    let layout = score.phoneme_layout()?;
    let counts = per_note_counts(score, &layout);
    let dim = schema.arity(FeatureLevel::Phoneme);
    let mut out = Seq::zeros(layout.len(), dim);
    for k in 0..layout.len() {
        let ctx = Ctx {
            score,
            layout: &layout,
            counts: &counts,
            slot: k,
        };
        schema.write_row(
            FeatureLevel::Phoneme,
            &ctx,
            FramePos::default(),
            out.row_mut(k),
        )?;
    }
    Ok(out)
}

/// Frame-level features given one duration (frames) per phoneme of the
/// flattened score, taken from an alignment or from predicted durations.
pub fn encode_features(
    score: &Score,
    schema: &ScoreFeatureSchema,
    phoneme_frames: &[usize],
) -> Result<Seq, ScoreError> {
    let layout = score.phoneme_layout()?;
    let counts = per_note_counts(score, &layout);
    if phoneme_frames.len() != layout.len() {
        return Err(ScoreError::AlignmentMismatch(format!(
            "{} durations for {} phonemes",
            phoneme_frames.len(),
            layout.len()
        )));
    }
    if let Some(k) = phoneme_frames.iter().position(|&d| d == 0) {
        return Err(ScoreError::AlignmentMismatch(format!(
            "phoneme {k} has zero frames"
        )));
    }
    let mut note_len = vec![0usize; score.notes.len()];
    for (slot, &d) in layout.iter().zip(phoneme_frames) {
        note_len[slot.note] += d;
    }
    let total: usize = phoneme_frames.iter().sum();
    let dim = schema.arity(FeatureLevel::Frame);
    let mut out = Seq::zeros(total, dim);
    let mut t = 0;
    let mut in_note = 0;
    for (k, &d) in phoneme_frames.iter().enumerate() {
        if k > 0 && layout[k].note != layout[k - 1].note {
            in_note = 0;
        }
        let ctx = Ctx {
            score,
            layout: &layout,
            counts: &counts,
            slot: k,
        };
        for i in 0..d {
            let pos = FramePos {
                in_phoneme: i,
                phoneme_len: d,
                in_note,
                note_len: note_len[layout[k].note],
            };
            schema.write_row(FeatureLevel::Frame, &ctx, pos, out.row_mut(t))?;
            t += 1;
            in_note += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::test_support::score;

    fn schema(text: &str) -> ScoreFeatureSchema {
        ScoreFeatureSchema::parse(text, &PhonemeInventory::japanese()).unwrap()
    }

    #[test]
    fn position_in_phoneme() {
        let s = score(&[(Some(69), 4, "a")]);
        let sch = schema("schema v1\nduration pos_in_phoneme\n");
        let f = encode_features(&s, &sch, &[4]).unwrap();
        assert_eq!(f.column(0), vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]);
    }

    #[test]
    fn one_hot_groups() {
        let s = score(&[(Some(60), 5, "ka"), (None, 3, ""), (Some(62), 4, "N")]);
        let sch = ScoreFeatureSchema::full(&PhonemeInventory::japanese());
        let f = encode_features(&s, &sch, &[2, 3, 3, 4]).unwrap();
        assert_eq!(f.frames(), 12);
        assert_eq!(f.dim(), sch.arity(FeatureLevel::Frame));
        let names = sch.slot_names(FeatureLevel::Frame);
        for group in ["phoneme=", "prev_phoneme=", "pitch_class=", "slur="] {
            let cols: Vec<usize> = names
                .iter()
                .enumerate()
                .filter(|(_, n)| n.starts_with(group))
                .map(|(i, _)| i)
                .collect();
            for row in f.rows() {
                let ones = cols.iter().filter(|&&c| row[c] == 1.0).count();
                let total: f64 = cols.iter().map(|&c| row[c]).sum();
                assert_eq!((ones, total), (1, 1.0), "group {group}");
            }
        }
        assert!(f.is_finite());
    }

    #[test]
    fn empty_schema() {
        let s = score(&[(Some(60), 5, "ka")]);
        let sch = ScoreFeatureSchema::empty(&PhonemeInventory::japanese());
        let f = encode_features(&s, &sch, &[2, 3]).unwrap();
        assert_eq!((f.frames(), f.dim()), (5, 0));
    }

    #[test]
    fn mismatched_alignment() {
        let s = score(&[(Some(60), 5, "ka")]);
        let sch = ScoreFeatureSchema::full(&PhonemeInventory::japanese());
        assert!(matches!(
            encode_features(&s, &sch, &[5]),
            Err(ScoreError::AlignmentMismatch(_))
        ));
    }

    #[test]
    fn schema_text_round_trip_and_hash() {
        let inv = PhonemeInventory::japanese();
        let full = ScoreFeatureSchema::full(&inv);
        let again = ScoreFeatureSchema::parse(&full.to_text(), &inv).unwrap();
        assert_eq!(full, again);
        assert_eq!(full.hash(), again.hash());
        assert_ne!(full.hash(), ScoreFeatureSchema::empty(&inv).hash());
        assert!(ScoreFeatureSchema::parse("schema v1\nnumeric pos_in_note\n", &inv).is_err());
        assert!(ScoreFeatureSchema::parse("schema v2\n", &inv).is_err());
    }

    #[test]
    fn note_level_uses_reference_phoneme_and_skips_duration() {
        let s = score(&[(Some(60), 5, "ka"), (Some(62), 4, "N")]);
        let sch = schema("schema v1\nnumeric phoneme_index\nduration pos_in_note\n");
        assert_eq!(sch.arity(FeatureLevel::Note), 1);
        let f = encode_note_features(&s, &sch).unwrap();
        assert_eq!(f.column(0), vec![1.0, 0.0]);
        let p = encode_phoneme_features(&s, &sch).unwrap();
        assert_eq!(p.column(0), vec![0.0, 1.0, 0.0]);
    }
}
