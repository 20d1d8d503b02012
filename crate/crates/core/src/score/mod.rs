//! Musical score representation and analysis.
//!
//! A [`Score`] is a contiguous list of frame-quantized notes and rests. Notes
//! carry their lyric phonemes; rests carry none and are presented to the
//! timing and feature code as a single silence phoneme.

mod features;
mod longvowel;
mod musicxml;
mod phoneme;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use features::{
    encode_features, encode_note_features, encode_phoneme_features, FeatureKind, FeatureLevel,
    ScoreFeatureSchema,
};
pub use longvowel::{resolve_long_vowels, LanguageRules};
pub use musicxml::{parse_musicxml, write_musicxml, ParseOptions};
pub use phoneme::{Phoneme, PhonemeClass, PhonemeInventory, BREATH, SILENCE};

/// Default analysis frame shift in seconds.
pub const DEFAULT_FRAME_SHIFT: f64 = 0.005;

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("malformed MusicXML: {0}")]
    Malformed(String),
    #[error("unsupported construct <{element}>: {detail}")]
    Unsupported { element: String, detail: String },
    #[error("score has no tempo marking and no default tempo was supplied")]
    MissingTempo,
    #[error("note {note} is shorter than one frame")]
    ZeroLengthNote { note: usize },
    #[error("lyric '{lyric}' cannot be segmented at '{remainder}'")]
    UnknownLyric { lyric: String, remainder: String },
    #[error("inventory: {0}")]
    Inventory(String),
    #[error("long-vowel symbol on the first note")]
    LongVowelAtStart,
    #[error("note {note}: previous note has no vowel to continue")]
    NoVowelToContinue { note: usize },
    #[error("note {note} has no phonemes (unresolved long-vowel symbol?)")]
    Unresolved { note: usize },
    #[error("score contains no pitched notes")]
    AllRests,
    #[error("feature schema: {0}")]
    Schema(String),
    #[error("alignment does not match score: {0}")]
    AlignmentMismatch(String),
}

/// Markings carried by a note.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoteFlags {
    pub slur: bool,
    pub breath_mark: bool,
    pub long_vowel_symbol: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteEvent {
    pub index: usize,
    /// MIDI note number; `None` for rests.
    pub midi: Option<i32>,
    pub length_frames: usize,
    pub syllable: String,
    pub phonemes: Vec<Phoneme>,
    pub flags: NoteFlags,
}

impl NoteEvent {
    pub fn is_rest(&self) -> bool {
        self.midi.is_none()
    }

    /// Pitch in cents relative to A4.
    pub fn cents(&self) -> Option<f64> {
        self.midi.map(midi_to_cents)
    }

    /// Phonemes as seen by timing and feature code: rests sing silence.
    pub fn sung_phonemes(&self) -> Vec<Phoneme> {
        if self.is_rest() {
            vec![Phoneme::silence()]
        } else {
            self.phonemes.clone()
        }
    }

    /// Index of the phoneme whose onset defines the note timing: the first
    /// vowel, silence for rests, otherwise the first phoneme.
    pub fn reference_phoneme(&self) -> usize {
        if self.is_rest() {
            return 0;
        }
        self.phonemes
            .iter()
            .position(Phoneme::is_vowel)
            .unwrap_or(0)
    }
}

pub fn midi_to_cents(midi: i32) -> f64 {
    f64::from(midi - 69) * 100.0
}

/// Half-open frame interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn contains(&self, t: usize) -> bool {
        self.start <= t && t < self.end
    }
}

/// One phoneme of the flattened score, with the note it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct PhonemeSlot {
    pub note: usize,
    pub index_in_note: usize,
    pub phoneme: Phoneme,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub tempo_bpm: f64,
    pub frame_shift_s: f64,
    pub notes: Vec<NoteEvent>,
}

impl Score {
    pub fn total_frames(&self) -> usize {
        self.notes.iter().map(|n| n.length_frames).sum()
    }

    pub fn note_lengths(&self) -> Vec<usize> {
        self.notes.iter().map(|n| n.length_frames).collect()
    }

    /// Frame spans of the notes on the score timeline.
    pub fn note_spans(&self) -> Vec<Span> {
        let mut start = 0;
        self.notes
            .iter()
            .map(|n| {
                let span = Span {
                    start,
                    end: start + n.length_frames,
                };
                start = span.end;
                span
            })
            .collect()
    }

    pub fn rest_flags(&self) -> Vec<bool> {
        self.notes.iter().map(NoteEvent::is_rest).collect()
    }

    /// Number of pitched (non-rest) notes.
    pub fn pitched_count(&self) -> usize {
        self.notes.iter().filter(|n| !n.is_rest()).count()
    }

    /// Flattens the score into its phoneme sequence.
    pub fn phoneme_layout(&self) -> Result<Vec<PhonemeSlot>, ScoreError> {
        let mut out = Vec::new();
        for (i, note) in self.notes.iter().enumerate() {
            let phonemes = note.sung_phonemes();
            if phonemes.is_empty() {
                return Err(ScoreError::Unresolved { note: i });
            }
            out.extend(
                phonemes
                    .into_iter()
                    .enumerate()
                    .map(|(k, phoneme)| PhonemeSlot {
                        note: i,
                        index_in_note: k,
                        phoneme,
                    }),
            );
        }
        Ok(out)
    }

    /// Cents of each pitched note, in order.
    pub fn pitched_cents(&self) -> Vec<f64> {
        self.notes.iter().filter_map(NoteEvent::cents).collect()
    }
}

/// Per-frame note pitch in cents with rests interpolated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NotePitchSequence {
    pub cents_per_frame: Vec<f64>,
    pub rest_mask: Vec<bool>,
}

impl NotePitchSequence {
    pub fn len(&self) -> usize {
        self.cents_per_frame.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cents_per_frame.is_empty()
    }
}

/// Note pitch sequence on the score timeline.
pub fn note_pitch_sequence(score: &Score) -> Result<NotePitchSequence, ScoreError> {
    note_pitch_sequence_on(score, &score.note_spans())
}

/// Note pitch sequence over arbitrary note spans (e.g. the spans of a sung
/// alignment). `spans` must be contiguous and cover one entry per note.
pub fn note_pitch_sequence_on(
    score: &Score,
    spans: &[Span],
) -> Result<NotePitchSequence, ScoreError> {
    if score.pitched_count() == 0 {
        return Err(ScoreError::AllRests);
    }
    let expansion = NoteExpansion::new(spans, &score.rest_flags());
    let cents_per_frame = expansion.expand(&score.pitched_cents());
    let mut rest_mask = vec![false; expansion.frames()];
    for (span, note) in spans.iter().zip(&score.notes) {
        if note.is_rest() {
            rest_mask[span.start..span.end].fill(true);
        }
    }
    Ok(NotePitchSequence {
        cents_per_frame,
        rest_mask,
    })
}

/// Linear map from one value per pitched note to one value per frame.
///
/// Pitched notes hold their value; rest frames interpolate linearly between
/// the last frame of the preceding pitched note and the first frame of the
/// following one. Rests at either end hold the nearest pitched value.
#[derive(Debug, Clone)]
pub struct NoteExpansion {
    taps: Vec<[(usize, f64); 2]>,
    pitched: usize,
}

impl NoteExpansion {
    pub fn new(spans: &[Span], is_rest: &[bool]) -> Self {
        assert_eq!(spans.len(), is_rest.len());
        let frames = spans.last().map_or(0, |s| s.end);
        // anchor[t] = index of the pitched note owning frame t
        let mut anchor: Vec<Option<usize>> = vec![None; frames];
        let mut k = 0;
        for (span, &rest) in spans.iter().zip(is_rest) {
            if !rest {
                anchor[span.start..span.end].fill(Some(k));
                k += 1;
            }
        }
        let mut taps = vec![[(0, 0.0); 2]; frames];
        let known: Vec<usize> = (0..frames).filter(|&t| anchor[t].is_some()).collect();
        let mut next_known: usize = 0;
        for t in 0..frames {
            if let Some(n) = anchor[t] {
                taps[t] = [(n, 1.0), (n, 0.0)];
                next_known += 1;
                continue;
            }
            let before = next_known.checked_sub(1).map(|i| known[i]);
            let after = known.get(next_known).copied();
            taps[t] = match (before, after) {
                (Some(a), Some(b)) => {
                    let alpha = (t - a) as f64 / (b - a) as f64;
                    let (na, nb) = (anchor[a].unwrap(), anchor[b].unwrap());
                    [(na, 1.0 - alpha), (nb, alpha)]
                }
                (Some(a), None) => {
                    let n = anchor[a].unwrap();
                    [(n, 1.0), (n, 0.0)]
                }
                (None, Some(b)) => {
                    let n = anchor[b].unwrap();
                    [(n, 1.0), (n, 0.0)]
                }
                (None, None) => [(0, 0.0), (0, 0.0)],
            };
        }
        Self { taps, pitched: k }
    }

    pub fn frames(&self) -> usize {
        self.taps.len()
    }

    pub fn pitched(&self) -> usize {
        self.pitched
    }

    pub fn expand(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.pitched, "one value per pitched note");
        self.taps
            .iter()
            .map(|&[(a, wa), (b, wb)]| {
                if wb == 0.0 {
                    values[a] * wa
                } else {
                    wa * values[a] + wb * values[b]
                }
            })
            .collect()
    }

    /// Transpose of [`expand`](Self::expand): folds a per-frame gradient back
    /// onto the per-note values.
    pub fn adjoint(&self, frame_grad: &[f64]) -> Vec<f64> {
        assert_eq!(frame_grad.len(), self.taps.len());
        let mut out = vec![0.0; self.pitched];
        for (&[(a, wa), (b, wb)], g) in self.taps.iter().zip(frame_grad) {
            if self.pitched == 0 {
                break;
            }
            out[a] += wa * g;
            out[b] += wb * g;
        }
        out
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    /// Builds a score directly from `(midi, frames, lyric)` triples.
    pub fn score(notes: &[(Option<i32>, usize, &str)]) -> Score {
        let inv = PhonemeInventory::japanese();
        Score {
            tempo_bpm: 120.0,
            frame_shift_s: DEFAULT_FRAME_SHIFT,
            notes: notes
                .iter()
                .enumerate()
                .map(|(i, &(midi, frames, lyric))| NoteEvent {
                    index: i,
                    midi,
                    length_frames: frames,
                    syllable: lyric.to_string(),
                    phonemes: if midi.is_some() {
                        inv.segment(lyric).unwrap()
                    } else {
                        Vec::new()
                    },
                    flags: NoteFlags::default(),
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::score;
    use super::*;

    #[test]
    fn single_note_a4_is_zero_cents() {
        let s = score(&[(Some(69), 10, "a")]);
        let p = note_pitch_sequence(&s).unwrap();
        assert_eq!(p.cents_per_frame, vec![0.0; 10]);
        assert!(p.rest_mask.iter().all(|r| !r));
    }

    #[test]
    fn rest_between_notes_ramps() {
        // A4, rest, B4: anchors are frame 9 (0 cents) and frame 20 (200 cents)
        let s = score(&[(Some(69), 10, "a"), (None, 10, ""), (Some(71), 10, "a")]);
        let p = note_pitch_sequence(&s).unwrap();
        assert_eq!(p.len(), 30);
        for t in 0..10 {
            assert_eq!(p.cents_per_frame[t], 0.0);
            assert_eq!(p.cents_per_frame[t + 20], 200.0);
        }
        for t in 10..20 {
            let expected = 200.0 * (t - 9) as f64 / 11.0;
            assert!((p.cents_per_frame[t] - expected).abs() < 1e-9);
            assert!(p.rest_mask[t]);
        }
        for w in p.cents_per_frame.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn leading_rest_holds_nearest_pitch() {
        let s = score(&[(None, 5, ""), (Some(69), 5, "a"), (None, 3, "")]);
        let p = note_pitch_sequence(&s).unwrap();
        assert_eq!(p.cents_per_frame, vec![0.0; 13]);
    }

    #[test]
    fn all_rest_score_is_an_error() {
        let s = score(&[(None, 5, "")]);
        assert!(matches!(note_pitch_sequence(&s), Err(ScoreError::AllRests)));
    }

    #[test]
    fn expansion_adjoint_matches_transpose() {
        let spans = [
            Span { start: 0, end: 3 },
            Span { start: 3, end: 7 },
            Span { start: 7, end: 9 },
            Span { start: 9, end: 10 },
        ];
        let rest = [true, false, true, false];
        let e = NoteExpansion::new(&spans, &rest);
        // <E x, y> == <x, E^T y>
        let x = [1.5, -2.0];
        let y: Vec<f64> = (0..10).map(|t| (t as f64 * 0.37).sin()).collect();
        let ex = e.expand(&x);
        let lhs: f64 = ex.iter().zip(&y).map(|(a, b)| a * b).sum();
        let ety = e.adjoint(&y);
        let rhs: f64 = x.iter().zip(&ety).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn reference_phoneme_is_first_vowel() {
        let s = score(&[(Some(60), 10, "ka"), (None, 4, ""), (Some(60), 10, "N")]);
        assert_eq!(s.notes[0].reference_phoneme(), 1);
        assert_eq!(s.notes[1].reference_phoneme(), 0);
        assert_eq!(s.notes[2].reference_phoneme(), 0);
        let layout = s.phoneme_layout().unwrap();
        assert_eq!(layout.len(), 4);
        assert_eq!(layout[2].phoneme.symbol, SILENCE);
    }
}
