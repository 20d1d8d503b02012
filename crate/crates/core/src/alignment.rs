//! Phoneme alignments and their label-file format.
//!
//! A label file has one segment per line, `start end phoneme`, with
//! half-open frame intervals that start at 0 and leave no gaps. HTK-style
//! files give times in 100 ns units instead; they are converted with the
//! frame shift on load.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::score::{Score, Span};

#[derive(Debug, Error, PartialEq)]
pub enum AlignmentError {
    #[error("label line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("segment {index} starts at {start} but the previous one ends at {expected}")]
    Gap {
        index: usize,
        start: usize,
        expected: usize,
    },
    #[error("segment {index} is empty")]
    Empty { index: usize },
    #[error("alignment does not match score: {0}")]
    Mismatch(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub phoneme: String,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// Units of the time columns in a label file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LabelUnits {
    Frames,
    /// 100 ns ticks, converted using the given frame shift in seconds.
    Htk {
        frame_shift_s: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PhonemeAlignment {
    pub segments: Vec<Segment>,
}

impl PhonemeAlignment {
    pub fn new(segments: Vec<Segment>) -> Result<Self, AlignmentError> {
        let mut expected = 0;
        for (index, s) in segments.iter().enumerate() {
            if s.start != expected {
                return Err(AlignmentError::Gap {
                    index,
                    start: s.start,
                    expected,
                });
            }
            if s.is_empty() {
                return Err(AlignmentError::Empty { index });
            }
            expected = s.end;
        }
        Ok(Self { segments })
    }

    /// Lays segments end to end.
    pub fn from_durations<S: AsRef<str>>(
        phonemes: &[S],
        durations: &[usize],
    ) -> Result<Self, AlignmentError> {
        if phonemes.len() != durations.len() {
            return Err(AlignmentError::Mismatch(format!(
                "{} phonemes but {} durations",
                phonemes.len(),
                durations.len()
            )));
        }
        let mut t = 0;
        let segments = phonemes
            .iter()
            .zip(durations)
            .map(|(p, &d)| {
                let s = Segment {
                    start: t,
                    end: t + d,
                    phoneme: p.as_ref().to_string(),
                };
                t += d;
                s
            })
            .collect();
        Self::new(segments)
    }

    pub fn parse(text: &str, units: LabelUnits) -> Result<Self, AlignmentError> {
        let mut segments = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| AlignmentError::Parse {
                line: i + 1,
                message,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [start, end, phoneme] = fields[..] else {
                return Err(err(format!("expected 3 fields, got {}", fields.len())));
            };
            let to_frames = |v: &str| -> Result<usize, AlignmentError> {
                match units {
                    LabelUnits::Frames => v
                        .parse::<usize>()
                        .map_err(|_| err(format!("bad frame index '{v}'"))),
                    LabelUnits::Htk { frame_shift_s } => {
                        let ticks: u64 = v.parse().map_err(|_| err(format!("bad time '{v}'")))?;
                        Ok((ticks as f64 * 1e-7 / frame_shift_s).round() as usize)
                    }
                }
            };
            segments.push(Segment {
                start: to_frames(start)?,
                end: to_frames(end)?,
                phoneme: phoneme.to_string(),
            });
        }
        Self::new(segments)
    }

    pub fn to_labels(&self) -> String {
        let mut out = String::new();
        for s in &self.segments {
            let _ = writeln!(out, "{} {} {}", s.start, s.end, s.phoneme);
        }
        out
    }

    pub fn total_frames(&self) -> usize {
        self.segments.last().map_or(0, |s| s.end)
    }

    pub fn durations(&self) -> Vec<usize> {
        self.segments.iter().map(Segment::len).collect()
    }

    /// Checks that the segment symbols are the score's phoneme sequence.
    pub fn check_against(&self, score: &Score) -> Result<(), AlignmentError> {
        let layout = score
            .phoneme_layout()
            .map_err(|e| AlignmentError::Mismatch(e.to_string()))?;
        if layout.len() != self.segments.len() {
            return Err(AlignmentError::Mismatch(format!(
                "score has {} phonemes, alignment has {} segments",
                layout.len(),
                self.segments.len()
            )));
        }
        for (k, (slot, seg)) in layout.iter().zip(&self.segments).enumerate() {
            if slot.phoneme.symbol != seg.phoneme {
                return Err(AlignmentError::Mismatch(format!(
                    "segment {k}: expected '{}', found '{}'",
                    slot.phoneme.symbol, seg.phoneme
                )));
            }
        }
        Ok(())
    }

    /// Sung span of every note: from its first phoneme's start to its last
    /// phoneme's end.
    pub fn note_spans(&self, score: &Score) -> Result<Vec<Span>, AlignmentError> {
        self.check_against(score)?;
        let mut spans = Vec::with_capacity(score.notes.len());
        let mut k = 0;
        for note in &score.notes {
            let n = note.sung_phonemes().len();
            spans.push(Span {
                start: self.segments[k].start,
                end: self.segments[k + n - 1].end,
            });
            k += n;
        }
        Ok(spans)
    }

    /// Aligned start frame of each note's reference phoneme.
    pub fn reference_starts(&self, score: &Score) -> Result<Vec<usize>, AlignmentError> {
        self.check_against(score)?;
        let mut out = Vec::with_capacity(score.notes.len());
        let mut k = 0;
        for note in &score.notes {
            out.push(self.segments[k + note.reference_phoneme()].start);
            k += note.sung_phonemes().len();
        }
        Ok(out)
    }

    /// Frame span of every note measured between reference-phoneme onsets:
    /// `[ref_n, ref_{n+1})`, with the first span starting at frame 0 and the
    /// last ending at the end of the alignment. These are the spans the
    /// adjusted note lengths describe.
    pub fn reference_spans(&self, score: &Score) -> Result<Vec<Span>, AlignmentError> {
        let mut starts = self.reference_starts(score)?;
        if let Some(first) = starts.first_mut() {
            *first = 0;
        }
        let total = self.total_frames();
        Ok((0..starts.len())
            .map(|i| Span {
                start: starts[i],
                end: starts.get(i + 1).copied().unwrap_or(total),
            })
            .collect())
    }
}
