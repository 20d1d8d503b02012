//! Phoneme assignment for notes marked with a long-vowel symbol.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Phoneme, PhonemeClass, Score, ScoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LanguageRules {
    /// Copy the last vowel of the previous note.
    #[default]
    Japanese,
    /// Copy the previous nucleus and move the consonants after it onto the
    /// continuation note. Diphthongs are split so the same diphthong is not
    /// sung twice in a row.
    English,
}

impl FromStr for LanguageRules {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "japanese" | "ja" => Ok(Self::Japanese),
            "english" | "en" => Ok(Self::English),
            other => Err(format!("unknown language rules '{other}'")),
        }
    }
}

/// Diphthong -> monophthong kept on the previous note. The continuation
/// note sings the full diphthong.
const DIPHTHONGS: [(&str, &str); 5] = [
    ("ay", "aa"),
    ("aw", "aa"),
    ("ey", "eh"),
    ("ow", "ao"),
    ("oy", "ao"),
];

fn last_vowel(phonemes: &[Phoneme]) -> Option<usize> {
    phonemes.iter().rposition(Phoneme::is_vowel)
}

/// Assigns phonemes to every long-vowel note. Notes are processed left to
/// right, so chains of continuation notes all inherit the same vowel.
/// Note count and lengths never change.
pub fn resolve_long_vowels(mut score: Score, rules: LanguageRules) -> Result<Score, ScoreError> {
    for i in 0..score.notes.len() {
        let note = &score.notes[i];
        if note.is_rest() || !note.flags.long_vowel_symbol {
            continue;
        }
        // a breath mark on the continuation note is kept after the vowel
        if note
            .phonemes
            .iter()
            .any(|p| p.class != PhonemeClass::Breath)
        {
            continue;
        }
        if i == 0 {
            return Err(ScoreError::LongVowelAtStart);
        }
        let (head, tail) = score.notes.split_at_mut(i);
        let prev = &mut head[i - 1];
        let cur = &mut tail[0];
        let v = last_vowel(&prev.phonemes).ok_or(ScoreError::NoVowelToContinue { note: i })?;
        let mut sung = match rules {
            LanguageRules::Japanese => vec![prev.phonemes[v].clone()],
            LanguageRules::English => {
                let coda_end = prev
                    .phonemes
                    .iter()
                    .rposition(|p| p.class != PhonemeClass::Breath)
                    .unwrap_or(v);
                let coda: Vec<Phoneme> = prev.phonemes.drain(v + 1..=coda_end).collect();
                let nucleus = prev.phonemes[v].clone();
                if let Some(&(_, first)) = DIPHTHONGS.iter().find(|(d, _)| *d == nucleus.symbol) {
                    prev.phonemes[v] = Phoneme::new(first, PhonemeClass::Vowel);
                }
                let mut out = vec![nucleus];
                out.extend(coda);
                out
            }
        };
        sung.append(&mut cur.phonemes);
        cur.phonemes = sung;
    }
    Ok(score)
}
