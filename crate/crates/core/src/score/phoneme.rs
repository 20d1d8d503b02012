//! Phoneme symbols, class tags, and the inventory file format.
//!
//! Inventory files hold one entry per line, `symbol class`, where class is
//! one of `vowel`, `consonant`, `breath`, `silence`. `#` starts a comment.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ScoreError;

/// Symbol used for musical rests.
pub const SILENCE: &str = "pau";
/// Symbol inserted for breath marks.
pub const BREATH: &str = "br";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhonemeClass {
    Vowel,
    Consonant,
    Breath,
    Silence,
}

impl PhonemeClass {
    pub const ALL: [PhonemeClass; 4] = [
        PhonemeClass::Vowel,
        PhonemeClass::Consonant,
        PhonemeClass::Breath,
        PhonemeClass::Silence,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PhonemeClass::Vowel => "vowel",
            PhonemeClass::Consonant => "consonant",
            PhonemeClass::Breath => "breath",
            PhonemeClass::Silence => "silence",
        }
    }
}

impl fmt::Display for PhonemeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PhonemeClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vowel" => Ok(PhonemeClass::Vowel),
            "consonant" => Ok(PhonemeClass::Consonant),
            "breath" => Ok(PhonemeClass::Breath),
            "silence" => Ok(PhonemeClass::Silence),
            other => Err(format!("unknown phoneme class '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Phoneme {
    pub symbol: String,
    pub class: PhonemeClass,
}

impl Phoneme {
    pub fn new(symbol: impl Into<String>, class: PhonemeClass) -> Self {
        Self {
            symbol: symbol.into(),
            class,
        }
    }

    pub fn silence() -> Self {
        Self::new(SILENCE, PhonemeClass::Silence)
    }

    pub fn breath() -> Self {
        Self::new(BREATH, PhonemeClass::Breath)
    }

    pub fn is_vowel(&self) -> bool {
        self.class == PhonemeClass::Vowel
    }
}

const JAPANESE_INVENTORY: &str = "\
# vowels
a vowel
i vowel
u vowel
e vowel
o vowel
# consonants
k consonant
g consonant
s consonant
sh consonant
z consonant
j consonant
t consonant
ch consonant
ts consonant
d consonant
n consonant
h consonant
f consonant
b consonant
p consonant
m consonant
y consonant
r consonant
w consonant
v consonant
ky consonant
gy consonant
ny consonant
hy consonant
by consonant
py consonant
my consonant
ry consonant
N consonant
cl consonant
# non-speech
br breath
pau silence
";

/// Symbol-to-class table used for lyric segmentation and feature vocabularies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhonemeInventory {
    entries: BTreeMap<String, PhonemeClass>,
}

impl PhonemeInventory {
    /// Built-in romanized Japanese inventory.
    pub fn japanese() -> Self {
        Self::parse(JAPANESE_INVENTORY).expect("built-in inventory is valid")
    }

    pub fn parse(text: &str) -> Result<Self, ScoreError> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let (Some(sym), Some(class), None) = (fields.next(), fields.next(), fields.next())
            else {
                return Err(ScoreError::Inventory(format!(
                    "line {}: expected 'symbol class'",
                    lineno + 1
                )));
            };
            let class: PhonemeClass = class
                .parse()
                .map_err(|e| ScoreError::Inventory(format!("line {}: {e}", lineno + 1)))?;
            if entries.insert(sym.to_string(), class).is_some() {
                return Err(ScoreError::Inventory(format!(
                    "line {}: duplicate symbol '{sym}'",
                    lineno + 1
                )));
            }
        }
        // rests and breath marks always need these two
        entries
            .entry(SILENCE.to_string())
            .or_insert(PhonemeClass::Silence);
        entries
            .entry(BREATH.to_string())
            .or_insert(PhonemeClass::Breath);
        Ok(Self { entries })
    }

    pub fn class_of(&self, symbol: &str) -> Option<PhonemeClass> {
        self.entries.get(symbol).copied()
    }

    pub fn phoneme(&self, symbol: &str) -> Option<Phoneme> {
        self.class_of(symbol).map(|c| Phoneme::new(symbol, c))
    }

    /// Symbols in sorted order.
    pub fn symbols(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Splits a romanized syllable into phonemes by greedy longest match.
    ///
    /// Whitespace separates explicit phoneme tokens, so `"k a"` and `"ka"`
    /// give the same result.
    pub fn segment(&self, lyric: &str) -> Result<Vec<Phoneme>, ScoreError> {
        let longest = self.entries.keys().map(|k| k.len()).max().unwrap_or(0);
        let mut out = Vec::new();
        for token in lyric.split_whitespace() {
            let mut rest = token;
            while !rest.is_empty() {
                let found = (1..=longest.min(rest.len()))
                    .rev()
                    .filter(|&n| rest.is_char_boundary(n))
                    .find_map(|n| self.phoneme(&rest[..n]).map(|p| (n, p)));
                match found {
                    Some((n, p)) => {
                        out.push(p);
                        rest = &rest[n..];
                    }
                    None => {
                        return Err(ScoreError::UnknownLyric {
                            lyric: lyric.to_string(),
                            remainder: rest.to_string(),
                        })
                    }
                }
            }
        }
        Ok(out)
    }
}

impl Default for PhonemeInventory {
    fn default() -> Self {
        Self::japanese()
    }
}
