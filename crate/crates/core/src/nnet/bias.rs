//! Trainable per-note pitch bias.

use serde::{Deserialize, Serialize};

use crate::score::{NoteExpansion, Score, Span};

/// One additive offset (cents) per pitched note.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PitchBias {
    pub values: Vec<f64>,
}

impl PitchBias {
    pub fn zeros(score: &Score) -> Self {
        Self {
            values: vec![0.0; score.pitched_count()],
        }
    }
}

/// Expands note biases over the score timeline; rests interpolate between
/// the neighbouring notes' biases.
pub fn expand_bias(bias: &PitchBias, score: &Score) -> Vec<f64> {
    expand_bias_on(bias, &score.note_spans(), &score.rest_flags())
}

/// Expands note biases over arbitrary note spans (e.g. a sung alignment).
pub fn expand_bias_on(bias: &PitchBias, spans: &[Span], rest: &[bool]) -> Vec<f64> {
    NoteExpansion::new(spans, rest).expand(&bias.values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::test_support::score;

    #[test]
    fn rest_ramps_between_biases() {
        let s = score(&[(Some(60), 3, "a"), (None, 2, ""), (Some(62), 3, "a")]);
        let b = expand_bias(
            &PitchBias {
                values: vec![10.0, 30.0],
            },
            &s,
        );
        // anchors at frames 2 (10) and 5 (30)
        let expected = [
            10.0,
            10.0,
            10.0,
            10.0 + 20.0 / 3.0,
            10.0 + 40.0 / 3.0,
            30.0,
            30.0,
            30.0,
        ];
        for (a, e) in b.iter().zip(expected) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_and_single_note() {
        let s = score(&[(Some(60), 3, "a"), (None, 2, ""), (Some(62), 3, "a")]);
        assert_eq!(expand_bias(&PitchBias::zeros(&s), &s), vec![0.0; 8]);
        let one = score(&[(Some(60), 4, "a")]);
        assert_eq!(
            expand_bias(&PitchBias { values: vec![7.0] }, &one),
            vec![7.0; 4]
        );
    }
}
