//! Versioned JSON model checkpoints.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::loss::GlobalVariance;
use super::network::Network;
use super::train::Criterion;
use super::window::WindowSet;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint format version {found} is not supported (expected {FORMAT_VERSION})")]
    Version { found: u32 },
    #[error("checkpoint was trained with feature schema {found}, current schema is {expected}")]
    SchemaMismatch { expected: String, found: String },
    #[error("checkpoint is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    TimeLag,
    Duration,
    Acoustic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub kind: ModelKind,
    pub schema_hash: String,
    pub criterion: Criterion,
    /// Layer `(fan_in, fan_out)` pairs, for inspection.
    pub shapes: Vec<(usize, usize)>,
    pub network: Network,
    pub windows: WindowSet,
    pub global_variance: GlobalVariance,
    /// Names of the target columns.
    pub streams: Vec<String>,
    /// Per-record learned pitch biases, if any.
    pub bias: Vec<Vec<f64>>,
    pub loss_curve: Vec<f64>,
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint is serializable")
    }

    /// Parses a checkpoint, refusing one trained against another schema.
    pub fn from_json(text: &str, expected_schema: &str) -> Result<Self, CheckpointError> {
        let ckpt: Checkpoint = serde_json::from_str(text)?;
        if ckpt.format_version != FORMAT_VERSION {
            return Err(CheckpointError::Version {
                found: ckpt.format_version,
            });
        }
        if ckpt.schema_hash != expected_schema {
            return Err(CheckpointError::SchemaMismatch {
                expected: expected_schema.to_string(),
                found: ckpt.schema_hash,
            });
        }
        Ok(ckpt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::network::{Activation, Head, NetworkSpec};

    fn sample() -> Checkpoint {
        let network = Network::new(
            NetworkSpec {
                input_dim: 2,
                hidden: vec![3],
                activation: Activation::Relu,
                target_dim: 1,
                head: Head::Plain,
                skip_target: Some(0),
            },
            9,
        )
        .unwrap();
        Checkpoint {
            format_version: FORMAT_VERSION,
            kind: ModelKind::Acoustic,
            schema_hash: "abc".into(),
            criterion: Criterion::StaticOutDynamic,
            shapes: network.layer_shapes(),
            network,
            windows: WindowSet::standard(),
            global_variance: GlobalVariance {
                values: vec![1.0, 0.5, 0.25],
            },
            streams: vec!["f0".into()],
            bias: vec![vec![1.5, -2.0]],
            loss_curve: vec![3.0, 2.0],
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let c = sample();
        let back = Checkpoint::from_json(&c.to_json(), "abc").unwrap();
        assert_eq!(c, back);
        assert_eq!(back.to_json(), c.to_json());
    }

    #[test]
    fn schema_mismatch_is_refused() {
        let c = sample();
        assert!(matches!(
            Checkpoint::from_json(&c.to_json(), "def"),
            Err(CheckpointError::SchemaMismatch { .. })
        ));
    }
}
