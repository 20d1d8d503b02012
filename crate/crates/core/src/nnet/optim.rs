//! First-order optimizers over a flat parameter vector.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TrainError {
    #[error("loss became non-finite at step {step} (value {value})")]
    NonFinite { step: usize, value: f64 },
    #[error("gradient has {got} entries for {expected} parameters")]
    GradientShape { got: usize, expected: usize },
    #[error("training configuration: {0}")]
    Config(String),
    #[error("training data: {0}")]
    Data(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Method {
    Adam {
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
    Sgd {
        momentum: f64,
    },
}

impl Default for Method {
    fn default() -> Self {
        Method::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub method: Method,
    pub learning_rate: f64,
    /// Learning rate at the last step as a fraction of the initial one;
    /// the rate decays geometrically in between.
    pub final_lr_ratio: f64,
    pub steps: usize,
    /// Rescale the gradient to this norm when it is longer.
    pub clip_norm: Option<f64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            method: Method::default(),
            learning_rate: 1e-2,
            final_lr_ratio: 0.1,
            steps: 500,
            clip_norm: Some(5.0),
        }
    }
}

/// Minimizes `objective`, which returns the loss and its gradient at the
/// given parameters. Returns the loss recorded before every step.
pub fn minimize<F>(
    params: &mut [f64],
    config: &OptimizerConfig,
    mut objective: F,
) -> Result<Vec<f64>, TrainError>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>), TrainError>,
{
    let n = params.len();
    let mut m = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut curve = Vec::with_capacity(config.steps);
    let decay = if config.steps > 1 && config.final_lr_ratio > 0.0 {
        config.final_lr_ratio.powf(1.0 / (config.steps - 1) as f64)
    } else {
        1.0
    };
    let mut lr = config.learning_rate;
    for step in 0..config.steps {
        let (loss, mut grad) = objective(params)?;
        if !loss.is_finite() {
            return Err(TrainError::NonFinite { step, value: loss });
        }
        if grad.len() != n {
            return Err(TrainError::GradientShape {
                got: grad.len(),
                expected: n,
            });
        }
        curve.push(loss);
        if let Some(max) = config.clip_norm {
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm > max {
                let s = max / norm;
                grad.iter_mut().for_each(|g| *g *= s);
            }
        }
        match config.method {
            Method::Adam {
                beta1,
                beta2,
                epsilon,
            } => {
                let k = (step + 1) as i32;
                let c1 = 1.0 - beta1.powi(k);
                let c2 = 1.0 - beta2.powi(k);
                for i in 0..n {
                    m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
                    v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
                    params[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + epsilon);
                }
            }
            Method::Sgd { momentum } => {
                for i in 0..n {
                    m[i] = momentum * m[i] + grad[i];
                    params[i] -= lr * m[i];
                }
            }
        }
        lr *= decay;
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(p: &[f64]) -> Result<(f64, Vec<f64>), TrainError> {
        // (p0 - 3)^2 + 2 (p1 + 1)^2
        let l = (p[0] - 3.0).powi(2) + 2.0 * (p[1] + 1.0).powi(2);
        Ok((l, vec![2.0 * (p[0] - 3.0), 4.0 * (p[1] + 1.0)]))
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let mut p = vec![0.5, 0.5];
        let cfg = OptimizerConfig {
            learning_rate: 0.0,
            steps: 20,
            ..Default::default()
        };
        minimize(&mut p, &cfg, quadratic).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
    }

    #[test]
    fn sgd_loss_is_monotone_on_convex_problem() {
        let mut p = vec![0.0, 0.0];
        let cfg = OptimizerConfig {
            method: Method::Sgd { momentum: 0.0 },
            learning_rate: 0.1,
            final_lr_ratio: 1.0,
            steps: 200,
            clip_norm: None,
        };
        let curve = minimize(&mut p, &cfg, quadratic).unwrap();
        assert!(curve.windows(2).all(|w| w[1] <= w[0]));
        assert!((p[0] - 3.0).abs() < 1e-9 && (p[1] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn adam_converges() {
        let mut p = vec![10.0, 10.0];
        let cfg = OptimizerConfig {
            learning_rate: 0.1,
            steps: 3000,
            final_lr_ratio: 0.001,
            ..Default::default()
        };
        minimize(&mut p, &cfg, quadratic).unwrap();
        assert!((p[0] - 3.0).abs() < 1e-3 && (p[1] + 1.0).abs() < 1e-3);
    }

    #[test]
    fn nan_loss_aborts() {
        let mut p = vec![0.0];
        let err = minimize(&mut p, &OptimizerConfig::default(), |_| {
            Ok((f64::NAN, vec![0.0]))
        })
        .unwrap_err();
        assert!(matches!(err, TrainError::NonFinite { step: 0, .. }));
    }
}
