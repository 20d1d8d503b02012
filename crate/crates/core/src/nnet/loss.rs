//! Training criteria. Every loss is a negative log-likelihood to be
//! minimized and returns its gradient with respect to the predictions.

use thiserror::Error;

use super::window::WindowMatrix;
use crate::score::Span;
use crate::seq::Seq;

const LN_2PI: f64 = 1.837_877_066_409_345_5;
/// Floor applied to estimated variances.
pub const VARIANCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("prior standard deviation must be positive, got {0}")]
    Sigma(f64),
}

fn shape(what: impl Into<String>) -> LossError {
    LossError::Shape(what.into())
}

/// Per-dimension variances shared by all frames.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GlobalVariance {
    pub values: Vec<f64>,
}

impl GlobalVariance {
    /// Empirical variance of each column over all frames of all sequences,
    /// floored at [`VARIANCE_FLOOR`].
    pub fn estimate<'a>(targets: impl IntoIterator<Item = &'a Seq>) -> Self {
        let mut n = 0usize;
        let mut sum: Vec<f64> = Vec::new();
        let mut sq: Vec<f64> = Vec::new();
        let seqs: Vec<&Seq> = targets.into_iter().collect();
        for s in &seqs {
            if sum.is_empty() {
                sum = vec![0.0; s.dim()];
                sq = vec![0.0; s.dim()];
            }
            for row in s.rows() {
                for (d, &v) in row.iter().enumerate() {
                    sum[d] += v;
                }
            }
            n += s.frames();
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n.max(1) as f64).collect();
        for s in &seqs {
            for row in s.rows() {
                for (d, &v) in row.iter().enumerate() {
                    sq[d] += (v - mean[d]).powi(2);
                }
            }
        }
        Self {
            values: sq
                .iter()
                .map(|s| (s / n.max(1) as f64).max(VARIANCE_FLOOR))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct LossGrad {
    pub value: f64,
    pub grad: Seq,
}

/// `-log N(target | pred, diag(var))` summed over frames and dimensions.
pub fn gaussian_nll(pred: &Seq, target: &Seq, var: &[f64]) -> Result<LossGrad, LossError> {
    if pred.frames() != target.frames() || pred.dim() != target.dim() {
        return Err(shape(format!(
            "prediction {}x{} vs target {}x{}",
            pred.frames(),
            pred.dim(),
            target.frames(),
            target.dim()
        )));
    }
    if var.len() != pred.dim() {
        return Err(shape(format!(
            "{} variances for {} dims",
            var.len(),
            pred.dim()
        )));
    }
    let constant: f64 = var.iter().map(|v| 0.5 * (LN_2PI + v.ln())).sum();
    let mut value = constant * pred.frames() as f64;
    let mut grad = Seq::zeros(pred.frames(), pred.dim());
    for t in 0..pred.frames() {
        let (p, y, g) = (pred.row(t), target.row(t), grad.row_mut(t));
        for d in 0..p.len() {
            let e = p[d] - y[d];
            value += 0.5 * e * e / var[d];
            g[d] = e / var[d];
        }
    }
    Ok(LossGrad { value, grad })
}

/// Static criterion: statics predicted and scored directly.
pub fn loss_static(pred: &Seq, target: &Seq, gv: &GlobalVariance) -> Result<LossGrad, LossError> {
    gaussian_nll(pred, target, &gv.values)
}

/// Dynamic-target criterion: the model predicts stacked static+dynamic
/// features and is scored against the stacked targets.
pub fn loss_dynamic_target(
    pred_with_deltas: &Seq,
    target_with_deltas: &Seq,
    gv: &GlobalVariance,
) -> Result<LossGrad, LossError> {
    gaussian_nll(pred_with_deltas, target_with_deltas, &gv.values)
}

/// Static-output, dynamic-loss criterion: the model predicts statics `c̄`
/// and is scored by `N(W·target | W·c̄, Σ)`. The gradient is with respect
/// to `c̄`.
pub fn loss_static_out_dynamic(
    pred_static: &Seq,
    target: &Seq,
    w: &WindowMatrix,
    gv: &GlobalVariance,
) -> Result<LossGrad, LossError> {
    if pred_static.frames() != w.frames() {
        return Err(shape(format!(
            "{} frames but window matrix covers {}",
            pred_static.frames(),
            w.frames()
        )));
    }
    if gv.len() != w.windows() * pred_static.dim() {
        return Err(shape(format!(
            "{} variances for {} windows x {} dims",
            gv.len(),
            w.windows(),
            pred_static.dim()
        )));
    }
    if target.frames() != pred_static.frames() || target.dim() != pred_static.dim() {
        return Err(shape("target and prediction differ".to_string()));
    }
    let o_pred = w.apply_seq(pred_static);
    let o_target = w.apply_seq(target);
    let inner = gaussian_nll(&o_pred, &o_target, &gv.values)?;
    Ok(LossGrad {
        value: inner.value,
        grad: w.apply_transpose_seq(&inner.grad, pred_static.dim()),
    })
}

/// Single-Gaussian mixture-density loss. `pred` is `T x 2D` holding means
/// then log-variances; `target` is `T x D`.
pub fn mdn_nll(pred: &Seq, target: &Seq) -> Result<LossGrad, LossError> {
    let d_count = target.dim();
    if pred.dim() != 2 * d_count || pred.frames() != target.frames() {
        return Err(shape(format!(
            "MDN output {}x{} for target {}x{}",
            pred.frames(),
            pred.dim(),
            target.frames(),
            d_count
        )));
    }
    let mut value = 0.0;
    let mut grad = Seq::zeros(pred.frames(), pred.dim());
    for t in 0..pred.frames() {
        let (p, y) = (pred.row(t), target.row(t));
        let g = grad.row_mut(t);
        for d in 0..d_count {
            let (m, v) = (p[d], p[d_count + d]);
            let e = y[d] - m;
            let inv = (-v).exp();
            value += 0.5 * (LN_2PI + v + e * e * inv);
            g[d] = -e * inv;
            g[d_count + d] = 0.5 * (1.0 - e * e * inv);
        }
    }
    Ok(LossGrad { value, grad })
}

/// Prior weight per frame: zero at every note boundary, rising linearly to
/// `w_max` over `ramp` frames. Frames outside every span get zero.
pub fn build_weight_vector(spans: &[Span], frames: usize, w_max: f64, ramp: f64) -> Vec<f64> {
    let mut w = vec![0.0; frames];
    for span in spans {
        if span.is_empty() {
            continue;
        }
        let last = span.end - 1;
        for t in span.start..span.end.min(frames) {
            let dist = (t - span.start).min(last - t) as f64;
            w[t] = if ramp > 0.0 {
                w_max * (dist / ramp).min(1.0)
            } else {
                w_max
            };
        }
    }
    w
}

#[derive(Debug, Clone)]
pub struct PriorLoss {
    pub value: f64,
    pub grad_mu: Vec<f64>,
    /// Gradient with respect to the per-frame expanded bias.
    pub grad_bias: Vec<f64>,
}

/// F0 loss with the residual prior:
///
/// `-log N(W·f0 | W(p + μ + b), Σ) + Σ_t w_t μ_t² / (2σ_p²)`
///
/// `sigma_p = None` disables the prior. The prior's normalization constant
/// is dropped so that disabling it reproduces the plain dynamic loss
/// exactly. `gv_f0` holds one variance per window.
#[allow(clippy::too_many_arguments)]
pub fn f0_prior_loss(
    mu: &[f64],
    target_f0: &[f64],
    p: &[f64],
    b: &[f64],
    w: &WindowMatrix,
    gv_f0: &[f64],
    weights: &[f64],
    sigma_p: Option<f64>,
) -> Result<PriorLoss, LossError> {
    let t_count = mu.len();
    for (name, len) in [
        ("target", target_f0.len()),
        ("note pitch", p.len()),
        ("bias", b.len()),
        ("weights", weights.len()),
        ("window matrix", w.frames()),
    ] {
        if len != t_count {
            return Err(shape(format!(
                "{name} has {len} frames, expected {t_count}"
            )));
        }
    }
    if gv_f0.len() != w.windows() {
        return Err(shape(format!(
            "{} variances for {} windows",
            gv_f0.len(),
            w.windows()
        )));
    }
    if let Some(s) = sigma_p {
        if !(s > 0.0) {
            return Err(LossError::Sigma(s));
        }
    }
    let mean: Vec<f64> = (0..t_count).map(|t| p[t] + mu[t] + b[t]).collect();
    let pred = Seq::from_column(&mean);
    let target = Seq::from_column(target_f0);
    let gv = GlobalVariance {
        values: gv_f0.to_vec(),
    };
    let data = loss_static_out_dynamic(&pred, &target, w, &gv)?;
    let grad_bias = data.grad.into_vec();
    let mut value = data.value;
    let mut grad_mu = grad_bias.clone();
    if let Some(s) = sigma_p {
        let inv = 1.0 / (s * s);
        for t in 0..t_count {
            value += 0.5 * weights[t] * mu[t] * mu[t] * inv;
            grad_mu[t] += weights[t] * mu[t] * inv;
        }
    }
    Ok(PriorLoss {
        value,
        grad_mu,
        grad_bias,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::window::{build_window_matrix, WindowSet};

    #[test]
    fn optimum_leaves_only_constant() {
        let y = Seq::from_rows(&[[1.0, 2.0], [3.0, -1.0]]);
        let var = [0.5, 2.0];
        let l = gaussian_nll(&y, &y, &var).unwrap();
        let c: f64 = var
            .iter()
            .map(|v| 0.5 * (LN_2PI + f64::ln(*v)))
            .sum::<f64>()
            * 2.0;
        assert!((l.value - c).abs() < 1e-12);
        assert!(l.grad.as_slice().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn doubling_variance_halves_quadratic() {
        let pred = Seq::from_column(&[1.0, 2.0, 3.0]);
        let target = Seq::from_column(&[0.0, 0.0, 1.0]);
        let quad = |v: f64| {
            gaussian_nll(&pred, &target, &[v]).unwrap().value
                - gaussian_nll(&target, &target, &[v]).unwrap().value
        };
        assert!((quad(2.0) - quad(1.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn identity_window_reduces_to_static() {
        let pred = Seq::from_rows(&[[1.0, 0.5], [2.0, -0.5], [0.0, 0.0]]);
        let target = Seq::from_rows(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]);
        let gv = GlobalVariance {
            values: vec![0.3, 1.7],
        };
        let w = build_window_matrix(3, &WindowSet::static_only());
        let a = loss_static(&pred, &target, &gv).unwrap();
        let b = loss_static_out_dynamic(&pred, &target, &w, &gv).unwrap();
        assert_eq!(a.value, b.value);
        assert_eq!(a.grad, b.grad);
    }

    #[test]
    fn weight_vector_long_note() {
        let w = build_weight_vector(&[Span { start: 0, end: 100 }], 100, 0.5, 25.0);
        assert_eq!(w[0], 0.0);
        assert_eq!(w[99], 0.0);
        for t in 25..75 {
            assert_eq!(w[t], 0.5);
        }
        assert!((w[10] - 0.2).abs() < 1e-15);
        assert!((w[89] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn weight_vector_short_note() {
        let w = build_weight_vector(&[Span { start: 0, end: 10 }], 10, 0.5, 25.0);
        let expected: Vec<f64> = [0, 1, 2, 3, 4, 4, 3, 2, 1, 0]
            .iter()
            .map(|&d| 0.5 * d as f64 / 25.0)
            .collect();
        assert_eq!(w, expected);
        assert!(build_weight_vector(&[], 0, 0.5, 25.0).is_empty());
    }

    #[test]
    fn prior_off_equals_dynamic_loss() {
        let ws = WindowSet::standard();
        let w = build_window_matrix(4, &ws);
        let mu = [1.0, -2.0, 0.5, 3.0];
        let f0 = [10.0, 12.0, 9.0, 11.0];
        let p = [8.0; 4];
        let b = [0.5; 4];
        let gv = [2.0, 0.5, 0.25];
        let weights = [0.0, 0.5, 0.5, 0.0];
        let a = f0_prior_loss(&mu, &f0, &p, &b, &w, &gv, &weights, None).unwrap();
        let c: Vec<f64> = (0..4).map(|t| p[t] + mu[t] + b[t]).collect();
        let plain = loss_static_out_dynamic(
            &Seq::from_column(&c),
            &Seq::from_column(&f0),
            &w,
            &GlobalVariance {
                values: gv.to_vec(),
            },
        )
        .unwrap();
        assert_eq!(a.value, plain.value);
        let zero_w = f0_prior_loss(&mu, &f0, &p, &b, &w, &gv, &[0.0; 4], Some(3.0)).unwrap();
        assert_eq!(zero_w.value, plain.value);
    }

    #[test]
    fn mdn_link_and_gradient_sign() {
        let pred = Seq::from_rows(&[[2.0, 0.0]]);
        let target = Seq::from_column(&[3.0]);
        let l = mdn_nll(&pred, &target).unwrap();
        assert!((l.value - 0.5 * (LN_2PI + 1.0)).abs() < 1e-12);
        assert_eq!(l.grad.get(0, 0), -1.0);
        assert_eq!(l.grad.get(0, 1), 0.0);
    }

    #[test]
    fn global_variance_floor() {
        let a = Seq::from_rows(&[[1.0, 5.0], [3.0, 5.0]]);
        let gv = GlobalVariance::estimate([&a]);
        assert_eq!(gv.values, vec![1.0, VARIANCE_FLOOR]);
    }
}
