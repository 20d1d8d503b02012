//! Full-batch training of a [`Network`] (plus optional per-note pitch
//! biases) under one of the training criteria.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loss::{build_weight_vector, f0_prior_loss, gaussian_nll, mdn_nll, GlobalVariance};
use super::network::{Head, Network, NetworkSpec, Trace};
use super::optim::{minimize, OptimizerConfig, TrainError};
use super::window::{build_window_matrix, WindowMatrix, WindowSet};
use crate::score::{NoteExpansion, Span};
use crate::seq::Seq;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Statics predicted and scored directly.
    Static,
    /// Static and dynamic features predicted and scored; generation needs
    /// parameter generation.
    DynamicTarget,
    /// Statics predicted, scored through the window matrix.
    StaticOutDynamic,
    /// Single-Gaussian density output (mean and log-variance).
    Mdn,
}

/// One song (or one song's notes / phonemes) of training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub name: String,
    pub features: Seq,
    /// Skip-connection input per row, cents.
    pub note_pitch: Vec<f64>,
    /// Static targets; the F0 column holds the residual from the note pitch.
    pub targets: Seq,
    /// Note spans on the row axis; used for the prior weights and biases.
    pub note_spans: Vec<Span>,
    pub rest: Vec<bool>,
}

impl TrainRecord {
    pub fn pitched_notes(&self) -> usize {
        self.rest.iter().filter(|r| !**r).count()
    }
}

/// Settings for the F0 residual stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F0Stream {
    /// Column of the F0 residual in the targets.
    pub column: usize,
    /// Prior standard deviation in cents; `None` disables the prior.
    pub sigma_p: Option<f64>,
    pub w_max: f64,
    pub ramp: f64,
    /// Train one additive bias per pitched note.
    pub bias: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSetup {
    pub criterion: Criterion,
    pub windows: WindowSet,
    pub f0: Option<F0Stream>,
    pub optimizer: OptimizerConfig,
    pub hidden: Vec<usize>,
    pub activation: super::network::Activation,
    pub skip_target: Option<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: Network,
    /// Learned biases, one vector per record (one entry per pitched note).
    pub bias: Vec<Vec<f64>>,
    pub global_variance: GlobalVariance,
    pub loss_curve: Vec<f64>,
}

/// Everything the objective needs per record, precomputed once.
struct Prepared<'a> {
    record: &'a TrainRecord,
    w: WindowMatrix,
    w_static: WindowMatrix,
    weights: Vec<f64>,
    expansion: NoteExpansion,
    bias_offset: usize,
}

/// Shared parameters and settings of a training problem.
pub struct Problem<'a> {
    pub network: Network,
    pub setup: &'a TrainSetup,
    pub gv: GlobalVariance,
    records: Vec<Prepared<'a>>,
    bias_count: usize,
    frames: usize,
}

fn check_setup(setup: &TrainSetup, records: &[TrainRecord]) -> Result<(), TrainError> {
    let Some(first) = records.first() else {
        return Err(TrainError::Data("no training records".into()));
    };
    for r in records {
        if r.features.frames() != r.targets.frames() || r.note_pitch.len() != r.targets.frames() {
            return Err(TrainError::Data(format!(
                "record '{}' has inconsistent lengths",
                r.name
            )));
        }
        if r.features.dim() != first.features.dim() || r.targets.dim() != first.targets.dim() {
            return Err(TrainError::Data(format!(
                "record '{}' has different dimensions",
                r.name
            )));
        }
        if r.note_spans.len() != r.rest.len() {
            return Err(TrainError::Data(format!(
                "record '{}': spans and rest flags differ",
                r.name
            )));
        }
    }
    if let Some(f0) = &setup.f0 {
        if f0.column >= first.targets.dim() {
            return Err(TrainError::Config("F0 column out of range".into()));
        }
        let uses_f0_terms = f0.sigma_p.is_some() || f0.bias;
        if uses_f0_terms && matches!(setup.criterion, Criterion::DynamicTarget | Criterion::Mdn) {
            return Err(TrainError::Config(
                "the pitch prior and pitch bias need a static-output criterion".into(),
            ));
        }
        if let Some(s) = f0.sigma_p {
            if !(s > 0.0) {
                return Err(TrainError::Config(format!(
                    "sigma_p must be positive, got {s}"
                )));
            }
        }
        if f0.bias && records.iter().any(|r| r.note_spans.is_empty()) {
            return Err(TrainError::Data("pitch bias needs note spans".into()));
        }
    }
    Ok(())
}

impl<'a> Problem<'a> {
    pub fn new(setup: &'a TrainSetup, records: &'a [TrainRecord]) -> Result<Self, TrainError> {
        check_setup(setup, records)?;
        let d_count = records[0].targets.dim();
        let k_count = setup.windows.len();
        let mut prepared = Vec::with_capacity(records.len());
        let mut bias_count = 0;
        let mut stacked = Vec::new();
        for r in records {
            let frames = r.targets.frames();
            let w = build_window_matrix(frames, &setup.windows);
            let weights = match &setup.f0 {
                Some(f0) if f0.sigma_p.is_some() => {
                    build_weight_vector(&r.note_spans, frames, f0.w_max, f0.ramp)
                }
                _ => vec![0.0; frames],
            };
            if setup.criterion != Criterion::Static && setup.criterion != Criterion::Mdn {
                stacked.push(w.apply_seq(&r.targets));
            }
            let expansion = NoteExpansion::new(&r.note_spans, &r.rest);
            prepared.push(Prepared {
                record: r,
                w,
                w_static: build_window_matrix(frames, &WindowSet::static_only()),
                weights,
                bias_offset: bias_count,
                expansion,
            });
            if setup.f0.is_some_and(|f| f.bias) {
                bias_count += r.pitched_notes();
            }
        }
        let gv = match setup.criterion {
            Criterion::Static | Criterion::Mdn => {
                GlobalVariance::estimate(records.iter().map(|r| &r.targets))
            }
            _ => GlobalVariance::estimate(stacked.iter()),
        };
        let (target_dim, head) = match setup.criterion {
            Criterion::DynamicTarget => (k_count * d_count, Head::Plain),
            Criterion::Mdn => (d_count, Head::Mdn),
            _ => (d_count, Head::Plain),
        };
        let spec = NetworkSpec {
            input_dim: records[0].features.dim(),
            hidden: setup.hidden.clone(),
            activation: setup.activation,
            target_dim,
            head,
            skip_target: setup.skip_target,
        };
        let mut network =
            Network::new(spec, setup.seed).map_err(|e| TrainError::Config(e.to_string()))?;
        network.fit_input_normalization(records.iter().map(|r| &r.features));
        if setup.criterion == Criterion::DynamicTarget {
            network.fit_output_normalization(stacked.iter());
        } else {
            network.fit_output_normalization(records.iter().map(|r| &r.targets));
        }
        let frames = records.iter().map(|r| r.targets.frames()).sum();
        Ok(Self {
            network,
            setup,
            gv,
            records: prepared,
            bias_count,
            frames,
        })
    }

    /// Network parameters followed by the bias table (in output-scale
    /// units; [`finish`](Self::finish) converts them to cents).
    pub fn initial_params(&self) -> Vec<f64> {
        let mut p = self.network.params().to_vec();
        p.extend(std::iter::repeat_n(0.0, self.bias_count));
        p
    }

    pub fn param_count(&self) -> usize {
        self.network.param_count() + self.bias_count
    }

    /// Mean per-frame loss and its gradient.
    pub fn objective(&self, params: &[f64]) -> Result<(f64, Vec<f64>), TrainError> {
        let parts: Vec<Result<(f64, Vec<f64>), TrainError>> = self
            .records
            .par_iter()
            .map(|r| self.record_loss(r, params))
            .collect();
        let mut total = 0.0;
        let mut grad = vec![0.0; params.len()];
        // fixed summation order keeps results reproducible
        for part in parts {
            let (v, g) = part?;
            total += v;
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        let scale = 1.0 / self.frames.max(1) as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        Ok((total * scale, grad))
    }

    fn record_loss(&self, r: &Prepared, params: &[f64]) -> Result<(f64, Vec<f64>), TrainError> {
        let rec = r.record;
        let frames = rec.targets.frames();
        let n_net = self.network.param_count();
        let net_params = &params[..n_net];
        let mut traces = vec![Trace::default(); frames];
        let mut out = Seq::zeros(frames, self.network.output_dim());
        for t in 0..frames {
            let y = self
                .network
                .forward_with(
                    net_params,
                    rec.features.row(t),
                    rec.note_pitch[t],
                    Some(&mut traces[t]),
                )
                .map_err(|e| TrainError::Data(e.to_string()))?;
            out.row_mut(t).copy_from_slice(&y);
        }
        let mut grad = vec![0.0; params.len()];
        let (value, d_out) = self.output_loss(r, &out, params, &mut grad)?;
        for t in 0..frames {
            self.network
                .backward(net_params, &traces[t], d_out.row(t), &mut grad[..n_net]);
        }
        Ok((value, grad))
    }

    /// Loss of one record's network outputs; bias gradients are written
    /// directly into `grad`.
    fn output_loss(
        &self,
        r: &Prepared,
        out: &Seq,
        params: &[f64],
        grad: &mut [f64],
    ) -> Result<(f64, Seq), TrainError> {
        let rec = r.record;
        let loss_err = |e: super::loss::LossError| TrainError::Data(e.to_string());
        match self.setup.criterion {
            Criterion::Mdn => {
                let l = mdn_nll(out, &rec.targets).map_err(loss_err)?;
                Ok((l.value, l.grad))
            }
            Criterion::DynamicTarget => {
                let target = r.w.apply_seq(&rec.targets);
                let l = gaussian_nll(out, &target, &self.gv.values).map_err(loss_err)?;
                Ok((l.value, l.grad))
            }
            Criterion::Static | Criterion::StaticOutDynamic => {
                let frames = rec.targets.frames();
                let d_count = rec.targets.dim();
                let (w, k_count) = if self.setup.criterion == Criterion::Static {
                    (&r.w_static, 1)
                } else {
                    (&r.w, self.setup.windows.len())
                };
                let zeros = vec![0.0; frames];
                let mut value = 0.0;
                let mut d_out = Seq::zeros(frames, d_count);
                for d in 0..d_count {
                    let f0 = self.setup.f0.filter(|f| f.column == d);
                    let mu = out.column(d);
                    let gv_d: Vec<f64> = (0..k_count)
                        .map(|k| self.gv.values[k * d_count + d])
                        .collect();
                    let bias_scale = self.bias_scale();
                    let bias_frames = match f0 {
                        Some(f) if f.bias => {
                            let n_net = self.network.param_count();
                            let lo = n_net + r.bias_offset;
                            let b: Vec<f64> = params[lo..lo + r.expansion.pitched()]
                                .iter()
                                .map(|v| v * bias_scale)
                                .collect();
                            r.expansion.expand(&b)
                        }
                        _ => zeros.clone(),
                    };
                    let l = f0_prior_loss(
                        &mu,
                        &rec.targets.column(d),
                        &zeros,
                        &bias_frames,
                        w,
                        &gv_d,
                        &r.weights,
                        f0.and_then(|f| f.sigma_p),
                    )
                    .map_err(loss_err)?;
                    value += l.value;
                    d_out.set_column(d, &l.grad_mu);
                    if f0.is_some_and(|f| f.bias) {
                        let lo = self.network.param_count() + r.bias_offset;
                        for (i, g) in r.expansion.adjoint(&l.grad_bias).into_iter().enumerate() {
                            grad[lo + i] += g * bias_scale;
                        }
                    }
                }
                Ok((value, d_out))
            }
        }
    }

    /// Bias parameters are optimized in units of the F0 stream's output
    /// scale, so they move at the same rate as the network outputs.
    fn bias_scale(&self) -> f64 {
        self.setup
            .f0
            .and_then(|f| self.network.output_scale().get(f.column).copied())
            .unwrap_or(1.0)
    }

    pub fn finish(mut self, params: &[f64], curve: Vec<f64>) -> TrainOutcome {
        let n_net = self.network.param_count();
        let scale = self.bias_scale();
        self.network
            .set_params(&params[..n_net])
            .expect("parameter count is fixed");
        let bias = self
            .records
            .iter()
            .map(|r| {
                if self.bias_count == 0 {
                    Vec::new()
                } else {
                    let lo = n_net + r.bias_offset;
                    params[lo..lo + r.expansion.pitched()]
                        .iter()
                        .map(|v| v * scale)
                        .collect()
                }
            })
            .collect();
        TrainOutcome {
            network: self.network,
            bias,
            global_variance: self.gv,
            loss_curve: curve,
        }
    }
}

/// Trains a fresh network on `records`.
pub fn train(setup: &TrainSetup, records: &[TrainRecord]) -> Result<TrainOutcome, TrainError> {
    let problem = Problem::new(setup, records)?;
    let mut params = problem.initial_params();
    let curve = minimize(&mut params, &setup.optimizer, |p| problem.objective(p))?;
    Ok(problem.finish(&params, curve))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::network::Activation;
    use crate::nnet::optim::Method;

    fn setup(criterion: Criterion, f0: Option<F0Stream>) -> TrainSetup {
        TrainSetup {
            criterion,
            windows: WindowSet::standard(),
            f0,
            optimizer: OptimizerConfig::default(),
            hidden: vec![3],
            activation: Activation::Tanh,
            skip_target: Some(0),
            seed: 5,
        }
    }

    fn record(frames: usize, seed: f64) -> TrainRecord {
        let feats: Vec<[f64; 2]> = (0..frames)
            .map(|t| [(t as f64 * 0.3 + seed).sin(), (t as f64 * 0.11).cos()])
            .collect();
        let targets: Vec<[f64; 2]> = (0..frames)
            .map(|t| [(t as f64 * 0.2 + seed).cos() * 20.0, t as f64 * 0.01])
            .collect();
        let half = frames / 2;
        TrainRecord {
            name: format!("r{seed}"),
            features: Seq::from_rows(&feats),
            note_pitch: (0..frames)
                .map(|t| if t < half { 0.0 } else { 200.0 })
                .collect(),
            targets: Seq::from_rows(&targets),
            note_spans: vec![
                Span {
                    start: 0,
                    end: half,
                },
                Span {
                    start: half,
                    end: half + 2,
                },
                Span {
                    start: half + 2,
                    end: frames,
                },
            ],
            rest: vec![false, true, false],
        }
    }

    fn check_gradient(setup: &TrainSetup) {
        let records = vec![record(12, 0.0), record(9, 1.0)];
        let problem = Problem::new(setup, &records).unwrap();
        let mut params = problem.initial_params();
        for (i, p) in params
            .iter_mut()
            .enumerate()
            .skip(problem.network.param_count())
        {
            *p = (i as f64).sin() * 3.0;
        }
        let (_, grad) = problem.objective(&params).unwrap();
        let h = 1e-5;
        for i in 0..params.len() {
            let mut a = params.clone();
            let mut b = params.clone();
            a[i] += h;
            b[i] -= h;
            let fd =
                (problem.objective(&a).unwrap().0 - problem.objective(&b).unwrap().0) / (2.0 * h);
            assert!(
                (fd - grad[i]).abs() <= 1e-5 * fd.abs().max(1e-3),
                "{:?} param {i}: fd {fd} vs {}",
                setup.criterion,
                grad[i]
            );
        }
    }

    #[test]
    fn objective_gradients() {
        let f0 = F0Stream {
            column: 0,
            sigma_p: Some(15.0),
            w_max: 0.5,
            ramp: 3.0,
            bias: true,
        };
        check_gradient(&setup(Criterion::Static, None));
        check_gradient(&setup(Criterion::StaticOutDynamic, None));
        check_gradient(&setup(Criterion::DynamicTarget, None));
        check_gradient(&setup(Criterion::Static, Some(f0)));
        check_gradient(&setup(Criterion::StaticOutDynamic, Some(f0)));
    }

    #[test]
    fn dynamic_target_with_prior_is_rejected() {
        let f0 = F0Stream {
            column: 0,
            sigma_p: Some(15.0),
            w_max: 0.5,
            ramp: 3.0,
            bias: false,
        };
        let records = vec![record(12, 0.0)];
        assert!(matches!(
            train(&setup(Criterion::DynamicTarget, Some(f0)), &records),
            Err(TrainError::Config(_))
        ));
        assert!(matches!(
            train(&setup(Criterion::Static, None), &[]),
            Err(TrainError::Data(_))
        ));
    }

    #[test]
    fn linear_model_recovers_weights() {
        // y = 2 x0 - 3 x1 + 0.5
        let rows: Vec<[f64; 2]> = (0..50)
            .map(|t| [(t as f64 * 0.37).sin(), (t as f64 * 0.71).cos()])
            .collect();
        let targets: Vec<f64> = rows.iter().map(|r| 2.0 * r[0] - 3.0 * r[1] + 0.5).collect();
        let rec = TrainRecord {
            name: "lin".into(),
            features: Seq::from_rows(&rows),
            note_pitch: vec![0.0; 50],
            targets: Seq::from_column(&targets),
            note_spans: Vec::new(),
            rest: Vec::new(),
        };
        let s = TrainSetup {
            hidden: vec![],
            skip_target: None,
            activation: Activation::Linear,
            optimizer: OptimizerConfig {
                method: Method::Adam {
                    beta1: 0.9,
                    beta2: 0.999,
                    epsilon: 1e-12,
                },
                learning_rate: 0.05,
                final_lr_ratio: 1e-3,
                steps: 4000,
                clip_norm: None,
            },
            ..setup(Criterion::Static, None)
        };
        let out = train(&s, std::slice::from_ref(&rec)).unwrap();
        for (r, y) in rows.iter().zip(&targets) {
            let p = out.network.forward(r, 0.0).unwrap()[0];
            assert!((p - y).abs() < 1e-3);
        }
        // the affine map itself, through the normalization
        let origin = out.network.forward(&[0.0, 0.0], 0.0).unwrap()[0];
        let dx0 = out.network.forward(&[1.0, 0.0], 0.0).unwrap()[0] - origin;
        let dx1 = out.network.forward(&[0.0, 1.0], 0.0).unwrap()[0] - origin;
        assert!((origin - 0.5).abs() < 1e-3);
        assert!((dx0 - 2.0).abs() < 1e-3);
        assert!((dx1 + 3.0).abs() < 1e-3);
    }
}
