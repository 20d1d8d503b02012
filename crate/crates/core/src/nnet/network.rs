//! Feed-forward regression network with a note-pitch skip input.
//!
//! Inputs are normalized by a fixed affine map, pass through the hidden
//! layers and a linear output layer, and are mapped back to target units by
//! a fixed output affine. The note pitch (cents, scaled by
//! [`Network::pitch_scale`]) is appended to the input of one hidden layer.
//! All trainable parameters live in one flat vector.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seq::Seq;

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("input has {got} features, network expects {expected}")]
    Arity { got: usize, expected: usize },
    #[error("skip target {skip} must index one of the {hidden} hidden layers")]
    SkipTarget { skip: usize, hidden: usize },
    #[error("parameter vector has {got} entries, expected {expected}")]
    ParamCount { got: usize, expected: usize },
    #[error("normalization vectors have the wrong length")]
    Normalization,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Linear,
    Sigmoid,
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Linear => x,
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the activation output `y`.
    fn derivative(self, y: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// How the raw output layer is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    /// One mean per target dimension.
    Plain,
    /// Mean and log-variance per target dimension (means first).
    Mdn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub target_dim: usize,
    pub head: Head,
    /// Hidden layer whose input receives the note pitch; `None` disables
    /// the skip path.
    pub skip_target: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    spec: NetworkSpec,
    pub pitch_scale: f64,
    input_shift: Vec<f64>,
    input_scale: Vec<f64>,
    output_shift: Vec<f64>,
    output_scale: Vec<f64>,
    params: Vec<f64>,
}

/// Per-layer activations kept for back-propagation.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    /// `inputs[l]` is the input vector of layer `l` (after any skip input).
    inputs: Vec<Vec<f64>>,
    /// Activated outputs of every hidden layer.
    outputs: Vec<Vec<f64>>,
    raw: Vec<f64>,
}

impl Network {
    /// Creates a network with Xavier-uniform weights and zero biases.
    pub fn new(spec: NetworkSpec, seed: u64) -> Result<Self, NetworkError> {
        if let Some(s) = spec.skip_target {
            if s >= spec.hidden.len() {
                return Err(NetworkError::SkipTarget {
                    skip: s,
                    hidden: spec.hidden.len(),
                });
            }
        }
        let mut net = Self {
            input_shift: vec![0.0; spec.input_dim],
            input_scale: vec![1.0; spec.input_dim],
            output_shift: vec![0.0; spec.target_dim],
            output_scale: vec![1.0; spec.target_dim],
            pitch_scale: 0.01,
            params: Vec::new(),
            spec,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shapes = net.layer_shapes();
        for (l, &(fan_in, fan_out)) in shapes.iter().enumerate() {
            let mut limit = (6.0 / (fan_in + fan_out).max(1) as f64).sqrt();
            if l + 1 == shapes.len() {
                // start close to the output mean
                limit *= 0.1;
            }
            for _ in 0..fan_in * fan_out {
                net.params.push(rng.random_range(-limit..=limit));
            }
            net.params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Ok(net)
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim
    }

    pub fn target_dim(&self) -> usize {
        self.spec.target_dim
    }

    /// Width of the raw output layer.
    pub fn output_dim(&self) -> usize {
        match self.spec.head {
            Head::Plain => self.spec.target_dim,
            Head::Mdn => 2 * self.spec.target_dim,
        }
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<(), NetworkError> {
        if params.len() != self.params.len() {
            return Err(NetworkError::ParamCount {
                got: params.len(),
                expected: self.params.len(),
            });
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// `(fan_in, fan_out)` of every layer, output layer last.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::new();
        let mut width = self.spec.input_dim;
        for (l, &h) in self.spec.hidden.iter().enumerate() {
            let skip = usize::from(self.spec.skip_target == Some(l));
            shapes.push((width + skip, h));
            width = h;
        }
        shapes.push((width, self.output_dim()));
        shapes
    }

    /// Sets the fixed input normalization `x' = (x - shift) / scale`.
    pub fn set_input_normalization(
        &mut self,
        shift: Vec<f64>,
        scale: Vec<f64>,
    ) -> Result<(), NetworkError> {
        if shift.len() != self.spec.input_dim || scale.len() != self.spec.input_dim {
            return Err(NetworkError::Normalization);
        }
        self.input_shift = shift;
        self.input_scale = scale;
        Ok(())
    }

    /// Sets the fixed output map `y = raw · scale + shift` (MDN log-variances
    /// are offset by `2 ln scale`).
    pub fn set_output_normalization(
        &mut self,
        shift: Vec<f64>,
        scale: Vec<f64>,
    ) -> Result<(), NetworkError> {
        if shift.len() != self.spec.target_dim || scale.len() != self.spec.target_dim {
            return Err(NetworkError::Normalization);
        }
        self.output_shift = shift;
        self.output_scale = scale;
        Ok(())
    }

    /// Input normalization from column means and standard deviations.
    /// Constant columns keep unit scale.
    pub fn fit_input_normalization<'a>(&mut self, inputs: impl IntoIterator<Item = &'a Seq>) {
        let (mean, std) = column_stats(inputs, self.spec.input_dim);
        self.input_shift = mean;
        self.input_scale = std;
    }

    /// Output normalization from target column means and standard deviations.
    /// Per-column output scale (standard deviation of the targets).
    pub fn output_scale(&self) -> &[f64] {
        &self.output_scale
    }

    pub fn fit_output_normalization<'a>(&mut self, targets: impl IntoIterator<Item = &'a Seq>) {
        let (mean, std) = column_stats(targets, self.spec.target_dim);
        self.output_shift = mean;
        self.output_scale = std;
    }

    pub fn forward(&self, x: &[f64], note_pitch: f64) -> Result<Vec<f64>, NetworkError> {
        self.forward_with(&self.params, x, note_pitch, None)
    }

    /// Forward pass with an explicit parameter vector, optionally recording
    /// the activations needed by [`backward`](Self::backward).
    pub fn forward_with(
        &self,
        params: &[f64],
        x: &[f64],
        note_pitch: f64,
        mut trace: Option<&mut Trace>,
    ) -> Result<Vec<f64>, NetworkError> {
        if x.len() != self.spec.input_dim {
            return Err(NetworkError::Arity {
                got: x.len(),
                expected: self.spec.input_dim,
            });
        }
        let mut h: Vec<f64> = x
            .iter()
            .zip(self.input_shift.iter().zip(&self.input_scale))
            .map(|(v, (s, k))| (v - s) / k)
            .collect();
        if let Some(tr) = trace.as_deref_mut() {
            tr.inputs.clear();
            tr.outputs.clear();
        }
        let shapes = self.layer_shapes();
        let mut offset = 0;
        for (l, &(fan_in, fan_out)) in shapes.iter().enumerate() {
            if self.spec.skip_target == Some(l) {
                h.push(note_pitch * self.pitch_scale);
            }
            debug_assert_eq!(h.len(), fan_in);
            let weights = &params[offset..offset + fan_in * fan_out];
            let bias = &params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            offset += fan_in * fan_out + fan_out;
            let last = l + 1 == shapes.len();
            let mut out = Vec::with_capacity(fan_out);
            for o in 0..fan_out {
                let row = &weights[o * fan_in..(o + 1) * fan_in];
                let z: f64 = bias[o] + row.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>();
                out.push(if last {
                    z
                } else {
                    self.spec.activation.apply(z)
                });
            }
            if let Some(tr) = trace.as_deref_mut() {
                tr.inputs.push(std::mem::take(&mut h));
                if !last {
                    tr.outputs.push(out.clone());
                }
            }
            h = out;
        }
        if let Some(tr) = trace {
            tr.raw = h.clone();
        }
        Ok(self.denormalize(h))
    }

    fn denormalize(&self, mut raw: Vec<f64>) -> Vec<f64> {
        let d = self.spec.target_dim;
        for i in 0..d {
            raw[i] = raw[i] * self.output_scale[i] + self.output_shift[i];
            if self.spec.head == Head::Mdn {
                raw[d + i] += 2.0 * self.output_scale[i].ln();
            }
        }
        raw
    }

    /// Accumulates into `grad` the parameter gradient for an output
    /// gradient `dy` (in denormalized output units). Returns the gradient
    /// with respect to the note-pitch input.
    pub fn backward(&self, params: &[f64], trace: &Trace, dy: &[f64], grad: &mut [f64]) -> f64 {
        let d = self.spec.target_dim;
        let mut delta: Vec<f64> = dy.to_vec();
        for i in 0..d {
            delta[i] *= self.output_scale[i];
        }
        let shapes = self.layer_shapes();
        let mut offsets = Vec::with_capacity(shapes.len());
        let mut offset = 0;
        for &(fan_in, fan_out) in &shapes {
            offsets.push(offset);
            offset += fan_in * fan_out + fan_out;
        }
        let mut d_pitch = 0.0;
        for l in (0..shapes.len()).rev() {
            let (fan_in, fan_out) = shapes[l];
            let off = offsets[l];
            let input = &trace.inputs[l];
            let mut d_input = vec![0.0; fan_in];
            for o in 0..fan_out {
                let g = delta[o];
                if g == 0.0 {
                    continue;
                }
                let w_row = off + o * fan_in;
                for i in 0..fan_in {
                    grad[w_row + i] += g * input[i];
                    d_input[i] += g * params[w_row + i];
                }
                grad[off + fan_in * fan_out + o] += g;
            }
            if self.spec.skip_target == Some(l) {
                d_pitch = d_input.pop().unwrap_or(0.0) * self.pitch_scale;
            }
            if l == 0 {
                break;
            }
            let prev_out = &trace.outputs[l - 1];
            delta = d_input
                .iter()
                .zip(prev_out)
                .map(|(g, &y)| g * self.spec.activation.derivative(y))
                .collect();
        }
        d_pitch
    }

    /// Forward pass over every row of `x`.
    pub fn forward_seq(&self, x: &Seq, note_pitch: &[f64]) -> Result<Seq, NetworkError> {
        let mut out = Seq::zeros(x.frames(), self.output_dim());
        for t in 0..x.frames() {
            let pitch = note_pitch.get(t).copied().unwrap_or(0.0);
            let y = self.forward(x.row(t), pitch)?;
            out.row_mut(t).copy_from_slice(&y);
        }
        Ok(out)
    }
}

fn column_stats<'a>(seqs: impl IntoIterator<Item = &'a Seq>, dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut n = 0usize;
    let mut sum = vec![0.0; dim];
    let mut sq = vec![0.0; dim];
    let seqs: Vec<&Seq> = seqs.into_iter().collect();
    for s in &seqs {
        for row in s.rows() {
            for d in 0..dim {
                sum[d] += row[d];
            }
        }
        n += s.frames();
    }
    let mean: Vec<f64> = sum.iter().map(|v| v / n.max(1) as f64).collect();
    for s in &seqs {
        for row in s.rows() {
            for d in 0..dim {
                sq[d] += (row[d] - mean[d]).powi(2);
            }
        }
    }
    let std = sq
        .iter()
        .map(|v| {
            let s = (v / n.max(1) as f64).sqrt();
            if s > 1e-8 {
                s
            } else {
                1.0
            }
        })
        .collect();
    (mean, std)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(hidden: Vec<usize>, skip: Option<usize>) -> NetworkSpec {
        NetworkSpec {
            input_dim: 3,
            hidden,
            activation: Activation::Tanh,
            target_dim: 2,
            head: Head::Plain,
            skip_target: skip,
        }
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let mut net = Network::new(spec(vec![4], Some(0)), 1).unwrap();
        net.params_mut().fill(0.0);
        assert_eq!(
            net.forward(&[1.0, -2.0, 3.0], 1200.0).unwrap(),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn single_layer_is_affine() {
        let mut net = Network::new(spec(vec![], None), 1).unwrap();
        // W = [[1,2,3],[0,-1,0.5]], b = [0.5,-1]
        net.set_params(&[1.0, 2.0, 3.0, 0.0, -1.0, 0.5, 0.5, -1.0])
            .unwrap();
        let y = net.forward(&[1.0, 1.0, 2.0], 0.0).unwrap();
        assert_eq!(y, vec![1.0 + 2.0 + 6.0 + 0.5, -1.0 + 1.0 - 1.0]);
    }

    #[test]
    fn skip_path_is_live() {
        let mut net = Network::new(spec(vec![2], Some(0)), 1).unwrap();
        let shapes = net.layer_shapes();
        assert_eq!(shapes, vec![(4, 2), (2, 2)]);
        let p = net.params_mut();
        p.fill(0.0);
        // unit weight from the pitch input to hidden unit 0, identity out
        p[3] = 1.0;
        p[10] = 1.0;
        let a = net.forward(&[0.5, 0.5, 0.5], 0.0).unwrap();
        let b = net.forward(&[0.5, 0.5, 0.5], 1200.0).unwrap();
        assert_ne!(a, b);
        assert!((b[0] - (12.0f64).tanh()).abs() < 1e-12);
    }

    #[test]
    fn bad_arity_and_skip() {
        let net = Network::new(spec(vec![2], None), 1).unwrap();
        assert!(matches!(
            net.forward(&[1.0], 0.0),
            Err(NetworkError::Arity { .. })
        ));
        assert!(Network::new(spec(vec![2], Some(1)), 1).is_err());
        assert!(Network::new(spec(vec![], Some(0)), 1).is_err());
    }

    #[test]
    fn mdn_log_variance_offset() {
        let mut net = Network::new(
            NetworkSpec {
                head: Head::Mdn,
                target_dim: 1,
                ..spec(vec![], None)
            },
            2,
        )
        .unwrap();
        net.params_mut().fill(0.0);
        net.set_output_normalization(vec![10.0], vec![3.0]).unwrap();
        let y = net.forward(&[0.0; 3], 0.0).unwrap();
        assert_eq!(y[0], 10.0);
        assert!((y[1].exp() - 9.0).abs() < 1e-12);
    }

    #[test]
    fn backward_matches_finite_differences() {
        for act in [Activation::Tanh, Activation::Sigmoid, Activation::Linear] {
            let mut net = Network::new(
                NetworkSpec {
                    activation: act,
                    ..spec(vec![4, 3], Some(1))
                },
                7,
            )
            .unwrap();
            net.set_input_normalization(vec![0.1, -0.2, 0.3], vec![2.0, 0.5, 1.0])
                .unwrap();
            net.set_output_normalization(vec![1.0, -1.0], vec![2.0, 0.5])
                .unwrap();
            let x = [0.3, -0.7, 1.1];
            let pitch = 250.0;
            let dy = [0.7, -1.3];
            let params = net.params().to_vec();
            let mut trace = Trace::default();
            net.forward_with(&params, &x, pitch, Some(&mut trace))
                .unwrap();
            let mut grad = vec![0.0; params.len()];
            let d_pitch = net.backward(&params, &trace, &dy, &mut grad);
            let f = |p: &[f64], pitch: f64| -> f64 {
                let y = net.forward_with(p, &x, pitch, None).unwrap();
                y[0] * dy[0] + y[1] * dy[1]
            };
            let h = 1e-6;
            for i in 0..params.len() {
                let mut a = params.clone();
                let mut b = params.clone();
                a[i] += h;
                b[i] -= h;
                let fd = (f(&a, pitch) - f(&b, pitch)) / (2.0 * h);
                assert!(
                    (fd - grad[i]).abs() < 1e-6 * (1.0 + fd.abs()),
                    "{act:?} param {i}"
                );
            }
            let fd = (f(&params, pitch + 1e-3) - f(&params, pitch - 1e-3)) / 2e-3;
            assert!((fd - d_pitch).abs() < 1e-6 * (1.0 + fd.abs()));
        }
    }
}
