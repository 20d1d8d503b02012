//! Regression networks, training criteria and parameter generation.

mod banded;
mod bias;
mod checkpoint;
mod loss;
mod network;
mod optim;
mod train;
mod window;

pub use banded::{BandedCholesky, BandedMatrix, NotPositiveDefinite};
pub use bias::{expand_bias, expand_bias_on, PitchBias};
pub use checkpoint::{Checkpoint, CheckpointError, ModelKind, FORMAT_VERSION};
pub use loss::{
    build_weight_vector, f0_prior_loss, gaussian_nll, loss_dynamic_target, loss_static,
    loss_static_out_dynamic, mdn_nll, GlobalVariance, LossError, LossGrad, PriorLoss,
    VARIANCE_FLOOR,
};
pub use network::{Activation, Head, Network, NetworkError, NetworkSpec, Trace};
pub use optim::{minimize, Method, OptimizerConfig, TrainError};
pub use train::{train, Criterion, F0Stream, Problem, TrainOutcome, TrainRecord, TrainSetup};
pub use window::{build_window_matrix, mlpg, MlpgError, WindowError, WindowMatrix, WindowSet};
