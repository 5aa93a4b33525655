//! The scaled residual network: activations, parameters and their
//! initialization schemes, datasets, and forward passes.

mod activation;
mod dataset;
mod forward;
mod params;
mod residual;

pub use activation::Activation;
pub use dataset::{Dataset, DATA_STREAM};
pub use forward::{forward, forward_batch, output, BatchTrajectory, Trajectory};
pub(crate) use forward::{layer_scales, perceptron_increment};
pub use params::{
    init_gp_smooth, init_iid, init_standard, Dims, Embedding, InitScheme, ResNetParams,
    GP_JITTER_START, GP_JITTER_STEPS,
};
pub use residual::{general_forward, general_gradients, GeneralResidualMap, Perceptron, PerceptronWeights};
