//! Neural field estimators: a physics-informed network over the region of
//! interest, its plain data-only variant, and supervised networks mapping
//! microphone observations to fields or expansion coefficients.

mod mlp;
mod train;

pub use mlp::{mlp_forward, mlp_laplacian, Activation, MlpModel};
pub use train::{
    generate_training_set, pinn_gradient, pinn_loss, pinn_train, pinn_train_from,
    supervised_train, LossSample, PdeWeight, PinnConfig, PinnReport, SupervisedConfig,
    SupervisedDataset, SupervisedModel, SupervisedReport, SupervisedTarget, TrainingSetSpec,
    DEFAULT_COLLOCATION, DEFAULT_HIDDEN, DEFAULT_STEP_SIZE,
};
