//! Regression surrogates for the drag surface: a linear baseline with
//! k-fold cross-validation and the six-hidden-layer ReLU network.

mod linear;
mod mlp;

pub use linear::{fit_linear, kfold_cv, predict_linear, CvReport, LinearModel};
pub use mlp::{
    batch_loss, batch_param_gradient, mlp_forward, mlp_init, mlp_init_custom,
    mlp_input_gradient, train, MlpModel, TrainConfig,
    TrainError, TrainTrace, HIDDEN_LAYERS, HIDDEN_WIDTH,
};
