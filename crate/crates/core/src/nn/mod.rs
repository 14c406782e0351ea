//! Deterministic neural-network core: dense, batch-norm and LSTM layers with
//! exact analytic gradients, MSE loss, the optimizer and a finite-difference
//! gradient oracle.

pub mod adam;
pub mod batchnorm;
pub mod dense;
pub mod gradcheck;
pub mod loss;
pub mod lstm;
pub mod params;

pub use adam::OptimizerState;
pub use batchnorm::{batchnorm_backward, batchnorm_forward, batchnorm_inference, BatchNormParams};
pub use dense::{dense_backward, dense_forward, DenseParams};
pub use gradcheck::{grad_check, GradCheckReport};
pub use loss::mse_loss;
pub use lstm::{backprop_through_time, lstm_cell_forward, lstm_sequence_forward, LstmParams, StepCache};
pub use params::{Matrix, TensorSet};
