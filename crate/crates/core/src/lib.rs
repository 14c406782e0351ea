//! FDR-controlled feature selection for longitudinal panels.
//!
//! The method builds knockoff copies of every feature with a sequence
//! autoencoder fitted under a latent factor model, trains a recurrent
//! prediction network on the augmented panel, derives an antisymmetric
//! importance contrast `W_j` per feature from the trained weights, and
//! selects features whose `W_j` clears a data-dependent threshold that
//! controls the false discovery rate.
//!
//! Crate layout:
//! - [`nn`]: dense/LSTM/batch-norm layers, exact backpropagation through
//!   time, Adam, and a finite-difference gradient checker.
//! - [`knockoffs`]: the sequence autoencoder and knockoff sampling.
//! - [`prediction`]: the prediction network and the `W` statistics.
//! - [`selection`]: thresholds, selection, and evaluation metrics.
//! - [`sim`]: synthetic panels from linear/logistic latent factor models.
//! - [`io`]: panel files, CLR transforms, missingness filters, reports.
//! - [`pipeline`]: end-to-end runs and seeded repetition.

pub mod error;
pub mod io;
pub mod knockoffs;
pub mod nn;
pub mod panel;
pub mod pipeline;
pub mod prediction;
pub mod rng;
pub mod selection;
pub mod sim;

pub use error::{Error, Result};
pub use panel::TimeSeriesPanel;
