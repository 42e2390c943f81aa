//! C-learning: large-margin classification with the coherence-function
//! loss family.
//!
//! - [`loss`]: coherence function, C-loss, L-variant and classical surrogates.
//! - [`population`]: closed-form population minimizer and its inverse, the
//!   probability link used for calibration.
//! - [`kernels`]: RBF/linear kernels and bandwidth heuristics.
//! - [`solver`]: elastic-net regularized C-learning by coordinate descent,
//!   in kernel and linear expansions, plus a smoothed-SVM mode.
//! - [`calibration`]: class probabilities from SVM scores.
//! - [`data`], [`eval`], [`select`]: simulations, metrics, replication
//!   harness and cross-validation.

pub mod calibration;
pub mod data;
pub mod error;
pub mod eval;
pub mod io;
pub mod kernels;
pub mod loss;
pub mod population;
pub mod select;
pub mod solver;

pub use error::{Error, Result};
pub use loss::{LossParams, SurrogateKind};
