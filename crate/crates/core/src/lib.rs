//! Thresholded sparse regression.
//!
//! Penalized least squares with hard-thresholding, L0, SICA and Lasso
//! penalties fitted by a path-following coordinate algorithm, an L2
//! (ridge) refitting stage with analytic risk curves, collinearity
//! diagnostics, and a Monte Carlo harness for simulation studies.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod penalty;
pub mod refit;
pub mod rng;
pub mod sim;
pub mod solver;
pub mod split;

pub use data::{objective, LinearPredictor, RegressionData, ResponseColumn, TrueModel};
pub use error::{Error, Result};
pub use penalty::{max_concavity, penalty_value, univariate_minimize, PenaltyFamily, PenaltySpec, ThresholdResult};
pub use solver::{ica_fit, select_by_validation, solve_path, LambdaGrid, PathConfig, SolutionPath, SparseFit};
