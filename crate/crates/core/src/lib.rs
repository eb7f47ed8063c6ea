//! Solvers for stochastic Nash equilibrium problems written as monotone
//! variational inequalities over boxes.
//!
//! The central method is the stochastic relaxed forward-backward iteration
//! ([`solver::srfb_step`]), run either with an increasing-batch oracle on the
//! last iterate or with a fixed mini-batch and iterate averaging. Projected
//! forward-backward, extragradient, PastEG and Adam are provided as
//! baselines, together with the bilinear and logistic benchmark games.

pub mod benchmarks;
pub mod error;
pub mod experiment;
pub mod feasible;
pub mod metrics;
pub mod oracle;
pub mod point;
pub mod problem;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
pub use feasible::{diameter_sq, BoxConstraint, FeasibleSet};
pub use oracle::{BatchSchedule, NoiseModel, Oracle, OracleConfig, OracleScheme};
pub use point::JointPoint;
pub use problem::{Pseudogradient, ViProblem};
pub use solver::{Algorithm, Averaging, SolverConfig, SolverState};
