//! Bayesian optimization with an explicit global-regret stopping rule.
//!
//! The optimizer alternates between a Gaussian-process-guided global search and
//! a local quasi-Newton phase started once the surrogate is confident that a
//! convex basin around its minimizer contains the global optimum. It stops when
//! the estimated regret of that basin falls below a target.

pub mod acquisition;
pub mod controller;
pub mod convexity;
pub mod domain;
pub mod error;
pub mod gp;
pub mod harness;
pub mod kernel;
pub mod linalg;
pub mod local;
pub mod objectives;
pub mod optim;
pub mod regret;
pub mod rng;
pub mod stats;

pub use controller::{
    run, run_with_hook, BlossomConfig, Phase, RunResult, StepRecord, TerminationReason,
};
pub use domain::{Domain, Observation};
pub use error::{Error, Result};
pub use gp::{DerivativeSpec, GaussianBelief, GpModel, HessianBelief};
pub use kernel::{kernel_derivative, KernelFamily, KernelSpec};
