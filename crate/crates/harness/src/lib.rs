//! Seeded, resumable experiment drivers for the robust Wasserstein solvers.
//!
//! An experiment expands its parameters and seed list into trial keys, runs
//! each trial independently, and then checks aggregate assertions over the
//! records. Trials may run on several threads; records are always sorted by
//! key, so the CSV output depends only on the spec.

pub mod error;
pub mod experiments;
pub mod fixtures;
pub mod spec;
pub mod stats;

pub use error::{HarnessError, Result};
pub use experiments::{registered, run_experiment, RunOptions};
pub use spec::{Assertion, ExperimentOutcome, ExperimentSpec, ParamValue, Params, TrialKey, TrialRecord};
