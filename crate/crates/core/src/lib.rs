//! Eigencomponent dynamics of SGD, GD and randomized Kaczmarz on synthetic
//! least-squares problems, with the matching analytic predictions.

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod phase;
pub mod problem;
pub mod rng;
pub mod schedule;
pub mod solvers;
pub mod theory;

pub use config::{parse_config, ExperimentConfig, FigurePreset, Scale};
pub use error::{Error, Result};
pub use problem::{
    build_problem, component, compute_constants, Consistency, ProblemConstants, Spacing,
    SpectrumSpec, SyntheticProblem,
};
pub use schedule::{Diagnostic, StepSchedule};
pub use solvers::{
    run_ensemble, run_trajectory, EnsembleSummary, Method, Recording, RepetitionPlan, Trace,
};
