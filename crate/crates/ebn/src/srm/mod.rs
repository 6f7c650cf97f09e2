//! Structural reliability solvers: FORM for component problems, crude
//! and importance-sampling Monte Carlo for component and system
//! problems, and the total-probability reduction to standard form.

pub mod form;
pub mod mc;
pub mod problem;
pub mod rng;

pub use form::{form_component, FormOptions, FormResult};
pub use mc::{
    is_probability, mc_probability, system_probability, EstimateResult, McPolicy, SystemMethod,
};
pub use problem::{
    reduce_total_probability, PreparedProblem, ProblemSpace, ReliabilityProblem, SpaceBlock,
};
pub use rng::{derive_seed, CountingRng};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SrmError {
    #[error("ill-posed reliability problem: {0}")]
    BadProblem(String),
    #[error("evaluation failed: {0}")]
    Eval(String),
    #[error("FORM not applicable: {0}")]
    FormNotApplicable(String),
    #[error("gradient failure: {0}")]
    GradientFailure(String),
}
