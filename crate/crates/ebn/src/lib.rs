//! Hybrid Bayesian networks with continuous and discrete nodes, reduced to
//! discrete-only networks whose conditional probability tables are computed
//! by structural reliability methods (FORM and Monte Carlo), followed by
//! exact discrete inference.
//!
//! The crate is organized along the pipeline:
//!
//! - [`dist`] — continuous marginals, Gaussian-copula joints, and the
//!   standard-normal transforms the reliability solvers operate in.
//! - [`lsf`] — the limit-state expression language and cut-set domains.
//! - [`model`] — the hybrid graph data model and its graph-theoretic
//!   queries (blankets, d-separation, Markov envelopes).
//! - [`srm`] — reliability solvers: FORM, crude Monte Carlo, importance
//!   sampling, and the total-probability reduction.
//! - [`reduce`] — graph transformations: barren-node removal, arc
//!   reversal, elimination planning, discretization, evidence nodes.
//! - [`compile`] — turns a hybrid graph plus an elimination plan into a
//!   fully parameterized discrete network.
//! - [`infer`] — exact inference on the discrete network by variable
//!   elimination.
//! - [`cli`] — model-file formats, the command-line driver, and the
//!   hybrid sampling oracle used for validation.

pub mod cli;
pub mod compile;
pub mod dist;
pub mod infer;
pub mod lsf;
pub mod model;
pub mod reduce;
pub mod sim;
pub mod srm;

#[cfg(test)]
pub(crate) mod testutil;
