//! The enhanced-network data model: discrete nodes, continuous vector
//! nodes, their local probability models, and the graph-theoretic
//! queries the reduction methodology rests on.

mod graph;
mod node;
mod queries;
pub mod radix;
mod validate;

pub use graph::{EbnGraph, NodeId};
pub use node::{
    ContinuousNode, DiscreteKind, DiscreteNode, DomainForm, DomainRule, FamilyKind, MarginalSpec,
    Node,
};
pub use queries::{Envelope, EnvelopeReport};
pub use validate::{
    validate_graph, ValidationReport, Violation, ViolationKind, ENVELOPE_MAX, ENVELOPE_WARN,
};
pub(crate) use validate::resolve_rule as resolve_domain_rule;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("duplicate node label `{0}`")]
    DuplicateLabel(String),
    #[error("duplicate component name `{0}`")]
    DuplicateComponent(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("edge {0} -> {1} already present")]
    DuplicateEdge(String, String),
    #[error("self-loop on `{0}`")]
    SelfLoop(String),
    #[error("graph contains a directed cycle")]
    Cycle,
    #[error("query sets must be disjoint (node `{0}` appears twice)")]
    OverlappingSets(String),
    #[error("node `{0}` is not discrete")]
    NotDiscrete(String),
    #[error("node `{0}` is not continuous")]
    NotContinuous(String),
    #[error("node `{0}` has no state named `{1}`")]
    UnknownState(String, String),
}
