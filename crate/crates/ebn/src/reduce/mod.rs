//! Graph transformations that reduce the hybrid network: barren-node
//! removal, arc reversal, elimination planning, interval
//! discretization, and evidence-node construction.

pub mod discretize;
pub mod evidence;
pub mod plan;
pub mod transform;

pub use discretize::{discretize_node, DiscretizationScheme, DiscretizeTopology, InteriorModel};
pub use evidence::{add_evidence_node, EvidenceForm, EvidenceNodeSpec};
pub use plan::{
    eliminate_continuous, EliminationPlan, EnvelopePlan, OrderingPolicy, PlanAction, PlanScore,
};
pub use transform::{remove_barren, reverse_arc};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReduceError {
    #[error("no edge {0} -> {1}")]
    MissingEdge(String, String),
    #[error("cannot reverse {0} -> {1}: an alternative directed path exists")]
    AlternativePath(String, String),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("no legal elimination order for {{{0}}}")]
    NoLegalOrder(String),
    #[error("elimination produced a non-total factorization chain: {0}")]
    NonTotalChain(String),
    #[error("invalid discretization scheme: {0}")]
    BadScheme(String),
    #[error("invalid evidence node: {0}")]
    BadEvidence(String),
}
