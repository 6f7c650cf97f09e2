//! Node payloads: local probability models for discrete and continuous
//! variables.

use crate::dist::{DistError, Marginal};
use crate::lsf::{DomainSpec, Expr};
use std::collections::HashMap;

/// How a discrete node's conditional PMF is specified.
#[derive(Debug, Clone, PartialEq)]
pub enum DiscreteKind {
    /// Plain conditional probability table over the joint states of the
    /// discrete parents: `table[cfg * m + own_state]`, configurations in
    /// mixed-radix order with the first-declared parent most significant.
    Cpt { table: Vec<f64> },
    /// States defined as domains in the outcome space of the parents;
    /// the node is deterministic given its parents.
    DomainDet(DomainForm),
    /// States defined by probability expressions over the parents (the
    /// node stays random given its parents). If one expression fewer
    /// than states is given, the last state is the complement.
    Pmf { exprs: Vec<Expr> },
    /// Local model invalidated by a structural transformation; filled in
    /// again by compilation.
    Pending,
}

/// Domain specification of a domain-deterministic node.
#[derive(Debug, Clone, PartialEq)]
pub enum DomainForm {
    /// A scalar expression partitioned by ordered cut points: state k is
    /// the event `cuts[k-1] < g <= cuts[k]` (outer intervals unbounded).
    /// Exclusive and exhaustive by construction.
    Threshold { g: Expr, cuts: Vec<f64> },
    /// Explicit per-state domains, optionally per discrete-parent
    /// configuration. Exclusivity/exhaustiveness is checked
    /// stochastically at validation.
    General { rules: Vec<DomainRule> },
}

/// One explicit domain rule.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainRule {
    /// Index of the state this rule defines.
    pub state: usize,
    /// Discrete-parent assignments this rule is restricted to
    /// (label, state label); `None` applies to every configuration.
    pub given: Option<Vec<(String, String)>>,
    pub domain: DomainSpec,
}

/// A discrete random variable.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteNode {
    pub label: String,
    /// Ordered state labels, at least two.
    pub states: Vec<String>,
    /// Numeric codes the states take when the node appears inside an
    /// expression. Defaults to 0, 1, ...
    pub numeric: Vec<f64>,
    pub kind: DiscreteKind,
}

impl DiscreteNode {
    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }

    /// The domain of `state` under the threshold form, as expressions
    /// suitable for reliability integration (both inequalities `<= 0`).
    pub fn threshold_domain(g: &Expr, cuts: &[f64], state: usize) -> DomainSpec {
        let mut members = Vec::new();
        if state < cuts.len() {
            // g - c_k <= 0
            members.push(Expr::sub(g.clone(), Expr::num(cuts[state])));
        }
        if state > 0 {
            // c_{k-1} - g <= 0
            members.push(Expr::sub(Expr::num(cuts[state - 1]), g.clone()));
        }
        if members.is_empty() {
            // single-state partition: the whole space
            members.push(Expr::num(-1.0));
        }
        DomainSpec::intersection(members)
    }

    /// Threshold-form state selection: the first k with g <= cuts[k],
    /// else the last state.
    pub fn threshold_state(cuts: &[f64], g_value: f64) -> usize {
        cuts.iter().position(|&c| g_value <= c).unwrap_or(cuts.len())
    }
}

/// Families a conditional marginal may be drawn from with
/// expression-valued parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    Normal,
    Lognormal,
    Uniform,
    Exponential,
    Gumbel,
    ExpTail,
    NegExpTail,
}

impl FamilyKind {
    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Normal => "normal",
            FamilyKind::Lognormal => "lognormal",
            FamilyKind::Uniform => "uniform",
            FamilyKind::Exponential => "exponential",
            FamilyKind::Gumbel => "gumbel",
            FamilyKind::ExpTail => "exp_tail",
            FamilyKind::NegExpTail => "neg_exp_tail",
        }
    }

    pub fn lookup(name: &str) -> Option<FamilyKind> {
        Some(match name {
            "normal" => FamilyKind::Normal,
            "lognormal" => FamilyKind::Lognormal,
            "uniform" => FamilyKind::Uniform,
            "exponential" => FamilyKind::Exponential,
            "gumbel" => FamilyKind::Gumbel,
            "exp_tail" => FamilyKind::ExpTail,
            "neg_exp_tail" => FamilyKind::NegExpTail,
            _ => return None,
        })
    }

    pub fn arity(self) -> usize {
        match self {
            FamilyKind::Exponential => 1,
            _ => 2,
        }
    }

    /// Builds the concrete marginal from evaluated parameters.
    pub fn construct(self, params: &[f64]) -> Result<Marginal, DistError> {
        if params.len() != self.arity() {
            return Err(DistError::BadParameter(format!(
                "{} takes {} parameter(s), got {}",
                self.name(),
                self.arity(),
                params.len()
            )));
        }
        let m = match self {
            FamilyKind::Normal => Marginal::Normal {
                mean: params[0],
                sd: params[1],
            },
            FamilyKind::Lognormal => Marginal::Lognormal {
                mu: params[0],
                sigma: params[1],
            },
            FamilyKind::Uniform => Marginal::Uniform {
                lo: params[0],
                hi: params[1],
            },
            FamilyKind::Exponential => Marginal::Exponential { rate: params[0] },
            FamilyKind::Gumbel => Marginal::Gumbel {
                loc: params[0],
                scale: params[1],
            },
            FamilyKind::ExpTail => Marginal::ExpTail {
                lo: params[0],
                rate: params[1],
            },
            FamilyKind::NegExpTail => Marginal::NegExpTail {
                hi: params[0],
                rate: params[1],
            },
        };
        m.validate()?;
        Ok(m)
    }
}

/// Conditional marginal of one component of a continuous node.
#[derive(Debug, Clone, PartialEq)]
pub enum MarginalSpec {
    /// Family with parameters given as expressions over the parents.
    Param { family: FamilyKind, params: Vec<Expr> },
    /// One concrete marginal per joint discrete-parent configuration
    /// (produced by interval discretization).
    PerConfig { table: Vec<Marginal> },
}

impl MarginalSpec {
    pub fn constant(family: FamilyKind, params: &[f64]) -> Self {
        MarginalSpec::Param {
            family,
            params: params.iter().map(|&v| Expr::num(v)).collect(),
        }
    }

    /// Resolves to a concrete marginal. `bindings` supplies parent
    /// values for expression parameters; `cfg` selects the entry of a
    /// per-configuration table.
    pub fn resolve(
        &self,
        bindings: &HashMap<String, f64>,
        cfg: usize,
    ) -> Result<Marginal, String> {
        match self {
            MarginalSpec::Param { family, params } => {
                let mut vals = Vec::with_capacity(params.len());
                for p in params {
                    vals.push(crate::lsf::eval_expr(p, bindings).map_err(|e| e.to_string())?);
                }
                family.construct(&vals).map_err(|e| e.to_string())
            }
            MarginalSpec::PerConfig { table } => table
                .get(cfg)
                .cloned()
                .ok_or_else(|| format!("no marginal for parent configuration {cfg}")),
        }
    }

    /// Variables referenced by parameter expressions.
    pub fn free_vars(&self) -> std::collections::BTreeSet<String> {
        match self {
            MarginalSpec::Param { params, .. } => {
                let mut out = std::collections::BTreeSet::new();
                for p in params {
                    out.append(&mut p.free_vars());
                }
                out
            }
            MarginalSpec::PerConfig { .. } => Default::default(),
        }
    }
}

/// A vector of continuous random variables with a Gaussian-copula
/// dependence structure across components.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousNode {
    pub label: String,
    /// Component names, globally unique within the graph.
    pub components: Vec<String>,
    /// Conditional marginal per component.
    pub marginals: Vec<MarginalSpec>,
    /// Copula correlation over components (identity = independence).
    pub correlation: Vec<Vec<f64>>,
}

impl ContinuousNode {
    pub fn scalar(label: &str, component: &str, marginal: MarginalSpec) -> Self {
        ContinuousNode {
            label: label.to_string(),
            components: vec![component.to_string()],
            marginals: vec![marginal],
            correlation: vec![vec![1.0]],
        }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }
}

/// A node of the hybrid graph.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Discrete(DiscreteNode),
    Continuous(ContinuousNode),
}

impl Node {
    pub fn label(&self) -> &str {
        match self {
            Node::Discrete(d) => &d.label,
            Node::Continuous(c) => &c.label,
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Node::Discrete(_))
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self, Node::Continuous(_))
    }

    pub fn as_discrete(&self) -> Option<&DiscreteNode> {
        match self {
            Node::Discrete(d) => Some(d),
            Node::Continuous(_) => None,
        }
    }

    pub fn as_continuous(&self) -> Option<&ContinuousNode> {
        match self {
            Node::Continuous(c) => Some(c),
            Node::Discrete(_) => None,
        }
    }
}
