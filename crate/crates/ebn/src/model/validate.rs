//! Structural validation of a hybrid graph. Violations are data, not
//! faults: the report lists everything found and an empty report means
//! the graph is well formed.

use super::graph::{EbnGraph, NodeId};
use super::node::{DiscreteKind, DomainForm, MarginalSpec, Node};
use super::radix;
use crate::dist::CholFactor;
use std::collections::BTreeSet;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Cycle,
    DanglingEdge,
    BadStates,
    CptShape,
    CptNormalization,
    PropertyB,
    Correlation,
    ExprScope,
    DomainForm,
    PmfForm,
    PendingModel,
    EnvelopeSize,
    DomainCoverage,
    PmfRange,
}

#[derive(Debug, Clone)]
pub struct Violation {
    pub kind: ViolationKind,
    pub node: Option<String>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.node {
            Some(n) => write!(f, "[{:?}] {}: {}", self.kind, n, self.message),
            None => write!(f, "[{:?}] {}", self.kind, self.message),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub(crate) fn violation(&mut self, kind: ViolationKind, node: Option<&str>, message: String) {
        self.violations.push(Violation {
            kind,
            node: node.map(str::to_string),
            message,
        });
    }
}

/// Discrete-member guard: planning warns above this envelope size.
pub const ENVELOPE_WARN: usize = 15;
/// Discrete-member guard: validation rejects above this envelope size.
pub const ENVELOPE_MAX: usize = 20;

/// Runs every structural check. Stochastic checks (state-domain
/// coverage, PMF ranges at sampled parents) live in [`crate::sim`].
pub fn validate_graph(graph: &EbnGraph) -> ValidationReport {
    let mut report = ValidationReport::default();

    if graph.topological_order().is_err() {
        report.violation(
            ViolationKind::Cycle,
            None,
            "graph contains a directed cycle".into(),
        );
    }

    for (from, to) in graph.edges() {
        if !graph.contains(from) || !graph.contains(to) {
            report.violation(
                ViolationKind::DanglingEdge,
                None,
                format!("edge {from} -> {to} references a removed node"),
            );
        }
    }

    for id in graph.node_ids() {
        match graph.node(id) {
            Node::Discrete(_) => check_discrete(graph, id, &mut report),
            Node::Continuous(_) => check_continuous(graph, id, &mut report),
        }
    }

    let envelopes = graph.markov_envelopes();
    for e in &envelopes.envelopes {
        let n = e.discrete_members.len();
        let names: Vec<&str> = e
            .continuous_members
            .iter()
            .map(|&x| graph.label(x))
            .collect();
        if n > ENVELOPE_MAX {
            report.violation(
                ViolationKind::EnvelopeSize,
                None,
                format!(
                    "Markov envelope of {{{}}} has {n} discrete members (limit {ENVELOPE_MAX})",
                    names.join(", ")
                ),
            );
        } else if n > ENVELOPE_WARN {
            report.warnings.push(format!(
                "Markov envelope of {{{}}} has {n} discrete members; \
                 expect {n}-variable potentials in the reduced network",
                names.join(", ")
            ));
        }
    }

    report
}

/// Names an expression inside node `id` may reference: components of
/// continuous parents plus labels of discrete parents.
pub fn parent_scope(graph: &EbnGraph, id: NodeId) -> BTreeSet<String> {
    let mut scope = BTreeSet::new();
    for &p in graph.parents(id) {
        match graph.node(p) {
            Node::Discrete(d) => {
                scope.insert(d.label.clone());
            }
            Node::Continuous(c) => {
                for comp in &c.components {
                    scope.insert(comp.clone());
                }
            }
        }
    }
    scope
}

fn check_scope(
    graph: &EbnGraph,
    id: NodeId,
    used: &BTreeSet<String>,
    what: &str,
    report: &mut ValidationReport,
) {
    let scope = parent_scope(graph, id);
    for name in used {
        if !scope.contains(name) {
            report.violation(
                ViolationKind::ExprScope,
                Some(graph.label(id)),
                format!("{what} references `{name}`, which is not a declared parent"),
            );
        }
    }
}

fn check_discrete(graph: &EbnGraph, id: NodeId, report: &mut ValidationReport) {
    let d = graph.discrete(id).expect("checked discrete");
    let label = d.label.clone();
    let m = d.states.len();
    if m < 2 {
        report.violation(
            ViolationKind::BadStates,
            Some(&label),
            format!("needs at least 2 states, has {m}"),
        );
    }
    let unique: BTreeSet<&String> = d.states.iter().collect();
    if unique.len() != m {
        report.violation(
            ViolationKind::BadStates,
            Some(&label),
            "duplicate state labels".into(),
        );
    }
    if d.numeric.len() != m {
        report.violation(
            ViolationKind::BadStates,
            Some(&label),
            format!("{} numeric codes for {m} states", d.numeric.len()),
        );
    }

    let has_continuous_parent = !graph.continuous_parents(id).is_empty();
    let cards = graph.parent_cards(id);
    let n_cfg = radix::config_count(&cards);

    match &d.kind {
        DiscreteKind::Cpt { table } => {
            if has_continuous_parent {
                report.violation(
                    ViolationKind::PropertyB,
                    Some(&label),
                    "a plain-CPT node cannot be the child of a continuous node; \
                     define its states as domains or a parameterized PMF"
                        .into(),
                );
            }
            if table.len() != n_cfg * m {
                report.violation(
                    ViolationKind::CptShape,
                    Some(&label),
                    format!(
                        "table has {} entries, expected {} ({} configurations x {} states)",
                        table.len(),
                        n_cfg * m,
                        n_cfg,
                        m
                    ),
                );
            } else {
                for cfg in 0..n_cfg {
                    let col = &table[cfg * m..(cfg + 1) * m];
                    let sum: f64 = col.iter().sum();
                    if col.iter().any(|&p| !(0.0..=1.0 + 1e-9).contains(&p)) {
                        report.violation(
                            ViolationKind::CptNormalization,
                            Some(&label),
                            format!("configuration {cfg} has entries outside [0, 1]"),
                        );
                    } else if (sum - 1.0).abs() > 1e-9 {
                        report.violation(
                            ViolationKind::CptNormalization,
                            Some(&label),
                            format!("configuration {cfg} sums to {sum}, not 1"),
                        );
                    }
                }
            }
        }
        DiscreteKind::DomainDet(form) => {
            if !has_continuous_parent {
                // A domain over purely discrete parents is legal (the
                // expressions read the parents' numeric codes) but it is
                // usually a modeling mistake; surface it.
                report.warnings.push(format!(
                    "{label}: domain-deterministic node has no continuous parent"
                ));
            }
            match form {
                DomainForm::Threshold { g, cuts } => {
                    if cuts.len() + 1 != m {
                        report.violation(
                            ViolationKind::DomainForm,
                            Some(&label),
                            format!("{} cut points define {} states, node has {m}", cuts.len(), cuts.len() + 1),
                        );
                    }
                    if cuts.windows(2).any(|w| w[0] >= w[1]) {
                        report.violation(
                            ViolationKind::DomainForm,
                            Some(&label),
                            "cut points must be strictly increasing".into(),
                        );
                    }
                    check_scope(graph, id, &g.free_vars(), "partition expression", report);
                }
                DomainForm::General { rules } => {
                    let mut used = BTreeSet::new();
                    for r in rules {
                        if r.state >= m {
                            report.violation(
                                ViolationKind::DomainForm,
                                Some(&label),
                                format!("rule for state index {} out of range", r.state),
                            );
                        }
                        used.append(&mut r.domain.free_vars());
                        if let Some(given) = &r.given {
                            for (plabel, pstate) in given {
                                match graph.by_label(plabel) {
                                    Some(pid)
                                        if graph.parents(id).contains(&pid)
                                            && graph.node(pid).is_discrete() =>
                                    {
                                        let pd = graph.discrete(pid).unwrap();
                                        if pd.state_index(pstate).is_none() {
                                            report.violation(
                                                ViolationKind::DomainForm,
                                                Some(&label),
                                                format!(
                                                    "`given {plabel}={pstate}`: no such state"
                                                ),
                                            );
                                        }
                                    }
                                    _ => report.violation(
                                        ViolationKind::DomainForm,
                                        Some(&label),
                                        format!(
                                            "`given {plabel}=...` does not name a discrete parent"
                                        ),
                                    ),
                                }
                            }
                        }
                    }
                    check_scope(graph, id, &used, "state domain", report);
                    // every (state, configuration) must resolve to one rule
                    for cfg in 0..n_cfg {
                        for state in 0..m {
                            match resolve_rule(graph, id, rules, state, cfg) {
                                Ok(Some(_)) => {}
                                Ok(None) => report.violation(
                                    ViolationKind::DomainForm,
                                    Some(&label),
                                    format!("no domain for state {state} under configuration {cfg}"),
                                ),
                                Err(msg) => report.violation(
                                    ViolationKind::DomainForm,
                                    Some(&label),
                                    msg,
                                ),
                            }
                        }
                    }
                }
            }
        }
        DiscreteKind::Pmf { exprs } => {
            if exprs.len() != m && exprs.len() != m - 1 {
                report.violation(
                    ViolationKind::PmfForm,
                    Some(&label),
                    format!(
                        "{} probability expressions for {m} states (the last may be omitted)",
                        exprs.len()
                    ),
                );
            }
            let mut used = BTreeSet::new();
            for e in exprs {
                used.append(&mut e.free_vars());
            }
            check_scope(graph, id, &used, "PMF expression", report);
        }
        DiscreteKind::Pending => {
            report.violation(
                ViolationKind::PendingModel,
                Some(&label),
                "local model is pending (structural transform not yet compiled)".into(),
            );
        }
    }
}

fn check_continuous(graph: &EbnGraph, id: NodeId, report: &mut ValidationReport) {
    let c = graph.continuous(id).expect("checked continuous");
    let label = c.label.clone();
    let dim = c.components.len();
    if dim == 0 {
        report.violation(
            ViolationKind::BadStates,
            Some(&label),
            "continuous node needs at least one component".into(),
        );
        return;
    }
    if c.marginals.len() != dim {
        report.violation(
            ViolationKind::BadStates,
            Some(&label),
            format!("{} marginals for {dim} components", c.marginals.len()),
        );
        return;
    }
    if c.correlation.len() != dim || c.correlation.iter().any(|r| r.len() != dim) {
        report.violation(
            ViolationKind::Correlation,
            Some(&label),
            "correlation matrix shape does not match the component count".into(),
        );
    } else if let Err(e) = CholFactor::from_correlation(&c.correlation) {
        report.violation(ViolationKind::Correlation, Some(&label), e.to_string());
    }
    let n_cfg = radix::config_count(&graph.parent_cards(id));
    for (i, spec) in c.marginals.iter().enumerate() {
        match spec {
            MarginalSpec::Param { family, params } => {
                if params.len() != family.arity() {
                    report.violation(
                        ViolationKind::BadStates,
                        Some(&label),
                        format!(
                            "component `{}`: {} takes {} parameter(s), got {}",
                            c.components[i],
                            family.name(),
                            family.arity(),
                            params.len()
                        ),
                    );
                }
                let mut used = BTreeSet::new();
                for p in params {
                    used.append(&mut p.free_vars());
                }
                check_scope(graph, id, &used, "marginal parameter", report);
            }
            MarginalSpec::PerConfig { table } => {
                if table.len() != n_cfg {
                    report.violation(
                        ViolationKind::BadStates,
                        Some(&label),
                        format!(
                            "component `{}`: {} conditional marginals for {} parent configurations",
                            c.components[i],
                            table.len(),
                            n_cfg
                        ),
                    );
                }
                for m in table {
                    if let Err(e) = m.validate() {
                        report.violation(
                            ViolationKind::BadStates,
                            Some(&label),
                            format!("component `{}`: {e}", c.components[i]),
                        );
                    }
                }
            }
        }
    }
}

/// Picks the most specific rule for (state, parent configuration).
/// Returns `Ok(None)` when nothing matches and `Err` on ambiguity.
pub(crate) fn resolve_rule<'a>(
    graph: &EbnGraph,
    id: NodeId,
    rules: &'a [super::node::DomainRule],
    state: usize,
    cfg: usize,
) -> Result<Option<&'a super::node::DomainRule>, String> {
    let dparents = graph.discrete_parents(id);
    let cards = graph.parent_cards(id);
    let assignment = radix::config_unrank(&cards, cfg);
    let mut best: Option<(&super::node::DomainRule, usize)> = None;
    let mut tie = false;
    for r in rules.iter().filter(|r| r.state == state) {
        let specificity = match &r.given {
            None => 0,
            Some(given) => {
                let mut matches = true;
                for (plabel, pstate) in given {
                    let Some(pid) = graph.by_label(plabel) else {
                        matches = false;
                        break;
                    };
                    let Some(pos) = dparents.iter().position(|&p| p == pid) else {
                        matches = false;
                        break;
                    };
                    let pd = graph.discrete(pid).map_err(|e| e.to_string())?;
                    match pd.state_index(pstate) {
                        Some(s) if s == assignment[pos] => {}
                        _ => {
                            matches = false;
                            break;
                        }
                    }
                }
                if !matches {
                    continue;
                }
                given.len()
            }
        };
        match &best {
            Some((_, s)) if *s == specificity => tie = true,
            Some((_, s)) if *s > specificity => {}
            _ => {
                best = Some((r, specificity));
                tie = false;
            }
        }
    }
    if tie {
        return Err(format!(
            "ambiguous domain rules for state {state} under configuration {cfg}"
        ));
    }
    Ok(best.map(|(r, _)| r))
}
