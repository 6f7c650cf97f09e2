//! Reliability-job enumeration: one job per joint state of the
//! variables involved in a Markov envelope, organized by prefix depth
//! of the factorization chain so the deepest level carries the
//! independent solves and final states follow by complement.

use crate::compile::CompileError;
use crate::dist::CholFactor;
use crate::lsf::{DomainSpec, Expr};
use crate::model::{
    radix, DiscreteKind, DomainForm, EbnGraph, MarginalSpec, NodeId,
};
use crate::reduce::EliminationPlan;
use crate::srm::{reduce_total_probability, ProblemSpace, ReliabilityProblem, SpaceBlock};
use std::collections::{BTreeMap, HashMap, HashSet};

/// One reliability solve.
#[derive(Debug, Clone)]
pub struct SrmJob {
    /// Envelope the job belongs to.
    pub envelope: usize,
    /// Prefix depth: the job solves the joint state of the first
    /// `level` chain members (1-based).
    pub level: usize,
    /// States of the conditioning variables and the chain prefix.
    pub cell: Vec<(NodeId, usize)>,
    pub problem: ReliabilityProblem,
    /// Single smooth expression (FORM shape) or a system composition.
    pub component: bool,
    /// Deterministic global index; the solve seed derives from it.
    pub index: u64,
    /// Canonical fingerprint; jobs with equal fingerprints describe the
    /// same integral and share one solve.
    pub fingerprint: u64,
}

/// Enumerates every solve required by the plan. Jobs are emitted
/// envelope by envelope, level by level, cells in mixed-radix order, so
/// indices are reproducible.
pub fn enumerate_jobs(
    graph: &EbnGraph,
    plan: &EliminationPlan,
    override_envelope_guard: bool,
) -> Result<Vec<SrmJob>, CompileError> {
    let mut jobs = Vec::new();
    let mut index = 0u64;
    for (env_idx, env) in plan.envelopes.iter().enumerate() {
        if env.discrete.len() > crate::model::ENVELOPE_MAX && !override_envelope_guard {
            return Err(CompileError::EnvelopeTooLarge {
                members: env.discrete.len(),
                limit: crate::model::ENVELOPE_MAX,
            });
        }
        let cond = &env.conditioning;
        let chain = &env.chain;
        let cond_cards: Vec<usize> = cond
            .iter()
            .map(|&id| graph.discrete(id).unwrap().n_states())
            .collect();
        for level in 1..=chain.len() {
            let m_last = graph.discrete(chain[level - 1]).unwrap().n_states();
            let mut vars: Vec<NodeId> = cond.clone();
            vars.extend_from_slice(&chain[..level]);
            let mut cards = cond_cards.clone();
            cards.extend(
                chain[..level]
                    .iter()
                    .map(|&id| graph.discrete(id).unwrap().n_states()),
            );
            for states in radix::configs(&cards) {
                // The final state of the level's chain member follows by
                // complement; no solve is enumerated for it.
                if states[vars.len() - 1] == m_last - 1 {
                    continue;
                }
                let cell: Vec<(NodeId, usize)> =
                    vars.iter().copied().zip(states.iter().copied()).collect();
                let (problem, fingerprint) =
                    build_cell_problem(graph, &env.continuous, &chain[..level], &cell)?;
                let component = problem.domain.is_single_smooth();
                jobs.push(SrmJob {
                    envelope: env_idx,
                    level,
                    cell,
                    problem,
                    component,
                    index,
                    fingerprint,
                });
                index += 1;
            }
        }
    }
    Ok(jobs)
}

/// Builds the reliability problem of one cell: the continuous blocks
/// the domains actually need, with the cell's discrete codes bound into
/// parameters and domain expressions, intersecting the state domains of
/// every chain member in the prefix (parameterized-PMF members enter
/// through the total-probability reduction).
fn build_cell_problem(
    graph: &EbnGraph,
    continuous: &[NodeId],
    prefix: &[NodeId],
    cell: &[(NodeId, usize)],
) -> Result<(ReliabilityProblem, u64), CompileError> {
    // Bindings: numeric codes of every discrete variable fixed by the cell.
    let mut codes: HashMap<String, f64> = HashMap::new();
    let cell_map: BTreeMap<NodeId, usize> = cell.iter().copied().collect();
    for (&id, &state) in &cell_map {
        let d = graph.discrete(id).unwrap();
        codes.insert(d.label.clone(), d.numeric[state]);
    }

    // Assemble the members' domains; PMF members are deferred.
    let mut domain: Option<DomainSpec> = None;
    let mut pmf_members: Vec<Expr> = Vec::new();
    for &member in prefix {
        let d = graph.discrete(member).unwrap();
        let state = cell_map[&member];
        match &d.kind {
            DiscreteKind::DomainDet(DomainForm::Threshold { g, cuts }) => {
                let spec = crate::model::DiscreteNode::threshold_domain(g, cuts, state)
                    .bind_consts(&codes);
                domain = Some(match domain {
                    None => spec,
                    Some(existing) => existing.intersect(&spec),
                });
            }
            DiscreteKind::DomainDet(DomainForm::General { rules }) => {
                let dparents = graph.discrete_parents(member);
                let cards: Vec<usize> = dparents
                    .iter()
                    .map(|&p| graph.discrete(p).unwrap().n_states())
                    .collect();
                let parent_states: Vec<usize> = dparents
                    .iter()
                    .map(|&p| {
                        cell_map.get(&p).copied().ok_or_else(|| {
                            CompileError::Internal(format!(
                                "discrete parent `{}` of `{}` is not covered by the cell",
                                graph.label(p),
                                d.label
                            ))
                        })
                    })
                    .collect::<Result<_, _>>()?;
                let cfg = radix::config_index(&cards, &parent_states);
                let rule = crate::model::resolve_domain_rule(graph, member, rules, state, cfg)
                    .map_err(CompileError::Internal)?
                    .ok_or_else(|| {
                        CompileError::Internal(format!(
                            "no domain for `{}` state {state} configuration {cfg}",
                            d.label
                        ))
                    })?;
                let spec = rule.domain.bind_consts(&codes);
                domain = Some(match domain {
                    None => spec,
                    Some(existing) => existing.intersect(&spec),
                });
            }
            DiscreteKind::Pmf { exprs } => {
                let m = d.n_states();
                let expr = if state < exprs.len() {
                    exprs[state].clone()
                } else {
                    // complement state: 1 - sum of the others
                    debug_assert_eq!(state, m - 1);
                    let mut sum = Expr::num(0.0);
                    for e in exprs {
                        sum = Expr::add(sum, e.clone());
                    }
                    Expr::sub(Expr::num(1.0), sum)
                };
                pmf_members.push(expr.bind_consts(&codes));
            }
            DiscreteKind::Cpt { .. } | DiscreteKind::Pending => {
                return Err(CompileError::Internal(format!(
                    "`{}` is a child of a continuous node but carries no domain or PMF",
                    d.label
                )));
            }
        }
    }

    // Variables the domains reference, closed over parameter
    // dependencies, decide which blocks the space needs.
    let mut needed: HashSet<String> = HashSet::new();
    if let Some(d) = &domain {
        for v in d.free_vars() {
            needed.insert(v);
        }
    }
    for e in &pmf_members {
        for v in e.free_vars() {
            needed.insert(v);
        }
    }

    let order = topo_filter(graph, continuous);
    // Walk backwards: a needed block pulls in the components its
    // parameters reference.
    let mut included = vec![false; order.len()];
    for i in (0..order.len()).rev() {
        let c = graph.continuous(order[i]).unwrap();
        let uses: bool = c.components.iter().any(|name| needed.contains(name));
        if !uses {
            continue;
        }
        included[i] = true;
        for spec in &c.marginals {
            for v in spec.free_vars() {
                needed.insert(v);
            }
        }
    }

    let mut space = ProblemSpace::default();
    for (i, &id) in order.iter().enumerate() {
        if !included[i] {
            continue;
        }
        let c = graph.continuous(id).unwrap();
        let dparents = graph.discrete_parents(id);
        let cfg = if dparents.is_empty() {
            0
        } else {
            let cards: Vec<usize> = dparents
                .iter()
                .map(|&p| graph.discrete(p).unwrap().n_states())
                .collect();
            let states: Vec<usize> = dparents
                .iter()
                .map(|&p| {
                    cell_map.get(&p).copied().ok_or_else(|| {
                        CompileError::Internal(format!(
                            "density parent `{}` of `{}` is not covered by the cell",
                            graph.label(p),
                            c.label
                        ))
                    })
                })
                .collect::<Result<_, _>>()?;
            radix::config_index(&cards, &states)
        };
        let marginals: Vec<MarginalSpec> = c
            .marginals
            .iter()
            .map(|spec| match spec {
                MarginalSpec::Param { family, params } => MarginalSpec::Param {
                    family: *family,
                    params: params.iter().map(|p| p.bind_consts(&codes)).collect(),
                },
                MarginalSpec::PerConfig { table } => MarginalSpec::PerConfig {
                    table: vec![table[cfg.min(table.len() - 1)].clone()],
                },
            })
            .collect();
        space.push_block(SpaceBlock {
            names: c.components.clone(),
            marginals,
            chol: CholFactor::from_correlation(&c.correlation)
                .map_err(|e| CompileError::Internal(e.to_string()))?,
        });
    }

    let mut problem = match domain {
        Some(d) => ReliabilityProblem::new(space, d),
        None => ReliabilityProblem::certain(space),
    };
    for expr in &pmf_members {
        problem = reduce_total_probability(expr, &problem);
    }
    let fingerprint = fingerprint_problem(&problem);
    Ok((problem, fingerprint))
}

/// Continuous members in topological order of the graph.
fn topo_filter(graph: &EbnGraph, members: &[NodeId]) -> Vec<NodeId> {
    let member_set: HashSet<NodeId> = members.iter().copied().collect();
    graph
        .topological_order()
        .expect("validated graph")
        .into_iter()
        .filter(|id| member_set.contains(id))
        .collect()
}

/// Canonical fingerprint of a problem: variable names are replaced by
/// their order of first appearance so structurally identical cells
/// (including across envelopes) hash equal.
fn fingerprint_problem(prob: &ReliabilityProblem) -> u64 {
    use std::hash::{Hash, Hasher};
    let mut canon: HashMap<String, String> = HashMap::new();
    let mut next = 0usize;
    fn rename(name: &str, canon: &mut HashMap<String, String>, next: &mut usize) -> String {
        if let Some(c) = canon.get(name) {
            return c.clone();
        }
        let c = format!("v{next}");
        *next += 1;
        canon.insert(name.to_string(), c.clone());
        c
    }
    let mut hasher = std::collections::hash_map::DefaultHasher::new();
    for block in &prob.space.blocks {
        for name in &block.names {
            rename(name, &mut canon, &mut next).hash(&mut hasher);
        }
        for spec in &block.marginals {
            match spec {
                MarginalSpec::Param { family, params } => {
                    family.name().hash(&mut hasher);
                    for p in params {
                        let mapped = remap_expr(p, &mut canon, &mut next);
                        format!("{mapped}").hash(&mut hasher);
                    }
                }
                MarginalSpec::PerConfig { table } => {
                    for m in table {
                        format!("{m:?}").hash(&mut hasher);
                    }
                }
            }
        }
        format!("{:?}", block.chol).hash(&mut hasher);
    }
    "domain".hash(&mut hasher);
    for cutset in &prob.domain.cutsets {
        "cutset".hash(&mut hasher);
        for g in cutset {
            let mapped = remap_expr(g, &mut canon, &mut next);
            format!("{mapped}").hash(&mut hasher);
        }
    }
    hasher.finish()
}

fn remap_expr(e: &Expr, canon: &mut HashMap<String, String>, next: &mut usize) -> Expr {
    // Assign canonical names in expression traversal order.
    let mut renames: HashMap<String, String> = HashMap::new();
    fn walk(
        e: &Expr,
        canon: &mut HashMap<String, String>,
        next: &mut usize,
        renames: &mut HashMap<String, String>,
    ) {
        match e {
            Expr::Var(name) => {
                let mapped = canon.entry(name.clone()).or_insert_with(|| {
                    let c = format!("v{next}");
                    *next += 1;
                    c
                });
                renames.insert(name.clone(), mapped.clone());
            }
            Expr::Num(_) => {}
            Expr::Neg(inner) => walk(inner, canon, next, renames),
            Expr::Bin(_, a, b) => {
                walk(a, canon, next, renames);
                walk(b, canon, next, renames);
            }
            Expr::Call(_, args) => {
                for a in args {
                    walk(a, canon, next, renames);
                }
            }
        }
    }
    walk(e, canon, next, &mut renames);
    e.rename_vars(&renames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ContinuousNode, DiscreteNode, FamilyKind};
    use crate::reduce::{eliminate_continuous, OrderingPolicy};
    use crate::lsf::parse_expr;

    fn domain_child(label: &str, comp: &str, m: usize, base: f64) -> DiscreteNode {
        DiscreteNode {
            label: label.into(),
            states: (0..m).map(|k| format!("s{k}")).collect(),
            numeric: (0..m).map(|k| k as f64).collect(),
            kind: DiscreteKind::DomainDet(DomainForm::Threshold {
                g: parse_expr(comp).unwrap(),
                cuts: (1..m).map(|k| base + 0.45 * k as f64).collect(),
            }),
        }
    }

    /// Hierarchical fixture: one parentless normal with five m-state
    /// domain children. Deepest-level jobs must count m^4 (m - 1).
    #[test]
    fn hierarchical_job_count() {
        let m = 3;
        let mut g = EbnGraph::new();
        let x = g
            .add_continuous(ContinuousNode::scalar(
                "x0",
                "h",
                MarginalSpec::constant(FamilyKind::Normal, &[0.0, 1.0]),
            ))
            .unwrap();
        for i in 1..=5 {
            let y = g
                .add_discrete(domain_child(&format!("y{i}"), "h", m, -1.3 + 0.2 * i as f64))
                .unwrap();
            g.add_edge(x, y).unwrap();
        }
        let plan = eliminate_continuous(&g, &OrderingPolicy::GreedyFewestParents).unwrap();
        assert_eq!(plan.envelopes[0].jobs as usize, m.pow(4) * (m - 1)); // 162
        let jobs = enumerate_jobs(&g, &plan, false).unwrap();
        let deepest = jobs.iter().filter(|j| j.level == 5).count();
        assert_eq!(deepest, m.pow(4) * (m - 1));
        // total solves over all levels: m^5 - 1 (every cell except one
        // per conditioning configuration, recursively)
        assert_eq!(jobs.len(), m.pow(5) - 1);
    }

    /// Five independent scalar normals with one m-state child each:
    /// 5 (m - 1) jobs, and with identical local models the canonical
    /// fingerprints collapse to (m - 1) distinct solves.
    #[test]
    fn split_fixture_job_count_and_dedup() {
        let m = 3;
        let mut g = EbnGraph::new();
        for i in 1..=5 {
            let x = g
                .add_continuous(ContinuousNode::scalar(
                    &format!("x{i}"),
                    &format!("h{i}"),
                    MarginalSpec::constant(FamilyKind::Normal, &[0.0, 1.0]),
                ))
                .unwrap();
            let y = g
                .add_discrete(domain_child(&format!("y{i}"), &format!("h{i}"), m, -0.45))
                .unwrap();
            g.add_edge(x, y).unwrap();
        }
        let plan = eliminate_continuous(&g, &OrderingPolicy::GreedyFewestParents).unwrap();
        assert_eq!(plan.score.srm_jobs as usize, 5 * (m - 1)); // 10
        let jobs = enumerate_jobs(&g, &plan, false).unwrap();
        assert_eq!(jobs.len(), 5 * (m - 1));
        let distinct: HashSet<u64> = jobs.iter().map(|j| j.fingerprint).collect();
        assert_eq!(distinct.len(), m - 1, "identical components share solves");
    }

    #[test]
    fn smallest_case_single_job() {
        let mut g = EbnGraph::new();
        let x = g
            .add_continuous(ContinuousNode::scalar(
                "x",
                "h",
                MarginalSpec::constant(FamilyKind::Normal, &[0.0, 1.0]),
            ))
            .unwrap();
        let y = g.add_discrete(domain_child("y", "h", 2, 0.0)).unwrap();
        g.add_edge(x, y).unwrap();
        let plan = eliminate_continuous(&g, &OrderingPolicy::EnumerateBest).unwrap();
        let jobs = enumerate_jobs(&g, &plan, false).unwrap();
        assert_eq!(jobs.len(), 1);
        assert!(jobs[0].component);
    }

    /// The seven-node fixture yields 16 cells of which 8 need solves at
    /// full depth (plus the 4 fewer-constraint prefix solves).
    #[test]
    fn seven_node_fixture_counts() {
        let (g, _) = crate::testutil::seven_node_fixture();
        let plan = eliminate_continuous(&g, &OrderingPolicy::EnumerateBest).unwrap();
        assert_eq!(plan.envelopes[0].cells, 16);
        assert_eq!(plan.envelopes[0].jobs, 8);
        let jobs = enumerate_jobs(&g, &plan, false).unwrap();
        assert_eq!(jobs.iter().filter(|j| j.level == 2).count(), 8);
        assert_eq!(jobs.iter().filter(|j| j.level == 1).count(), 4);
    }
}
