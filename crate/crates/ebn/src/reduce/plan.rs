//! Elimination planning: for each Markov envelope, find a sequence of
//! arc reversals and node removals that deletes every continuous node,
//! and derive the reduced network's parent sets from the replay.

use crate::model::{EbnGraph, NodeId};
use crate::reduce::ReduceError;
use std::collections::{BTreeMap, BTreeSet};

/// One planned structural action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PlanAction {
    Reverse { from: NodeId, to: NodeId },
    Remove { node: NodeId },
}

/// How reversal orders are chosen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OrderingPolicy {
    /// Try every legal order within the search budget and keep the best
    /// score; falls back to the greedy rule with a warning when the
    /// budget is exceeded.
    EnumerateBest,
    /// Reverse toward the child with the fewest parents first.
    GreedyFewestParents,
    /// Replay a caller-supplied list of reversals (removals are
    /// implied).
    Explicit(Vec<(NodeId, NodeId)>),
}

/// Score of a finished envelope plan; comparison is lexicographic in
/// (SRM jobs, reduced-network links, clique bound).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PlanScore {
    pub srm_jobs: u64,
    pub rbn_links: u64,
    pub clique_bound: u64,
}

impl PlanScore {
    fn key(&self) -> (u64, u64, u64) {
        (self.srm_jobs, self.rbn_links, self.clique_bound)
    }
}

/// Plan for one Markov envelope.
#[derive(Debug, Clone)]
pub struct EnvelopePlan {
    pub continuous: Vec<NodeId>,
    pub discrete: Vec<NodeId>,
    pub actions: Vec<PlanAction>,
    /// Children of continuous nodes in factorization (chain) order; the
    /// last owns all other envelope discrete members as parents.
    pub chain: Vec<NodeId>,
    /// Envelope discrete members that only condition the chain.
    pub conditioning: Vec<NodeId>,
    /// Joint-state count over every envelope discrete member.
    pub cells: u64,
    /// Independent reliability solves at full domain depth (the final
    /// chain state of each conditioning cell follows by complement).
    pub jobs: u64,
    pub score: PlanScore,
}

/// A full elimination plan.
#[derive(Debug, Clone)]
pub struct EliminationPlan {
    pub envelopes: Vec<EnvelopePlan>,
    /// Parent sets of every discrete node in the reduced network.
    pub resulting_parents: BTreeMap<NodeId, BTreeSet<NodeId>>,
    pub score: PlanScore,
    pub warnings: Vec<String>,
}

/// Exhaustive-search budget: beyond this many initial reversal arcs per
/// envelope the planner switches to the greedy rule.
const ENUMERATE_ARC_BUDGET: usize = 8;
/// Hard cap on explored states per envelope.
const ENUMERATE_STATE_BUDGET: usize = 200_000;

/// Lightweight structural copy used during the search.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct DagState {
    /// (parents, children) per node index; dead nodes have both empty.
    parents: BTreeMap<NodeId, BTreeSet<NodeId>>,
    children: BTreeMap<NodeId, BTreeSet<NodeId>>,
}

impl DagState {
    fn from_graph(g: &EbnGraph) -> Self {
        let mut parents = BTreeMap::new();
        let mut children = BTreeMap::new();
        for id in g.node_ids() {
            parents.insert(id, g.parents(id).iter().copied().collect());
            children.insert(id, g.children(id).iter().copied().collect());
        }
        DagState { parents, children }
    }

    fn reachable(&self, from: NodeId, to: NodeId) -> bool {
        let mut stack = vec![from];
        let mut seen = BTreeSet::new();
        while let Some(n) = stack.pop() {
            if n == to {
                return true;
            }
            if !seen.insert(n) {
                continue;
            }
            if let Some(ch) = self.children.get(&n) {
                stack.extend(ch.iter().copied());
            }
        }
        false
    }

    fn legal_reversal(&self, from: NodeId, to: NodeId) -> bool {
        let mut probe = self.clone();
        probe.children.get_mut(&from).unwrap().remove(&to);
        probe.parents.get_mut(&to).unwrap().remove(&from);
        !probe.reachable(from, to)
    }

    fn reverse(&mut self, from: NodeId, to: NodeId) {
        self.children.get_mut(&from).unwrap().remove(&to);
        self.parents.get_mut(&to).unwrap().remove(&from);
        let pa_from: Vec<NodeId> = self.parents[&from].iter().copied().collect();
        let pa_to: Vec<NodeId> = self.parents[&to].iter().copied().collect();
        for p in pa_from {
            if self.parents.get_mut(&to).unwrap().insert(p) {
                self.children.get_mut(&p).unwrap().insert(to);
            }
        }
        for p in pa_to {
            if p != from && self.parents.get_mut(&from).unwrap().insert(p) {
                self.children.get_mut(&p).unwrap().insert(from);
            }
        }
        self.parents.get_mut(&from).unwrap().insert(to);
        self.children.get_mut(&to).unwrap().insert(from);
    }

    fn remove(&mut self, node: NodeId) {
        let pa: Vec<NodeId> = self.parents[&node].iter().copied().collect();
        for p in pa {
            self.children.get_mut(&p).unwrap().remove(&node);
        }
        assert!(self.children[&node].is_empty(), "removing non-barren node");
        self.parents.get_mut(&node).unwrap().clear();
    }
}

/// Derives the elimination plan for every envelope.
pub fn eliminate_continuous(
    graph: &EbnGraph,
    policy: &OrderingPolicy,
) -> Result<EliminationPlan, ReduceError> {
    graph
        .topological_order()
        .map_err(|e| ReduceError::InvalidGraph(e.to_string()))?;
    let report = graph.markov_envelopes();
    let mut warnings = Vec::new();
    let mut envelopes = Vec::new();
    let mut resulting_parents: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();

    // Discrete nodes untouched by elimination keep their parents.
    for id in graph.node_ids() {
        if graph.node(id).is_discrete() {
            resulting_parents.insert(id, graph.parents(id).iter().copied().collect());
        }
    }

    let base = DagState::from_graph(graph);
    for env in &report.envelopes {
        let continuous: Vec<NodeId> = env.continuous_members.iter().copied().collect();
        let discrete: Vec<NodeId> = env.discrete_members.iter().copied().collect();

        let searched = match policy {
            OrderingPolicy::Explicit(seq) => {
                replay_explicit(graph, &base, &continuous, seq)?
            }
            OrderingPolicy::GreedyFewestParents => {
                greedy_plan(&base, &continuous).ok_or_else(|| {
                    ReduceError::NoLegalOrder(labels(graph, &continuous))
                })?
            }
            OrderingPolicy::EnumerateBest => {
                let arc_count: usize =
                    continuous.iter().map(|&x| base.children[&x].len()).sum();
                if arc_count <= ENUMERATE_ARC_BUDGET {
                    match exhaustive_plan(graph, &base, &continuous, &discrete) {
                        Some(plan) => plan,
                        None => {
                            warnings.push(format!(
                                "envelope {{{}}}: search budget exceeded, using the greedy rule",
                                labels(graph, &continuous)
                            ));
                            greedy_plan(&base, &continuous).ok_or_else(|| {
                                ReduceError::NoLegalOrder(labels(graph, &continuous))
                            })?
                        }
                    }
                } else {
                    warnings.push(format!(
                        "envelope {{{}}}: {arc_count} reversal arcs exceed the exhaustive \
                         budget ({ENUMERATE_ARC_BUDGET}), using the greedy rule",
                        labels(graph, &continuous)
                    ));
                    greedy_plan(&base, &continuous).ok_or_else(|| {
                        ReduceError::NoLegalOrder(labels(graph, &continuous))
                    })?
                }
            }
        };

        let plan = finish_envelope(graph, searched, continuous, discrete)?;
        for (&node, parents) in &plan.final_parents {
            resulting_parents.insert(node, parents.clone());
        }
        envelopes.push(plan.envelope);
    }

    let score = PlanScore {
        srm_jobs: envelopes.iter().map(|e| e.jobs).sum(),
        rbn_links: resulting_parents.values().map(|p| p.len() as u64).sum(),
        clique_bound: envelopes
            .iter()
            .map(|e| e.score.clique_bound)
            .max()
            .unwrap_or(0),
    };
    Ok(EliminationPlan {
        envelopes,
        resulting_parents,
        score,
        warnings,
    })
}

fn labels(g: &EbnGraph, ids: &[NodeId]) -> String {
    ids.iter()
        .map(|&id| g.label(id))
        .collect::<Vec<_>>()
        .join(", ")
}

struct FinishedEnvelope {
    envelope: EnvelopePlan,
    final_parents: BTreeMap<NodeId, BTreeSet<NodeId>>,
}

/// Applies removals that are forced (childless continuous members) and
/// returns them as actions, keeping declaration order.
fn drain_removals(state: &mut DagState, remaining: &mut BTreeSet<NodeId>) -> Vec<PlanAction> {
    let mut out = Vec::new();
    loop {
        let barren: Vec<NodeId> = remaining
            .iter()
            .copied()
            .filter(|x| state.children[x].is_empty())
            .collect();
        if barren.is_empty() {
            return out;
        }
        for x in barren {
            state.remove(x);
            remaining.remove(&x);
            out.push(PlanAction::Remove { node: x });
        }
    }
}

/// Greedy rule: always reverse toward the child with the fewest current
/// parents (ties by declaration order of the child, then the parent).
fn greedy_plan(base: &DagState, continuous: &[NodeId]) -> Option<(DagState, Vec<PlanAction>)> {
    let mut state = base.clone();
    let mut remaining: BTreeSet<NodeId> = continuous.iter().copied().collect();
    let mut actions = drain_removals(&mut state, &mut remaining);
    while !remaining.is_empty() {
        let mut best: Option<(usize, NodeId, NodeId)> = None;
        for &x in remaining.iter() {
            for &c in state.children[&x].iter() {
                if !state.legal_reversal(x, c) {
                    continue;
                }
                let key = (state.parents[&c].len(), c, x);
                if best.map_or(true, |(n, bc, bx)| key < (n, bc, bx)) {
                    best = Some(key);
                }
            }
        }
        let (_, c, x) = best?;
        state.reverse(x, c);
        actions.push(PlanAction::Reverse { from: x, to: c });
        actions.extend(drain_removals(&mut state, &mut remaining));
    }
    Some((state, actions))
}

/// Exhaustive DFS over legal reversal orders; returns the best-scoring
/// terminal state or `None` when the state budget is exhausted.
fn exhaustive_plan(
    graph: &EbnGraph,
    base: &DagState,
    continuous: &[NodeId],
    discrete: &[NodeId],
) -> Option<(DagState, Vec<PlanAction>)> {
    let mut start = base.clone();
    let mut start_remaining: BTreeSet<NodeId> = continuous.iter().copied().collect();
    let start_actions = drain_removals(&mut start, &mut start_remaining);

    let mut stack = vec![(start, start_remaining, start_actions)];
    let mut seen: BTreeSet<(Vec<(NodeId, NodeId)>, Vec<NodeId>)> = BTreeSet::new();
    let mut best: Option<((u64, u64, u64), Vec<PlanAction>, DagState)> = None;
    let mut explored = 0usize;

    while let Some((state, remaining, actions)) = stack.pop() {
        explored += 1;
        if explored > ENUMERATE_STATE_BUDGET {
            return None;
        }
        if remaining.is_empty() {
            let score = score_terminal(graph, &state, continuous, discrete);
            let key = (score.key(), &actions);
            match &best {
                Some((bk, ba, _)) if (*bk, ba) <= (key.0, key.1) => {}
                _ => best = Some((score.key(), actions.clone(), state.clone())),
            }
            continue;
        }
        // Dedupe on (edge multiset, remaining): different orders reaching
        // the same structure explore the same future.
        let edges: Vec<(NodeId, NodeId)> = state
            .children
            .iter()
            .flat_map(|(&p, cs)| cs.iter().map(move |&c| (p, c)))
            .collect();
        if !seen.insert((edges, remaining.iter().copied().collect())) {
            continue;
        }
        for &x in remaining.iter() {
            for &c in state.children[&x].iter() {
                if !state.legal_reversal(x, c) {
                    continue;
                }
                let mut next = state.clone();
                let mut next_remaining = remaining.clone();
                next.reverse(x, c);
                let mut next_actions = actions.clone();
                next_actions.push(PlanAction::Reverse { from: x, to: c });
                next_actions.extend(drain_removals(&mut next, &mut next_remaining));
                stack.push((next, next_remaining, next_actions));
            }
        }
    }
    best.map(|(_, actions, state)| (state, actions))
}

fn replay_explicit(
    graph: &EbnGraph,
    base: &DagState,
    continuous: &[NodeId],
    sequence: &[(NodeId, NodeId)],
) -> Result<(DagState, Vec<PlanAction>), ReduceError> {
    let members: BTreeSet<NodeId> = continuous.iter().copied().collect();
    let mut state = base.clone();
    let mut remaining = members.clone();
    let mut actions = drain_removals(&mut state, &mut remaining);
    for &(from, to) in sequence {
        if !members.contains(&from) {
            continue; // action belongs to another envelope
        }
        if !state.children[&from].contains(&to) {
            return Err(ReduceError::MissingEdge(
                graph.label(from).to_string(),
                graph.label(to).to_string(),
            ));
        }
        if !state.legal_reversal(from, to) {
            return Err(ReduceError::AlternativePath(
                graph.label(from).to_string(),
                graph.label(to).to_string(),
            ));
        }
        state.reverse(from, to);
        actions.push(PlanAction::Reverse { from, to });
        actions.extend(drain_removals(&mut state, &mut remaining));
    }
    if !remaining.is_empty() {
        return Err(ReduceError::NoLegalOrder(labels(
            graph,
            &remaining.iter().copied().collect::<Vec<_>>(),
        )));
    }
    Ok((state, actions))
}

fn n_states(graph: &EbnGraph, id: NodeId) -> u64 {
    graph.discrete(id).expect("discrete").n_states() as u64
}

/// Score a terminal structure: SRM jobs, links among envelope discrete
/// members, and the largest reduced-network family.
fn score_terminal(
    graph: &EbnGraph,
    state: &DagState,
    continuous: &[NodeId],
    discrete: &[NodeId],
) -> PlanScore {
    let chain = chain_of(graph, state, continuous);
    let cells: u64 = discrete.iter().map(|&d| n_states(graph, d)).product();
    let srm_jobs = match chain.last() {
        Some(&last) => cells / n_states(graph, last) * (n_states(graph, last) - 1),
        None => 0,
    };
    let member_set: BTreeSet<NodeId> = discrete.iter().copied().collect();
    let rbn_links = discrete
        .iter()
        .map(|d| {
            state.parents[d]
                .iter()
                .filter(|p| member_set.contains(p))
                .count() as u64
        })
        .sum();
    let clique_bound = discrete
        .iter()
        .map(|d| state.parents[d].len() as u64 + 1)
        .max()
        .unwrap_or(0);
    PlanScore {
        srm_jobs,
        rbn_links,
        clique_bound,
    }
}

/// The children of continuous members, ordered by their final parent
/// counts within that set (the factorization chain).
fn chain_of(graph: &EbnGraph, state: &DagState, continuous: &[NodeId]) -> Vec<NodeId> {
    let children: BTreeSet<NodeId> = continuous
        .iter()
        .flat_map(|&x| graph.children(x).iter().copied())
        .filter(|&c| graph.node(c).is_discrete())
        .collect();
    let mut chain: Vec<NodeId> = children.iter().copied().collect();
    chain.sort_by_key(|&c| {
        (
            state.parents[&c]
                .iter()
                .filter(|p| children.contains(p))
                .count(),
            c,
        )
    });
    chain
}

fn finish_envelope(
    graph: &EbnGraph,
    (state, actions): (DagState, Vec<PlanAction>),
    continuous: Vec<NodeId>,
    discrete: Vec<NodeId>,
) -> Result<FinishedEnvelope, ReduceError> {
    let chain = chain_of(graph, &state, &continuous);
    // The chain must be total: each member's in-chain parent count is
    // its rank, so conditionals factor along it exactly.
    for (rank, &c) in chain.iter().enumerate() {
        let in_chain = state.parents[&c]
            .iter()
            .filter(|p| chain.contains(p))
            .count();
        if in_chain != rank {
            return Err(ReduceError::NonTotalChain(format!(
                "`{}` has {in_chain} in-chain parents at rank {rank}",
                graph.label(c)
            )));
        }
    }
    let conditioning: Vec<NodeId> = discrete
        .iter()
        .copied()
        .filter(|d| !chain.contains(d))
        .collect();
    let score = score_terminal(graph, &state, &continuous, &discrete);
    let cells: u64 = discrete.iter().map(|&d| n_states(graph, d)).product();

    let mut final_parents = BTreeMap::new();
    for &d in &discrete {
        final_parents.insert(d, state.parents[&d].clone());
    }
    Ok(FinishedEnvelope {
        envelope: EnvelopePlan {
            continuous,
            discrete,
            actions,
            chain,
            conditioning,
            cells,
            jobs: score.srm_jobs,
            score,
        },
        final_parents,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lsf::parse_expr;
    use crate::model::{
        ContinuousNode, DiscreteNode, FamilyKind, MarginalSpec,
    };

    use crate::testutil::{cpt2, seven_node_fixture};

    fn threshold_child(label: &str, expr: &str, cut: f64) -> DiscreteNode {
        crate::testutil::threshold_child(label, expr, vec![cut])
    }

    #[test]
    fn seven_node_plan_matches_the_known_reduction() {
        let (g, ids) = seven_node_fixture();
        let plan = eliminate_continuous(&g, &OrderingPolicy::EnumerateBest).unwrap();
        assert_eq!(plan.envelopes.len(), 1);
        let env = &plan.envelopes[0];
        assert_eq!(env.continuous, vec![ids["x1"]]);
        assert_eq!(
            env.discrete,
            vec![ids["y3"], ids["y4"], ids["y5"], ids["y6"]]
        );
        // pa'(y5) = {y3, y4}; pa'(y6) = {y3, y4, y5}
        assert_eq!(
            plan.resulting_parents[&ids["y5"]],
            BTreeSet::from([ids["y3"], ids["y4"]])
        );
        assert_eq!(
            plan.resulting_parents[&ids["y6"]],
            BTreeSet::from([ids["y3"], ids["y4"], ids["y5"]])
        );
        // untouched nodes keep their parents
        assert_eq!(
            plan.resulting_parents[&ids["y7"]],
            BTreeSet::from([ids["y5"]])
        );
        assert_eq!(env.chain, vec![ids["y5"], ids["y6"]]);
        assert_eq!(env.conditioning, vec![ids["y3"], ids["y4"]]);
        // binary nodes: 16 cells, 8 independent solves
        assert_eq!(env.cells, 16);
        assert_eq!(env.jobs, 8);
        // first reversal must go to y5 (reversing x1 -> y6 first would
        // create the cycle y5 -> y6 -> x1 -> y5)
        assert_eq!(
            env.actions[0],
            PlanAction::Reverse {
                from: ids["x1"],
                to: ids["y5"]
            }
        );
        assert_eq!(
            env.actions.last().unwrap(),
            &PlanAction::Remove { node: ids["x1"] }
        );
    }

    #[test]
    fn reversing_toward_the_collider_first_is_rejected_in_explicit_mode() {
        let (g, ids) = seven_node_fixture();
        let err = eliminate_continuous(
            &g,
            &OrderingPolicy::Explicit(vec![(ids["x1"], ids["y6"]), (ids["x1"], ids["y5"])]),
        )
        .unwrap_err();
        assert!(matches!(err, ReduceError::AlternativePath(..)));
    }

    /// Ordering fixture: z -> y1, x -> y1, x -> y2. Reversing toward the
    /// fewest-parent child (y2) first avoids an extra link.
    #[test]
    fn ordering_changes_the_link_count_and_best_is_found() {
        let mut g = EbnGraph::new();
        let z = g.add_discrete(cpt2("z", vec![0.5, 0.5])).unwrap();
        let x = g
            .add_continuous(ContinuousNode::scalar(
                "x",
                "h",
                MarginalSpec::constant(FamilyKind::Normal, &[0.0, 1.0]),
            ))
            .unwrap();
        let y1 = g
            .add_discrete(threshold_child("y1", "h + z", 0.5))
            .unwrap();
        let y2 = g.add_discrete(threshold_child("y2", "h", 0.0)).unwrap();
        g.add_edge(z, y1).unwrap();
        g.add_edge(x, y1).unwrap();
        g.add_edge(x, y2).unwrap();

        // ordering (a): y1 first. y2 then inherits pa(x) = {z, y1}.
        let a = eliminate_continuous(
            &g,
            &OrderingPolicy::Explicit(vec![(x, y1), (x, y2)]),
        )
        .unwrap();
        // ordering (b): y2 first. y1 inherits {y2}; links {z,y2}->y1.
        let b = eliminate_continuous(
            &g,
            &OrderingPolicy::Explicit(vec![(x, y2), (x, y1)]),
        )
        .unwrap();
        assert!(
            b.score.rbn_links < a.score.rbn_links,
            "(b) {} links vs (a) {}",
            b.score.rbn_links,
            a.score.rbn_links
        );
        assert_eq!(
            a.resulting_parents[&y2],
            BTreeSet::from([z, y1]),
            "ordering (a) adds the extra link"
        );
        assert_eq!(b.resulting_parents[&y1], BTreeSet::from([z, y2]));
        assert_eq!(b.resulting_parents[&y2], BTreeSet::new());

        // both the search and the greedy rule find ordering (b)
        let best = eliminate_continuous(&g, &OrderingPolicy::EnumerateBest).unwrap();
        assert_eq!(best.score.rbn_links, b.score.rbn_links);
        assert_eq!(best.resulting_parents[&y1], b.resulting_parents[&y1]);
        let greedy = eliminate_continuous(&g, &OrderingPolicy::GreedyFewestParents).unwrap();
        assert_eq!(greedy.score.rbn_links, b.score.rbn_links);
    }

    #[test]
    fn smallest_case_single_reversal() {
        let mut g = EbnGraph::new();
        let z = g.add_discrete(cpt2("z", vec![0.5, 0.5])).unwrap();
        let x = g
            .add_continuous(ContinuousNode::scalar(
                "x",
                "h",
                MarginalSpec::Param {
                    family: FamilyKind::Normal,
                    params: vec![parse_expr("z").unwrap(), crate::lsf::Expr::num(1.0)],
                },
            ))
            .unwrap();
        let y = g.add_discrete(threshold_child("y", "h", 0.0)).unwrap();
        g.add_edge(z, x).unwrap();
        g.add_edge(x, y).unwrap();
        let plan = eliminate_continuous(&g, &OrderingPolicy::EnumerateBest).unwrap();
        let env = &plan.envelopes[0];
        assert_eq!(
            env.actions,
            vec![
                PlanAction::Reverse { from: x, to: y },
                PlanAction::Remove { node: x }
            ]
        );
        // the child inherits the continuous node's parent
        assert_eq!(plan.resulting_parents[&y], BTreeSet::from([z]));
        assert_eq!(env.jobs, 2); // m_z * (m_y - 1)
    }

    /// Replaying plan actions through the real graph transforms stays
    /// acyclic at every step and ends with no continuous nodes.
    #[test]
    fn replay_is_acyclic_at_every_step() {
        let (g, _) = seven_node_fixture();
        let plan = eliminate_continuous(&g, &OrderingPolicy::EnumerateBest).unwrap();
        let mut current = g.clone();
        for env in &plan.envelopes {
            for action in &env.actions {
                match *action {
                    PlanAction::Reverse { from, to } => {
                        current = crate::reduce::reverse_arc(&current, from, to).unwrap();
                    }
                    PlanAction::Remove { node } => {
                        assert!(current.children(node).is_empty());
                        current.remove_node(node).unwrap();
                    }
                }
                assert!(current.topological_order().is_ok(), "cycle after {action:?}");
            }
        }
        assert!(current.node_ids().all(|id| current.node(id).is_discrete()));
        // final structure matches the plan
        for id in current.node_ids() {
            let pa: BTreeSet<NodeId> = current.parents(id).iter().copied().collect();
            assert_eq!(pa, plan.resulting_parents[&id], "{}", current.label(id));
        }
    }
}
