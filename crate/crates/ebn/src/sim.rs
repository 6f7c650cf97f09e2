//! Forward sampling of the hybrid graph, used by the stochastic
//! validation checks and by the sampling oracle that cross-checks
//! compiled networks.

use crate::dist::CholFactor;
use crate::lsf::{CompiledDomain, CompiledExpr, DomainSpec, Expr};
use crate::model::{
    radix, DiscreteKind, DomainForm, EbnGraph, MarginalSpec, Node, NodeId, Violation,
    ViolationKind,
};
use crate::srm::CountingRng;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("cannot sample `{0}`: {1}")]
    Node(String, String),
    #[error("{0}")]
    Prepare(String),
}

enum NodePlan {
    Cpt {
        cards: Vec<usize>,
        m: usize,
    },
    Threshold {
        g: CompiledExpr,
        cuts: Vec<f64>,
    },
    General {
        /// One domain list per discrete-parent configuration, indexed
        /// [cfg][state].
        per_cfg: Vec<Vec<CompiledDomain>>,
        cards: Vec<usize>,
    },
    Pmf {
        exprs: Vec<CompiledExpr>,
        m: usize,
    },
    Continuous {
        marginals: Vec<PlannedMarginal>,
        chol: CholFactor,
        comp_slots: Vec<usize>,
        cards: Vec<usize>,
    },
}

enum PlannedMarginal {
    Fixed(crate::dist::Marginal),
    Dynamic {
        family: crate::model::FamilyKind,
        params: Vec<CompiledExpr>,
    },
    PerConfig(Vec<crate::dist::Marginal>),
}

/// A graph compiled for repeated forward sampling.
pub struct PreparedSampler<'g> {
    graph: &'g EbnGraph,
    topo: Vec<NodeId>,
    /// name -> slot for every component name and discrete label
    layout: HashMap<String, usize>,
    plans: HashMap<NodeId, NodePlan>,
    /// slot a discrete node's numeric code lands in
    code_slot: HashMap<NodeId, usize>,
    /// discrete parents per node, declaration order
    dparents: HashMap<NodeId, Vec<NodeId>>,
    n_slots: usize,
}

/// One sampled world: per-node discrete states plus the slot array the
/// expressions read.
pub struct World {
    /// state index per discrete node slot, usize::MAX elsewhere
    pub states: Vec<usize>,
    pub slots: Vec<f64>,
}

impl<'g> PreparedSampler<'g> {
    pub fn new(graph: &'g EbnGraph) -> Result<Self, SimError> {
        let topo = graph
            .topological_order()
            .map_err(|e| SimError::Prepare(e.to_string()))?;
        let mut layout = HashMap::new();
        let mut code_slot = HashMap::new();
        for id in graph.node_ids() {
            match graph.node(id) {
                Node::Discrete(d) => {
                    let slot = layout.len();
                    layout.insert(d.label.clone(), slot);
                    code_slot.insert(id, slot);
                }
                Node::Continuous(c) => {
                    for comp in &c.components {
                        let slot = layout.len();
                        layout.insert(comp.clone(), slot);
                    }
                }
            }
        }
        let mut plans = HashMap::new();
        let mut dparents = HashMap::new();
        for id in graph.node_ids() {
            dparents.insert(id, graph.discrete_parents(id));
            let plan = match graph.node(id) {
                Node::Discrete(d) => match &d.kind {
                    DiscreteKind::Cpt { .. } => NodePlan::Cpt {
                        cards: graph.parent_cards(id),
                        m: d.n_states(),
                    },
                    DiscreteKind::DomainDet(DomainForm::Threshold { g, cuts }) => {
                        NodePlan::Threshold {
                            g: CompiledExpr::compile(g, &layout)
                                .map_err(|e| SimError::Node(d.label.clone(), e.to_string()))?,
                            cuts: cuts.clone(),
                        }
                    }
                    DiscreteKind::DomainDet(DomainForm::General { rules }) => {
                        let cards = graph.parent_cards(id);
                        let n_cfg = radix::config_count(&cards);
                        let mut per_cfg = Vec::with_capacity(n_cfg);
                        for cfg in 0..n_cfg {
                            let mut list = Vec::with_capacity(d.n_states());
                            for state in 0..d.n_states() {
                                let rule = crate::model::resolve_domain_rule(
                                    graph, id, rules, state, cfg,
                                )
                                .map_err(|e| SimError::Node(d.label.clone(), e))?
                                .ok_or_else(|| {
                                    SimError::Node(
                                        d.label.clone(),
                                        format!("no domain for state {state} configuration {cfg}"),
                                    )
                                })?;
                                list.push(
                                    CompiledDomain::compile(&rule.domain, &layout).map_err(
                                        |e| SimError::Node(d.label.clone(), e.to_string()),
                                    )?,
                                );
                            }
                            per_cfg.push(list);
                        }
                        NodePlan::General { per_cfg, cards }
                    }
                    DiscreteKind::Pmf { exprs } => NodePlan::Pmf {
                        exprs: exprs
                            .iter()
                            .map(|e| CompiledExpr::compile(e, &layout))
                            .collect::<Result<_, _>>()
                            .map_err(|e| SimError::Node(d.label.clone(), e.to_string()))?,
                        m: d.n_states(),
                    },
                    DiscreteKind::Pending => {
                        return Err(SimError::Node(
                            d.label.clone(),
                            "local model is pending".into(),
                        ))
                    }
                },
                Node::Continuous(c) => {
                    let mut marginals = Vec::with_capacity(c.marginals.len());
                    for spec in &c.marginals {
                        marginals.push(match spec {
                            MarginalSpec::Param { family, params } => {
                                if params.iter().all(|p| matches!(p, Expr::Num(_))) {
                                    let vals: Vec<f64> = params
                                        .iter()
                                        .map(|p| match p {
                                            Expr::Num(v) => *v,
                                            _ => unreachable!(),
                                        })
                                        .collect();
                                    PlannedMarginal::Fixed(family.construct(&vals).map_err(
                                        |e| SimError::Node(c.label.clone(), e.to_string()),
                                    )?)
                                } else {
                                    PlannedMarginal::Dynamic {
                                        family: *family,
                                        params: params
                                            .iter()
                                            .map(|p| CompiledExpr::compile(p, &layout))
                                            .collect::<Result<_, _>>()
                                            .map_err(|e| {
                                                SimError::Node(c.label.clone(), e.to_string())
                                            })?,
                                    }
                                }
                            }
                            MarginalSpec::PerConfig { table } => {
                                PlannedMarginal::PerConfig(table.clone())
                            }
                        });
                    }
                    NodePlan::Continuous {
                        marginals,
                        chol: CholFactor::from_correlation(&c.correlation)
                            .map_err(|e| SimError::Node(c.label.clone(), e.to_string()))?,
                        comp_slots: c.components.iter().map(|n| layout[n]).collect(),
                        cards: graph.parent_cards(id),
                    }
                }
            };
            plans.insert(id, plan);
        }
        let n_slots = layout.len();
        Ok(PreparedSampler {
            graph,
            topo,
            layout,
            plans,
            code_slot,
            dparents,
            n_slots,
        })
    }

    pub fn graph(&self) -> &EbnGraph {
        self.graph
    }

    pub fn topo(&self) -> &[NodeId] {
        &self.topo
    }

    pub fn layout(&self) -> &HashMap<String, usize> {
        &self.layout
    }

    pub fn new_world(&self) -> World {
        World {
            states: vec![usize::MAX; self.graph.capacity()],
            slots: vec![0.0; self.n_slots],
        }
    }

    fn cfg_of(&self, id: NodeId, cards: &[usize], world: &World) -> usize {
        let dp = &self.dparents[&id];
        let states: Vec<usize> = dp.iter().map(|p| world.states[p.index()]).collect();
        radix::config_index(cards, &states)
    }

    /// Writes a discrete state and its numeric code into the world.
    pub fn set_state(&self, id: NodeId, state: usize, world: &mut World) {
        world.states[id.index()] = state;
        let d = self.graph.discrete(id).expect("discrete node");
        world.slots[self.code_slot[&id]] = d.numeric[state];
    }

    /// Determines the state of a domain-deterministic node from the
    /// current world (parents must be filled in).
    pub fn resolve_domain_state(
        &self,
        id: NodeId,
        world: &mut World,
        stack: &mut Vec<f64>,
    ) -> Result<usize, SimError> {
        let label = self.graph.label(id).to_string();
        match &self.plans[&id] {
            NodePlan::Threshold { g, cuts } => {
                let v = g
                    .eval_with(&world.slots, stack)
                    .map_err(|e| SimError::Node(label, e.to_string()))?;
                Ok(crate::model::DiscreteNode::threshold_state(cuts, v))
            }
            NodePlan::General { per_cfg, cards } => {
                let cfg = self.cfg_of(id, cards, world);
                for (state, domain) in per_cfg[cfg].iter().enumerate() {
                    let inside = domain
                        .value(&world.slots, stack)
                        .map_err(|e| SimError::Node(label.clone(), e.to_string()))?
                        <= 0.0;
                    if inside {
                        return Ok(state);
                    }
                }
                Err(SimError::Node(
                    label,
                    "no state domain contains the sampled parents".into(),
                ))
            }
            _ => unreachable!("not a domain-deterministic node"),
        }
    }

    /// Conditional PMF of a discrete node given the filled-in parents.
    pub fn conditional_pmf(
        &self,
        id: NodeId,
        world: &mut World,
        stack: &mut Vec<f64>,
    ) -> Result<Vec<f64>, SimError> {
        let label = self.graph.label(id).to_string();
        match &self.plans[&id] {
            NodePlan::Cpt { cards, m } => {
                let d = self.graph.discrete(id).expect("discrete");
                let DiscreteKind::Cpt { table } = &d.kind else {
                    unreachable!()
                };
                let cfg = self.cfg_of(id, cards, world);
                Ok(table[cfg * m..(cfg + 1) * m].to_vec())
            }
            NodePlan::Pmf { exprs, m } => {
                let mut probs = Vec::with_capacity(*m);
                let mut sum = 0.0;
                for e in exprs {
                    let p = e
                        .eval_with(&world.slots, stack)
                        .map_err(|er| SimError::Node(label.clone(), er.to_string()))?;
                    if !(-1e-9..=1.0 + 1e-9).contains(&p) {
                        return Err(SimError::Node(
                            label,
                            format!("PMF expression evaluated to {p}, outside [0, 1]"),
                        ));
                    }
                    sum += p;
                    probs.push(p.clamp(0.0, 1.0));
                }
                if probs.len() + 1 == *m {
                    if sum > 1.0 + 1e-6 {
                        return Err(SimError::Node(
                            label,
                            format!("PMF expressions sum to {sum} > 1"),
                        ));
                    }
                    probs.push((1.0 - sum).clamp(0.0, 1.0));
                } else if (sum - 1.0).abs() > 1e-6 {
                    return Err(SimError::Node(
                        label,
                        format!("PMF expressions sum to {sum}, not 1"),
                    ));
                }
                Ok(probs)
            }
            NodePlan::Threshold { .. } | NodePlan::General { .. } => {
                // Deterministic: a one-hot PMF at the resolved state.
                let m = self.graph.discrete(id).expect("discrete").n_states();
                let state = self.resolve_domain_state(id, world, stack)?;
                let mut probs = vec![0.0; m];
                probs[state] = 1.0;
                Ok(probs)
            }
            NodePlan::Continuous { .. } => unreachable!("not discrete"),
        }
    }

    /// Samples the continuous node into the world's slots.
    fn sample_continuous(
        &self,
        id: NodeId,
        rng: &mut CountingRng,
        world: &mut World,
        stack: &mut Vec<f64>,
    ) -> Result<(), SimError> {
        let label = self.graph.label(id).to_string();
        let NodePlan::Continuous {
            marginals,
            chol,
            comp_slots,
            cards,
        } = &self.plans[&id]
        else {
            unreachable!()
        };
        let k = marginals.len();
        let mut z = vec![0.0; k];
        let mut eps = vec![0.0; k];
        for e in eps.iter_mut() {
            *e = rng.standard_normal();
        }
        chol.forward(&eps, &mut z);
        let cfg_idx = if marginals
            .iter()
            .any(|m| matches!(m, PlannedMarginal::PerConfig(_)))
        {
            self.cfg_of(id, cards, world)
        } else {
            0
        };
        for i in 0..k {
            let p = crate::dist::phi(z[i]).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
            let x = match &marginals[i] {
                PlannedMarginal::Fixed(m) => m.inv_cdf_unchecked(p),
                PlannedMarginal::PerConfig(table) => table
                    .get(cfg_idx)
                    .ok_or_else(|| {
                        SimError::Node(label.clone(), format!("no marginal for config {cfg_idx}"))
                    })?
                    .inv_cdf_unchecked(p),
                PlannedMarginal::Dynamic { family, params } => {
                    let mut vals = Vec::with_capacity(params.len());
                    for pe in params {
                        vals.push(
                            pe.eval_with(&world.slots, stack)
                                .map_err(|e| SimError::Node(label.clone(), e.to_string()))?,
                        );
                    }
                    family
                        .construct(&vals)
                        .map_err(|e| SimError::Node(label.clone(), e.to_string()))?
                        .inv_cdf_unchecked(p)
                }
            };
            world.slots[comp_slots[i]] = x;
        }
        Ok(())
    }

    /// Samples one world in topological order.
    pub fn sample(
        &self,
        rng: &mut CountingRng,
        world: &mut World,
        stack: &mut Vec<f64>,
    ) -> Result<(), SimError> {
        for &id in &self.topo {
            self.sample_node(id, rng, world, stack)?;
        }
        Ok(())
    }

    /// Samples a single node given its parents already filled in.
    pub fn sample_node(
        &self,
        id: NodeId,
        rng: &mut CountingRng,
        world: &mut World,
        stack: &mut Vec<f64>,
    ) -> Result<(), SimError> {
        match &self.plans[&id] {
            NodePlan::Continuous { .. } => self.sample_continuous(id, rng, world, stack),
            NodePlan::Threshold { .. } | NodePlan::General { .. } => {
                let state = self.resolve_domain_state(id, world, stack)?;
                self.set_state(id, state, world);
                Ok(())
            }
            NodePlan::Cpt { .. } | NodePlan::Pmf { .. } => {
                let probs = self.conditional_pmf(id, world, stack)?;
                let state = rng.categorical(&probs);
                self.set_state(id, state, world);
                Ok(())
            }
        }
    }
}

/// Stochastic model checks: domain exclusivity/exhaustiveness for
/// general-form nodes and PMF ranges, both evaluated at forward-sampled
/// parent values. Violations extend the structural validation report.
pub fn stochastic_checks(graph: &EbnGraph, samples: usize, seed: u64) -> Vec<Violation> {
    let mut out = Vec::new();
    let sampler = match PreparedSampler::new(graph) {
        Ok(s) => s,
        Err(e) => {
            out.push(Violation {
                kind: ViolationKind::DomainCoverage,
                node: None,
                message: format!("cannot run sampled checks: {e}"),
            });
            return out;
        }
    };
    let mut rng = CountingRng::new(seed, 0);
    let mut world = sampler.new_world();
    let mut stack = Vec::new();
    let mut domain_bad: HashMap<NodeId, String> = HashMap::new();
    let mut pmf_bad: HashMap<NodeId, String> = HashMap::new();
    let topo: Vec<NodeId> = sampler.topo.clone();

    'outer: for _ in 0..samples {
        for &id in &topo {
            // Check before sampling so the checks see the parent draw.
            match &sampler.plans[&id] {
                NodePlan::General { per_cfg, cards } => {
                    let cfg = sampler.cfg_of(id, cards, &world);
                    let mut matches = 0usize;
                    for domain in &per_cfg[cfg] {
                        match domain.value(&world.slots, &mut stack) {
                            Ok(v) if v <= 0.0 => matches += 1,
                            Ok(_) => {}
                            Err(e) => {
                                domain_bad
                                    .entry(id)
                                    .or_insert_with(|| format!("domain evaluation failed: {e}"));
                            }
                        }
                    }
                    if matches != 1 {
                        domain_bad.entry(id).or_insert_with(|| {
                            format!(
                                "a sampled parent point fell in {matches} state domains \
                                 (must be exactly 1)"
                            )
                        });
                    }
                }
                NodePlan::Pmf { .. } => {
                    if let Err(e) = sampler.conditional_pmf(id, &mut world, &mut stack) {
                        pmf_bad.entry(id).or_insert_with(|| e.to_string());
                    }
                }
                _ => {}
            }
            // Advance the sample; a node that cannot be sampled ends the
            // pass (its violation is already recorded above).
            if sampler
                .sample_node(id, &mut rng, &mut world, &mut stack)
                .is_err()
            {
                continue 'outer;
            }
        }
    }

    for (id, message) in domain_bad {
        out.push(Violation {
            kind: ViolationKind::DomainCoverage,
            node: Some(graph.label(id).to_string()),
            message,
        });
    }
    for (id, message) in pmf_bad {
        out.push(Violation {
            kind: ViolationKind::PmfRange,
            node: Some(graph.label(id).to_string()),
            message,
        });
    }
    out
}

/// Standard deviation of an expression over forward samples of the
/// graph (used to scale default evidence widths).
pub fn sampled_expr_std(
    graph: &EbnGraph,
    expr: &DomainSpec,
    samples: usize,
    seed: u64,
) -> Result<f64, SimError> {
    let sampler = PreparedSampler::new(graph)?;
    let compiled = expr
        .cutsets
        .iter()
        .map(|c| {
            c.iter()
                .map(|g| CompiledExpr::compile(g, &sampler.layout))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| SimError::Prepare(e.to_string()))?;
    let mut rng = CountingRng::new(seed, 0);
    let mut world = sampler.new_world();
    let mut stack = Vec::new();
    let (mut s, mut q, mut n) = (0.0, 0.0, 0.0);
    for _ in 0..samples {
        sampler.sample(&mut rng, &mut world, &mut stack)?;
        for cutset in &compiled {
            for g in cutset {
                let v = g
                    .eval_with(&world.slots, &mut stack)
                    .map_err(|e| SimError::Prepare(e.to_string()))?;
                s += v;
                q += v * v;
                n += 1.0;
            }
        }
    }
    if n < 2.0 {
        return Ok(0.0);
    }
    let mean = s / n;
    Ok((q / n - mean * mean).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lsf::parse_expr;
    use crate::model::{ContinuousNode, DiscreteNode, DomainRule, FamilyKind};

    fn cpt(label: &str, table: Vec<f64>) -> DiscreteNode {
        DiscreteNode {
            label: label.into(),
            states: vec!["a".into(), "b".into()],
            numeric: vec![0.0, 1.0],
            kind: DiscreteKind::Cpt { table },
        }
    }

    fn std_normal(label: &str, comp: &str) -> ContinuousNode {
        ContinuousNode::scalar(
            label,
            comp,
            MarginalSpec::constant(FamilyKind::Normal, &[0.0, 1.0]),
        )
    }

    #[test]
    fn hybrid_chain_samples_consistently() {
        // y (cpt) -> x | y ~ N(2y, 1) -> z = 1{x <= 1}
        let mut g = EbnGraph::new();
        let y = g.add_discrete(cpt("y", vec![0.5, 0.5])).unwrap();
        let x = g
            .add_continuous(ContinuousNode::scalar(
                "x",
                "h",
                MarginalSpec::Param {
                    family: FamilyKind::Normal,
                    params: vec![parse_expr("2*y").unwrap(), Expr::num(1.0)],
                },
            ))
            .unwrap();
        let z = g
            .add_discrete(DiscreteNode {
                label: "z".into(),
                states: vec!["in".into(), "out".into()],
                numeric: vec![0.0, 1.0],
                kind: DiscreteKind::DomainDet(DomainForm::Threshold {
                    g: parse_expr("h").unwrap(),
                    cuts: vec![1.0],
                }),
            })
            .unwrap();
        g.add_edge(y, x).unwrap();
        g.add_edge(x, z).unwrap();

        let sampler = PreparedSampler::new(&g).unwrap();
        let mut rng = CountingRng::new(5, 0);
        let mut world = sampler.new_world();
        let mut stack = Vec::new();
        let n = 200_000;
        let mut z_in = 0usize;
        let mut y1 = 0usize;
        for _ in 0..n {
            sampler.sample(&mut rng, &mut world, &mut stack).unwrap();
            if world.states[z.index()] == 0 {
                z_in += 1;
            }
            if world.states[y.index()] == 1 {
                y1 += 1;
            }
        }
        // P(z = in) = 0.5 Phi(1) + 0.5 Phi(-1)
        let expect = 0.5 * crate::dist::phi(1.0) + 0.5 * crate::dist::phi(-1.0);
        let got = z_in as f64 / n as f64;
        let se = (expect * (1.0 - expect) / n as f64).sqrt();
        assert!((got - expect).abs() < 4.0 * se, "got {got} expect {expect}");
        let py = y1 as f64 / n as f64;
        assert!((py - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt());
    }

    #[test]
    fn coverage_gap_is_detected() {
        let mut g = EbnGraph::new();
        let x = g.add_continuous(std_normal("x", "h")).unwrap();
        let y = g
            .add_discrete(DiscreteNode {
                label: "y".into(),
                states: vec!["neg".into(), "pos".into()],
                numeric: vec![0.0, 1.0],
                kind: DiscreteKind::DomainDet(DomainForm::General {
                    rules: vec![
                        DomainRule {
                            state: 0,
                            given: None,
                            domain: crate::lsf::DomainSpec::component(parse_expr("h").unwrap()),
                        },
                        DomainRule {
                            state: 1,
                            given: None,
                            // gap: (0, 1) not covered by h >= 1
                            domain: crate::lsf::DomainSpec::component(
                                parse_expr("1 - h").unwrap(),
                            ),
                        },
                    ],
                }),
            })
            .unwrap();
        g.add_edge(x, y).unwrap();
        let violations = stochastic_checks(&g, 10_000, 1);
        assert!(violations
            .iter()
            .any(|v| v.kind == ViolationKind::DomainCoverage));
    }

    #[test]
    fn proper_partition_passes_checks() {
        let mut g = EbnGraph::new();
        let x = g.add_continuous(std_normal("x", "h")).unwrap();
        let y = g
            .add_discrete(DiscreteNode {
                label: "y".into(),
                states: vec!["neg".into(), "pos".into()],
                numeric: vec![0.0, 1.0],
                kind: DiscreteKind::DomainDet(DomainForm::General {
                    rules: vec![
                        DomainRule {
                            state: 0,
                            given: None,
                            domain: crate::lsf::DomainSpec::component(parse_expr("h").unwrap()),
                        },
                        DomainRule {
                            state: 1,
                            given: None,
                            domain: crate::lsf::DomainSpec::component(parse_expr("-h").unwrap()),
                        },
                    ],
                }),
            })
            .unwrap();
        g.add_edge(x, y).unwrap();
        let violations = stochastic_checks(&g, 10_000, 1);
        assert!(violations.is_empty(), "{violations:?}");
    }

    #[test]
    fn pmf_out_of_range_is_detected() {
        let mut g = EbnGraph::new();
        let x = g.add_continuous(std_normal("x", "h")).unwrap();
        let y = g
            .add_discrete(DiscreteNode {
                label: "y".into(),
                states: vec!["a".into(), "b".into()],
                numeric: vec![0.0, 1.0],
                kind: DiscreteKind::Pmf {
                    exprs: vec![parse_expr("h + 0.5").unwrap()],
                },
            })
            .unwrap();
        g.add_edge(x, y).unwrap();
        let violations = stochastic_checks(&g, 5_000, 2);
        assert!(violations.iter().any(|v| v.kind == ViolationKind::PmfRange));
    }
}
