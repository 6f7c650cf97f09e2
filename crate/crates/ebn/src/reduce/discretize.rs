//! Interval discretization of a scalar continuous node: replaces X with
//! a discrete interval indicator Y and one or more continuous carriers
//! X' holding the within-interval conditional distribution.

use crate::dist::Marginal;
use crate::lsf::{Expr, Func};
use crate::model::{
    ContinuousNode, DiscreteKind, DiscreteNode, EbnGraph, FamilyKind, MarginalSpec, Node, NodeId,
};
use crate::reduce::ReduceError;
use std::collections::HashMap;

/// Within-interval conditional model for the carrier variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InteriorModel {
    /// The exact truncated marginal (no approximation; parentless
    /// originals only).
    Truncated,
    /// Uniform inside bounded intervals, exponential decay in unbounded
    /// tails.
    Uniform,
}

/// Whether the children share one carrier or get independent copies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiscretizeTopology {
    /// One carrier feeding every child: within-interval dependence among
    /// the children is preserved.
    SharedChild,
    /// One carrier per child: envelopes split per child at the cost of
    /// understating the dependence among them.
    PerChild,
}

/// Interval layout plus conditional-model choices.
#[derive(Debug, Clone)]
pub struct DiscretizationScheme {
    /// Strictly increasing interior boundaries; k cuts make k+1 states.
    pub boundaries: Vec<f64>,
    pub interior: InteriorModel,
    /// Decay rate of the lower unbounded tail (default: 1/sd of the
    /// base marginal).
    pub tail_lambda_low: Option<f64>,
    /// Decay rate of the upper unbounded tail (same default).
    pub tail_lambda_high: Option<f64>,
    pub topology: DiscretizeTopology,
}

impl DiscretizationScheme {
    pub fn exact(boundaries: Vec<f64>) -> Self {
        DiscretizationScheme {
            boundaries,
            interior: InteriorModel::Truncated,
            tail_lambda_low: None,
            tail_lambda_high: None,
            topology: DiscretizeTopology::SharedChild,
        }
    }
}

fn unique_label(graph: &EbnGraph, base: &str) -> String {
    if graph.by_label(base).is_none() && graph.component(base).is_none() {
        return base.to_string();
    }
    let mut k = 2usize;
    loop {
        let candidate = format!("{base}{k}");
        if graph.by_label(&candidate).is_none() && graph.component(&candidate).is_none() {
            return candidate;
        }
        k += 1;
    }
}

/// CDF of the family at the constant point `c`, as an expression over
/// the same parameter expressions.
fn cdf_expr(family: FamilyKind, params: &[Expr], c: f64) -> Expr {
    let p = |i: usize| params[i].clone();
    match family {
        FamilyKind::Normal => Expr::call(
            Func::Phi,
            vec![Expr::div(Expr::sub(Expr::num(c), p(0)), p(1))],
        ),
        FamilyKind::Lognormal => {
            if c <= 0.0 {
                Expr::num(0.0)
            } else {
                Expr::call(
                    Func::Phi,
                    vec![Expr::div(Expr::sub(Expr::num(c.ln()), p(0)), p(1))],
                )
            }
        }
        FamilyKind::Uniform => Expr::call(
            Func::Min,
            vec![
                Expr::num(1.0),
                Expr::call(
                    Func::Max,
                    vec![
                        Expr::num(0.0),
                        Expr::div(
                            Expr::sub(Expr::num(c), p(0)),
                            Expr::sub(p(1), p(0)),
                        ),
                    ],
                ),
            ],
        ),
        FamilyKind::Exponential => {
            if c <= 0.0 {
                Expr::num(0.0)
            } else {
                Expr::sub(
                    Expr::num(1.0),
                    Expr::call(Func::Exp, vec![Expr::mul(Expr::Neg(Box::new(p(0))), Expr::num(c))]),
                )
            }
        }
        FamilyKind::Gumbel => Expr::call(
            Func::Exp,
            vec![Expr::Neg(Box::new(Expr::call(
                Func::Exp,
                vec![Expr::Neg(Box::new(Expr::div(
                    Expr::sub(Expr::num(c), p(0)),
                    p(1),
                )))],
            )))],
        ),
        FamilyKind::ExpTail => Expr::sub(
            Expr::num(1.0),
            Expr::call(
                Func::Exp,
                vec![Expr::Neg(Box::new(Expr::mul(
                    p(1),
                    Expr::sub(Expr::num(c), p(0)),
                )))],
            ),
        ),
        FamilyKind::NegExpTail => Expr::call(
            Func::Exp,
            vec![Expr::mul(p(1), Expr::sub(Expr::num(c), p(0)))],
        ),
    }
}

/// Builds the per-interval conditional marginals of the carrier.
fn interval_marginals(
    base: &Marginal,
    scheme: &DiscretizationScheme,
) -> Result<Vec<Marginal>, ReduceError> {
    let cuts = &scheme.boundaries;
    let (lo_support, hi_support) = base.support();
    for w in cuts.windows(2) {
        if w[0] >= w[1] {
            return Err(ReduceError::BadScheme(
                "boundaries must be strictly increasing".into(),
            ));
        }
    }
    if cuts.is_empty() {
        return Err(ReduceError::BadScheme(
            "at least one boundary is required".into(),
        ));
    }
    if cuts[0] <= lo_support || cuts[cuts.len() - 1] >= hi_support {
        return Err(ReduceError::BadScheme(format!(
            "boundaries must lie inside the support ({lo_support}, {hi_support})"
        )));
    }
    let m = cuts.len() + 1;
    let sd = base.sd();
    let mut out = Vec::with_capacity(m);
    for k in 0..m {
        let lo = if k == 0 { lo_support } else { cuts[k - 1] };
        let hi = if k == m - 1 { hi_support } else { cuts[k] };
        let marginal = match scheme.interior {
            InteriorModel::Truncated => crate::dist::truncate(base.clone(), lo, hi)
                .map_err(|e| ReduceError::BadScheme(e.to_string()))?,
            InteriorModel::Uniform => {
                if lo.is_finite() && hi.is_finite() {
                    Marginal::UniformSegment { lo, hi }
                } else if hi.is_finite() {
                    let rate = scheme.tail_lambda_low.unwrap_or(1.0 / sd);
                    if rate <= 0.0 {
                        return Err(ReduceError::BadScheme("tail rate must be > 0".into()));
                    }
                    Marginal::NegExpTail { hi, rate }
                } else {
                    let rate = scheme.tail_lambda_high.unwrap_or(1.0 / sd);
                    if rate <= 0.0 {
                        return Err(ReduceError::BadScheme("tail rate must be > 0".into()));
                    }
                    Marginal::ExpTail { lo, rate }
                }
            }
        };
        out.push(marginal);
    }
    Ok(out)
}

/// Replaces the scalar continuous node `x` by a discrete interval node
/// and one or more continuous carriers, rewiring the children.
pub fn discretize_node(
    graph: &EbnGraph,
    x: NodeId,
    scheme: &DiscretizationScheme,
) -> Result<EbnGraph, ReduceError> {
    let cont = graph
        .continuous(x)
        .map_err(|e| ReduceError::InvalidGraph(e.to_string()))?;
    if cont.dim() != 1 {
        return Err(ReduceError::BadScheme(format!(
            "`{}` is vector-valued ({} components); model its components \
             as separate scalar nodes to discretize",
            cont.label,
            cont.dim()
        )));
    }
    let comp_name = cont.components[0].clone();
    let spec = cont.marginals[0].clone();
    let parents: Vec<NodeId> = graph.parents(x).to_vec();
    let children: Vec<NodeId> = graph.children(x).to_vec();
    let parentless = parents.is_empty();
    let m = scheme.boundaries.len() + 1;

    if !parentless && scheme.interior == InteriorModel::Truncated {
        return Err(ReduceError::BadScheme(
            "the exact truncated interior requires a parentless node \
             (the marginal of a conditioned node is not available)"
                .into(),
        ));
    }

    let mut g = graph.clone();
    // The original node goes first so the shared carrier can keep its
    // component name (child expressions reference it).
    g.remove_node(x)
        .map_err(|e| ReduceError::InvalidGraph(e.to_string()))?;
    let states: Vec<String> = (1..=m).map(|k| format!("i{k}")).collect();
    let numeric: Vec<f64> = (0..m).map(|k| k as f64).collect();
    let y_label = unique_label(&g, &format!("{}_d", cont.label));

    // Interval-indicator node: exact closed-form CPT when parentless,
    // otherwise a parameterized PMF composed from the family CDF.
    let y_kind = if parentless {
        let base = spec
            .resolve(&HashMap::new(), 0)
            .map_err(ReduceError::BadScheme)?;
        let mut table = Vec::with_capacity(m);
        let mut acc = 0.0;
        for &c in &scheme.boundaries {
            let f = base.cdf(c);
            table.push(f - acc);
            acc = f;
        }
        table.push(1.0 - acc);
        if table.iter().any(|&p| p <= 0.0) {
            return Err(ReduceError::BadScheme(
                "every interval must carry positive probability".into(),
            ));
        }
        DiscreteKind::Cpt { table }
    } else {
        let MarginalSpec::Param { family, params } = &spec else {
            return Err(ReduceError::BadScheme(
                "cannot discretize a node whose marginal is already \
                 per-configuration"
                    .into(),
            ));
        };
        let mut exprs = Vec::with_capacity(m - 1);
        let mut prev: Option<Expr> = None;
        for &c in &scheme.boundaries {
            let f = cdf_expr(*family, params, c);
            exprs.push(match prev.clone() {
                None => f.clone(),
                Some(p) => Expr::sub(f.clone(), p),
            });
            prev = Some(f);
        }
        DiscreteKind::Pmf { exprs }
    };

    let y_id = g
        .add_discrete(DiscreteNode {
            label: y_label.clone(),
            states,
            numeric,
            kind: y_kind,
        })
        .map_err(|e| ReduceError::InvalidGraph(e.to_string()))?;
    for &p in &parents {
        g.add_edge(p, y_id)
            .map_err(|e| ReduceError::InvalidGraph(e.to_string()))?;
    }

    // Carrier conditionals per interval.
    let carrier_table = if parentless {
        let base = spec
            .resolve(&HashMap::new(), 0)
            .map_err(ReduceError::BadScheme)?;
        interval_marginals(&base, scheme)?
    } else {
        // With parents the exact interior is rejected above; the uniform
        // interior's segments and tails do not depend on the parent
        // values, only on the boundaries.
        interval_marginals(
            &Marginal::Normal {
                mean: 0.0,
                sd: 1.0,
            },
            scheme,
        )?
    };

    let mut rewire: Vec<(NodeId, String, String)> = Vec::new();
    match scheme.topology {
        DiscretizeTopology::SharedChild => {
            let label = unique_label(&g, &format!("{}_c", cont.label));
            let carrier = g
                .add_continuous(ContinuousNode {
                    label,
                    components: vec![comp_name.clone()],
                    marginals: vec![MarginalSpec::PerConfig {
                        table: carrier_table.clone(),
                    }],
                    correlation: vec![vec![1.0]],
                })
                .map_err(|e| ReduceError::InvalidGraph(e.to_string()))?;
            g.add_edge(y_id, carrier)
                .map_err(|e| ReduceError::InvalidGraph(e.to_string()))?;
            for &c in &children {
                g.add_edge(carrier, c)
                    .map_err(|e| ReduceError::InvalidGraph(e.to_string()))?;
            }
        }
        DiscretizeTopology::PerChild => {
            for &c in &children {
                let child_label = g.label(c).to_string();
                let label = unique_label(&g, &format!("{}_c_{child_label}", cont.label));
                let new_comp = unique_label(&g, &format!("{comp_name}_{child_label}"));
                let carrier = g
                    .add_continuous(ContinuousNode {
                        label,
                        components: vec![new_comp.clone()],
                        marginals: vec![MarginalSpec::PerConfig {
                            table: carrier_table.clone(),
                        }],
                        correlation: vec![vec![1.0]],
                    })
                    .map_err(|e| ReduceError::InvalidGraph(e.to_string()))?;
                g.add_edge(y_id, carrier)
                    .map_err(|e| ReduceError::InvalidGraph(e.to_string()))?;
                g.add_edge(carrier, c)
                    .map_err(|e| ReduceError::InvalidGraph(e.to_string()))?;
                rewire.push((c, comp_name.clone(), new_comp));
            }
        }
    }

    for (child, old, new) in rewire {
        rename_in_child(&mut g, child, &old, &new);
    }
    Ok(g)
}

/// Renames a component inside a child's local model expressions.
fn rename_in_child(g: &mut EbnGraph, child: NodeId, old: &str, new: &str) {
    let renames: HashMap<String, String> = [(old.to_string(), new.to_string())].into();
    match g.node(child).clone() {
        Node::Discrete(mut d) => {
            match &mut d.kind {
                DiscreteKind::Cpt { .. } | DiscreteKind::Pending => {}
                DiscreteKind::DomainDet(form) => match form {
                    crate::model::DomainForm::Threshold { g: expr, .. } => {
                        *expr = expr.rename_vars(&renames);
                    }
                    crate::model::DomainForm::General { rules } => {
                        for r in rules {
                            r.domain = r.domain.rename_vars(&renames);
                        }
                    }
                },
                DiscreteKind::Pmf { exprs } => {
                    for e in exprs {
                        *e = e.rename_vars(&renames);
                    }
                }
            }
            *g.node_mut(child) = Node::Discrete(d);
        }
        Node::Continuous(mut c) => {
            for spec in &mut c.marginals {
                if let MarginalSpec::Param { params, .. } = spec {
                    for p in params {
                        *p = p.rename_vars(&renames);
                    }
                }
            }
            *g.node_mut(child) = Node::Continuous(c);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::phi;
    use crate::lsf::parse_expr;
    use crate::model::{validate_graph, DomainForm};

    fn std_normal_graph_with_children(n_children: usize) -> (EbnGraph, NodeId, Vec<NodeId>) {
        let mut g = EbnGraph::new();
        let x = g
            .add_continuous(ContinuousNode::scalar(
                "x0",
                "h",
                MarginalSpec::constant(FamilyKind::Normal, &[0.0, 1.0]),
            ))
            .unwrap();
        let mut children = Vec::new();
        for i in 1..=n_children {
            let y = g
                .add_discrete(DiscreteNode {
                    label: format!("y{i}"),
                    states: vec!["in".into(), "out".into()],
                    numeric: vec![0.0, 1.0],
                    kind: DiscreteKind::DomainDet(DomainForm::Threshold {
                        g: parse_expr("h").unwrap(),
                        cuts: vec![0.2 * i as f64],
                    }),
                })
                .unwrap();
            g.add_edge(x, y).unwrap();
            children.push(y);
        }
        (g, x, children)
    }

    #[test]
    fn parentless_exact_discretization_has_closed_form_interval_probabilities() {
        let (g, x, _) = std_normal_graph_with_children(1);
        let scheme = DiscretizationScheme::exact(vec![-1.0, 1.0]);
        let out = discretize_node(&g, x, &scheme).unwrap();
        let y = out.by_label("x0_d").unwrap();
        let d = out.discrete(y).unwrap();
        let DiscreteKind::Cpt { table } = &d.kind else {
            panic!("expected a closed-form table")
        };
        assert_eq!(table.len(), 3);
        assert!((table[0] - phi(-1.0)).abs() < 1e-15);
        assert!((table[1] - 0.6826894921370859).abs() < 1e-15);
        assert!((table[2] - phi(-1.0)).abs() < 1e-15);
        // the carrier holds exact truncated conditionals
        let carrier = out.by_label("x0_c").unwrap();
        let c = out.continuous(carrier).unwrap();
        let MarginalSpec::PerConfig { table: ms } = &c.marginals[0] else {
            panic!("expected per-interval marginals")
        };
        assert_eq!(ms.len(), 3);
        assert!(matches!(ms[1], Marginal::Truncated { .. }));
        assert!(validate_graph(&out).is_valid());
    }

    #[test]
    fn shared_vs_per_child_envelope_split() {
        let (g, x, _) = std_normal_graph_with_children(5);
        assert_eq!(g.markov_envelopes().envelopes.len(), 1);

        let shared = discretize_node(&g, x, &DiscretizationScheme::exact(vec![0.0])).unwrap();
        assert_eq!(shared.markov_envelopes().envelopes.len(), 1);

        let mut scheme = DiscretizationScheme::exact(vec![0.0]);
        scheme.topology = DiscretizeTopology::PerChild;
        let split = discretize_node(&g, x, &scheme).unwrap();
        let report = split.markov_envelopes();
        assert_eq!(report.envelopes.len(), 5, "one envelope per carrier");
        assert!(validate_graph(&split).is_valid());
        // each envelope holds the interval node and one child
        for env in &report.envelopes {
            assert_eq!(env.discrete_members.len(), 2);
        }
    }

    #[test]
    fn uniform_interior_uses_segments_and_tails() {
        let (g, x, _) = std_normal_graph_with_children(1);
        let scheme = DiscretizationScheme {
            boundaries: vec![-0.8, 0.3],
            interior: InteriorModel::Uniform,
            tail_lambda_low: None,
            tail_lambda_high: Some(2.0),
            topology: DiscretizeTopology::SharedChild,
        };
        let out = discretize_node(&g, x, &scheme).unwrap();
        let carrier = out.by_label("x0_c").unwrap();
        let MarginalSpec::PerConfig { table } = &out.continuous(carrier).unwrap().marginals[0]
        else {
            panic!()
        };
        assert!(matches!(
            table[0],
            Marginal::NegExpTail { hi, rate } if hi == -0.8 && rate == 1.0
        ));
        assert!(
            matches!(table[1], Marginal::UniformSegment { lo, hi } if lo == -0.8 && hi == 0.3)
        );
        assert!(matches!(
            table[2],
            Marginal::ExpTail { lo, rate } if lo == 0.3 && rate == 2.0
        ));
    }

    #[test]
    fn conditioned_node_gets_pmf_interval_indicator() {
        // z (binary) -> x | z ~ N(2z, 1), child over x
        let mut g = EbnGraph::new();
        let z = g
            .add_discrete(DiscreteNode {
                label: "z".into(),
                states: vec!["a".into(), "b".into()],
                numeric: vec![0.0, 1.0],
                kind: DiscreteKind::Cpt {
                    table: vec![0.5, 0.5],
                },
            })
            .unwrap();
        let x = g
            .add_continuous(ContinuousNode::scalar(
                "x",
                "h",
                MarginalSpec::Param {
                    family: FamilyKind::Normal,
                    params: vec![parse_expr("2*z").unwrap(), Expr::num(1.0)],
                },
            ))
            .unwrap();
        let y = g
            .add_discrete(DiscreteNode {
                label: "y".into(),
                states: vec!["in".into(), "out".into()],
                numeric: vec![0.0, 1.0],
                kind: DiscreteKind::DomainDet(DomainForm::Threshold {
                    g: parse_expr("h").unwrap(),
                    cuts: vec![1.0],
                }),
            })
            .unwrap();
        g.add_edge(z, x).unwrap();
        g.add_edge(x, y).unwrap();

        // exact interior is rejected with parents
        assert!(matches!(
            discretize_node(&g, x, &DiscretizationScheme::exact(vec![0.0, 1.5])),
            Err(ReduceError::BadScheme(_))
        ));

        let scheme = DiscretizationScheme {
            boundaries: vec![0.0, 1.5],
            interior: InteriorModel::Uniform,
            tail_lambda_low: None,
            tail_lambda_high: None,
            topology: DiscretizeTopology::SharedChild,
        };
        let out = discretize_node(&g, x, &scheme).unwrap();
        let yid = out.by_label("x_d").unwrap();
        assert_eq!(out.parents(yid), &[z]);
        let DiscreteKind::Pmf { exprs } = &out.discrete(yid).unwrap().kind else {
            panic!("expected a parameterized PMF")
        };
        assert_eq!(exprs.len(), 2, "last interval by complement");
        assert!(validate_graph(&out).is_valid());
        // P(Y = i1 | z) = Phi((0 - 2z)/1)
        let b: std::collections::HashMap<String, f64> = [("z".to_string(), 1.0)].into();
        let p = crate::lsf::eval_expr(&exprs[0], &b).unwrap();
        assert!((p - phi(-2.0)).abs() < 1e-12);
    }

    #[test]
    fn vector_nodes_are_rejected() {
        let mut g = EbnGraph::new();
        let x = g
            .add_continuous(ContinuousNode {
                label: "x".into(),
                components: vec!["a".into(), "b".into()],
                marginals: vec![
                    MarginalSpec::constant(FamilyKind::Normal, &[0.0, 1.0]),
                    MarginalSpec::constant(FamilyKind::Normal, &[0.0, 1.0]),
                ],
                correlation: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            })
            .unwrap();
        assert!(matches!(
            discretize_node(&g, x, &DiscretizationScheme::exact(vec![0.0])),
            Err(ReduceError::BadScheme(_))
        ));
    }

    #[test]
    fn boundaries_outside_support_are_rejected() {
        let mut g = EbnGraph::new();
        let x = g
            .add_continuous(ContinuousNode::scalar(
                "x",
                "h",
                MarginalSpec::constant(FamilyKind::Exponential, &[1.0]),
            ))
            .unwrap();
        let y = g
            .add_discrete(DiscreteNode {
                label: "y".into(),
                states: vec!["in".into(), "out".into()],
                numeric: vec![0.0, 1.0],
                kind: DiscreteKind::DomainDet(DomainForm::Threshold {
                    g: parse_expr("h").unwrap(),
                    cuts: vec![1.0],
                }),
            })
            .unwrap();
        g.add_edge(x, y).unwrap();
        assert!(matches!(
            discretize_node(&g, x, &DiscretizationScheme::exact(vec![-1.0, 1.0])),
            Err(ReduceError::BadScheme(_))
        ));
    }
}
