//! Evidence nodes: discrete children of continuous variables whose
//! states are observation domains, so that observations on continuous
//! quantities enter the reduced network as ordinary discrete evidence.

use crate::lsf::{DomainSpec, Expr};
use crate::model::{
    DiscreteKind, DiscreteNode, DomainForm, DomainRule, EbnGraph, NodeId,
};
use crate::reduce::ReduceError;

/// How the observation domains are specified.
#[derive(Debug, Clone)]
pub enum EvidenceForm {
    /// A scalar observable partitioned by cut points (exclusive and
    /// exhaustive by construction).
    Partition { g: Expr, cuts: Vec<f64> },
    /// Explicit domains, one per state.
    Domains(Vec<DomainSpec>),
    /// A zero-probability observation {h = 0}, represented by the
    /// small-probability domain {0 <= h <= delta}. Without an explicit
    /// delta, 1% of the sampled standard deviation of h is used.
    Equality { h: Expr, delta: Option<f64> },
}

/// Specification of an evidence node over continuous targets.
#[derive(Debug, Clone)]
pub struct EvidenceNodeSpec {
    pub label: String,
    pub targets: Vec<NodeId>,
    /// State labels; their count must match the domain count (two for
    /// the equality form).
    pub states: Vec<String>,
    pub form: EvidenceForm,
}

/// Samples drawn to scale a default equality width.
const DELTA_SAMPLES: usize = 1000;
const DELTA_SEED: u64 = 0x0b5e7ed;

/// Adds the evidence node as a domain-deterministic child of its
/// targets. Interval probabilities are computed later by compilation
/// like any other domain child.
pub fn add_evidence_node(
    graph: &EbnGraph,
    spec: &EvidenceNodeSpec,
) -> Result<EbnGraph, ReduceError> {
    if spec.targets.is_empty() {
        return Err(ReduceError::BadEvidence(
            "an evidence node needs at least one target".into(),
        ));
    }
    for &t in &spec.targets {
        if graph
            .continuous(t)
            .map_err(|e| ReduceError::BadEvidence(e.to_string()))
            .is_err()
        {
            return Err(ReduceError::BadEvidence(format!(
                "target `{}` is not a continuous node",
                graph.label(t)
            )));
        }
    }

    let (kind, m) = match &spec.form {
        EvidenceForm::Partition { g, cuts } => {
            if cuts.is_empty() {
                return Err(ReduceError::BadEvidence(
                    "a partition needs at least one cut".into(),
                ));
            }
            (
                DiscreteKind::DomainDet(DomainForm::Threshold {
                    g: g.clone(),
                    cuts: cuts.clone(),
                }),
                cuts.len() + 1,
            )
        }
        EvidenceForm::Domains(domains) => {
            if domains.len() < 2 {
                return Err(ReduceError::BadEvidence(
                    "an evidence node needs at least two observation domains".into(),
                ));
            }
            let rules = domains
                .iter()
                .enumerate()
                .map(|(state, domain)| DomainRule {
                    state,
                    given: None,
                    domain: domain.clone(),
                })
                .collect();
            (
                DiscreteKind::DomainDet(DomainForm::General { rules }),
                domains.len(),
            )
        }
        EvidenceForm::Equality { h, delta } => {
            let delta = match delta {
                Some(d) => *d,
                None => {
                    let sd = crate::sim::sampled_expr_std(
                        graph,
                        &DomainSpec::component(h.clone()),
                        DELTA_SAMPLES,
                        DELTA_SEED,
                    )
                    .map_err(|e| ReduceError::BadEvidence(e.to_string()))?;
                    if sd <= 0.0 {
                        return Err(ReduceError::BadEvidence(
                            "cannot scale a default width: the observable has zero \
                             sampled variance"
                                .into(),
                        ));
                    }
                    0.01 * sd
                }
            };
            if delta <= 0.0 {
                return Err(ReduceError::BadEvidence("delta must be > 0".into()));
            }
            // hit: {0 <= h} and {h <= delta}; miss: complement
            let hit = DomainSpec::intersection(vec![
                Expr::Neg(Box::new(h.clone())),
                Expr::sub(h.clone(), Expr::num(delta)),
            ]);
            let miss = DomainSpec::new(vec![
                vec![h.clone()],
                vec![Expr::sub(Expr::num(delta), h.clone())],
            ]);
            let rules = vec![
                DomainRule {
                    state: 0,
                    given: None,
                    domain: hit,
                },
                DomainRule {
                    state: 1,
                    given: None,
                    domain: miss,
                },
            ];
            (DiscreteKind::DomainDet(DomainForm::General { rules }), 2)
        }
    };
    if spec.states.len() != m {
        return Err(ReduceError::BadEvidence(format!(
            "{} state labels for {m} observation domains",
            spec.states.len()
        )));
    }

    let mut g = graph.clone();
    let id = g
        .add_discrete(DiscreteNode {
            label: spec.label.clone(),
            states: spec.states.clone(),
            numeric: (0..m).map(|k| k as f64).collect(),
            kind,
        })
        .map_err(|e| ReduceError::BadEvidence(e.to_string()))?;
    for &t in &spec.targets {
        g.add_edge(t, id)
            .map_err(|e| ReduceError::BadEvidence(e.to_string()))?;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lsf::parse_expr;
    use crate::model::{validate_graph, ContinuousNode, FamilyKind, MarginalSpec};

    fn graph_with_normal() -> (EbnGraph, NodeId) {
        let mut g = EbnGraph::new();
        let x = g
            .add_continuous(ContinuousNode::scalar(
                "x",
                "h",
                MarginalSpec::constant(FamilyKind::Normal, &[0.0, 1.0]),
            ))
            .unwrap();
        (g, x)
    }

    #[test]
    fn binary_sign_domains() {
        let (g, x) = graph_with_normal();
        let spec = EvidenceNodeSpec {
            label: "ye".into(),
            targets: vec![x],
            states: vec!["neg".into(), "pos".into()],
            form: EvidenceForm::Partition {
                g: parse_expr("h").unwrap(),
                cuts: vec![0.0],
            },
        };
        let out = add_evidence_node(&g, &spec).unwrap();
        let ye = out.by_label("ye").unwrap();
        assert_eq!(out.parents(ye), &[x]);
        assert!(validate_graph(&out).is_valid());
    }

    #[test]
    fn quartile_partition() {
        let (g, x) = graph_with_normal();
        let q = 0.6744897501960817; // Phi^-1(0.75)
        let spec = EvidenceNodeSpec {
            label: "ye".into(),
            targets: vec![x],
            states: (1..=4).map(|k| format!("q{k}")).collect(),
            form: EvidenceForm::Partition {
                g: parse_expr("h").unwrap(),
                cuts: vec![-q, 0.0, q],
            },
        };
        let out = add_evidence_node(&g, &spec).unwrap();
        assert_eq!(out.discrete(out.by_label("ye").unwrap()).unwrap().n_states(), 4);
    }

    #[test]
    fn equality_observation_builds_a_small_probability_domain() {
        let (g, x) = graph_with_normal();
        let spec = EvidenceNodeSpec {
            label: "ye".into(),
            targets: vec![x],
            states: vec!["hit".into(), "miss".into()],
            form: EvidenceForm::Equality {
                h: parse_expr("h - 2").unwrap(),
                delta: Some(0.01),
            },
        };
        let out = add_evidence_node(&g, &spec).unwrap();
        assert!(validate_graph(&out).is_valid());
        let ye = out.by_label("ye").unwrap();
        let DiscreteKind::DomainDet(DomainForm::General { rules }) =
            &out.discrete(ye).unwrap().kind
        else {
            panic!()
        };
        // hit iff 2 <= h <= 2.01
        let b = |v: f64| -> std::collections::HashMap<String, f64> {
            [("h".to_string(), v)].into()
        };
        assert!(rules[0].domain.contains(&b(2.005)).unwrap());
        assert!(!rules[0].domain.contains(&b(1.99)).unwrap());
        assert!(!rules[0].domain.contains(&b(2.02)).unwrap());
        assert!(rules[1].domain.contains(&b(1.99)).unwrap());
        assert!(rules[1].domain.contains(&b(2.02)).unwrap());
    }

    #[test]
    fn default_delta_scales_with_the_observable() {
        let (g, x) = graph_with_normal();
        let spec = EvidenceNodeSpec {
            label: "ye".into(),
            targets: vec![x],
            states: vec!["hit".into(), "miss".into()],
            form: EvidenceForm::Equality {
                h: parse_expr("h - 2").unwrap(),
                delta: None,
            },
        };
        let out = add_evidence_node(&g, &spec).unwrap();
        let ye = out.by_label("ye").unwrap();
        let DiscreteKind::DomainDet(DomainForm::General { rules }) =
            &out.discrete(ye).unwrap().kind
        else {
            panic!()
        };
        // std of h - 2 with h ~ N(0,1) is ~1, so delta ~ 0.01
        let b = |v: f64| -> std::collections::HashMap<String, f64> {
            [("h".to_string(), v)].into()
        };
        assert!(rules[0].domain.contains(&b(2.004)).unwrap());
        assert!(!rules[0].domain.contains(&b(2.03)).unwrap());
    }

    #[test]
    fn discrete_targets_are_rejected() {
        let mut g = EbnGraph::new();
        let y = g
            .add_discrete(DiscreteNode {
                label: "y".into(),
                states: vec!["a".into(), "b".into()],
                numeric: vec![0.0, 1.0],
                kind: DiscreteKind::Cpt {
                    table: vec![0.5, 0.5],
                },
            })
            .unwrap();
        let spec = EvidenceNodeSpec {
            label: "ye".into(),
            targets: vec![y],
            states: vec!["a".into(), "b".into()],
            form: EvidenceForm::Partition {
                g: parse_expr("y").unwrap(),
                cuts: vec![0.5],
            },
        };
        assert!(matches!(
            add_evidence_node(&g, &spec),
            Err(ReduceError::BadEvidence(_))
        ));
    }
}
