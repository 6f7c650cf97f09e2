//! Shared graph fixtures for unit tests.

use crate::lsf::parse_expr;
use crate::model::{
    ContinuousNode, DiscreteKind, DiscreteNode, DomainForm, EbnGraph, FamilyKind, MarginalSpec,
    NodeId,
};
use std::collections::BTreeMap;

pub(crate) fn cpt2(label: &str, table: Vec<f64>) -> DiscreteNode {
    DiscreteNode {
        label: label.into(),
        states: vec!["s0".into(), "s1".into()],
        numeric: vec![0.0, 1.0],
        kind: DiscreteKind::Cpt { table },
    }
}

pub(crate) fn threshold_child(label: &str, expr: &str, cuts: Vec<f64>) -> DiscreteNode {
    let m = cuts.len() + 1;
    DiscreteNode {
        label: label.into(),
        states: (0..m).map(|k| format!("s{k}")).collect(),
        numeric: (0..m).map(|k| k as f64).collect(),
        kind: DiscreteKind::DomainDet(DomainForm::Threshold {
            g: parse_expr(expr).unwrap(),
            cuts,
        }),
    }
}

/// The seven-discrete-node hybrid fixture with a single scalar
/// continuous node: y1 -> y2, y1 -> y3, y2 -> y3, y3 -> y4, y3 -> x1,
/// y4 -> y5, x1 -> y5, y5 -> y6, x1 -> y6, y5 -> y7. One envelope
/// {x1; y3, y4, y5, y6}.
pub(crate) fn seven_node_fixture() -> (EbnGraph, BTreeMap<&'static str, NodeId>) {
    let mut g = EbnGraph::new();
    let y1 = g.add_discrete(cpt2("y1", vec![0.7, 0.3])).unwrap();
    let y2 = g
        .add_discrete(cpt2("y2", vec![0.8, 0.2, 0.4, 0.6]))
        .unwrap();
    let y3 = g
        .add_discrete(cpt2("y3", vec![0.9, 0.1, 0.6, 0.4, 0.5, 0.5, 0.2, 0.8]))
        .unwrap();
    let y4 = g
        .add_discrete(cpt2("y4", vec![0.75, 0.25, 0.3, 0.7]))
        .unwrap();
    let x1 = g
        .add_continuous(ContinuousNode::scalar(
            "x1",
            "h",
            MarginalSpec::Param {
                family: FamilyKind::Normal,
                params: vec![
                    parse_expr("0.5 + 1.5*y3").unwrap(),
                    crate::lsf::Expr::num(1.0),
                ],
            },
        ))
        .unwrap();
    let y5 = g
        .add_discrete(threshold_child("y5", "h - 0.8*y4", vec![1.0]))
        .unwrap();
    let y6 = g
        .add_discrete(threshold_child("y6", "h + 0.5*y5", vec![1.5]))
        .unwrap();
    let y7 = g
        .add_discrete(cpt2("y7", vec![0.85, 0.15, 0.25, 0.75]))
        .unwrap();
    g.add_edge(y1, y2).unwrap();
    g.add_edge(y1, y3).unwrap();
    g.add_edge(y2, y3).unwrap();
    g.add_edge(y3, y4).unwrap();
    g.add_edge(y3, x1).unwrap();
    g.add_edge(y4, y5).unwrap();
    g.add_edge(x1, y5).unwrap();
    g.add_edge(y5, y6).unwrap();
    g.add_edge(x1, y6).unwrap();
    g.add_edge(y5, y7).unwrap();
    let ids = BTreeMap::from([
        ("y1", y1),
        ("y2", y2),
        ("y3", y3),
        ("y4", y4),
        ("x1", x1),
        ("y5", y5),
        ("y6", y6),
        ("y7", y7),
    ]);
    (g, ids)
}
