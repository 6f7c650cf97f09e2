//! Barren-node removal and arc reversal.

use crate::model::{radix, DiscreteKind, EbnGraph, Node, NodeId};
use crate::reduce::ReduceError;
use std::collections::BTreeSet;

/// Iteratively deletes childless nodes outside the protected set, with
/// their incoming links. The joint distribution over the surviving
/// nodes is unchanged.
pub fn remove_barren(graph: &EbnGraph, protected: &BTreeSet<NodeId>) -> EbnGraph {
    let mut g = graph.clone();
    loop {
        let barren: Vec<NodeId> = g
            .node_ids()
            .filter(|&id| g.children(id).is_empty() && !protected.contains(&id))
            .collect();
        if barren.is_empty() {
            return g;
        }
        for id in barren {
            g.remove_node(id).expect("live node");
        }
    }
}

/// Reverses the arc `from -> to` after verifying no alternative directed
/// path exists; both endpoints inherit each other's parents.
///
/// When both endpoints are plain-CPT discrete nodes with discrete
/// parents, the two tables are recomputed exactly so the joint
/// distribution is preserved. In every other case the operation is
/// structural: the reversed child's local model becomes pending and is
/// recomputed by compilation.
pub fn reverse_arc(graph: &EbnGraph, from: NodeId, to: NodeId) -> Result<EbnGraph, ReduceError> {
    if !graph.has_edge(from, to) {
        return Err(ReduceError::MissingEdge(
            graph.label(from).to_string(),
            graph.label(to).to_string(),
        ));
    }
    let exact = can_recompute_exactly(graph, from, to);
    let old_tables = if exact {
        Some((
            cpt_table(graph, from).to_vec(),
            cpt_table(graph, to).to_vec(),
            graph.discrete_parents(from),
            graph.discrete_parents(to),
        ))
    } else {
        None
    };

    let mut g = graph.clone();
    g.remove_edge(from, to);
    if g.reachable(from, to) {
        return Err(ReduceError::AlternativePath(
            graph.label(from).to_string(),
            graph.label(to).to_string(),
        ));
    }

    let pa_from: Vec<NodeId> = g.parents(from).to_vec();
    let pa_to: Vec<NodeId> = g.parents(to).to_vec();

    // Structure: to inherits pa(from); from inherits pa(to) and to.
    for &p in &pa_from {
        if !g.has_edge(p, to) {
            g.add_edge(p, to).expect("acyclic by theorem");
        }
    }
    for &p in &pa_to {
        if p != from && !g.has_edge(p, from) {
            g.add_edge(p, from).expect("acyclic by theorem");
        }
    }
    g.add_edge(to, from).expect("reversed edge");

    match old_tables {
        Some((table_i, table_j, dpar_i, dpar_j)) => {
            recompute_reversed_tables(&mut g, from, to, &table_i, &table_j, &dpar_i, &dpar_j);
        }
        None => {
            if g.node(to).is_discrete() {
                g.set_discrete_kind(to, DiscreteKind::Pending).unwrap();
            }
            if g.node(from).is_discrete() {
                g.set_discrete_kind(from, DiscreteKind::Pending).unwrap();
            }
        }
    }
    Ok(g)
}

fn can_recompute_exactly(g: &EbnGraph, i: NodeId, j: NodeId) -> bool {
    let plain_cpt = |id: NodeId| {
        matches!(
            g.node(id),
            Node::Discrete(d) if matches!(d.kind, DiscreteKind::Cpt { .. })
        )
    };
    plain_cpt(i)
        && plain_cpt(j)
        && g.parents(i).iter().all(|&p| g.node(p).is_discrete())
        && g.parents(j)
            .iter()
            .all(|&p| p == i || g.node(p).is_discrete())
}

fn cpt_table(g: &EbnGraph, id: NodeId) -> &[f64] {
    match &g.discrete(id).expect("discrete").kind {
        DiscreteKind::Cpt { table } => table,
        _ => unreachable!(),
    }
}

/// Exact Shachter update of the two conditional tables. Inputs are the
/// pre-reversal tables and discrete parent lists (i's parents A, j's
/// parents B + i); on exit j has table p(j | A u B) and i has
/// p(i | A u B u {j}).
fn recompute_reversed_tables(
    g: &mut EbnGraph,
    i: NodeId,
    j: NodeId,
    table_i: &[f64],
    table_j: &[f64],
    dpar_i: &[NodeId],
    dpar_j_with_i: &[NodeId],
) {
    let m_i = g.discrete(i).unwrap().n_states();
    let m_j = g.discrete(j).unwrap().n_states();
    let card = |id: NodeId| g.discrete(id).unwrap().n_states();

    let i_pos_in_j = dpar_j_with_i
        .iter()
        .position(|&p| p == i)
        .expect("i was a parent of j");

    // New parent lists in declaration order (the graph already has them).
    let new_dpar_j = g.discrete_parents(j);
    let new_dpar_i = g.discrete_parents(i);
    let cards_new_j: Vec<usize> = new_dpar_j.iter().map(|&p| card(p)).collect();
    let cards_new_i: Vec<usize> = new_dpar_i.iter().map(|&p| card(p)).collect();
    let cards_i_old: Vec<usize> = dpar_i.iter().map(|&p| card(p)).collect();
    let cards_j_old: Vec<usize> = dpar_j_with_i
        .iter()
        .map(|&p| if p == i { m_i } else { card(p) })
        .collect();

    let mut new_table_j = vec![0.0; radix::config_count(&cards_new_j) * m_j];
    let mut new_table_i = vec![0.0; radix::config_count(&cards_new_i) * m_i];

    for cfg in 0..radix::config_count(&cards_new_j) {
        let assign = radix::config_unrank(&cards_new_j, cfg);
        let state_of = |id: NodeId, extra_i: Option<usize>| -> usize {
            if id == i {
                return extra_i.expect("i state required");
            }
            let pos = new_dpar_j.iter().position(|&p| p == id).expect("in scope");
            assign[pos]
        };

        for sj in 0..m_j {
            // p_new(j | A u B) = sum_i p_old(j | B, i) p_old(i | A)
            let mut total = 0.0;
            let mut joint = vec![0.0; m_i];
            for si in 0..m_i {
                let idx_i_states: Vec<usize> =
                    dpar_i.iter().map(|&p| state_of(p, None)).collect();
                let p_i = table_i
                    [radix::config_index(&cards_i_old, &idx_i_states) * m_i + si];
                let idx_j_states: Vec<usize> = dpar_j_with_i
                    .iter()
                    .enumerate()
                    .map(|(k, &p)| {
                        if k == i_pos_in_j {
                            si
                        } else {
                            state_of(p, None)
                        }
                    })
                    .collect();
                let p_j = table_j
                    [radix::config_index(&cards_j_old, &idx_j_states) * m_j + sj];
                joint[si] = p_i * p_j;
                total += joint[si];
            }
            new_table_j[cfg * m_j + sj] = total;

            // p_new(i | A u B, j) = joint / total (uniform if unreachable)
            for si in 0..m_i {
                let cond = if total > 0.0 {
                    joint[si] / total
                } else {
                    1.0 / m_i as f64
                };
                let i_states: Vec<usize> = new_dpar_i
                    .iter()
                    .map(|&p| if p == j { sj } else { state_of(p, None) })
                    .collect();
                new_table_i[radix::config_index(&cards_new_i, &i_states) * m_i + si] = cond;
            }
        }
    }

    g.set_discrete_kind(j, DiscreteKind::Cpt { table: new_table_j })
        .unwrap();
    g.set_discrete_kind(i, DiscreteKind::Cpt { table: new_table_i })
        .unwrap();
}
