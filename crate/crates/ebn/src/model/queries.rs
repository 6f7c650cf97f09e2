//! Graph-theoretic queries: Markov blankets, d-separation, topological
//! order, and Markov envelopes.

use super::graph::{EbnGraph, NodeId};
use super::ModelError;
use std::collections::{BTreeSet, VecDeque};

/// One Markov envelope: a maximal set of continuous nodes connected
/// through their Markov blankets, together with the discrete members of
/// those blankets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub continuous_members: BTreeSet<NodeId>,
    pub discrete_members: BTreeSet<NodeId>,
}

/// All envelopes of a graph plus the clique lower bound they impose on
/// the reduced network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvelopeReport {
    pub envelopes: Vec<Envelope>,
    /// Max over envelopes of the discrete-member count; a lower limit to
    /// the maximum clique size in the reduced network.
    pub clique_lower_bound: usize,
}

impl EbnGraph {
    /// Spouses: parents of children, excluding the children of the node
    /// and the node itself.
    pub fn spouses(&self, id: NodeId) -> BTreeSet<NodeId> {
        let children: BTreeSet<NodeId> = self.children(id).iter().copied().collect();
        let mut out = BTreeSet::new();
        for &c in self.children(id) {
            for &p in self.parents(c) {
                if p != id && !children.contains(&p) {
                    out.insert(p);
                }
            }
        }
        out
    }

    /// Markov blanket: parents, children, and spouses.
    pub fn markov_blanket(&self, id: NodeId) -> Result<BTreeSet<NodeId>, ModelError> {
        if !self.contains(id) {
            return Err(ModelError::UnknownNode(format!("{id}")));
        }
        let mut out: BTreeSet<NodeId> = self.parents(id).iter().copied().collect();
        out.extend(self.children(id).iter().copied());
        out.extend(self.spouses(id));
        Ok(out)
    }

    /// Topological order; parents precede children, ties broken by
    /// declaration order. Errors if the graph has a directed cycle.
    pub fn topological_order(&self) -> Result<Vec<NodeId>, ModelError> {
        let mut indegree: Vec<usize> = self
            .node_ids()
            .map(|id| self.parents(id).len())
            .collect::<Vec<_>>();
        // indegree is indexed positionally over live nodes; build a map
        let live: Vec<NodeId> = self.node_ids().collect();
        let pos: std::collections::HashMap<NodeId, usize> =
            live.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let mut ready: BTreeSet<NodeId> = live
            .iter()
            .copied()
            .filter(|&id| self.parents(id).is_empty())
            .collect();
        let mut out = Vec::with_capacity(live.len());
        while let Some(&next) = ready.iter().next() {
            ready.remove(&next);
            out.push(next);
            for &c in self.children(next) {
                let slot = pos[&c];
                indegree[slot] -= 1;
                if indegree[slot] == 0 {
                    ready.insert(c);
                }
            }
        }
        if out.len() != live.len() {
            return Err(ModelError::Cycle);
        }
        Ok(out)
    }

    /// d-separation of `a` from `b` given `given`, by the reachability
    /// formulation of the chain/fork/collider rules.
    pub fn d_separated(
        &self,
        a: &BTreeSet<NodeId>,
        b: &BTreeSet<NodeId>,
        given: &BTreeSet<NodeId>,
    ) -> Result<bool, ModelError> {
        for set in [a, b, given] {
            for &n in set {
                if !self.contains(n) {
                    return Err(ModelError::UnknownNode(format!("{n}")));
                }
            }
        }
        for &n in a {
            if b.contains(&n) || given.contains(&n) {
                return Err(ModelError::OverlappingSets(self.label(n).to_string()));
            }
        }
        for &n in b {
            if given.contains(&n) {
                return Err(ModelError::OverlappingSets(self.label(n).to_string()));
            }
        }

        // Ancestors of the conditioning set (inclusive).
        let mut anc: BTreeSet<NodeId> = given.clone();
        let mut queue: VecDeque<NodeId> = given.iter().copied().collect();
        while let Some(n) = queue.pop_front() {
            for &p in self.parents(n) {
                if anc.insert(p) {
                    queue.push_back(p);
                }
            }
        }

        // Active-trail reachability. Direction Up means the node was
        // entered from a child, Down from a parent.
        #[derive(Clone, Copy, PartialEq, Eq, Hash)]
        enum Dir {
            Up,
            Down,
        }
        let mut visited: BTreeSet<(NodeId, bool)> = BTreeSet::new();
        let mut stack: Vec<(NodeId, Dir)> = a.iter().map(|&n| (n, Dir::Up)).collect();
        while let Some((n, dir)) = stack.pop() {
            let key = (n, dir == Dir::Up);
            if !visited.insert(key) {
                continue;
            }
            if !given.contains(&n) && b.contains(&n) {
                return Ok(false);
            }
            match dir {
                Dir::Up => {
                    if !given.contains(&n) {
                        for &p in self.parents(n) {
                            stack.push((p, Dir::Up));
                        }
                        for &c in self.children(n) {
                            stack.push((c, Dir::Down));
                        }
                    }
                }
                Dir::Down => {
                    if !given.contains(&n) {
                        for &c in self.children(n) {
                            stack.push((c, Dir::Down));
                        }
                    }
                    if anc.contains(&n) {
                        for &p in self.parents(n) {
                            stack.push((p, Dir::Up));
                        }
                    }
                }
            }
        }
        Ok(true)
    }

    /// Markov envelopes: transitive closure of "continuous node in my
    /// Markov blanket" starting from each continuous node; each closure
    /// plus the union of its members' blankets forms one envelope.
    pub fn markov_envelopes(&self) -> EnvelopeReport {
        let continuous: Vec<NodeId> = self
            .node_ids()
            .filter(|&id| self.node(id).is_continuous())
            .collect();
        let mut assigned: BTreeSet<NodeId> = BTreeSet::new();
        let mut envelopes = Vec::new();
        for &start in &continuous {
            if assigned.contains(&start) {
                continue;
            }
            let mut members = BTreeSet::new();
            let mut queue = VecDeque::from([start]);
            while let Some(x) = queue.pop_front() {
                if !members.insert(x) {
                    continue;
                }
                assigned.insert(x);
                for n in self.markov_blanket(x).expect("member exists") {
                    if self.node(n).is_continuous() && !members.contains(&n) {
                        queue.push_back(n);
                    }
                }
            }
            let mut discrete = BTreeSet::new();
            for &x in &members {
                for n in self.markov_blanket(x).expect("member exists") {
                    if self.node(n).is_discrete() {
                        discrete.insert(n);
                    }
                }
            }
            envelopes.push(Envelope {
                continuous_members: members,
                discrete_members: discrete,
            });
        }
        let clique_lower_bound = envelopes
            .iter()
            .map(|e| e.discrete_members.len())
            .max()
            .unwrap_or(0);
        EnvelopeReport {
            envelopes,
            clique_lower_bound,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::node::{
        ContinuousNode, DiscreteKind, DiscreteNode, DomainForm, MarginalSpec,
    };
    use crate::model::FamilyKind;
    use crate::lsf::parse_expr;

    fn binary(label: &str) -> DiscreteNode {
        DiscreteNode {
            label: label.to_string(),
            states: vec!["s0".into(), "s1".into()],
            numeric: vec![0.0, 1.0],
            kind: DiscreteKind::Cpt {
                table: vec![0.5, 0.5],
            },
        }
    }

    fn std_normal(label: &str, comp: &str) -> ContinuousNode {
        ContinuousNode::scalar(
            label,
            comp,
            MarginalSpec::constant(FamilyKind::Normal, &[0.0, 1.0]),
        )
    }

    fn domain_child(label: &str, comp: &str, cut: f64) -> DiscreteNode {
        DiscreteNode {
            label: label.to_string(),
            states: vec!["lo".into(), "hi".into()],
            numeric: vec![0.0, 1.0],
            kind: DiscreteKind::DomainDet(DomainForm::Threshold {
                g: parse_expr(comp).unwrap(),
                cuts: vec![cut],
            }),
        }
    }

    /// The five-node discrete graph: Z1 -> Z3, Z1 -> Z4, Z2 -> Z4,
    /// Z2 -> Z5.
    fn five_node() -> (EbnGraph, [NodeId; 5]) {
        let mut g = EbnGraph::new();
        let z1 = g.add_discrete(binary("z1")).unwrap();
        let z2 = g.add_discrete(binary("z2")).unwrap();
        let z3 = g.add_discrete(binary("z3")).unwrap();
        let z4 = g.add_discrete(binary("z4")).unwrap();
        let z5 = g.add_discrete(binary("z5")).unwrap();
        g.add_edge(z1, z3).unwrap();
        g.add_edge(z1, z4).unwrap();
        g.add_edge(z2, z4).unwrap();
        g.add_edge(z2, z5).unwrap();
        (g, [z1, z2, z3, z4, z5])
    }

    #[test]
    fn blanket_of_z1_is_z2_z3_z4() {
        let (g, [z1, z2, z3, z4, _]) = five_node();
        let bl = g.markov_blanket(z1).unwrap();
        assert_eq!(bl, BTreeSet::from([z2, z3, z4]));
    }

    #[test]
    fn isolated_node_has_empty_blanket() {
        let mut g = EbnGraph::new();
        let a = g.add_discrete(binary("a")).unwrap();
        assert!(g.markov_blanket(a).unwrap().is_empty());
    }

    #[test]
    fn blanket_membership_is_symmetric_for_spouses() {
        let (g, ids) = five_node();
        for &u in &ids {
            let blu = g.markov_blanket(u).unwrap();
            assert!(!blu.contains(&u));
            for &v in &ids {
                if u == v {
                    continue;
                }
                let blv = g.markov_blanket(v).unwrap();
                assert_eq!(blu.contains(&v), blv.contains(&u));
            }
        }
    }

    #[test]
    fn d_separation_on_the_five_node_graph() {
        let (g, [z1, z2, _, z4, z5]) = five_node();
        let s = |ids: &[NodeId]| ids.iter().copied().collect::<BTreeSet<_>>();
        // collider z4 unobserved: z1 and z5 separated
        assert!(g.d_separated(&s(&[z1]), &s(&[z5]), &s(&[])).unwrap());
        // direct edge
        assert!(!g.d_separated(&s(&[z2]), &s(&[z4]), &s(&[])).unwrap());
        // observing the collider opens the path z1 -> z4 <- z2 -> z5
        assert!(!g.d_separated(&s(&[z1]), &s(&[z5]), &s(&[z4])).unwrap());
        // symmetric in a and b
        assert!(g.d_separated(&s(&[z5]), &s(&[z1]), &s(&[])).unwrap());
        // overlapping sets are rejected
        assert!(g.d_separated(&s(&[z1]), &s(&[z1]), &s(&[])).is_err());
    }

    #[test]
    fn topological_order_is_deterministic() {
        let (g, [z1, z2, z3, z4, z5]) = five_node();
        let order = g.topological_order().unwrap();
        assert_eq!(order, vec![z1, z2, z3, z4, z5]);

        let mut g2 = EbnGraph::new();
        let b = g2.add_discrete(binary("b")).unwrap();
        let a = g2.add_discrete(binary("a")).unwrap();
        // two independent roots keep declaration order
        assert_eq!(g2.topological_order().unwrap(), vec![b, a]);

        let mut g3 = EbnGraph::new();
        let solo = g3.add_discrete(binary("solo")).unwrap();
        assert_eq!(g3.topological_order().unwrap(), vec![solo]);
        let _ = (a, b, solo);
    }

    /// Envelope structure: x1 and x3 are both in bl(x2) (x1 -> x2 and
    /// x3 shares the child yc with x2), so x1, x2, x3 form one envelope;
    /// x4 with its own child forms an individual envelope.
    #[test]
    fn envelopes_split_along_blanket_connectivity() {
        let mut g = EbnGraph::new();
        let x1 = g.add_continuous(std_normal("x1", "h1")).unwrap();
        let x2 = g
            .add_continuous(ContinuousNode::scalar(
                "x2",
                "h2",
                MarginalSpec::Param {
                    family: FamilyKind::Normal,
                    params: vec![parse_expr("h1").unwrap(), parse_expr("1").unwrap()],
                },
            ))
            .unwrap();
        let x3 = g.add_continuous(std_normal("x3", "h3")).unwrap();
        let x4 = g.add_continuous(std_normal("x4", "h4")).unwrap();
        let yc = g
            .add_discrete({
                let mut d = binary("yc");
                d.kind = DiscreteKind::DomainDet(DomainForm::Threshold {
                    g: parse_expr("h2 + h3").unwrap(),
                    cuts: vec![0.0],
                });
                d
            })
            .unwrap();
        let yd = g.add_discrete(domain_child("yd", "h4", 0.0)).unwrap();
        g.add_edge(x1, x2).unwrap();
        g.add_edge(x2, yc).unwrap();
        g.add_edge(x3, yc).unwrap();
        g.add_edge(x4, yd).unwrap();

        let report = g.markov_envelopes();
        assert_eq!(report.envelopes.len(), 2);
        let first = &report.envelopes[0];
        assert_eq!(first.continuous_members, BTreeSet::from([x1, x2, x3]));
        assert_eq!(first.discrete_members, BTreeSet::from([yc]));
        let second = &report.envelopes[1];
        assert_eq!(second.continuous_members, BTreeSet::from([x4]));
        assert_eq!(second.discrete_members, BTreeSet::from([yd]));
        // bl(x4) contains no continuous node
        let bl4 = g.markov_blanket(x4).unwrap();
        assert!(bl4.iter().all(|&n| g.node(n).is_discrete()));
    }

    #[test]
    fn no_continuous_nodes_means_no_envelopes() {
        let (g, _) = five_node();
        let report = g.markov_envelopes();
        assert!(report.envelopes.is_empty());
        assert_eq!(report.clique_lower_bound, 0);
    }

    /// Hierarchical structure: a common continuous parent with five
    /// domain children forms one envelope with five discrete members;
    /// five independent continuous nodes with one child each form five
    /// envelopes of one member.
    #[test]
    fn hierarchical_envelope_counts() {
        let mut g = EbnGraph::new();
        let x0 = g.add_continuous(std_normal("x0", "h")).unwrap();
        for i in 1..=5 {
            let y = g
                .add_discrete(domain_child(&format!("y{i}"), "h", i as f64 / 4.0))
                .unwrap();
            g.add_edge(x0, y).unwrap();
        }
        let report = g.markov_envelopes();
        assert_eq!(report.envelopes.len(), 1);
        assert_eq!(report.envelopes[0].discrete_members.len(), 5);
        assert_eq!(report.clique_lower_bound, 5);

        let mut g2 = EbnGraph::new();
        for i in 1..=5 {
            let x = g2
                .add_continuous(std_normal(&format!("x{i}"), &format!("h{i}")))
                .unwrap();
            let y = g2
                .add_discrete(domain_child(&format!("y{i}"), &format!("h{i}"), 0.5))
                .unwrap();
            g2.add_edge(x, y).unwrap();
        }
        let report2 = g2.markov_envelopes();
        assert_eq!(report2.envelopes.len(), 5);
        assert!(report2
            .envelopes
            .iter()
            .all(|e| e.discrete_members.len() == 1));
        assert_eq!(report2.clique_lower_bound, 1);
    }

    /// Envelope continuous sets partition the continuous nodes, and no
    /// two distinct envelopes have continuous members in each other's
    /// blankets.
    #[test]
    fn envelopes_partition_continuous_nodes() {
        let mut g = EbnGraph::new();
        let x1 = g.add_continuous(std_normal("x1", "h1")).unwrap();
        let x2 = g.add_continuous(std_normal("x2", "h2")).unwrap();
        let y = g.add_discrete(domain_child("y", "h1", 0.0)).unwrap();
        let z = g.add_discrete(domain_child("z", "h2", 0.0)).unwrap();
        g.add_edge(x1, y).unwrap();
        g.add_edge(x2, z).unwrap();
        g.add_edge(x2, y).unwrap(); // x2 also feeds y: one envelope

        let report = g.markov_envelopes();
        let mut seen = BTreeSet::new();
        for e in &report.envelopes {
            for &x in &e.continuous_members {
                assert!(seen.insert(x), "continuous node in two envelopes");
            }
        }
        let all: BTreeSet<NodeId> = g
            .node_ids()
            .filter(|&id| g.node(id).is_continuous())
            .collect();
        assert_eq!(seen, all);
        for (i, a) in report.envelopes.iter().enumerate() {
            for b in report.envelopes.iter().skip(i + 1) {
                for &xa in &a.continuous_members {
                    let bl = g.markov_blanket(xa).unwrap();
                    assert!(bl.is_disjoint(&b.continuous_members));
                }
            }
        }
        assert_eq!(report.envelopes.len(), 1);
        let _ = (x1, x2, y, z);
    }
}
