//! The directed acyclic graph of discrete and continuous nodes.

use super::node::{ContinuousNode, DiscreteKind, DiscreteNode, Node};
use super::ModelError;
use std::collections::{BTreeSet, HashMap};
use std::fmt;

/// Stable handle to a node. Ordering follows declaration order, which
/// the tie-breaking rules throughout the crate rely on. Handles stay
/// valid across node removal (removed slots are tombstoned).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub(crate) u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// A hybrid directed acyclic graph. Immutable once validated; the
/// reduction transforms produce modified clones.
#[derive(Debug, Clone, PartialEq)]
pub struct EbnGraph {
    nodes: Vec<Node>,
    alive: Vec<bool>,
    labels: HashMap<String, NodeId>,
    /// component name -> (owning node, component index)
    components: HashMap<String, (NodeId, usize)>,
    edges: BTreeSet<(NodeId, NodeId)>,
    parents: Vec<Vec<NodeId>>,
    children: Vec<Vec<NodeId>>,
}

impl Default for EbnGraph {
    fn default() -> Self {
        Self::new()
    }
}

impl EbnGraph {
    pub fn new() -> Self {
        EbnGraph {
            nodes: Vec::new(),
            alive: Vec::new(),
            labels: HashMap::new(),
            components: HashMap::new(),
            edges: BTreeSet::new(),
            parents: Vec::new(),
            children: Vec::new(),
        }
    }

    fn push_node(&mut self, node: Node) -> Result<NodeId, ModelError> {
        let label = node.label().to_string();
        if self.labels.contains_key(&label) {
            return Err(ModelError::DuplicateLabel(label));
        }
        if let Node::Continuous(c) = &node {
            for comp in &c.components {
                if self.components.contains_key(comp) || self.labels.contains_key(comp) {
                    return Err(ModelError::DuplicateComponent(comp.clone()));
                }
            }
        }
        if let Node::Discrete(_) = &node {
            if self.components.contains_key(&label) {
                return Err(ModelError::DuplicateComponent(label));
            }
        }
        let id = NodeId(self.nodes.len() as u32);
        if let Node::Continuous(c) = &node {
            for (i, comp) in c.components.iter().enumerate() {
                self.components.insert(comp.clone(), (id, i));
            }
        }
        self.labels.insert(label, id);
        self.nodes.push(node);
        self.alive.push(true);
        self.parents.push(Vec::new());
        self.children.push(Vec::new());
        Ok(id)
    }

    pub fn add_discrete(&mut self, node: DiscreteNode) -> Result<NodeId, ModelError> {
        self.push_node(Node::Discrete(node))
    }

    pub fn add_continuous(&mut self, node: ContinuousNode) -> Result<NodeId, ModelError> {
        self.push_node(Node::Continuous(node))
    }

    pub fn add_edge(&mut self, from: NodeId, to: NodeId) -> Result<(), ModelError> {
        self.check_alive(from)?;
        self.check_alive(to)?;
        if from == to {
            return Err(ModelError::SelfLoop(self.label(from).to_string()));
        }
        if !self.edges.insert((from, to)) {
            return Err(ModelError::DuplicateEdge(
                self.label(from).to_string(),
                self.label(to).to_string(),
            ));
        }
        insert_sorted(&mut self.parents[to.index()], from);
        insert_sorted(&mut self.children[from.index()], to);
        Ok(())
    }

    pub fn remove_edge(&mut self, from: NodeId, to: NodeId) -> bool {
        if self.edges.remove(&(from, to)) {
            self.parents[to.index()].retain(|&p| p != from);
            self.children[from.index()].retain(|&c| c != to);
            true
        } else {
            false
        }
    }

    /// Removes a node and every incident edge. The slot is tombstoned so
    /// other handles stay valid.
    pub fn remove_node(&mut self, id: NodeId) -> Result<(), ModelError> {
        self.check_alive(id)?;
        let incident: Vec<(NodeId, NodeId)> = self
            .edges
            .iter()
            .filter(|(a, b)| *a == id || *b == id)
            .copied()
            .collect();
        for (a, b) in incident {
            self.remove_edge(a, b);
        }
        self.alive[id.index()] = false;
        self.labels.remove(self.nodes[id.index()].label());
        if let Node::Continuous(c) = &self.nodes[id.index()] {
            let comps = c.components.clone();
            for comp in comps {
                self.components.remove(&comp);
            }
        }
        Ok(())
    }

    fn check_alive(&self, id: NodeId) -> Result<(), ModelError> {
        if id.index() < self.nodes.len() && self.alive[id.index()] {
            Ok(())
        } else {
            Err(ModelError::UnknownNode(format!("{id}")))
        }
    }

    pub fn contains(&self, id: NodeId) -> bool {
        id.index() < self.nodes.len() && self.alive[id.index()]
    }

    /// Live node count.
    pub fn len(&self) -> usize {
        self.alive.iter().filter(|&&a| a).count()
    }

    /// Total slot count including tombstones; `NodeId::index` values are
    /// always below this, so it sizes dense per-node arrays.
    pub fn capacity(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Live node ids in declaration order.
    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.alive
            .iter()
            .enumerate()
            .filter(|(_, &a)| a)
            .map(|(i, _)| NodeId(i as u32))
    }

    pub fn node(&self, id: NodeId) -> &Node {
        assert!(self.contains(id), "node {id} was removed");
        &self.nodes[id.index()]
    }

    pub(crate) fn node_mut(&mut self, id: NodeId) -> &mut Node {
        assert!(self.contains(id), "node {id} was removed");
        &mut self.nodes[id.index()]
    }

    pub fn label(&self, id: NodeId) -> &str {
        self.node(id).label()
    }

    pub fn by_label(&self, label: &str) -> Option<NodeId> {
        self.labels.get(label).copied()
    }

    pub fn require(&self, label: &str) -> Result<NodeId, ModelError> {
        self.by_label(label)
            .ok_or_else(|| ModelError::UnknownNode(label.to_string()))
    }

    /// The node owning a component name, with the component index.
    pub fn component(&self, name: &str) -> Option<(NodeId, usize)> {
        self.components.get(name).copied()
    }

    pub fn discrete(&self, id: NodeId) -> Result<&DiscreteNode, ModelError> {
        self.node(id)
            .as_discrete()
            .ok_or_else(|| ModelError::NotDiscrete(self.label(id).to_string()))
    }

    pub fn continuous(&self, id: NodeId) -> Result<&ContinuousNode, ModelError> {
        self.node(id)
            .as_continuous()
            .ok_or_else(|| ModelError::NotContinuous(self.label(id).to_string()))
    }

    pub(crate) fn discrete_mut(&mut self, id: NodeId) -> Result<&mut DiscreteNode, ModelError> {
        let label = self.label(id).to_string();
        match self.node_mut(id) {
            Node::Discrete(d) => Ok(d),
            Node::Continuous(_) => Err(ModelError::NotDiscrete(label)),
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, from: NodeId, to: NodeId) -> bool {
        self.edges.contains(&(from, to))
    }

    /// Parents in declaration order.
    pub fn parents(&self, id: NodeId) -> &[NodeId] {
        &self.parents[id.index()]
    }

    /// Children in declaration order.
    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.children[id.index()]
    }

    /// Discrete parents in declaration order (the axes of a conditional
    /// table).
    pub fn discrete_parents(&self, id: NodeId) -> Vec<NodeId> {
        self.parents(id)
            .iter()
            .copied()
            .filter(|&p| self.node(p).is_discrete())
            .collect()
    }

    pub fn continuous_parents(&self, id: NodeId) -> Vec<NodeId> {
        self.parents(id)
            .iter()
            .copied()
            .filter(|&p| self.node(p).is_continuous())
            .collect()
    }

    /// State counts of the discrete parents, for mixed-radix indexing.
    pub fn parent_cards(&self, id: NodeId) -> Vec<usize> {
        self.discrete_parents(id)
            .iter()
            .map(|&p| self.nodes[p.index()].as_discrete().unwrap().n_states())
            .collect()
    }

    /// Replaces a node's local model kind (used by transforms).
    pub(crate) fn set_discrete_kind(
        &mut self,
        id: NodeId,
        kind: DiscreteKind,
    ) -> Result<(), ModelError> {
        self.discrete_mut(id)?.kind = kind;
        Ok(())
    }

    /// True if `to` is reachable from `from` along directed edges.
    pub fn reachable(&self, from: NodeId, to: NodeId) -> bool {
        let mut stack = vec![from];
        let mut seen = vec![false; self.nodes.len()];
        while let Some(n) = stack.pop() {
            if n == to {
                return true;
            }
            if seen[n.index()] {
                continue;
            }
            seen[n.index()] = true;
            stack.extend(self.children(n).iter().copied());
        }
        false
    }
}

fn insert_sorted(v: &mut Vec<NodeId>, id: NodeId) {
    match v.binary_search(&id) {
        Ok(_) => {}
        Err(pos) => v.insert(pos, id),
    }
}
