use std::collections::HashMap;
use std::hash::Hash;

pub type NodeId = u32;

/// Hash-consing arena: equal nodes get equal ids.
#[derive(Clone, Debug)]
pub(crate) struct Interner<T> {
    nodes: Vec<T>,
    index: HashMap<T, NodeId>,
}

impl<T: Clone + Eq + Hash> Interner<T> {
    pub fn new() -> Self {
        Interner { nodes: Vec::new(), index: HashMap::new() }
    }

    pub fn intern(&mut self, node: T) -> NodeId {
        if let Some(&id) = self.index.get(&node) {
            return id;
        }
        let id = NodeId::try_from(self.nodes.len()).expect("arena overflow");
        self.nodes.push(node.clone());
        self.index.insert(node, id);
        id
    }

    pub fn get(&self, id: NodeId) -> &T {
        &self.nodes[id as usize]
    }

    pub fn into_nodes(self) -> Vec<T> {
        self.nodes
    }
}
