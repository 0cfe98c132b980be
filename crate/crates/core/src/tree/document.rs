use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::{validate, Tree, Vertex};
use crate::error::{Error, Result};
use crate::rational::{serde_q, Q};

/// Largest tree written out vertex by vertex.
const MAX_DOCUMENT_VERTICES: u64 = 1 << 22;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeDocument {
    pub root: u64,
    pub vertices: Vec<VertexRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexRecord {
    pub id: u64,
    pub level: usize,
    pub parent: Option<u64>,
    pub children: Vec<ChildRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChildRecord {
    pub id: u64,
    #[serde(with = "serde_q")]
    pub weight: Q,
}

impl TreeDocument {
    pub fn from_tree(tree: &Tree) -> Result<Self> {
        if tree.vertex_count() > MAX_DOCUMENT_VERTICES {
            return Err(Error::Invalid(format!(
                "tree has {} vertices; documents are limited to {MAX_DOCUMENT_VERTICES}",
                tree.vertex_count()
            )));
        }
        let vertices = tree
            .vertices()
            .map(|v| VertexRecord {
                id: tree.label(v),
                level: tree.level(v),
                parent: tree.parent(v).map(|p| tree.label(p)),
                children: tree
                    .children(v)
                    .zip(tree.child_weights(v))
                    .map(|(c, w)| ChildRecord { id: tree.label(c), weight: w.clone() })
                    .collect(),
            })
            .collect();
        Ok(TreeDocument { root: tree.label(tree.root()), vertices })
    }

    /// Checks the document's structure (ids, parents, levels, reachability)
    /// and builds the tree without checking weight invariants.
    pub fn to_tree_unchecked(&self) -> Result<Tree> {
        let schema = |msg: String| Error::Schema(msg);
        let mut records: HashMap<u64, &VertexRecord> = HashMap::new();
        for r in &self.vertices {
            if records.insert(r.id, r).is_some() {
                return Err(schema(format!("duplicate vertex id {}", r.id)));
            }
        }
        let root = records.get(&self.root).ok_or_else(|| schema(format!("root {} has no record", self.root)))?;
        if root.parent.is_some() || root.level != 0 {
            return Err(schema(format!("root {} must have level 0 and no parent", self.root)));
        }
        let mut order = Vec::with_capacity(records.len());
        let mut queue = VecDeque::from([self.root]);
        let mut seen = HashMap::from([(self.root, ())]);
        while let Some(id) = queue.pop_front() {
            let r = records[&id];
            order.push(id);
            for c in &r.children {
                let child = records.get(&c.id).ok_or_else(|| schema(format!("child {} of vertex {id} has no record", c.id)))?;
                if child.parent != Some(id) {
                    return Err(schema(format!("vertex {} lists parent {:?}, expected {id}", c.id, child.parent)));
                }
                if child.level != r.level + 1 {
                    return Err(schema(format!("vertex {} has level {}, expected {}", c.id, child.level, r.level + 1)));
                }
                if seen.insert(c.id, ()).is_some() {
                    return Err(schema(format!("vertex {} reached twice", c.id)));
                }
                queue.push_back(c.id);
            }
        }
        if order.len() != records.len() {
            let stray = self.vertices.iter().find(|r| !seen.contains_key(&r.id)).map(|r| r.id).unwrap();
            return Err(schema(format!("vertex {stray} is not reachable from the root")));
        }
        let lists = order.iter().map(|id| records[id].children.iter().map(|c| c.weight.clone()).collect()).collect();
        Tree::from_bfs(lists, Some(order))
    }
}

/// Parses and validates a tree document.
pub fn load_tree(json: &str) -> Result<Tree> {
    let doc: TreeDocument = serde_json::from_str(json).map_err(|e| Error::Schema(e.to_string()))?;
    let tree = doc.to_tree_unchecked()?;
    let diagnostics = validate(&tree);
    if diagnostics.is_empty() {
        Ok(tree)
    } else {
        Err(Error::InvalidTree(diagnostics))
    }
}

impl Tree {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&TreeDocument::from_tree(self)?)?)
    }

    /// Vertex with the given external id.
    pub fn vertex(&self, label: u64) -> Result<Vertex> {
        self.by_label(label).ok_or(Error::UnknownVertex(Vertex(label)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::Weights;

    #[test]
    fn round_trip() {
        let t = Tree::homogeneous(2, 3, Weights::Uniform).unwrap();
        let back = load_tree(&t.to_json().unwrap()).unwrap();
        assert_eq!(back, t);
        assert!(back.is_homogeneous());
    }

    #[test]
    fn rejects_bad_weights() {
        let json = r#"{"root": 7, "vertices": [
            {"id": 7, "level": 0, "parent": null, "children": [{"id": 8, "weight": "1/2"}, {"id": 9, "weight": "1/3"}]},
            {"id": 8, "level": 1, "parent": 7, "children": []},
            {"id": 9, "level": 1, "parent": 7, "children": []}]}"#;
        let err = load_tree(json).unwrap_err();
        assert_eq!(err.to_string(), "invalid tree: weights sum 5/6 \u{2260} 1 at vertex 7");
    }

    #[test]
    fn rejects_single_child() {
        let json = r#"{"root": 1, "vertices": [
            {"id": 1, "level": 0, "parent": null, "children": [{"id": 2, "weight": "1"}]},
            {"id": 2, "level": 1, "parent": 1, "children": [{"id": 3, "weight": "1/2"}, {"id": 4, "weight": "1/2"}]},
            {"id": 3, "level": 2, "parent": 2, "children": []},
            {"id": 4, "level": 2, "parent": 2, "children": []}]}"#;
        let err = load_tree(json).unwrap_err();
        assert!(err.to_string().contains("branching < 2 at vertex 1"), "{err}");
    }

    #[test]
    fn schema_errors() {
        let bad_parent = r#"{"root": 1, "vertices": [
            {"id": 1, "level": 0, "parent": null, "children": [{"id": 2, "weight": "1/2"}, {"id": 3, "weight": "1/2"}]},
            {"id": 2, "level": 1, "parent": 3, "children": []},
            {"id": 3, "level": 1, "parent": 1, "children": []}]}"#;
        assert!(matches!(load_tree(bad_parent), Err(Error::Schema(_))));
        let stray = r#"{"root": 1, "vertices": [
            {"id": 1, "level": 0, "parent": null, "children": [{"id": 2, "weight": "1/2"}, {"id": 3, "weight": "1/2"}]},
            {"id": 2, "level": 1, "parent": 1, "children": []},
            {"id": 3, "level": 1, "parent": 1, "children": []},
            {"id": 4, "level": 1, "parent": 1, "children": []}]}"#;
        assert!(load_tree(stray).unwrap_err().to_string().contains("vertex 4"));
        let zero = r#"{"root": 1, "vertices": [
            {"id": 1, "level": 0, "parent": null, "children": [{"id": 2, "weight": "1/0"}, {"id": 3, "weight": "1/2"}]},
            {"id": 2, "level": 1, "parent": 1, "children": []},
            {"id": 3, "level": 1, "parent": 1, "children": []}]}"#;
        assert!(load_tree(zero).is_err());
    }

    #[test]
    fn relabelled_tree() {
        let json = r#"{"root": 10, "vertices": [
            {"id": 10, "level": 0, "parent": null, "children": [{"id": 30, "weight": "1/4"}, {"id": 20, "weight": "3/4"}]},
            {"id": 20, "level": 1, "parent": 10, "children": []},
            {"id": 30, "level": 1, "parent": 10, "children": []}]}"#;
        let t = load_tree(json).unwrap();
        assert_eq!(t.label(Vertex(1)), 30);
        assert_eq!(t.vertex(20).unwrap(), Vertex(2));
        let again = load_tree(&t.to_json().unwrap()).unwrap();
        assert_eq!(again, t);
    }
}
