//! Harmonic functions on a depth-truncated tree, stored as hash-consed DAGs
//! over vertices: two vertices whose subtrees carry identical values share a
//! node. Node `(value, children)` sits at every vertex where `f` equals
//! `value` and the children's subtrees match.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intern::{Interner, NodeId};
use crate::l0::{conditional_expectation, StepArena, StepFunction};
use crate::rational::{self, Q};
use crate::tree::{ShapeId, Tree, Vertex, VertexEnumeration};
use crate::value::{Value, ValueSpace};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) struct FnNode {
    pub value: Value,
    pub children: Vec<NodeId>,
}

pub(crate) type FnArena = Interner<FnNode>;

/// A function on levels `0..=depth` of a tree, harmonic at every vertex of
/// level `<= interior_depth`.
#[derive(Clone, Debug)]
pub struct HarmonicFunction {
    space: ValueSpace,
    depth: usize,
    interior_depth: Option<usize>,
    nodes: Vec<FnNode>,
    root: NodeId,
}

impl HarmonicFunction {
    pub(crate) fn from_arena(
        space: ValueSpace,
        depth: usize,
        interior_depth: Option<usize>,
        arena: FnArena,
        root: NodeId,
    ) -> Self {
        debug_assert!(interior_depth.is_none_or(|i| i < depth));
        HarmonicFunction { space, depth, interior_depth, nodes: arena.into_nodes(), root }
    }

    /// The function on `{x_0}` only.
    pub fn root_only(space: ValueSpace, value: Value) -> Result<Self> {
        space.check(&value)?;
        let mut a = FnArena::new();
        let root = a.intern(FnNode { value, children: vec![] });
        Ok(Self::from_arena(space, 0, None, a, root))
    }

    pub fn constant(tree: &Tree, space: ValueSpace, value: Value, depth: usize) -> Result<Self> {
        Self::root_only(space, value)?.constant_tail_extend(tree, depth)
    }

    /// Values read from `f` at every vertex of level `<= depth`. Harmonicity
    /// is claimed through `interior_depth` but not checked here.
    pub fn from_vertex_values(
        tree: &Tree,
        space: ValueSpace,
        depth: usize,
        interior_depth: Option<usize>,
        f: impl Fn(Vertex) -> Value,
    ) -> Result<Self> {
        tree.check_level(depth)?;
        if interior_depth.is_some_and(|i| i >= depth) {
            return Err(Error::LevelOutOfRange { level: interior_depth.unwrap(), limit: depth.saturating_sub(1) });
        }
        let mut a = FnArena::new();
        let mut layer: Vec<NodeId> = Vec::new();
        for l in (0..=depth).rev() {
            let child_base = if l < depth { tree.level_range(l + 1).start } else { 0 };
            let mut next = Vec::with_capacity(tree.level_size(l) as usize);
            for x in tree.level_range(l) {
                let value = f(Vertex(x));
                space.check(&value)?;
                let children = if l < depth {
                    let r = tree.children_range(Vertex(x));
                    layer[(r.start - child_base) as usize..(r.end - child_base) as usize].to_vec()
                } else {
                    vec![]
                };
                next.push(a.intern(FnNode { value, children }));
            }
            layer = next;
        }
        Ok(Self::from_arena(space, depth, interior_depth, a, layer[0]))
    }

    pub fn space(&self) -> ValueSpace {
        self.space
    }

    /// Deepest stored level `s`.
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Largest level at which harmonicity is asserted.
    pub fn interior_depth(&self) -> Option<usize> {
        self.interior_depth
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub(crate) fn node(&self, id: NodeId) -> &FnNode {
        &self.nodes[id as usize]
    }

    pub(crate) fn root_node(&self) -> NodeId {
        self.root
    }

    fn check_stored(&self, tree: &Tree, v: Vertex) -> Result<()> {
        tree.check_vertex(v)?;
        let l = tree.level(v);
        if l > self.depth {
            return Err(Error::LevelOutOfRange { level: l, limit: self.depth });
        }
        Ok(())
    }

    pub(crate) fn node_at(&self, tree: &Tree, v: Vertex) -> Result<NodeId> {
        self.check_stored(tree, v)?;
        let mut id = self.root;
        for i in tree.path_indices(v) {
            id = self.node(id).children[i];
        }
        Ok(id)
    }

    pub fn value_at(&self, tree: &Tree, v: Vertex) -> Result<&Value> {
        Ok(&self.node(self.node_at(tree, v)?).value)
    }

    /// Every stored `(vertex, value)`; only sensible for small trees.
    pub fn vertex_values(&self, tree: &Tree) -> Vec<(Vertex, Value)> {
        let mut out = Vec::new();
        let mut layer = vec![(tree.root(), self.root)];
        for l in 0..=self.depth {
            let mut next = Vec::new();
            for &(v, id) in &layer {
                let n = self.node(id);
                out.push((v, n.value.clone()));
                if l < self.depth {
                    next.extend(tree.children(v).zip(n.children.iter().copied()));
                }
            }
            layer = next;
        }
        out
    }

    fn rebuild(&self) -> FnArena {
        let mut a = FnArena::new();
        for n in &self.nodes {
            a.intern(n.clone());
        }
        a
    }

    /// A copy with `f(v)` replaced; no harmonicity is re-established.
    pub fn with_value(&self, tree: &Tree, v: Vertex, value: Value) -> Result<Self> {
        self.space.check(&value)?;
        self.check_stored(tree, v)?;
        let path = tree.path_indices(v);
        let mut ids = vec![self.root];
        for &i in &path {
            ids.push(self.node(*ids.last().unwrap()).children[i]);
        }
        let mut a = self.rebuild();
        let bottom = self.node(*ids.last().unwrap());
        let mut cur = a.intern(FnNode { value, children: bottom.children.clone() });
        for (depth, &i) in path.iter().enumerate().rev() {
            let n = self.node(ids[depth]);
            let mut children = n.children.clone();
            children[i] = cur;
            cur = a.intern(FnNode { value: n.value.clone(), children });
        }
        Ok(Self::from_arena(self.space, self.depth, self.interior_depth, a, cur))
    }

    /// Same values with harmonicity asserted through a different level.
    pub fn with_interior_depth(&self, interior_depth: Option<usize>) -> Result<Self> {
        if interior_depth.is_some_and(|i| i >= self.depth) {
            return Err(Error::LevelOutOfRange { level: interior_depth.unwrap(), limit: self.depth.saturating_sub(1) });
        }
        Ok(HarmonicFunction { interior_depth, ..self.clone() })
    }

    /// Applies `f` to every stored value.
    pub fn map(&self, space: ValueSpace, f: impl Fn(&Value) -> Value) -> HarmonicFunction {
        let mut a = FnArena::new();
        let mut memo: HashMap<NodeId, NodeId> = HashMap::new();
        let root = self.map_rec(self.root, &f, &mut a, &mut memo);
        Self::from_arena(space, self.depth, self.interior_depth, a, root)
    }

    fn map_rec(&self, id: NodeId, f: &impl Fn(&Value) -> Value, a: &mut FnArena, memo: &mut HashMap<NodeId, NodeId>) -> NodeId {
        if let Some(&r) = memo.get(&id) {
            return r;
        }
        let n = self.node(id);
        let children = n.children.iter().map(|&c| self.map_rec(c, f, a, memo)).collect();
        let r = a.intern(FnNode { value: f(&n.value), children });
        memo.insert(id, r);
        r
    }

    /// Vertex-wise combination of two functions with the same depth.
    pub fn zip_with(
        &self,
        other: &HarmonicFunction,
        space: ValueSpace,
        f: impl Fn(&Value, &Value) -> Value,
    ) -> Result<HarmonicFunction> {
        if self.depth != other.depth {
            return Err(Error::ShapeMismatch(format!("depths {} and {}", self.depth, other.depth)));
        }
        let mut a = FnArena::new();
        let mut memo: HashMap<(NodeId, NodeId), NodeId> = HashMap::new();
        let root = zip_rec(self, other, self.root, other.root, &f, &mut a, &mut memo);
        let interior = self.interior_depth.min(other.interior_depth);
        Ok(Self::from_arena(space, self.depth, interior, a, root))
    }

    fn check_same_space(&self, other: &HarmonicFunction) -> Result<()> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch(self.space.to_string(), other.space.to_string()));
        }
        Ok(())
    }

    pub fn add(&self, other: &HarmonicFunction) -> Result<HarmonicFunction> {
        self.check_same_space(other)?;
        self.zip_with(other, self.space, Value::add)
    }

    pub fn sub(&self, other: &HarmonicFunction) -> Result<HarmonicFunction> {
        self.check_same_space(other)?;
        self.zip_with(other, self.space, Value::sub)
    }

    pub fn scale(&self, lambda: &Q) -> HarmonicFunction {
        self.map(self.space, |v| v.scale(lambda))
    }

    /// Coordinate `i` as a scalar function.
    pub fn component(&self, i: usize) -> Result<HarmonicFunction> {
        if i >= self.space.dim() {
            return Err(Error::Dimension { expected: self.space.dim(), got: i + 1 });
        }
        Ok(self.map(ValueSpace::Scalar, |v| Value::scalar(v.0[i].clone())))
    }

    /// The restriction to levels `0..=depth`.
    pub fn truncate(&self, depth: usize) -> Result<HarmonicFunction> {
        if depth > self.depth {
            return Err(Error::LevelOutOfRange { level: depth, limit: self.depth });
        }
        let mut a = FnArena::new();
        let mut memo = HashMap::new();
        let root = self.truncate_rec(self.root, depth, &mut a, &mut memo);
        let interior = match (self.interior_depth, depth.checked_sub(1)) {
            (Some(i), Some(cap)) => Some(i.min(cap)),
            _ => None,
        };
        Ok(Self::from_arena(self.space, depth, interior, a, root))
    }

    fn truncate_rec(&self, id: NodeId, remaining: usize, a: &mut FnArena, memo: &mut HashMap<NodeId, NodeId>) -> NodeId {
        if let Some(&r) = memo.get(&id) {
            return r;
        }
        let n = self.node(id);
        let children = if remaining == 0 {
            vec![]
        } else {
            n.children.iter().map(|&c| self.truncate_rec(c, remaining - 1, a, memo)).collect()
        };
        let r = a.intern(FnNode { value: n.value.clone(), children });
        memo.insert(id, r);
        r
    }

    /// Smallest `n0` such that every vertex of level `>= n0` has all of its
    /// stored descendants equal to itself, so `ω_n = ω_{n0}` for `n >= n0`.
    pub fn constant_tail_level(&self, tree: &Tree) -> usize {
        let mut flat: HashMap<NodeId, bool> = HashMap::new();
        let mut n0 = 0;
        for_each_class(tree, self, self.depth, |level, _, id, _, _| {
            if !self.is_flat(id, &mut flat) {
                n0 = n0.max(level + 1);
            }
        });
        n0
    }

    fn is_flat(&self, id: NodeId, memo: &mut HashMap<NodeId, bool>) -> bool {
        if let Some(&r) = memo.get(&id) {
            return r;
        }
        let n = self.node(id);
        let r = n.children.iter().all(|&c| self.node(c).value == n.value && self.is_flat(c, memo));
        memo.insert(id, r);
        r
    }

    /// Scalar functions of equal depth as the coordinates of one function.
    pub fn stack(space: ValueSpace, parts: &[HarmonicFunction]) -> Result<HarmonicFunction> {
        if parts.len() != space.dim() {
            return Err(Error::Dimension { expected: space.dim(), got: parts.len() });
        }
        let depth = parts[0].depth;
        let mut interior = parts[0].interior_depth;
        for p in parts {
            if p.space != ValueSpace::Scalar {
                return Err(Error::SpaceMismatch(ValueSpace::Scalar.to_string(), p.space.to_string()));
            }
            if p.depth != depth {
                return Err(Error::ShapeMismatch(format!("depths {} and {}", depth, p.depth)));
            }
            interior = interior.min(p.interior_depth);
        }
        let mut a = FnArena::new();
        let mut memo: HashMap<Vec<NodeId>, NodeId> = HashMap::new();
        let roots: Vec<NodeId> = parts.iter().map(|p| p.root).collect();
        let root = stack_rec(parts, roots, &mut a, &mut memo);
        Ok(Self::from_arena(space, depth, interior, a, root))
    }

    /// `f(x) = f(x^-)` on levels `s+1..=depth`. Harmonic at every new interior
    /// vertex since each child copies its parent and the weights sum to 1.
    pub fn constant_tail_extend(&self, tree: &Tree, depth: usize) -> Result<HarmonicFunction> {
        tree.check_level(depth)?;
        if depth < self.depth {
            return Err(Error::LevelOutOfRange { level: depth, limit: self.depth });
        }
        let mut a = FnArena::new();
        let mut chain_memo = HashMap::new();
        let mut memo = HashMap::new();
        let extra = depth - self.depth;
        let root = self.tail_rec(tree, tree.root_shape(), self.root, extra, &mut a, &mut chain_memo, &mut memo);
        let fully = match self.interior_depth {
            Some(i) => i + 1 == self.depth,
            None => self.depth == 0,
        };
        let interior = if fully && depth > 0 { Some(depth - 1) } else { self.interior_depth };
        Ok(Self::from_arena(self.space, depth, interior, a, root))
    }

    #[allow(clippy::too_many_arguments)]
    fn tail_rec(
        &self,
        tree: &Tree,
        shape: ShapeId,
        id: NodeId,
        extra: usize,
        a: &mut FnArena,
        chain_memo: &mut HashMap<(NodeId, ShapeId, usize), NodeId>,
        memo: &mut HashMap<(NodeId, ShapeId), NodeId>,
    ) -> NodeId {
        if let Some(&r) = memo.get(&(id, shape)) {
            return r;
        }
        let n = self.node(id);
        let r = if n.children.is_empty() {
            chain(tree, shape, &n.value, extra, a, id, chain_memo)
        } else {
            let s = tree.shape(shape);
            let children = n
                .children
                .iter()
                .zip(&s.children)
                .map(|(&c, &cs)| self.tail_rec(tree, cs, c, extra, a, chain_memo, memo))
                .collect();
            a.intern(FnNode { value: n.value.clone(), children })
        };
        memo.insert((id, shape), r);
        r
    }

    pub fn to_document(&self, tree: &Tree, format: DocumentFormat) -> HarmonicDocument {
        let dense = match format {
            DocumentFormat::Dense => true,
            DocumentFormat::Compact => false,
            DocumentFormat::Auto => tree.level_range(self.depth).end <= AUTO_DENSE_LIMIT,
        };
        let mut doc = HarmonicDocument {
            space: self.space,
            depth: Some(self.depth),
            interior_depth: self.interior_depth.map(|i| i as i64).unwrap_or(-1),
            values: None,
            nodes: None,
            root: None,
        };
        if dense {
            doc.values = Some(self.vertex_values(tree).into_iter().map(|(v, x)| (tree.label(v), x)).collect());
        } else {
            doc.nodes = Some(
                self.nodes
                    .iter()
                    .map(|n| NodeRecord { value: n.value.clone(), children: n.children.clone() })
                    .collect(),
            );
            doc.root = Some(self.root);
        }
        doc
    }

    pub fn from_document(tree: &Tree, doc: &HarmonicDocument) -> Result<Self> {
        let interior = match doc.interior_depth {
            i if i < 0 => None,
            i => Some(i as usize),
        };
        match (&doc.values, &doc.nodes) {
            (Some(values), None) => {
                let mut by_vertex = HashMap::new();
                let mut depth = 0;
                for (label, v) in values {
                    let x = tree.vertex(*label)?;
                    depth = depth.max(tree.level(x));
                    by_vertex.insert(x, v);
                }
                if let Some(d) = doc.depth {
                    if d != depth {
                        return Err(Error::Schema(format!("declared depth {d}, values reach level {depth}")));
                    }
                }
                tree.check_level(depth)?;
                let stored = tree.level_range(depth).end;
                if let Some(x) = (0..stored).map(Vertex).find(|x| !by_vertex.contains_key(x)) {
                    return Err(Error::Schema(format!("missing value for vertex {}", tree.label(x))));
                }
                Self::from_vertex_values(tree, doc.space, depth, interior, |x| by_vertex[&x].clone())
            }
            (None, Some(nodes)) => {
                let depth = doc.depth.ok_or_else(|| Error::Schema("compact documents need a depth".into()))?;
                let root = doc.root.ok_or_else(|| Error::Schema("compact documents need a root".into()))?;
                Self::from_nodes(tree, doc.space, depth, interior, nodes, root)
            }
            _ => Err(Error::Schema("document needs exactly one of \"values\" or \"nodes\"".into())),
        }
    }

    fn from_nodes(
        tree: &Tree,
        space: ValueSpace,
        depth: usize,
        interior: Option<usize>,
        nodes: &[NodeRecord],
        root: NodeId,
    ) -> Result<Self> {
        tree.check_level(depth)?;
        if interior.is_some_and(|i| i >= depth) {
            return Err(Error::Schema(format!("interior depth {interior:?} must be below depth {depth}")));
        }
        if root as usize >= nodes.len() {
            return Err(Error::Schema(format!("root node {root} out of range")));
        }
        // Re-intern while checking every node is used at a consistent height
        // and with the right number of children.
        let mut a = FnArena::new();
        let mut memo: HashMap<(NodeId, ShapeId), NodeId> = HashMap::new();
        let mut height: HashMap<NodeId, usize> = HashMap::new();
        let mut stack_guard = 0usize;
        let root = Self::import_rec(tree, space, nodes, root, tree.root_shape(), depth, &mut a, &mut memo, &mut height, &mut stack_guard)?;
        Ok(Self::from_arena(space, depth, interior, a, root))
    }

    #[allow(clippy::too_many_arguments)]
    fn import_rec(
        tree: &Tree,
        space: ValueSpace,
        nodes: &[NodeRecord],
        id: NodeId,
        shape: ShapeId,
        remaining: usize,
        a: &mut FnArena,
        memo: &mut HashMap<(NodeId, ShapeId), NodeId>,
        height: &mut HashMap<NodeId, usize>,
        guard: &mut usize,
    ) -> Result<NodeId> {
        if let Some(&r) = memo.get(&(id, shape)) {
            if height[&id] != remaining {
                return Err(Error::Schema(format!("node {id} used at two different levels")));
            }
            return Ok(r);
        }
        let rec = nodes.get(id as usize).ok_or_else(|| Error::Schema(format!("node {id} out of range")))?;
        space.check(&rec.value)?;
        let s = tree.shape(shape);
        let children = if remaining == 0 {
            if !rec.children.is_empty() {
                return Err(Error::Schema(format!("node {id} below the stored depth has children")));
            }
            vec![]
        } else {
            if rec.children.len() != s.children.len() {
                return Err(Error::Schema(format!(
                    "node {id} has {} children where the tree has {}",
                    rec.children.len(),
                    s.children.len()
                )));
            }
            *guard += 1;
            let mut out = Vec::with_capacity(rec.children.len());
            for (&c, &cs) in rec.children.iter().zip(&s.children) {
                out.push(Self::import_rec(tree, space, nodes, c, cs, remaining - 1, a, memo, height, guard)?);
            }
            out
        };
        let r = a.intern(FnNode { value: rec.value.clone(), children });
        memo.insert((id, shape), r);
        height.insert(id, remaining);
        Ok(r)
    }

    pub fn to_json(&self, tree: &Tree, format: DocumentFormat) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document(tree, format))?)
    }

    pub fn from_json(tree: &Tree, json: &str) -> Result<Self> {
        let doc: HarmonicDocument = serde_json::from_str(json).map_err(|e| Error::Schema(e.to_string()))?;
        Self::from_document(tree, &doc)
    }
}

/// Functions are equal when they have the same space, depth, asserted
/// interior depth and values.
impl PartialEq for HarmonicFunction {
    fn eq(&self, other: &HarmonicFunction) -> bool {
        if self.space != other.space || self.depth != other.depth || self.interior_depth != other.interior_depth {
            return false;
        }
        let mut memo = HashMap::new();
        same_rec(self, other, self.root, other.root, &mut memo)
    }
}

fn same_rec(x: &HarmonicFunction, y: &HarmonicFunction, a: NodeId, b: NodeId, memo: &mut HashMap<(NodeId, NodeId), bool>) -> bool {
    if let Some(&r) = memo.get(&(a, b)) {
        return r;
    }
    let (na, nb) = (x.node(a), y.node(b));
    let r = na.value == nb.value
        && na.children.len() == nb.children.len()
        && na.children.iter().zip(&nb.children).all(|(&p, &q)| same_rec(x, y, p, q, memo));
    memo.insert((a, b), r);
    r
}

fn zip_rec(
    x: &HarmonicFunction,
    y: &HarmonicFunction,
    a: NodeId,
    b: NodeId,
    f: &impl Fn(&Value, &Value) -> Value,
    arena: &mut FnArena,
    memo: &mut HashMap<(NodeId, NodeId), NodeId>,
) -> NodeId {
    if let Some(&r) = memo.get(&(a, b)) {
        return r;
    }
    let (na, nb) = (x.node(a), y.node(b));
    let children = na.children.iter().zip(&nb.children).map(|(&p, &q)| zip_rec(x, y, p, q, f, arena, memo)).collect();
    let r = arena.intern(FnNode { value: f(&na.value, &nb.value), children });
    memo.insert((a, b), r);
    r
}

fn stack_rec(parts: &[HarmonicFunction], ids: Vec<NodeId>, a: &mut FnArena, memo: &mut HashMap<Vec<NodeId>, NodeId>) -> NodeId {
    if let Some(&r) = memo.get(&ids) {
        return r;
    }
    let nodes: Vec<&FnNode> = parts.iter().zip(&ids).map(|(p, &i)| p.node(i)).collect();
    let value = Value(nodes.iter().map(|n| n.value.0[0].clone()).collect());
    let children = (0..nodes[0].children.len())
        .map(|c| stack_rec(parts, nodes.iter().map(|n| n.children[c]).collect(), a, memo))
        .collect();
    let r = a.intern(FnNode { value, children });
    memo.insert(ids, r);
    r
}

/// The node carrying `value` at a vertex of `shape`, with `extra` further
/// levels all equal to `value`.
pub(crate) fn chain(
    tree: &Tree,
    shape: ShapeId,
    value: &Value,
    extra: usize,
    a: &mut FnArena,
    key: NodeId,
    memo: &mut HashMap<(NodeId, ShapeId, usize), NodeId>,
) -> NodeId {
    if let Some(&r) = memo.get(&(key, shape, extra)) {
        return r;
    }
    let children = if extra == 0 {
        vec![]
    } else {
        let s = tree.shape(shape).children.clone();
        s.iter().map(|&cs| chain(tree, cs, value, extra - 1, a, key, memo)).collect()
    };
    let r = a.intern(FnNode { value: value.clone(), children });
    memo.insert((key, shape, extra), r);
    r
}

/// Dense documents are written up to this many stored vertices.
const AUTO_DENSE_LIMIT: u64 = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DocumentFormat {
    /// `values` keyed by vertex id.
    Dense,
    /// Shared-node form (`nodes` + `root`).
    Compact,
    /// Dense for small functions, compact otherwise.
    Auto,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarmonicDocument {
    pub space: ValueSpace,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    /// `-1` when no level is asserted harmonic.
    pub interior_depth: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<BTreeMap<u64, Value>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<Vec<NodeRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root: Option<NodeId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub value: Value,
    pub children: Vec<NodeId>,
}

/// A vertex (or class of identical vertices) where the mean-value identity fails.
#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicityViolation {
    /// Label of the first such vertex in breadth-first order.
    pub vertex: u64,
    pub level: usize,
    /// Number of vertices sharing this exact violation.
    pub occurrences: u64,
    pub value: Value,
    pub children_mean: Value,
}

impl fmt::Display for HarmonicityViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "vertex {} (level {}): f = {} but the weighted mean of its children is {}",
            self.vertex, self.level, self.value, self.children_mean
        )?;
        if self.occurrences > 1 {
            write!(f, " [{} vertices]", self.occurrences)?;
        }
        Ok(())
    }
}

/// Walks the distinct (shape, node) classes level by level.
pub(crate) fn for_each_class(
    tree: &Tree,
    f: &HarmonicFunction,
    max_level: usize,
    mut visit: impl FnMut(usize, ShapeId, NodeId, Vertex, u64),
) {
    let mut classes: BTreeMap<(ShapeId, NodeId), (Vertex, u64)> = BTreeMap::new();
    classes.insert((tree.root_shape(), f.root), (tree.root(), 1));
    for l in 0..=max_level.min(f.depth) {
        let mut ordered: Vec<_> = classes.iter().map(|(&k, &v)| (k, v)).collect();
        ordered.sort_by_key(|(_, (first, _))| *first);
        let mut next: BTreeMap<(ShapeId, NodeId), (Vertex, u64)> = BTreeMap::new();
        for ((shape, id), (first, count)) in ordered {
            visit(l, shape, id, first, count);
            if l < f.depth {
                let s = tree.shape(shape);
                for (i, (&c, &cs)) in f.node(id).children.iter().zip(&s.children).enumerate() {
                    let child_first = tree.child(first, i);
                    let e = next.entry((cs, c)).or_insert((child_first, 0));
                    e.0 = e.0.min(child_first);
                    e.1 += count;
                }
            }
        }
        classes = next;
    }
}

/// Empty iff `f(x) = Σ_{y ∈ S(x)} q(x, y) f(y)` at every vertex of level
/// `<= interior_depth`. Since `q(x, x^-) = 0` this is also the sum over all
/// neighbours.
pub fn check_harmonic(tree: &Tree, f: &HarmonicFunction) -> Vec<HarmonicityViolation> {
    let Some(interior) = f.interior_depth else { return vec![] };
    let mut out = Vec::new();
    for_each_class(tree, f, interior, |level, shape, id, first, count| {
        let n = f.node(id);
        let s = tree.shape(shape);
        let mut mean = f.space.zero();
        for (&c, w) in n.children.iter().zip(&s.weights) {
            mean = mean.add(&f.node(c).value.scale(w));
        }
        if mean != n.value {
            out.push(HarmonicityViolation {
                vertex: tree.label(first),
                level,
                occurrences: count,
                value: n.value.clone(),
                children_mean: mean,
            });
        }
    });
    out.sort_by_key(|d| (d.level, d.vertex));
    out
}

/// `ω_n(f)`: the level-`n` step function with value `f(x)` on `B_x`.
pub fn boundary_trace(tree: &Tree, f: &HarmonicFunction, n: usize) -> Result<StepFunction> {
    if n > f.depth {
        return Err(Error::LevelOutOfRange { level: n, limit: f.depth });
    }
    tree.check_level(n)?;
    let mut arena = StepArena::new();
    let mut memo: HashMap<NodeId, u32> = HashMap::new();
    let root = trace_rec(f, f.root, n, &mut arena, &mut memo);
    Ok(arena.finish(f.space, n, root))
}

fn trace_rec(f: &HarmonicFunction, id: NodeId, remaining: usize, arena: &mut StepArena, memo: &mut HashMap<NodeId, u32>) -> u32 {
    if let Some(&r) = memo.get(&id) {
        return r;
    }
    let n = f.node(id);
    let r = if remaining == 0 {
        arena.constant(n.value.clone())
    } else {
        let kids = n.children.iter().map(|&c| trace_rec(f, c, remaining - 1, arena, memo)).collect();
        arena.split(kids)
    };
    memo.insert(id, r);
    r
}

/// Traces `ω_0(f), ..., ω_depth(f)`, sharing work across levels.
pub fn all_traces(tree: &Tree, f: &HarmonicFunction, max_level: usize) -> Result<Vec<StepFunction>> {
    (0..=max_level).map(|n| boundary_trace(tree, f, n)).collect()
}

/// Whether `E[ω_m(f) | M_n] = ω_n(f)` holds exactly.
pub fn martingale_check(tree: &Tree, f: &HarmonicFunction, n: usize, m: usize) -> Result<bool> {
    if n >= m {
        return Err(Error::LevelOutOfRange { level: n, limit: m.saturating_sub(1) });
    }
    let fine = boundary_trace(tree, f, m)?;
    let coarse = boundary_trace(tree, f, n)?;
    Ok(conditional_expectation(tree, &fine, n)? == coarse)
}

/// Truncated pointwise-convergence distance with its tail bound.
#[derive(Clone, Debug, PartialEq)]
pub struct HqDistance {
    /// `Σ_{j<=J} 2^-j t_j / (1 + t_j)` over the enumeration.
    pub sum: Q,
    /// `Σ_{j>J} 2^-j = 2^-J`: the most the omitted terms can add.
    pub tail_bound: Q,
}

impl HqDistance {
    pub fn upper_bound(&self) -> Q {
        &self.sum + &self.tail_bound
    }
}

/// `ρ(f, g) = Σ_j 2^-j d(f(x_j), g(x_j)) / (1 + d(...))` over `x_0..x_J`.
pub fn hq_distance(
    tree: &Tree,
    f: &HarmonicFunction,
    g: &HarmonicFunction,
    enumeration: &VertexEnumeration,
) -> Result<HqDistance> {
    if f.space != g.space {
        return Err(Error::SpaceMismatch(f.space.to_string(), g.space.to_string()));
    }
    if enumeration.is_empty() {
        return Err(Error::Invalid("empty vertex enumeration".into()));
    }
    // Terms are grouped by their value t/(1+t); the dyadic weights of each
    // group are accumulated as bits of one integer over 2^J.
    let big_j = enumeration.len() - 1;
    let mut groups: HashMap<Q, BigUint> = HashMap::new();
    let mut term: HashMap<(NodeId, NodeId), Q> = HashMap::new();
    for (j, x) in enumeration.iter().enumerate() {
        let key = (f.node_at(tree, x)?, g.node_at(tree, x)?);
        let u = term
            .entry(key)
            .or_insert_with(|| rational::bounded(&f.space.dist_unchecked(&f.node(key.0).value, &g.node(key.1).value)));
        if !u.is_zero() {
            groups.entry(u.clone()).or_default().set_bit(big_j - j as u64, true);
        }
    }
    let denom = BigInt::from(1) << big_j;
    let mut sum = Q::zero();
    for (u, bits) in groups {
        sum += u * Q::new(BigInt::from(bits), denom.clone());
    }
    let tail_bound = rational::pow2_neg(big_j as u32);
    Ok(HqDistance { sum, tail_bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, q};
    use crate::tree::Weights;

    fn t2(d: usize) -> Tree {
        Tree::homogeneous(2, d, Weights::Uniform).unwrap()
    }

    fn s(x: Q) -> Value {
        Value::scalar(x)
    }

    /// f(x0) = 0 with level-1 values (-1, 1).
    fn pm(tree: &Tree) -> HarmonicFunction {
        HarmonicFunction::from_vertex_values(tree, ValueSpace::Scalar, 1, Some(0), |v| match v.0 {
            0 => s(int(0)),
            1 => s(int(-1)),
            _ => s(int(1)),
        })
        .unwrap()
    }

    #[test]
    fn constants_are_harmonic() {
        let t = t2(4);
        let c = HarmonicFunction::constant(&t, ValueSpace::Scalar, s(q(3, 7)), 4).unwrap();
        assert!(check_harmonic(&t, &c).is_empty());
        assert_eq!(c.interior_depth(), Some(3));
        assert_eq!(c.node_count(), 5);
        for n in 0..=4 {
            assert_eq!(boundary_trace(&t, &c, n).unwrap(), StepFunction::constant(ValueSpace::Scalar, s(q(3, 7))).unwrap());
            for m in n + 1..=4 {
                assert!(martingale_check(&t, &c, n, m).unwrap());
            }
        }
        let c = c.constant_tail_extend(&t, 4).unwrap();
        assert!(check_harmonic(&t, &c).is_empty());
    }

    #[test]
    fn plus_minus_function() {
        let t = t2(3);
        let f = pm(&t);
        assert!(check_harmonic(&t, &f).is_empty());
        let w0 = boundary_trace(&t, &f, 0).unwrap();
        assert_eq!(w0.value_on(&t, t.root()).unwrap(), &s(int(0)));
        let w1 = boundary_trace(&t, &f, 1).unwrap();
        let expect = StepFunction::from_sector_values(&t, ValueSpace::Scalar, 1, vec![s(int(-1)), s(int(1))]).unwrap();
        assert_eq!(w1, expect);
        assert!(boundary_trace(&t, &f, 2).is_err());
    }

    #[test]
    fn extension_copies_down() {
        let t = t2(3);
        let f = pm(&t).constant_tail_extend(&t, 3).unwrap();
        assert!(check_harmonic(&t, &f).is_empty());
        assert_eq!(f.interior_depth(), Some(2));
        let w3 = boundary_trace(&t, &f, 3).unwrap();
        let vals: Vec<Value> = w3.sector_values(&t).into_iter().map(|(_, v)| v).collect();
        assert_eq!(vals.iter().filter(|v| **v == s(int(-1))).count(), 4);
        assert_eq!(vals.iter().filter(|v| **v == s(int(1))).count(), 4);
        let w1 = boundary_trace(&t, &f, 1).unwrap().refine(3).unwrap();
        assert_eq!(crate::l0::l0_distance(&t, &w3, &w1).unwrap(), int(0));
        assert!(pm(&t).constant_tail_extend(&t, 4).is_err());
    }

    #[test]
    fn tampering_is_reported_at_parent() {
        let t = t2(3);
        let f = HarmonicFunction::constant(&t, ValueSpace::Scalar, s(int(2)), 3).unwrap();
        let leaf = Vertex(t.level_range(3).start + 3);
        let bad = f.with_value(&t, leaf, s(int(5))).unwrap();
        let d = check_harmonic(&t, &bad);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].vertex, t.parent(leaf).unwrap().0);
        assert_eq!(d[0].occurrences, 1);
        assert_eq!(d[0].children_mean, s(q(7, 2)));

        let level2 = Vertex(t.level_range(2).start + 1);
        let bad = f.with_value(&t, level2, s(int(3))).unwrap();
        assert!(!martingale_check(&t, &bad, 1, 2).unwrap());
        assert!(martingale_check(&t, &bad, 2, 3).is_ok());
    }

    #[test]
    fn neighbour_sum_matches_child_sum() {
        // Harmonicity over all neighbours y ~ x with q(x, x^-) = 0 is the child sum.
        let t = Tree::homogeneous(3, 3, Weights::Explicit(vec![q(1, 2), q(1, 3), q(1, 6)])).unwrap();
        let f = crate::gen::random_harmonic(&t, ValueSpace::Scalar, 3, &mut crate::gen::rng(5));
        let by_neighbours = |x: Vertex| -> Value {
            let nbrs: Vec<Vertex> = t.parent(x).into_iter().chain(t.children(x)).collect();
            nbrs.iter().fold(Value::scalar(int(0)), |acc, &y| acc.add(&f.value_at(&t, y).unwrap().scale(&t.weight(x, y))))
        };
        for x in t.vertices().filter(|&x| t.level(x) < 3) {
            assert_eq!(&by_neighbours(x), f.value_at(&t, x).unwrap());
        }
        assert!(check_harmonic(&t, &f).is_empty());
    }

    #[test]
    fn hq_distance_examples() {
        let t = t2(3);
        let zero = HarmonicFunction::constant(&t, ValueSpace::Scalar, s(int(0)), 3).unwrap();
        let one = HarmonicFunction::constant(&t, ValueSpace::Scalar, s(int(1)), 3).unwrap();
        let e = VertexEnumeration::full(&t);
        assert_eq!(hq_distance(&t, &zero, &zero, &e).unwrap().sum, int(0));
        for j in 0..15u32 {
            let e = VertexEnumeration::prefix(&t, j as u64 + 1);
            let d = hq_distance(&t, &zero, &one, &e).unwrap();
            assert_eq!(d.sum, int(1) - rational::pow2_neg(j + 1));
            assert_eq!(d.tail_bound, rational::pow2_neg(j));
        }
        let f = crate::gen::random_harmonic(&t, ValueSpace::Scalar, 3, &mut crate::gen::rng(1));
        let g = crate::gen::random_harmonic(&t, ValueSpace::Scalar, 3, &mut crate::gen::rng(2));
        let h = crate::gen::random_harmonic(&t, ValueSpace::Scalar, 3, &mut crate::gen::rng(3));
        assert_eq!(
            hq_distance(&t, &f.add(&h).unwrap(), &g.add(&h).unwrap(), &e).unwrap(),
            hq_distance(&t, &f, &g, &e).unwrap()
        );
    }

    #[test]
    fn truncation_and_tail_level() {
        let t = t2(4);
        let f = pm(&t).constant_tail_extend(&t, 4).unwrap();
        assert_eq!(f.constant_tail_level(&t), 1);
        assert_eq!(f.truncate(1).unwrap(), pm(&t));
        assert_eq!(f.truncate(0).unwrap().interior_depth(), None);
        let c = HarmonicFunction::constant(&t, ValueSpace::Scalar, s(int(1)), 4).unwrap();
        assert_eq!(c.constant_tail_level(&t), 0);
        let g = crate::gen::random_harmonic(&t, ValueSpace::Scalar, 2, &mut crate::gen::rng(4));
        assert_eq!(g.constant_tail_extend(&t, 4).unwrap().constant_tail_level(&t), 2);
        assert!(f.truncate(5).is_err());
    }

    #[test]
    fn documents_round_trip() {
        let t = t2(3);
        let f = crate::gen::random_harmonic(&t, ValueSpace::Scalar, 3, &mut crate::gen::rng(9));
        for format in [DocumentFormat::Dense, DocumentFormat::Compact] {
            let json = f.to_json(&t, format).unwrap();
            assert_eq!(HarmonicFunction::from_json(&t, &json).unwrap(), f);
        }
        let mut doc = f.to_document(&t, DocumentFormat::Dense);
        doc.values.as_mut().unwrap().remove(&5);
        assert!(HarmonicFunction::from_document(&t, &doc).is_err());
    }
}
