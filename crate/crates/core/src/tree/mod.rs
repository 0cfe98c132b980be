//! Finitely-branching rooted trees with exact transition weights.
//!
//! Vertices are numbered breadth-first (by level, then by child order), so
//! every level and every set of same-level descendants is a contiguous range
//! of ids. Homogeneous trees are stored implicitly and can be very deep; all
//! trees also carry a table of interned subtree *shapes* (child shapes plus
//! child weights), which lets functions on the tree be stored as DAGs.

mod document;

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::Q;

pub use document::{load_tree, ChildRecord, TreeDocument, VertexRecord};

/// Breadth-first index of a vertex; the root is `Vertex(0)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Vertex(pub u64);

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Index into [`Tree::shapes`].
pub type ShapeId = usize;

/// An interned subtree class: every vertex with this shape has exactly these
/// child weights and its children have exactly these shapes.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Shape {
    pub children: Vec<ShapeId>,
    pub weights: Vec<Q>,
}

impl Shape {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

#[derive(Clone, Debug)]
enum Layout {
    Uniform {
        branching: u64,
    },
    Explicit {
        parent: Vec<u64>,
        first_child: Vec<u64>,
        child_count: Vec<u32>,
        shape_of: Vec<ShapeId>,
        labels: Vec<u64>,
        by_label: HashMap<u64, u64>,
    },
}

/// Child weights for [`Tree::homogeneous`].
#[derive(Clone, Debug)]
pub enum Weights {
    Uniform,
    Explicit(Vec<Q>),
}

#[derive(Clone, Debug)]
pub struct Tree {
    depth: usize,
    level_start: Vec<u64>,
    shapes: Vec<Shape>,
    root_shape: ShapeId,
    layout: Layout,
}

/// One violated tree invariant. Vertices are reported by label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Diagnostic {
    WeightSum { vertex: u64, sum: Q },
    Branching { vertex: u64, children: usize },
    NonPositiveWeight { vertex: u64, child: usize, weight: Q },
    MissingChildren { vertex: u64, level: usize },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::WeightSum { vertex, sum } => {
                write!(f, "weights sum {sum} \u{2260} 1 at vertex {vertex}")
            }
            Diagnostic::Branching { vertex, children } => {
                write!(f, "branching < 2 at vertex {vertex} ({children} child)")
            }
            Diagnostic::NonPositiveWeight { vertex, child, weight } => {
                write!(f, "non-positive weight {weight} on child {child} of vertex {vertex}")
            }
            Diagnostic::MissingChildren { vertex, level } => {
                write!(f, "vertex {vertex} at level {level} has no children above the tree depth")
            }
        }
    }
}

fn check_weights(weights: &[Q]) -> Result<()> {
    if let Some(w) = weights.iter().find(|w| !w.is_positive()) {
        return Err(Error::NonPositiveWeight(w.to_string()));
    }
    let sum: Q = weights.iter().sum();
    if !sum.is_one() {
        return Err(Error::WeightSum(sum.to_string()));
    }
    Ok(())
}

impl Tree {
    /// Every vertex above `depth` has `branching` children with the same weights.
    pub fn homogeneous(branching: usize, depth: usize, weights: Weights) -> Result<Tree> {
        if branching < 2 {
            return Err(Error::Branching(branching));
        }
        if depth == 0 {
            return Err(Error::ZeroDepth);
        }
        let weights = match weights {
            Weights::Uniform => vec![Q::new(1.into(), (branching as i64).into()); branching],
            Weights::Explicit(w) => {
                if w.len() != branching {
                    return Err(Error::WeightCount { expected: branching, got: w.len() });
                }
                check_weights(&w)?;
                w
            }
        };
        Self::uniform_unchecked(branching as u64, depth, weights)
    }

    fn uniform_unchecked(branching: u64, depth: usize, weights: Vec<Q>) -> Result<Tree> {
        let too_large = || Error::TooLarge { branching, depth };
        let mut level_start = Vec::with_capacity(depth + 2);
        let (mut start, mut width) = (0u64, 1u64);
        for _ in 0..=depth {
            level_start.push(start);
            start = start.checked_add(width).ok_or_else(too_large)?;
            width = width.checked_mul(branching).ok_or_else(too_large)?;
        }
        level_start.push(start);
        let mut shapes = vec![Shape { children: vec![], weights: vec![] }];
        for h in 1..=depth {
            shapes.push(Shape { children: vec![h - 1; branching as usize], weights: weights.clone() });
        }
        Ok(Tree { depth, level_start, shapes, root_shape: depth, layout: Layout::Uniform { branching } })
    }

    /// Builds a tree from child-weight lists given in breadth-first vertex
    /// order: entry `i` lists the weights of vertex `i`'s children, which get
    /// the next unused ids. No invariant is checked; see [`validate`].
    pub fn from_bfs(children: Vec<Vec<Q>>, labels: Option<Vec<u64>>) -> Result<Tree> {
        let n = children.len();
        if n == 0 {
            return Err(Error::Schema("tree has no vertices".into()));
        }
        let total: usize = 1 + children.iter().map(Vec::len).sum::<usize>();
        if total != n {
            return Err(Error::Schema(format!("child lists describe {total} vertices, got {n}")));
        }
        let labels = labels.unwrap_or_else(|| (0..n as u64).collect());
        if labels.len() != n {
            return Err(Error::Schema("label count differs from vertex count".into()));
        }
        let mut parent = vec![u64::MAX; n];
        let mut first_child = vec![0u64; n];
        let mut child_count = vec![0u32; n];
        let mut level = vec![0usize; n];
        let mut next = 1u64;
        for (i, ws) in children.iter().enumerate() {
            first_child[i] = next;
            child_count[i] = ws.len() as u32;
            for c in next..next + ws.len() as u64 {
                parent[c as usize] = i as u64;
                level[c as usize] = level[i] + 1;
            }
            next += ws.len() as u64;
        }
        let depth = level[n - 1];
        let level_start: Vec<u64> = (0..=depth + 1).map(|l| level.partition_point(|&x| x < l) as u64).collect();

        if let Some(t) = Self::detect_uniform(&children, &labels, &level, depth) {
            return Ok(t);
        }

        // Children always carry larger ids than their parent, so a reverse
        // sweep sees every child shape before the parent's.
        let mut shapes: Vec<Shape> = Vec::new();
        let mut index: HashMap<Shape, ShapeId> = HashMap::new();
        let mut shape_of = vec![0; n];
        for i in (0..n).rev() {
            let c0 = first_child[i] as usize;
            let shape = Shape {
                children: (c0..c0 + child_count[i] as usize).map(|c| shape_of[c]).collect(),
                weights: children[i].clone(),
            };
            shape_of[i] = *index.entry(shape.clone()).or_insert_with(|| {
                shapes.push(shape);
                shapes.len() - 1
            });
        }
        let by_label: HashMap<u64, u64> = labels.iter().enumerate().map(|(i, &l)| (l, i as u64)).collect();
        if by_label.len() != n {
            return Err(Error::Schema("duplicate vertex labels".into()));
        }
        Ok(Tree {
            depth,
            level_start,
            root_shape: shape_of[0],
            shapes,
            layout: Layout::Explicit { parent, first_child, child_count, shape_of, labels, by_label },
        })
    }

    fn detect_uniform(children: &[Vec<Q>], labels: &[u64], level: &[usize], depth: usize) -> Option<Tree> {
        if depth == 0 || labels.iter().enumerate().any(|(i, &l)| l != i as u64) {
            return None;
        }
        let first = &children[0];
        if first.len() < 2 {
            return None;
        }
        let same = children
            .iter()
            .zip(level)
            .all(|(ws, &l)| if l < depth { ws == first } else { ws.is_empty() });
        if !same {
            return None;
        }
        Self::uniform_unchecked(first.len() as u64, depth, first.clone()).ok()
    }

    /// Child-weight lists in breadth-first order; the inverse of [`Tree::from_bfs`].
    pub fn to_bfs(&self) -> Vec<Vec<Q>> {
        self.vertices().map(|v| self.child_weights(v).to_vec()).collect()
    }

    /// A copy with vertex `v`'s child weights replaced, without validation.
    pub fn with_child_weights_unchecked(&self, v: Vertex, weights: Vec<Q>) -> Result<Tree> {
        self.check_vertex(v)?;
        let mut lists = self.to_bfs();
        if weights.len() != lists[v.0 as usize].len() {
            return Err(Error::WeightCount { expected: lists[v.0 as usize].len(), got: weights.len() });
        }
        lists[v.0 as usize] = weights;
        let labels = self.vertices().map(|x| self.label(x)).collect();
        Tree::from_bfs(lists, Some(labels))
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn root(&self) -> Vertex {
        Vertex(0)
    }

    pub fn vertex_count(&self) -> u64 {
        self.level_start[self.depth + 1]
    }

    pub fn is_homogeneous(&self) -> bool {
        matches!(self.layout, Layout::Uniform { .. })
    }

    /// Branching of a homogeneous tree.
    pub fn branching(&self) -> Option<u64> {
        match self.layout {
            Layout::Uniform { branching } => Some(branching),
            Layout::Explicit { .. } => None,
        }
    }

    pub fn vertices(&self) -> impl Iterator<Item = Vertex> {
        (0..self.vertex_count()).map(Vertex)
    }

    /// Ids of the level-`l` vertices `T_l`.
    pub fn level_range(&self, l: usize) -> Range<u64> {
        assert!(l <= self.depth, "level {l} beyond depth {}", self.depth);
        self.level_start[l]..self.level_start[l + 1]
    }

    pub fn level_size(&self, l: usize) -> u64 {
        let r = self.level_range(l);
        r.end - r.start
    }

    pub fn contains(&self, v: Vertex) -> bool {
        v.0 < self.vertex_count()
    }

    pub fn check_vertex(&self, v: Vertex) -> Result<()> {
        if self.contains(v) {
            Ok(())
        } else {
            Err(Error::UnknownVertex(v))
        }
    }

    pub fn check_level(&self, l: usize) -> Result<()> {
        if l <= self.depth {
            Ok(())
        } else {
            Err(Error::LevelOutOfRange { level: l, limit: self.depth })
        }
    }

    pub fn level(&self, v: Vertex) -> usize {
        debug_assert!(self.contains(v));
        self.level_start.partition_point(|&s| s <= v.0) - 1
    }

    pub fn parent(&self, v: Vertex) -> Option<Vertex> {
        if v.0 == 0 {
            return None;
        }
        match &self.layout {
            Layout::Uniform { branching } => {
                let l = self.level(v);
                let offset = v.0 - self.level_start[l];
                Some(Vertex(self.level_start[l - 1] + offset / branching))
            }
            Layout::Explicit { parent, .. } => Some(Vertex(parent[v.0 as usize])),
        }
    }

    /// Ids of the children `S(v)`, in stored order.
    pub fn children_range(&self, v: Vertex) -> Range<u64> {
        match &self.layout {
            Layout::Uniform { branching } => {
                let l = self.level(v);
                if l == self.depth {
                    return 0..0;
                }
                let first = self.level_start[l + 1] + (v.0 - self.level_start[l]) * branching;
                first..first + branching
            }
            Layout::Explicit { first_child, child_count, .. } => {
                let i = v.0 as usize;
                if child_count[i] == 0 {
                    return 0..0;
                }
                first_child[i]..first_child[i] + child_count[i] as u64
            }
        }
    }

    pub fn children(&self, v: Vertex) -> impl Iterator<Item = Vertex> {
        self.children_range(v).map(Vertex)
    }

    pub fn child(&self, v: Vertex, i: usize) -> Vertex {
        Vertex(self.children_range(v).start + i as u64)
    }

    pub fn shape_of(&self, v: Vertex) -> ShapeId {
        match &self.layout {
            Layout::Uniform { .. } => self.depth - self.level(v),
            Layout::Explicit { shape_of, .. } => shape_of[v.0 as usize],
        }
    }

    pub fn shape(&self, id: ShapeId) -> &Shape {
        &self.shapes[id]
    }

    pub fn shapes(&self) -> &[Shape] {
        &self.shapes
    }

    pub fn root_shape(&self) -> ShapeId {
        self.root_shape
    }

    /// `q(v, y)` for `y` ranging over `S(v)` in stored order.
    pub fn child_weights(&self, v: Vertex) -> &[Q] {
        &self.shapes[self.shape_of(v)].weights
    }

    /// `q(x, y)`; zero unless `y` is a child of `x` (in particular `q(x, x^-) = 0`).
    pub fn weight(&self, x: Vertex, y: Vertex) -> Q {
        let r = self.children_range(x);
        if r.contains(&y.0) {
            self.child_weights(x)[(y.0 - r.start) as usize].clone()
        } else {
            Q::zero()
        }
    }

    /// External id of a vertex (equal to the index unless loaded from a document).
    pub fn label(&self, v: Vertex) -> u64 {
        match &self.layout {
            Layout::Uniform { .. } => v.0,
            Layout::Explicit { labels, .. } => labels[v.0 as usize],
        }
    }

    pub fn by_label(&self, label: u64) -> Option<Vertex> {
        match &self.layout {
            Layout::Uniform { .. } => Some(Vertex(label)).filter(|v| self.contains(*v)),
            Layout::Explicit { by_label, .. } => by_label.get(&label).map(|&i| Vertex(i)),
        }
    }

    /// The level-`l` vertex on the geodesic from the root to `v`.
    pub fn ancestor_at(&self, v: Vertex, l: usize) -> Vertex {
        let mut lv = self.level(v);
        assert!(l <= lv);
        if let Layout::Uniform { branching } = self.layout {
            let offset = (v.0 - self.level_start[lv]) / branching.pow((lv - l) as u32);
            return Vertex(self.level_start[l] + offset);
        }
        let mut x = v;
        while lv > l {
            x = self.parent(x).expect("non-root has a parent");
            lv -= 1;
        }
        x
    }

    /// The level-`l` descendants of `v`, which are contiguous in breadth-first order.
    pub fn descendants_at(&self, v: Vertex, l: usize) -> Range<u64> {
        let lv = self.level(v);
        assert!(l >= lv && l <= self.depth);
        if let Layout::Uniform { branching } = self.layout {
            let span = branching.pow((l - lv) as u32);
            let first = self.level_start[l] + (v.0 - self.level_start[lv]) * span;
            return first..first + span;
        }
        // Children of consecutive vertices are consecutive, childless ones included.
        let (mut lo, mut hi) = (v.0, v.0 + 1);
        for _ in lv..l {
            if lo == hi {
                break;
            }
            let first = self.children_range(Vertex(lo)).start;
            hi = self.children_range(Vertex(hi - 1)).end;
            lo = first;
        }
        lo..hi
    }

    /// Child indices along the geodesic from the root to `v`.
    pub fn path_indices(&self, v: Vertex) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.level(v));
        let mut x = v;
        while let Some(p) = self.parent(x) {
            out.push((x.0 - self.children_range(p).start) as usize);
            x = p;
        }
        out.reverse();
        out
    }

    /// The geodesic `[x, y]` as a vertex sequence; its length is `len() - 1`.
    pub fn geodesic(&self, x: Vertex, y: Vertex) -> Result<Vec<Vertex>> {
        self.check_vertex(x)?;
        self.check_vertex(y)?;
        let (mut a, mut b) = (x, y);
        let (mut la, mut lb) = (self.level(a), self.level(b));
        let mut up = vec![];
        let mut down = vec![];
        while la > lb {
            up.push(a);
            a = self.parent(a).unwrap();
            la -= 1;
        }
        while lb > la {
            down.push(b);
            b = self.parent(b).unwrap();
            lb -= 1;
        }
        while a != b {
            up.push(a);
            down.push(b);
            a = self.parent(a).unwrap();
            b = self.parent(b).unwrap();
        }
        up.push(a);
        up.extend(down.into_iter().rev());
        Ok(up)
    }

    /// `ℓ(x, y)`, the number of edges on the geodesic.
    pub fn distance(&self, x: Vertex, y: Vertex) -> Result<usize> {
        Ok(self.geodesic(x, y)?.len() - 1)
    }
}

impl PartialEq for Tree {
    fn eq(&self, other: &Tree) -> bool {
        if self.depth != other.depth || self.level_start != other.level_start {
            return false;
        }
        match (&self.layout, &other.layout) {
            (Layout::Uniform { branching: a }, Layout::Uniform { branching: b }) => {
                a == b && self.shapes == other.shapes
            }
            _ => self.vertices().all(|v| {
                self.label(v) == other.label(v)
                    && self.children_range(v) == other.children_range(v)
                    && self.child_weights(v) == other.child_weights(v)
            }),
        }
    }
}

/// One diagnostic per violated invariant; empty iff the tree is valid.
pub fn validate(tree: &Tree) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let check = |v: Vertex, out: &mut Vec<Diagnostic>| {
        let vertex = tree.label(v);
        let weights = tree.child_weights(v);
        let level = tree.level(v);
        if weights.is_empty() {
            if level < tree.depth() {
                out.push(Diagnostic::MissingChildren { vertex, level });
            }
            return;
        }
        if weights.len() < 2 {
            out.push(Diagnostic::Branching { vertex, children: weights.len() });
        }
        for (child, w) in weights.iter().enumerate() {
            if !w.is_positive() {
                out.push(Diagnostic::NonPositiveWeight { vertex, child, weight: w.clone() });
            }
        }
        let sum: Q = weights.iter().sum();
        if !sum.is_one() {
            out.push(Diagnostic::WeightSum { vertex, sum });
        }
    };
    match tree.layout {
        // One representative per level: every vertex of a level shares its shape.
        Layout::Uniform { .. } => {
            for l in 0..tree.depth() {
                check(Vertex(tree.level_range(l).start), &mut out);
            }
        }
        Layout::Explicit { .. } => tree.vertices().for_each(|v| check(v, &mut out)),
    }
    out
}

/// The breadth-first enumeration `x_0, x_1, ...` of a prefix of the tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VertexEnumeration {
    len: u64,
}

impl VertexEnumeration {
    pub fn full(tree: &Tree) -> Self {
        VertexEnumeration { len: tree.vertex_count() }
    }

    /// The first `len` vertices (capped at the tree size).
    pub fn prefix(tree: &Tree, len: u64) -> Self {
        VertexEnumeration { len: len.min(tree.vertex_count()) }
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, j: u64) -> Option<Vertex> {
        (j < self.len).then_some(Vertex(j))
    }

    pub fn iter(&self) -> impl Iterator<Item = Vertex> {
        (0..self.len).map(Vertex)
    }
}
