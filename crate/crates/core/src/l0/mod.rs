//! Step functions on the boundary, the convergence-in-probability metric,
//! conditional expectations and the dense target enumeration.

mod targets;

use std::collections::{BTreeMap, HashMap};

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intern::{Interner, NodeId};
use crate::rational::{self, Q};
use crate::tree::{ShapeId, Tree, Vertex};
use crate::value::{Value, ValueSpace};

pub use targets::{enumerate_targets, DyadicTargets, TargetList, Targets};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) enum StepNode {
    /// Constant on the whole sector.
    Const(Value),
    /// One node per child sector; never all equal constants.
    Split(Vec<NodeId>),
}

/// An `M_n`-measurable function on the boundary, constant on each level-`n`
/// sector. Stored as a canonical DAG over sectors: a sector on which the
/// function is constant is a single `Const` node, however deep.
#[derive(Clone, Debug)]
pub struct StepFunction {
    space: ValueSpace,
    level: usize,
    nodes: Vec<StepNode>,
    root: NodeId,
}

#[derive(Default)]
pub(crate) struct StepArena {
    inner: Option<Interner<StepNode>>,
}

impl StepArena {
    pub fn new() -> Self {
        StepArena { inner: Some(Interner::new()) }
    }

    fn arena(&mut self) -> &mut Interner<StepNode> {
        self.inner.get_or_insert_with(Interner::new)
    }

    pub fn constant(&mut self, v: Value) -> NodeId {
        self.arena().intern(StepNode::Const(v))
    }

    /// Collapses to the child when every child is the same node.
    pub fn split(&mut self, children: Vec<NodeId>) -> NodeId {
        if let Some(&first) = children.first() {
            if children.iter().all(|&c| c == first) && matches!(self.arena().get(first), StepNode::Const(_)) {
                return first;
            }
        }
        self.arena().intern(StepNode::Split(children))
    }

    pub fn finish(mut self, space: ValueSpace, level: usize, root: NodeId) -> StepFunction {
        let nodes = self.inner.take().map(Interner::into_nodes).unwrap_or_default();
        StepFunction { space, level, nodes, root }
    }
}

impl StepFunction {
    pub fn constant(space: ValueSpace, value: Value) -> Result<Self> {
        space.check(&value)?;
        let mut a = StepArena::new();
        let root = a.constant(value);
        Ok(a.finish(space, 0, root))
    }

    pub fn zero(space: ValueSpace) -> Self {
        Self::constant(space, space.zero()).expect("zero has the right dimension")
    }

    /// Values for the level-`level` sectors in breadth-first order.
    pub fn from_sector_values(tree: &Tree, space: ValueSpace, level: usize, values: Vec<Value>) -> Result<Self> {
        tree.check_level(level)?;
        let range = tree.level_range(level);
        if values.len() as u64 != range.end - range.start {
            return Err(Error::Invalid(format!(
                "level {level} has {} sectors, got {} values",
                range.end - range.start,
                values.len()
            )));
        }
        for v in &values {
            space.check(v)?;
        }
        let mut a = StepArena::new();
        let mut layer: Vec<NodeId> = values.into_iter().map(|v| a.constant(v)).collect();
        for l in (0..level).rev() {
            let child_base = tree.level_range(l + 1).start;
            layer = tree
                .level_range(l)
                .map(|x| {
                    let r = tree.children_range(Vertex(x));
                    let kids = layer[(r.start - child_base) as usize..(r.end - child_base) as usize].to_vec();
                    a.split(kids)
                })
                .collect();
        }
        Ok(a.finish(space, level, layer[0]))
    }

    pub fn from_fn(tree: &Tree, space: ValueSpace, level: usize, f: impl Fn(Vertex) -> Value) -> Result<Self> {
        tree.check_level(level)?;
        let values = tree.level_range(level).map(|x| f(Vertex(x))).collect();
        Self::from_sector_values(tree, space, level, values)
    }

    pub fn space(&self) -> ValueSpace {
        self.space
    }

    /// The nominal level `n` (the function is `M_n`-measurable).
    pub fn level(&self) -> usize {
        self.level
    }

    /// Deepest level at which the function actually varies.
    pub fn effective_level(&self) -> usize {
        let mut memo: HashMap<NodeId, usize> = HashMap::new();
        self.height(self.root, &mut memo)
    }

    fn height(&self, id: NodeId, memo: &mut HashMap<NodeId, usize>) -> usize {
        if let Some(&h) = memo.get(&id) {
            return h;
        }
        let h = match self.node(id) {
            StepNode::Const(_) => 0,
            StepNode::Split(kids) => 1 + kids.iter().map(|&k| self.height(k, memo)).max().unwrap_or(0),
        };
        memo.insert(id, h);
        h
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub(crate) fn node(&self, id: NodeId) -> &StepNode {
        &self.nodes[id as usize]
    }

    pub(crate) fn root(&self) -> NodeId {
        self.root
    }

    /// Same function viewed as `M_level`-measurable for a deeper level.
    pub fn refine(&self, level: usize) -> Result<Self> {
        if level < self.level {
            return Err(Error::LevelOutOfRange { level, limit: self.level });
        }
        Ok(StepFunction { level, ..self.clone() })
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.node(self.root), StepNode::Const(_))
    }

    /// The value on the sector `B_x`, if the function is constant there.
    pub fn value_on(&self, tree: &Tree, x: Vertex) -> Option<&Value> {
        let mut id = self.root;
        let mut path = tree.path_indices(x).into_iter();
        loop {
            match self.node(id) {
                StepNode::Const(v) => return Some(v),
                StepNode::Split(kids) => id = *kids.get(path.next()?)?,
            }
        }
    }

    /// `(sector, value)` for every level-`n` sector, `n` the nominal level.
    pub fn sector_values(&self, tree: &Tree) -> Vec<(Vertex, Value)> {
        tree.level_range(self.level)
            .map(|x| (Vertex(x), self.value_on(tree, Vertex(x)).expect("constant on level sectors").clone()))
            .collect()
    }

    pub fn map(&self, space: ValueSpace, f: impl Fn(&Value) -> Value) -> StepFunction {
        let mut a = StepArena::new();
        let mut memo = HashMap::new();
        let root = self.map_rec(self.root, &f, &mut a, &mut memo);
        a.finish(space, self.level, root)
    }

    fn map_rec(
        &self,
        id: NodeId,
        f: &impl Fn(&Value) -> Value,
        a: &mut StepArena,
        memo: &mut HashMap<NodeId, NodeId>,
    ) -> NodeId {
        if let Some(&r) = memo.get(&id) {
            return r;
        }
        let r = match self.node(id) {
            StepNode::Const(v) => a.constant(f(v)),
            StepNode::Split(kids) => {
                let kids = kids.iter().map(|&k| self.map_rec(k, f, a, memo)).collect();
                a.split(kids)
            }
        };
        memo.insert(id, r);
        r
    }

    /// Pointwise combination; the result has the larger nominal level.
    pub fn zip_with(
        &self,
        other: &StepFunction,
        space: ValueSpace,
        f: impl Fn(&Value, &Value) -> Value,
    ) -> StepFunction {
        let mut a = StepArena::new();
        let mut memo = HashMap::new();
        let root = zip_rec(self, other, self.root, other.root, &f, &mut a, &mut memo);
        a.finish(space, self.level.max(other.level), root)
    }

    fn check_same_space(&self, other: &StepFunction) -> Result<()> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch(self.space.to_string(), other.space.to_string()));
        }
        Ok(())
    }

    pub fn add(&self, other: &StepFunction) -> Result<StepFunction> {
        self.check_same_space(other)?;
        Ok(self.zip_with(other, self.space, Value::add))
    }

    pub fn sub(&self, other: &StepFunction) -> Result<StepFunction> {
        self.check_same_space(other)?;
        Ok(self.zip_with(other, self.space, Value::sub))
    }

    pub fn scale(&self, lambda: &Q) -> StepFunction {
        self.map(self.space, |v| v.scale(lambda))
    }

    /// Coordinate `i` as a scalar step function.
    pub fn component(&self, i: usize) -> Result<StepFunction> {
        if i >= self.space.dim() {
            return Err(Error::Dimension { expected: self.space.dim(), got: i + 1 });
        }
        Ok(self.map(ValueSpace::Scalar, |v| Value::scalar(v.0[i].clone())))
    }

    /// Stacks scalar step functions into one over `space` (of matching dimension).
    pub fn stack(space: ValueSpace, parts: &[StepFunction]) -> Result<StepFunction> {
        if parts.len() != space.dim() {
            return Err(Error::Dimension { expected: space.dim(), got: parts.len() });
        }
        let mut acc = parts[0].map(space, |v| {
            let mut coords = vec![Q::zero(); space.dim()];
            coords[0] = v.0[0].clone();
            Value(coords)
        });
        for (i, p) in parts.iter().enumerate().skip(1) {
            acc = acc.zip_with(p, space, |a, b| {
                let mut c = a.clone();
                c.0[i] = b.0[0].clone();
                c
            });
        }
        Ok(acc)
    }

    pub fn to_document(&self, tree: &Tree) -> StepFunctionDocument {
        StepFunctionDocument {
            level: self.level,
            values: self.sector_values(tree).into_iter().map(|(x, v)| (tree.label(x), v)).collect(),
        }
    }

    pub fn from_document(tree: &Tree, space: ValueSpace, doc: &StepFunctionDocument) -> Result<Self> {
        tree.check_level(doc.level)?;
        let mut values = Vec::new();
        for x in tree.level_range(doc.level) {
            let label = tree.label(Vertex(x));
            let v = doc
                .values
                .get(&label)
                .ok_or_else(|| Error::Schema(format!("no value for sector {label} at level {}", doc.level)))?;
            values.push(v.clone());
        }
        if doc.values.len() != values.len() {
            return Err(Error::Schema(format!("document lists sectors outside level {}", doc.level)));
        }
        Self::from_sector_values(tree, space, doc.level, values)
    }
}

fn zip_rec(
    x: &StepFunction,
    y: &StepFunction,
    a: NodeId,
    b: NodeId,
    f: &impl Fn(&Value, &Value) -> Value,
    arena: &mut StepArena,
    memo: &mut HashMap<(NodeId, NodeId), NodeId>,
) -> NodeId {
    if let Some(&r) = memo.get(&(a, b)) {
        return r;
    }
    let r = match (x.node(a), y.node(b)) {
        (StepNode::Const(u), StepNode::Const(v)) => arena.constant(f(u, v)),
        (na, nb) => {
            let n = match (na, nb) {
                (StepNode::Split(k), _) | (_, StepNode::Split(k)) => k.len(),
                _ => unreachable!(),
            };
            let kids = (0..n)
                .map(|i| {
                    let ca = match na {
                        StepNode::Split(k) => k[i],
                        StepNode::Const(_) => a,
                    };
                    let cb = match nb {
                        StepNode::Split(k) => k[i],
                        StepNode::Const(_) => b,
                    };
                    zip_rec(x, y, ca, cb, f, arena, memo)
                })
                .collect();
            arena.split(kids)
        }
    };
    memo.insert((a, b), r);
    r
}

/// Functions are compared as functions: same space and same value on every
/// sector. The nominal level is not compared.
impl PartialEq for StepFunction {
    fn eq(&self, other: &StepFunction) -> bool {
        if self.space != other.space {
            return false;
        }
        let mut memo = HashMap::new();
        same_rec(self, other, self.root, other.root, &mut memo)
    }
}

fn same_rec(
    x: &StepFunction,
    y: &StepFunction,
    a: NodeId,
    b: NodeId,
    memo: &mut HashMap<(NodeId, NodeId), bool>,
) -> bool {
    if let Some(&r) = memo.get(&(a, b)) {
        return r;
    }
    let r = match (x.node(a), y.node(b)) {
        (StepNode::Const(u), StepNode::Const(v)) => u == v,
        (StepNode::Split(ka), StepNode::Split(kb)) => {
            ka.len() == kb.len() && ka.iter().zip(kb).all(|(&p, &q)| same_rec(x, y, p, q, memo))
        }
        // Canonical form: a Split is never equal to a constant.
        _ => false,
    };
    memo.insert((a, b), r);
    r
}

/// JSON form: `{ "level": n, "values": { sector-id: [fraction strings] } }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepFunctionDocument {
    pub level: usize,
    pub values: BTreeMap<u64, Value>,
}

/// Integrates `g` over the boundary, where `g` sees the values of both
/// functions on each sector of their common refinement.
pub(crate) fn integrate_pair(
    tree: &Tree,
    x: &StepFunction,
    y: &StepFunction,
    g: &impl Fn(&Value, &Value) -> Q,
) -> Q {
    let mut memo = HashMap::new();
    integrate_rec(tree, x, y, tree.root_shape(), x.root, y.root, g, &mut memo)
}

#[allow(clippy::too_many_arguments)]
fn integrate_rec(
    tree: &Tree,
    x: &StepFunction,
    y: &StepFunction,
    shape: ShapeId,
    a: NodeId,
    b: NodeId,
    g: &impl Fn(&Value, &Value) -> Q,
    memo: &mut HashMap<(ShapeId, NodeId, NodeId), Q>,
) -> Q {
    if let Some(r) = memo.get(&(shape, a, b)) {
        return r.clone();
    }
    let r = match (x.node(a), y.node(b)) {
        (StepNode::Const(u), StepNode::Const(v)) => g(u, v),
        (na, nb) => {
            let s = tree.shape(shape);
            let mut acc = Q::zero();
            for (i, (&cs, w)) in s.children.iter().zip(&s.weights).enumerate() {
                let ca = match na {
                    StepNode::Split(k) => k[i],
                    StepNode::Const(_) => a,
                };
                let cb = match nb {
                    StepNode::Split(k) => k[i],
                    StepNode::Const(_) => b,
                };
                acc += w * integrate_rec(tree, x, y, cs, ca, cb, g, memo);
            }
            acc
        }
    };
    memo.insert((shape, a, b), r.clone());
    r
}

fn check_levels(tree: &Tree, fs: &[&StepFunction]) -> Result<()> {
    for f in fs {
        tree.check_level(f.level)?;
    }
    Ok(())
}

/// `ρ̃(h1, h2) = ∫ d/(1+d) dP`, exact, in `[0, 1]`.
pub fn l0_distance(tree: &Tree, h1: &StepFunction, h2: &StepFunction) -> Result<Q> {
    h1.check_same_space(h2)?;
    check_levels(tree, &[h1, h2])?;
    let space = h1.space;
    Ok(integrate_pair(tree, h1, h2, &|u, v| rational::bounded(&space.dist_unchecked(u, v))))
}

/// `∫ h dP`, coordinatewise.
pub fn expectation(tree: &Tree, h: &StepFunction) -> Result<Value> {
    check_levels(tree, &[h])?;
    let mut memo = HashMap::new();
    Ok(average(tree, h, tree.root_shape(), h.root, &mut memo))
}

fn average(tree: &Tree, h: &StepFunction, shape: ShapeId, id: NodeId, memo: &mut HashMap<(ShapeId, NodeId), Value>) -> Value {
    if let Some(v) = memo.get(&(shape, id)) {
        return v.clone();
    }
    let v = match h.node(id) {
        StepNode::Const(v) => v.clone(),
        StepNode::Split(kids) => {
            let s = tree.shape(shape);
            let mut acc = h.space.zero();
            for ((&k, &cs), w) in kids.iter().zip(&s.children).zip(&s.weights) {
                acc = acc.add(&average(tree, h, cs, k, memo).scale(w));
            }
            acc
        }
    };
    memo.insert((shape, id), v.clone());
    v
}

/// `E[h | M_n]`: on each level-`n` sector, the measure-weighted average of `h`
/// over the sector.
pub fn conditional_expectation(tree: &Tree, h: &StepFunction, n: usize) -> Result<StepFunction> {
    check_levels(tree, &[h])?;
    if n > h.level {
        return Err(Error::LevelOutOfRange { level: n, limit: h.level });
    }
    let mut arena = StepArena::new();
    let mut avg_memo = HashMap::new();
    let mut memo = HashMap::new();
    let root = cond_rec(tree, h, tree.root_shape(), h.root, n, &mut arena, &mut avg_memo, &mut memo);
    Ok(arena.finish(h.space, n, root))
}

#[allow(clippy::too_many_arguments)]
fn cond_rec(
    tree: &Tree,
    h: &StepFunction,
    shape: ShapeId,
    id: NodeId,
    remaining: usize,
    arena: &mut StepArena,
    avg_memo: &mut HashMap<(ShapeId, NodeId), Value>,
    memo: &mut HashMap<(ShapeId, NodeId, usize), NodeId>,
) -> NodeId {
    if let Some(&r) = memo.get(&(shape, id, remaining)) {
        return r;
    }
    let r = match h.node(id) {
        StepNode::Const(v) => arena.constant(v.clone()),
        StepNode::Split(_) if remaining == 0 => {
            let v = average(tree, h, shape, id, avg_memo);
            arena.constant(v)
        }
        StepNode::Split(kids) => {
            let s = tree.shape(shape);
            let kids = kids
                .iter()
                .zip(&s.children)
                .map(|(&k, &cs)| cond_rec(tree, h, cs, k, remaining - 1, arena, avg_memo, memo))
                .collect();
            arena.split(kids)
        }
    };
    memo.insert((shape, id, remaining), r);
    r
}

/// Open ball `B(center, radius)` in `L^0` for the metric `ρ̃`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ball {
    pub center: StepFunction,
    pub radius: Q,
}

impl Ball {
    pub fn new(center: StepFunction, radius: Q) -> Result<Self> {
        if radius <= Q::zero() {
            return Err(Error::Radius);
        }
        Ok(Ball { center, radius })
    }

    pub fn contains(&self, tree: &Tree, h: &StepFunction) -> Result<bool> {
        Ok(l0_distance(tree, h, &self.center)? < self.radius)
    }

    pub fn translate(&self, by: &StepFunction) -> Result<Ball> {
        Ok(Ball { center: self.center.add(by)?, radius: self.radius.clone() })
    }
}

/// Sum of `p(B_x) * t/(1+t)` over sectors where `t` is computed per sector by
/// brute force; reference for tests.
#[cfg(test)]
pub(crate) fn l0_distance_by_sectors(tree: &Tree, h1: &StepFunction, h2: &StepFunction) -> Q {
    let level = h1.level.max(h2.level);
    let part = crate::measure::level_partition(tree, level).unwrap();
    part.sectors
        .iter()
        .map(|(x, p)| {
            let t = h1.space.dist_unchecked(h1.value_on(tree, *x).unwrap(), h2.value_on(tree, *x).unwrap());
            p * rational::bounded(&t)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, q};
    use crate::tree::Weights;
    use proptest::prelude::*;

    fn t2(d: usize) -> Tree {
        Tree::homogeneous(2, d, Weights::Uniform).unwrap()
    }

    fn s(x: Q) -> Value {
        Value::scalar(x)
    }

    fn level1(tree: &Tree, a: Q, b: Q) -> StepFunction {
        StepFunction::from_sector_values(tree, ValueSpace::Scalar, 1, vec![s(a), s(b)]).unwrap()
    }

    #[test]
    fn distance_examples() {
        let t = t2(3);
        let zero = StepFunction::zero(ValueSpace::Scalar);
        let one = StepFunction::constant(ValueSpace::Scalar, s(int(1))).unwrap();
        assert_eq!(l0_distance(&t, &zero, &one).unwrap(), q(1, 2));
        assert_eq!(l0_distance(&t, &one, &one).unwrap(), int(0));
        let ones = level1(&t, int(1), int(1));
        let mixed = level1(&t, int(1), int(-1));
        assert_eq!(l0_distance(&t, &ones, &mixed).unwrap(), q(1, 3));
        assert_eq!(l0_distance_by_sectors(&t, &ones, &mixed), q(1, 3));
        let p2 = StepFunction::zero(ValueSpace::product(2).unwrap());
        assert!(matches!(l0_distance(&t, &zero, &p2), Err(Error::SpaceMismatch(..))));
    }

    #[test]
    fn canonical_constants_collapse() {
        let t = t2(3);
        let c = StepFunction::from_fn(&t, ValueSpace::Scalar, 3, |_| s(q(2, 3))).unwrap();
        assert!(c.is_constant());
        assert_eq!(c.level(), 3);
        assert_eq!(c, StepFunction::constant(ValueSpace::Scalar, s(q(2, 3))).unwrap());
        assert_eq!(c.effective_level(), 0);
    }

    #[test]
    fn conditional_expectation_examples() {
        let t = t2(3);
        let h = level1(&t, int(0), int(1));
        let e = conditional_expectation(&t, &h, 0).unwrap();
        assert_eq!(e, StepFunction::constant(ValueSpace::Scalar, s(q(1, 2))).unwrap());
        let c = StepFunction::constant(ValueSpace::Scalar, s(int(5))).unwrap().refine(3).unwrap();
        for n in 0..=3 {
            assert_eq!(conditional_expectation(&t, &c, n).unwrap(), c);
        }
        let skew = Tree::homogeneous(2, 2, Weights::Explicit(vec![q(1, 4), q(3, 4)])).unwrap();
        let h = level1(&skew, int(0), int(1));
        let e = conditional_expectation(&skew, &h, 0).unwrap();
        assert_eq!(e.value_on(&skew, skew.root()).unwrap(), &s(q(3, 4)));
        assert!(conditional_expectation(&t, &h, 2).is_err());
    }

    #[test]
    fn sector_value_round_trip() {
        let t = t2(3);
        let vals: Vec<Value> = (0..8).map(|i| s(q(i, 3))).collect();
        let h = StepFunction::from_sector_values(&t, ValueSpace::Scalar, 3, vals.clone()).unwrap();
        let back: Vec<Value> = h.sector_values(&t).into_iter().map(|(_, v)| v).collect();
        assert_eq!(back, vals);
        let doc = h.to_document(&t);
        let json = serde_json::to_string(&doc).unwrap();
        let doc2: StepFunctionDocument = serde_json::from_str(&json).unwrap();
        assert_eq!(StepFunction::from_document(&t, ValueSpace::Scalar, &doc2).unwrap(), h);
        assert!(json.contains("\"7\":[\"0\"]"), "{json}");
    }

    #[test]
    fn components_and_stack() {
        let t = t2(2);
        let p = ValueSpace::product(2).unwrap();
        let a = level1(&t, int(1), int(2));
        let b = StepFunction::constant(ValueSpace::Scalar, s(int(7))).unwrap();
        let st = StepFunction::stack(p, &[a.clone(), b.clone()]).unwrap();
        assert_eq!(st.component(0).unwrap(), a);
        assert_eq!(st.component(1).unwrap(), b);
        assert!(st.component(2).is_err());
    }

    fn random_step(depth: usize) -> impl Strategy<Value = (usize, Vec<i64>)> {
        (0..=depth).prop_flat_map(|l| (Just(l), proptest::collection::vec(-3i64..4, 1usize << l)))
    }

    fn build(t: &Tree, (l, xs): &(usize, Vec<i64>)) -> StepFunction {
        StepFunction::from_sector_values(t, ValueSpace::Scalar, *l, xs.iter().map(|&x| s(q(x, 2))).collect()).unwrap()
    }

    proptest! {
        #[test]
        fn l0_metric_axioms(a in random_step(3), b in random_step(3), c in random_step(3)) {
            let t = t2(3);
            let (a, b, c) = (build(&t, &a), build(&t, &b), build(&t, &c));
            let dab = l0_distance(&t, &a, &b).unwrap();
            prop_assert_eq!(&dab, &l0_distance(&t, &b, &a).unwrap());
            prop_assert_eq!(dab.is_zero(), a == b);
            prop_assert!(dab <= int(1));
            prop_assert!(dab <= l0_distance(&t, &a, &c).unwrap() + l0_distance(&t, &c, &b).unwrap());
            prop_assert_eq!(dab, l0_distance_by_sectors(&t, &a, &b));
        }

        #[test]
        fn refinement_does_not_change_distance(a in random_step(3), b in random_step(3), extra in 0usize..2) {
            let t = t2(5);
            let (a, b) = (build(&t, &a), build(&t, &b));
            let lvl = a.level().max(b.level()) + extra;
            let d = l0_distance(&t, &a, &b).unwrap();
            prop_assert_eq!(d, l0_distance(&t, &a.refine(lvl).unwrap(), &b.refine(lvl).unwrap()).unwrap());
        }

        #[test]
        fn tower_property(xs in proptest::collection::vec(-5i64..6, 16), p in 0usize..2, dn in 1usize..3) {
            let t = Tree::homogeneous(2, 4, Weights::Explicit(vec![q(1, 3), q(2, 3)])).unwrap();
            let h = StepFunction::from_sector_values(&t, ValueSpace::Scalar, 4, xs.iter().map(|&x| s(int(x))).collect()).unwrap();
            let n = p + dn;
            let inner = conditional_expectation(&t, &h, n).unwrap();
            prop_assert_eq!(conditional_expectation(&t, &inner, p).unwrap(), conditional_expectation(&t, &h, p).unwrap());
            prop_assert_eq!(expectation(&t, &inner).unwrap(), expectation(&t, &h).unwrap());
        }
    }
}
