//! The extension step, the scheduled inductive construction of a frequently
//! universal function, translations, and witnesses with upper density 1.

use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Zero};
use serde::Serialize;

use crate::density::{hit_set, HitReport};
use crate::error::{Error, Result};
use crate::harmonic::{boundary_trace, check_harmonic, FnArena, FnNode, HarmonicFunction};
use crate::intern::NodeId;
use crate::l0::{l0_distance, StepFunction, StepNode, Targets};
use crate::measure::shape_classes;
use crate::rational::{self, serde_q, Q};
use crate::schedule::Schedule;
use crate::tree::{ShapeId, Tree, Vertex};
use crate::value::{Value, ValueSpace};

/// Child indices of the greedy minimum-weight descent from a vertex of
/// `shape`, and the product of the weights along it. Ties go to the later
/// child.
pub fn greedy_path(tree: &Tree, shape: ShapeId, n: usize) -> (Vec<usize>, Q) {
    let mut path = Vec::with_capacity(n);
    let mut prob = Q::one();
    let mut cur = shape;
    for _ in 0..n {
        let s = tree.shape(cur);
        let mut best = 0;
        for (i, w) in s.weights.iter().enumerate() {
            if *w <= s.weights[best] {
                best = i;
            }
        }
        prob *= &s.weights[best];
        path.push(best);
        cur = s.children[best];
    }
    (path, prob)
}

#[derive(Clone, Debug)]
pub struct ExtensionReport {
    pub s: usize,
    pub n: usize,
    /// `Σ_{v ∈ T_s} p(B_{w(v)})`.
    pub bad_mass: Q,
    /// Largest conditional probability of reaching `w(v)` from `v`.
    pub max_path_probability: Q,
    /// `ρ̃(ω_{s+n}(Ψ), h)`.
    pub achieved_distance: Q,
    paths: BTreeMap<ShapeId, (Vec<usize>, Q)>,
}

impl ExtensionReport {
    fn check(&self, tree: &Tree, v: Vertex) -> Result<()> {
        tree.check_vertex(v)?;
        if tree.level(v) != self.s {
            return Err(Error::Invalid(format!("vertex {} is not on level {}", tree.label(v), self.s)));
        }
        Ok(())
    }

    /// `w(v)` for a level-`s` vertex `v`.
    pub fn sacrificed(&self, tree: &Tree, v: Vertex) -> Result<Vertex> {
        self.check(tree, v)?;
        let mut w = v;
        for &i in &self.paths[&tree.shape_of(v)].0 {
            w = tree.child(w, i);
        }
        Ok(w)
    }

    /// `P(reach w(v) | at v)`, the product of weights along `[v, w(v)]`.
    pub fn path_probability(&self, tree: &Tree, v: Vertex) -> Result<Q> {
        self.check(tree, v)?;
        Ok(self.paths[&tree.shape_of(v)].1.clone())
    }

    pub fn sacrificed_count(&self, tree: &Tree) -> u64 {
        tree.level_size(self.s)
    }

    /// `(v, w(v))` for the first `limit` vertices of level `s`.
    pub fn sacrificed_pairs(&self, tree: &Tree, limit: u64) -> Vec<(Vertex, Vertex)> {
        let r = tree.level_range(self.s);
        (r.start..r.end.min(r.start + limit))
            .map(|v| (Vertex(v), self.sacrificed(tree, Vertex(v)).expect("level-s vertex")))
            .collect()
    }
}

struct Extender<'a> {
    tree: &'a Tree,
    phi: &'a HarmonicFunction,
    h: &'a StepFunction,
    n: usize,
    arena: FnArena,
    top_memo: HashMap<(ShapeId, NodeId, NodeId), NodeId>,
    solve_memo: HashMap<(ShapeId, NodeId, NodeId), NodeId>,
    avg_memo: HashMap<(ShapeId, NodeId, usize), NodeId>,
    paths: BTreeMap<ShapeId, (Vec<usize>, Q)>,
}

impl Extender<'_> {
    fn h_child(&self, id: NodeId, i: usize) -> NodeId {
        match self.h.node(id) {
            StepNode::Split(k) => k[i],
            StepNode::Const(_) => id,
        }
    }

    fn value(&self, id: NodeId) -> &Value {
        &self.arena.get(id).value
    }

    /// Copies `φ` down to level `s`, solving each level-`s` subtree.
    fn top(&mut self, shape: ShapeId, pn: NodeId, hn: NodeId, remaining: usize) -> NodeId {
        if remaining == 0 {
            return self.solve(shape, pn, hn);
        }
        if let Some(&r) = self.top_memo.get(&(shape, pn, hn)) {
            return r;
        }
        let node = self.phi.node(pn);
        let s = self.tree.shape(shape);
        let children = (0..s.children.len())
            .map(|i| {
                let (cs, cp, ch) = (s.children[i], node.children[i], self.h_child(hn, i));
                self.top(cs, cp, ch, remaining - 1)
            })
            .collect();
        let r = self.arena.intern(FnNode { value: node.value.clone(), children });
        self.top_memo.insert((shape, pn, hn), r);
        r
    }

    /// Subtree of depth `remaining` with leaves from `h` and every interior
    /// vertex the weighted mean of its children.
    fn average(&mut self, shape: ShapeId, hn: NodeId, remaining: usize) -> NodeId {
        if let Some(&r) = self.avg_memo.get(&(shape, hn, remaining)) {
            return r;
        }
        let r = if remaining == 0 {
            let value = match self.h.node(hn) {
                StepNode::Const(v) => v.clone(),
                StepNode::Split(_) => unreachable!("target level checked against s + n"),
            };
            self.arena.intern(FnNode { value, children: vec![] })
        } else {
            let s = self.tree.shape(shape);
            let mut children = Vec::with_capacity(s.children.len());
            let mut value = self.phi.space().zero();
            for (i, (&cs, w)) in s.children.iter().zip(&s.weights).enumerate() {
                let c = self.average(cs, self.h_child(hn, i), remaining - 1);
                value = value.add(&self.value(c).scale(w));
                children.push(c);
            }
            self.arena.intern(FnNode { value, children })
        };
        self.avg_memo.insert((shape, hn, remaining), r);
        r
    }

    /// The subtree below a level-`s` vertex `v`: `h` on the leaves except
    /// `w(v)`, means off the path, and the path values solved top-down.
    fn solve(&mut self, shape: ShapeId, pn: NodeId, hn: NodeId) -> NodeId {
        if let Some(&r) = self.solve_memo.get(&(shape, pn, hn)) {
            return r;
        }
        let n = self.n;
        let path = self.paths.entry(shape).or_insert_with(|| greedy_path(self.tree, shape, n)).0.clone();
        let mut vals = vec![self.phi.node(pn).value.clone()];
        let mut levels: Vec<Vec<NodeId>> = Vec::with_capacity(n);
        let (mut cur_shape, mut cur_h) = (shape, hn);
        for (t, &p) in path.iter().enumerate() {
            let s = self.tree.shape(cur_shape);
            let (children, weights) = (s.children.clone(), s.weights.clone());
            let mut kids = vec![0; children.len()];
            let mut rest = vals[t].clone();
            for i in 0..children.len() {
                if i == p {
                    continue;
                }
                let c = self.average(children[i], self.h_child(cur_h, i), n - t - 1);
                rest = rest.sub(&self.value(c).scale(&weights[i]));
                kids[i] = c;
            }
            vals.push(rest.scale(&(Q::one() / &weights[p])));
            levels.push(kids);
            cur_h = self.h_child(cur_h, p);
            cur_shape = children[p];
        }
        let mut cur = self.arena.intern(FnNode { value: vals[n].clone(), children: vec![] });
        for t in (0..n).rev() {
            let mut kids = std::mem::take(&mut levels[t]);
            kids[path[t]] = cur;
            cur = self.arena.intern(FnNode { value: vals[t].clone(), children: kids });
        }
        self.solve_memo.insert((shape, pn, hn), cur);
        cur
    }
}

/// Extends `φ` (harmonic below its stored depth `s`) to a function `Ψ` on
/// levels `0..=s+n`, harmonic below `s+n`, with `ω_{s+n}(Ψ)` equal to `h`
/// outside one sector `B_{w(v)}` per `v ∈ T_s`.
pub fn extend_step(
    tree: &Tree,
    phi: &HarmonicFunction,
    h: &StepFunction,
    n: usize,
) -> Result<(HarmonicFunction, ExtensionReport)> {
    let s = phi.depth();
    if n == 0 {
        return Err(Error::Invalid("extension length n must be at least 1".into()));
    }
    tree.check_level(s + n)?;
    if h.space() != phi.space() {
        return Err(Error::SpaceMismatch(phi.space().to_string(), h.space().to_string()));
    }
    if h.level() > s + n {
        return Err(Error::LevelOutOfRange { level: h.level(), limit: s + n });
    }
    if phi.interior_depth() != s.checked_sub(1) {
        return Err(Error::NotHarmonic(format!(
            "harmonicity is asserted through level {:?}, extension needs all levels below {s}",
            phi.interior_depth()
        )));
    }
    if let Some(d) = check_harmonic(tree, phi).first() {
        return Err(Error::NotHarmonic(d.to_string()));
    }
    let mut ext = Extender {
        tree,
        phi,
        h,
        n,
        arena: FnArena::new(),
        top_memo: HashMap::new(),
        solve_memo: HashMap::new(),
        avg_memo: HashMap::new(),
        paths: BTreeMap::new(),
    };
    let root = ext.top(tree.root_shape(), phi.root_node(), h.root(), s);
    let paths = std::mem::take(&mut ext.paths);
    let psi = HarmonicFunction::from_arena(phi.space(), s + n, Some(s + n - 1), ext.arena, root);

    let mut bad_mass = Q::zero();
    let mut max_path_probability = Q::zero();
    for class in shape_classes(tree, s)? {
        let p = &paths[&class.shape].1;
        bad_mass += &class.mass * p;
        if *p > max_path_probability {
            max_path_probability = p.clone();
        }
    }
    let achieved_distance = l0_distance(tree, &boundary_trace(tree, &psi, s + n)?, h)?;
    let report = ExtensionReport { s, n, bad_mass, max_path_probability, achieved_distance, paths };
    Ok((psi, report))
}

/// Sacrificed pairs listed per step in a build log.
pub const SACRIFICED_LIMIT: u64 = 64;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepRecord {
    pub k: u64,
    pub s: u64,
    pub n: u32,
    pub r: u64,
    /// Index of the target approximated at this step, `ℓ(k)`.
    pub target: u64,
    #[serde(with = "serde_q")]
    pub achieved_distance: Q,
    pub achieved_distance_approx: f64,
    #[serde(with = "serde_q")]
    pub radius: Q,
    pub member: bool,
    #[serde(with = "serde_q")]
    pub bad_mass: Q,
    #[serde(with = "serde_q")]
    pub max_path_probability: Q,
    pub sacrificed_count: u64,
    /// `[v, w(v)]` labels for the first vertices of level `s`.
    pub sacrificed: Vec<[u64; 2]>,
    pub sacrificed_truncated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BuildLog {
    pub space: ValueSpace,
    pub budget: usize,
    pub depth: usize,
    pub steps: Vec<StepRecord>,
}

impl BuildLog {
    pub fn all_members(&self) -> bool {
        self.steps.iter().all(|s| s.member)
    }

    /// `{r_k : ℓ(k) = m}` over the logged steps.
    pub fn levels_for(&self, m: u32) -> Vec<u64> {
        self.steps.iter().filter(|s| s.n == m).map(|s| s.r).collect()
    }
}

#[derive(Clone, Debug)]
pub struct Build {
    pub f: HarmonicFunction,
    pub log: BuildLog,
}

/// Runs the extension step at `s = r_{k-1}`, `n = ℓ(k)` towards `h_{ℓ(k)}`
/// for every `k` with `r_k <= budget`, starting from `f(x_0) = 0`.
pub fn build_frequently_universal(tree: &Tree, targets: &dyn Targets, budget: usize) -> Result<Build> {
    if budget < 1 {
        return Err(Error::Budget { budget, first: 1 });
    }
    tree.check_level(budget)?;
    let space = targets.space();
    let mut f = HarmonicFunction::root_only(space, space.zero())?;
    let mut steps = Vec::new();
    for step in Schedule::within_depth(budget as u64).steps() {
        let h = targets.target(tree, step.n as u64)?;
        let (psi, rep) = extend_step(tree, &f, &h, step.n as usize)?;
        let radius = rational::pow2_neg(step.n);
        let count = rep.sacrificed_count(tree);
        let sacrificed = rep
            .sacrificed_pairs(tree, SACRIFICED_LIMIT)
            .into_iter()
            .map(|(v, w)| [tree.label(v), tree.label(w)])
            .collect();
        steps.push(StepRecord {
            k: step.k,
            s: step.s,
            n: step.n,
            r: step.r,
            target: step.n as u64,
            achieved_distance_approx: rational::approx(&rep.achieved_distance),
            member: rep.achieved_distance < radius,
            achieved_distance: rep.achieved_distance,
            radius,
            bad_mass: rep.bad_mass,
            max_path_probability: rep.max_path_probability,
            sacrificed_count: count,
            sacrificed,
            sacrificed_truncated: count > SACRIFICED_LIMIT,
        });
        f = psi;
    }
    let depth = f.depth();
    Ok(Build { f, log: BuildLog { space, budget, depth, steps } })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Membership {
    pub k: u64,
    pub r: u64,
    pub target: u64,
    #[serde(with = "serde_q")]
    pub distance: Q,
    #[serde(with = "serde_q")]
    pub radius: Q,
    pub holds: bool,
}

/// Recomputes `ρ̃(ω_{r_k}(f), h_{ℓ(k)}) < 2^{-ℓ(k)}` for every `r_k <= depth(f)`.
pub fn verify_memberships(tree: &Tree, f: &HarmonicFunction, targets: &dyn Targets) -> Result<Vec<Membership>> {
    let mut out = Vec::new();
    for step in Schedule::within_depth(f.depth() as u64).steps() {
        let h = targets.target(tree, step.n as u64)?;
        let distance = l0_distance(tree, &boundary_trace(tree, f, step.r as usize)?, &h)?;
        let radius = rational::pow2_neg(step.n);
        out.push(Membership { k: step.k, r: step.r, target: step.n as u64, holds: distance < radius, distance, radius });
    }
    Ok(out)
}

/// `f0 + φ`, where `φ` has a constant tail (it is extended to the depth of
/// `f0` first). For `n >= n0 = φ.constant_tail_level()`,
/// `ω_n(f0 + φ) = ω_n(f0) + ω_{n0}(φ)`.
pub fn translate(tree: &Tree, f0: &HarmonicFunction, phi: &HarmonicFunction) -> Result<HarmonicFunction> {
    if f0.space() != phi.space() {
        return Err(Error::SpaceMismatch(f0.space().to_string(), phi.space().to_string()));
    }
    if phi.depth() > f0.depth() {
        return Err(Error::ShapeMismatch(format!(
            "translation defined to level {} but the function only to {}",
            phi.depth(),
            f0.depth()
        )));
    }
    let phi = phi.constant_tail_extend(tree, f0.depth())?;
    f0.add(&phi)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct XReport {
    pub m: u32,
    /// Level reached by the single extension step.
    pub n1: usize,
    /// Length of the constant run after `n1`.
    pub sigma: usize,
    /// `N0 = n1 + σ`.
    pub checkpoint: usize,
    #[serde(with = "serde_q")]
    pub radius: Q,
    pub hits: HitReport,
    pub hit_count: u64,
    #[serde(with = "serde_q")]
    pub fraction: Q,
    /// `1 - 1/m`.
    #[serde(with = "serde_q")]
    pub threshold: Q,
    pub holds: bool,
}

#[derive(Clone, Debug)]
pub struct XWitness {
    pub f: HarmonicFunction,
    pub report: XReport,
}

/// One extension step from `f(x_0) = 0` into `B(target, ε)` at level `n1`,
/// then a constant tail of length `σ = (m-1) n1 + 1`, the least `σ` with
/// `σ > (1 - 1/m)(n1 + σ)`. The function is stored to `depth`.
pub fn build_x_class_witness(tree: &Tree, target: &StepFunction, eps: &Q, m: u32, depth: usize) -> Result<XWitness> {
    if *eps <= Q::zero() {
        return Err(Error::Radius);
    }
    if m == 0 {
        return Err(Error::ZeroIndex);
    }
    let mut n1 = 0u32;
    while rational::pow2_neg(n1) > *eps {
        n1 += 1;
    }
    let n1 = (n1 as usize).max(target.level()).max(1);
    let sigma = (m as usize - 1) * n1 + 1;
    let checkpoint = n1 + sigma;
    if depth < checkpoint {
        return Err(Error::Budget { budget: depth, first: checkpoint });
    }
    tree.check_level(depth)?;
    let space = target.space();
    let phi = HarmonicFunction::root_only(space, space.zero())?;
    let (psi, _) = extend_step(tree, &phi, target, n1)?;
    let f = psi.constant_tail_extend(tree, depth)?;
    let hits = hit_set(tree, &f, target, eps, checkpoint as u64)?;
    let hit_count = hits.indices.len() as u64;
    let fraction = Q::new(hit_count.into(), (checkpoint as u64 + 1).into());
    let threshold = Q::one() - Q::new(1.into(), m.into());
    let report = XReport {
        m,
        n1,
        sigma,
        checkpoint,
        radius: eps.clone(),
        hits,
        hit_count,
        holds: fraction > threshold,
        fraction,
        threshold,
    };
    Ok(XWitness { f, report })
}
