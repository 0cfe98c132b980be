//! Vector-valued frequently universal functions and the two facts behind
//! algebraic genericity: nonzero combinations of the components stay
//! universal, and the components can be moved close to any given functions.

use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::builder::{build_frequently_universal, BuildLog};
use crate::error::{Error, Result};
use crate::harmonic::{boundary_trace, hq_distance, HarmonicFunction};
use crate::l0::{conditional_expectation, l0_distance, Ball, StepFunction, Targets};
use crate::rational::{self, serde_q, serde_q_vec, Q};
use crate::schedule::Schedule;
use crate::tree::{Tree, Vertex, VertexEnumeration};
use crate::value::{Value, ValueSpace};

/// `F = (f_1, ..., f_d)` stored as one function into `product(d)`.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorHarmonic {
    f: HarmonicFunction,
}

impl VectorHarmonic {
    pub fn new(f: HarmonicFunction) -> Result<Self> {
        match f.space() {
            ValueSpace::Product { .. } => Ok(VectorHarmonic { f }),
            other => Err(Error::SpaceMismatch("product(d)".into(), other.to_string())),
        }
    }

    pub fn from_components(parts: &[HarmonicFunction]) -> Result<Self> {
        let space = ValueSpace::product(parts.len())?;
        Self::new(HarmonicFunction::stack(space, parts)?)
    }

    pub fn dim(&self) -> usize {
        self.f.space().dim()
    }

    pub fn depth(&self) -> usize {
        self.f.depth()
    }

    /// `f_{i+1}`.
    pub fn component(&self, i: usize) -> Result<HarmonicFunction> {
        self.f.component(i)
    }

    pub fn components(&self) -> Vec<HarmonicFunction> {
        (0..self.dim()).map(|i| self.f.component(i).expect("index below dim")).collect()
    }

    pub fn as_function(&self) -> &HarmonicFunction {
        &self.f
    }

    pub fn into_function(self) -> HarmonicFunction {
        self.f
    }

    /// `ω_n(F) = (ω_n(f_1), ..., ω_n(f_d))`.
    pub fn trace(&self, tree: &Tree, n: usize) -> Result<StepFunction> {
        boundary_trace(tree, &self.f, n)
    }

    pub fn add(&self, other: &VectorHarmonic) -> Result<VectorHarmonic> {
        Ok(VectorHarmonic { f: self.f.add(&other.f)? })
    }

    /// `Σ a_i f_i` over the first `coefficients.len()` components.
    pub fn combine(&self, coefficients: &[Q]) -> Result<HarmonicFunction> {
        if coefficients.is_empty() || coefficients.len() > self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: coefficients.len() });
        }
        Ok(self.f.map(ValueSpace::Scalar, |v| {
            Value::scalar(coefficients.iter().zip(&v.0).fold(Q::zero(), |acc, (a, x)| acc + a * x))
        }))
    }
}

/// Runs the scheduled construction in `product(d)`.
pub fn build_vector_universal(tree: &Tree, d: usize, targets: &dyn Targets, budget: usize) -> Result<(VectorHarmonic, BuildLog)> {
    let space = ValueSpace::product(d)?;
    if targets.space() != space {
        return Err(Error::SpaceMismatch(space.to_string(), targets.space().to_string()));
    }
    let b = build_frequently_universal(tree, targets, budget)?;
    Ok((VectorHarmonic::new(b.f)?, b.log))
}

/// One constrained factor `B(center, radius)` of `Ṽ`.
#[derive(Clone, Debug, PartialEq)]
pub struct VeeFactor {
    pub center: StepFunction,
    pub radius: Q,
}

/// `B(0, ε min(1/|a_1|, 1)) × ... × B(h/a_s, ε min(1/|a_s|, 1))`, with every
/// factor after `s` unconstrained.
#[derive(Clone, Debug, PartialEq)]
pub struct VeeSet {
    pub epsilon: Q,
    pub factors: Vec<VeeFactor>,
}

impl VeeSet {
    pub fn radii(&self) -> Vec<Q> {
        self.factors.iter().map(|f| f.radius.clone()).collect()
    }

    /// `ρ̃(component_i(trace), center_i)` for each constrained factor.
    pub fn distances(&self, tree: &Tree, trace: &StepFunction) -> Result<Vec<Q>> {
        if trace.space().dim() < self.factors.len() {
            return Err(Error::Dimension { expected: self.factors.len(), got: trace.space().dim() });
        }
        self.factors
            .iter()
            .enumerate()
            .map(|(i, f)| l0_distance(tree, &trace.component(i)?, &f.center))
            .collect()
    }

    pub fn contains(&self, tree: &Tree, trace: &StepFunction) -> Result<bool> {
        Ok(self.distances(tree, trace)?.iter().zip(&self.factors).all(|(d, f)| *d < f.radius))
    }
}

pub fn vee_set(h: &StepFunction, coefficients: &[Q], m: u32) -> Result<VeeSet> {
    if h.space() != ValueSpace::Scalar {
        return Err(Error::SpaceMismatch(ValueSpace::Scalar.to_string(), h.space().to_string()));
    }
    let s = coefficients.len();
    let last = coefficients.last().ok_or(Error::Dimension { expected: 1, got: 0 })?;
    if last.is_zero() {
        return Err(Error::ZeroLeadingCoefficient);
    }
    let epsilon = rational::pow2_neg(m) / Q::from_integer(s.into());
    let factors = coefficients
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let radius = if a.abs() <= Q::from_integer(1.into()) { epsilon.clone() } else { &epsilon / a.abs() };
            let center = if i + 1 == s { h.scale(&(Q::from_integer(1.into()) / a)) } else { StepFunction::zero(ValueSpace::Scalar) };
            VeeFactor { center, radius }
        })
        .collect();
    Ok(VeeSet { epsilon, factors })
}

/// Levels `r_k <= horizon` where the construction alone forces `ω_{r_k}(F) ∈ Ṽ`:
/// the step left `ω_{r_k}(F)` equal to `h_{ℓ(k)}` off a set of mass at most
/// `2^-ℓ(k)`, so each component is within `2^-ℓ(k)` of the target's component.
pub fn schedule_guarantees(tree: &Tree, targets: &dyn Targets, vee: &VeeSet, horizon: u64) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for step in Schedule::within_depth(horizon).steps() {
        let h = targets.target(tree, step.n as u64)?;
        let slack = rational::pow2_neg(step.n);
        let d = vee.distances(tree, &h)?;
        if d.iter().zip(&vee.factors).all(|(d, f)| d + &slack <= f.radius) {
            out.push(step.r);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpanReport {
    #[serde(with = "serde_q_vec")]
    pub coefficients: Vec<Q>,
    pub m: u32,
    pub horizon: u64,
    #[serde(with = "serde_q")]
    pub epsilon: Q,
    #[serde(with = "serde_q_vec")]
    pub radii: Vec<Q>,
    /// `{n : ω_n(F) ∈ Ṽ}`.
    pub vee_hits: Vec<u64>,
    /// `{n : ρ̃(ω_n(g), h) <= 2^-M}`.
    pub combination_hits: Vec<u64>,
    /// `ρ̃(ω_n(g), h)` for `n = 0..=horizon`.
    #[serde(with = "serde_q_vec")]
    pub distances: Vec<Q>,
    /// Indices in the first set but not the second.
    pub exceptions: Vec<u64>,
    /// Levels the construction guarantees to be in `Ṽ`, when targets were supplied.
    pub guaranteed: Vec<u64>,
}

impl SpanReport {
    pub fn inclusion_holds(&self) -> bool {
        self.exceptions.is_empty()
    }

    pub fn guarantees_met(&self) -> bool {
        self.guaranteed.iter().all(|r| self.vee_hits.contains(r))
    }
}

/// `g = Σ a_i f_i` and the exact check of
/// `{n <= N : ω_n(F) ∈ Ṽ} ⊆ {n <= N : ρ̃(ω_n(g), h) <= 2^-M}`.
pub fn combine_and_verify(
    tree: &Tree,
    f: &VectorHarmonic,
    coefficients: &[Q],
    h: &StepFunction,
    m: u32,
    horizon: u64,
    targets: Option<&dyn Targets>,
) -> Result<(HarmonicFunction, SpanReport)> {
    if coefficients.len() > f.dim() {
        return Err(Error::Dimension { expected: f.dim(), got: coefficients.len() });
    }
    if horizon as usize > f.depth() {
        return Err(Error::LevelOutOfRange { level: horizon as usize, limit: f.depth() });
    }
    let vee = vee_set(h, coefficients, m)?;
    let g = f.combine(coefficients)?;
    let bound = rational::pow2_neg(m);
    let (mut vee_hits, mut combination_hits, mut distances, mut exceptions) = (vec![], vec![], vec![], vec![]);
    for n in 0..=horizon {
        let in_vee = vee.contains(tree, &f.trace(tree, n as usize)?)?;
        let d = l0_distance(tree, &boundary_trace(tree, &g, n as usize)?, h)?;
        let hit = d <= bound;
        if in_vee {
            vee_hits.push(n);
            if !hit {
                exceptions.push(n);
            }
        }
        if hit {
            combination_hits.push(n);
        }
        distances.push(d);
    }
    let guaranteed = match targets {
        Some(t) => schedule_guarantees(tree, t, &vee, horizon)?,
        None => vec![],
    };
    let report = SpanReport {
        coefficients: coefficients.to_vec(),
        m,
        horizon,
        radii: vee.radii(),
        epsilon: vee.epsilon,
        vee_hits,
        combination_hits,
        distances,
        exceptions,
        guaranteed,
    };
    Ok((g, report))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComponentDensity {
    /// Component number `n`, from 1.
    pub index: usize,
    /// First enumeration index whose tail `Σ_{j >= j0} 2^-j` is below `1/n`.
    pub j0: u64,
    /// `N(n)`: level of `x_{j0}`.
    pub level: usize,
    #[serde(with = "serde_q")]
    pub sum: Q,
    #[serde(with = "serde_q")]
    pub tail_bound: Q,
    #[serde(with = "serde_q")]
    pub bound: Q,
    pub holds: bool,
}

#[derive(Clone, Debug)]
pub struct Densified {
    /// `F + G`.
    pub sum: VectorHarmonic,
    pub g: VectorHarmonic,
    pub components: Vec<ComponentDensity>,
    /// `L = max N(n)`; `G` has a constant tail from here on.
    pub shift_level: usize,
}

/// `g_n = φ_n - f_n` on levels `<= N(n)`, constant below, so `f_n + g_n`
/// matches `φ_n` on the vertices that carry weight at least `1/n` in the
/// pointwise metric.
pub fn densify(tree: &Tree, f: &VectorHarmonic, phis: &[HarmonicFunction], enumeration: &VertexEnumeration) -> Result<Densified> {
    if phis.len() != f.dim() {
        return Err(Error::Dimension { expected: f.dim(), got: phis.len() });
    }
    let depth = f.depth();
    let mut gs = Vec::with_capacity(phis.len());
    let mut components = Vec::with_capacity(phis.len());
    for (i, phi) in phis.iter().enumerate() {
        if phi.depth() != depth || phi.space() != ValueSpace::Scalar {
            return Err(Error::ShapeMismatch(format!(
                "component {} must be scalar with depth {depth}, got {} with depth {}",
                i + 1,
                phi.space(),
                phi.depth()
            )));
        }
        let n = i as u64 + 1;
        let mut j0 = 0u32;
        while rational::pow2_neg(j0) * Q::from_integer(2.into()) >= Q::new(1.into(), n.into()) {
            j0 += 1;
        }
        let x = enumeration
            .get(j0 as u64)
            .ok_or_else(|| Error::Invalid(format!("enumeration too short for component {n}: need index {j0}")))?;
        let level = tree.level(x);
        if level > depth {
            return Err(Error::LevelOutOfRange { level, limit: depth });
        }
        let fi = f.component(i)?;
        let g = phi.sub(&fi)?.truncate(level)?.constant_tail_extend(tree, depth)?;
        let moved = fi.add(&g)?;
        let dist = hq_distance(tree, &moved, phi, enumeration)?;
        let bound = Q::new(1.into(), n.into());
        components.push(ComponentDensity {
            index: n as usize,
            j0: j0 as u64,
            level,
            holds: dist.upper_bound() < bound,
            sum: dist.sum,
            tail_bound: dist.tail_bound,
            bound,
        });
        gs.push(g);
    }
    let g = VectorHarmonic::from_components(&gs)?;
    let shift_level = components.iter().map(|c| c.level).max().unwrap_or(0);
    Ok(Densified { sum: f.add(&g)?, g, components, shift_level })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShiftCheck {
    pub from: u64,
    pub horizon: u64,
    /// `{n in [L, N] : ω_n(F + G) ∈ V}`.
    pub shifted: Vec<u64>,
    /// `{n in [L, N] : ω_n(F) ∈ V - ω_L(G)}`.
    pub translated: Vec<u64>,
}

impl ShiftCheck {
    pub fn equal(&self) -> bool {
        self.shifted == self.translated
    }
}

pub fn shifted_hit_equality(tree: &Tree, d: &Densified, f: &VectorHarmonic, ball: &Ball, horizon: u64) -> Result<ShiftCheck> {
    let from = d.shift_level as u64;
    if horizon as usize > f.depth() {
        return Err(Error::LevelOutOfRange { level: horizon as usize, limit: f.depth() });
    }
    let shift = d.g.trace(tree, d.shift_level)?;
    let moved = ball.translate(&shift.scale(&Q::from_integer((-1).into())))?;
    let (mut shifted, mut translated) = (vec![], vec![]);
    for n in from..=horizon {
        if ball.contains(tree, &d.sum.trace(tree, n as usize)?)? {
            shifted.push(n);
        }
        if moved.contains(tree, &f.trace(tree, n as usize)?)? {
            translated.push(n);
        }
    }
    Ok(ShiftCheck { from, horizon, shifted, translated })
}

/// The harmonic function with the given values on level `level`, weighted
/// means above and a constant tail below.
pub fn constant_tail_harmonic(tree: &Tree, level: usize, depth: usize, values: impl Fn(Vertex) -> Q) -> Result<HarmonicFunction> {
    let step = StepFunction::from_fn(tree, ValueSpace::Scalar, level, |x| Value::scalar(values(x)))?;
    let mut traces = Vec::with_capacity(level + 1);
    for l in 0..level {
        traces.push(conditional_expectation(tree, &step, l)?);
    }
    traces.push(step);
    let f = HarmonicFunction::from_vertex_values(tree, ValueSpace::Scalar, level, level.checked_sub(1), |x| {
        traces[tree.level(x)].value_on(tree, x).expect("sector value").clone()
    })?;
    f.constant_tail_extend(tree, depth)
}
