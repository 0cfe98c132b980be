//! Hit sets `{n <= N : ρ̃(ω_n(f), h) < ε}`, finite-horizon density estimates
//! and the counting audit for disjoint balls.

use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::harmonic::{boundary_trace, HarmonicFunction};
use crate::l0::{l0_distance, Ball, StepFunction};
use crate::rational::{self, serde_q, serde_q_vec, Q};
use crate::tree::Tree;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HitReport {
    pub horizon: u64,
    /// Sorted hit indices.
    pub indices: Vec<u64>,
    /// `ρ̃(ω_n(f), h)` for `n = 0..=horizon`; empty for reports built from a bare set.
    #[serde(with = "serde_q_vec")]
    pub distances: Vec<Q>,
    /// `card(A ∩ [0, n]) / (n + 1)` for `n = 0..=horizon`.
    #[serde(with = "serde_q_vec")]
    pub profile: Vec<Q>,
}

impl HitReport {
    /// Report for an arbitrary set of integers, keeping those `<= horizon`.
    pub fn from_indices(indices: impl IntoIterator<Item = u64>, horizon: u64) -> HitReport {
        let mut indices: Vec<u64> = indices.into_iter().filter(|&n| n <= horizon).collect();
        indices.sort_unstable();
        indices.dedup();
        let profile = density_profile(&indices, horizon);
        HitReport { horizon, indices, distances: vec![], profile }
    }

    pub fn contains(&self, n: u64) -> bool {
        self.indices.binary_search(&n).is_ok()
    }

    /// Hits whose index lies in `theta`.
    pub fn restrict(&self, theta: &[u64]) -> Vec<u64> {
        self.indices.iter().copied().filter(|n| theta.contains(n)).collect()
    }

    /// Hits in `lo..=hi`.
    pub fn window(&self, lo: u64, hi: u64) -> Vec<u64> {
        self.indices.iter().copied().filter(|&n| lo <= n && n <= hi).collect()
    }

    pub fn count_to(&self, n: u64) -> u64 {
        self.indices.partition_point(|&a| a <= n) as u64
    }

    pub fn density_at(&self, n: u64) -> Option<&Q> {
        self.profile.get(n as usize)
    }
}

pub fn density_profile(sorted: &[u64], horizon: u64) -> Vec<Q> {
    let mut out = Vec::with_capacity(horizon as usize + 1);
    let mut c = 0usize;
    for n in 0..=horizon {
        while c < sorted.len() && sorted[c] <= n {
            c += 1;
        }
        out.push(Q::new((c as u64).into(), (n + 1).into()));
    }
    out
}

/// Exact hit set of the ball `B(h, ε)` along the traces of `f`.
pub fn hit_set(tree: &Tree, f: &HarmonicFunction, h: &StepFunction, eps: &Q, horizon: u64) -> Result<HitReport> {
    if *eps <= Q::zero() {
        return Err(Error::Radius);
    }
    if horizon as usize > f.depth() {
        return Err(Error::LevelOutOfRange { level: horizon as usize, limit: f.depth() });
    }
    let mut indices = Vec::new();
    let mut distances = Vec::with_capacity(horizon as usize + 1);
    for n in 0..=horizon {
        let d = l0_distance(tree, &boundary_trace(tree, f, n as usize)?, h)?;
        if d < *eps {
            indices.push(n);
        }
        distances.push(d);
    }
    let profile = density_profile(&indices, horizon);
    Ok(HitReport { horizon, indices, distances, profile })
}

pub fn ball_hit_set(tree: &Tree, f: &HarmonicFunction, ball: &Ball, horizon: u64) -> Result<HitReport> {
    hit_set(tree, f, &ball.center, &ball.radius, horizon)
}

/// Min or max of the density profile over a finite checkpoint set: a
/// finite-horizon stand-in for `liminf` / `limsup`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityEstimate {
    #[serde(with = "serde_q")]
    pub value: Q,
    /// Checkpoint at which the extremum is attained (first one on ties).
    pub attained_at: u64,
    pub checkpoints: Vec<u64>,
    pub note: &'static str,
}

const NOTE: &str = "finite-horizon estimate over the listed checkpoints, not a true limit";

/// `⌈N/2⌉..=N`.
pub fn default_checkpoints(horizon: u64) -> Vec<u64> {
    (horizon.div_ceil(2)..=horizon).collect()
}

fn estimate(report: &HitReport, checkpoints: Option<&[u64]>, lower: bool) -> Result<DensityEstimate> {
    if report.profile.is_empty() {
        return Err(Error::Invalid("empty density profile".into()));
    }
    let cps = match checkpoints {
        Some(c) => c.to_vec(),
        None => default_checkpoints(report.horizon),
    };
    if cps.is_empty() {
        return Err(Error::Invalid("no checkpoints".into()));
    }
    let mut best: Option<(u64, &Q)> = None;
    for &c in &cps {
        let d = report
            .density_at(c)
            .ok_or(Error::LevelOutOfRange { level: c as usize, limit: report.horizon as usize })?;
        let better = match best {
            None => true,
            Some((_, b)) => (lower && d < b) || (!lower && d > b),
        };
        if better {
            best = Some((c, d));
        }
    }
    let (at, v) = best.expect("nonempty checkpoints");
    Ok(DensityEstimate { value: v.clone(), attained_at: at, checkpoints: cps, note: NOTE })
}

pub fn lower_density_estimate(report: &HitReport, checkpoints: Option<&[u64]>) -> Result<DensityEstimate> {
    estimate(report, checkpoints, true)
}

pub fn upper_density_estimate(report: &HitReport, checkpoints: Option<&[u64]>) -> Result<DensityEstimate> {
    estimate(report, checkpoints, false)
}

/// Whether `ρ̃(h1, h2) >= ε1 + ε2`, which by the triangle inequality leaves no
/// function within `ε1` of `h1` and `ε2` of `h2`.
pub fn provably_disjoint(tree: &Tree, v1: &Ball, v2: &Ball) -> Result<(bool, Q, Q)> {
    let d = l0_distance(tree, &v1.center, &v2.center)?;
    let radii = &v1.radius + &v2.radius;
    Ok((d >= radii, d, radii))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DisjointnessAudit {
    #[serde(with = "serde_q")]
    pub center_distance: Q,
    #[serde(with = "serde_q")]
    pub radii_sum: Q,
    pub hits1: HitReport,
    pub hits2: HitReport,
    /// Indices hitting both balls; empty whenever the balls are disjoint.
    pub overlap: Vec<u64>,
    /// `n` with `card(hits1 ∩ [0,n]) + card(hits2 ∩ [0,n]) > n + 1`.
    pub violations: Vec<u64>,
    /// `max_n` of the summed running densities.
    #[serde(with = "serde_q")]
    pub max_fraction_sum: Q,
}

impl DisjointnessAudit {
    pub fn passed(&self) -> bool {
        self.overlap.is_empty() && self.violations.is_empty() && self.max_fraction_sum <= Q::one()
    }

    /// At level `n`, a `V2` fraction above `1 - δ` leaves a `V1` fraction below `δ`.
    pub fn complement_bound(&self, n: u64) -> Option<(Q, Q)> {
        Some((self.hits1.density_at(n)?.clone(), Q::one() - self.hits2.density_at(n)?))
    }
}

pub fn disjointness_audit(tree: &Tree, f: &HarmonicFunction, v1: &Ball, v2: &Ball, horizon: u64) -> Result<DisjointnessAudit> {
    let (ok, d, radii) = provably_disjoint(tree, v1, v2)?;
    if !ok {
        return Err(Error::NotDisjoint { distance: rational::format(&d), radii: rational::format(&radii) });
    }
    let hits1 = ball_hit_set(tree, f, v1, horizon)?;
    let hits2 = ball_hit_set(tree, f, v2, horizon)?;
    Ok(audit_counts(d, radii, hits1, hits2))
}

pub(crate) fn audit_counts(center_distance: Q, radii_sum: Q, hits1: HitReport, hits2: HitReport) -> DisjointnessAudit {
    let overlap = hits1.indices.iter().copied().filter(|&n| hits2.contains(n)).collect();
    let mut violations = Vec::new();
    let mut max_fraction_sum = Q::zero();
    for n in 0..=hits1.horizon {
        if hits1.count_to(n) + hits2.count_to(n) > n + 1 {
            violations.push(n);
        }
        let s = &hits1.profile[n as usize] + &hits2.profile[n as usize];
        if s > max_fraction_sum {
            max_fraction_sum = s;
        }
    }
    DisjointnessAudit { center_distance, radii_sum, hits1, hits2, overlap, violations, max_fraction_sum }
}
