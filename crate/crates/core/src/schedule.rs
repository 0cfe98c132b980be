//! The dyadic scheduling sequence: `ℓ(k) = ν₂(k) + 1` and its partial sums
//! `r_k = ℓ(1) + ... + ℓ(k)`, with `r_0 = 0`.

use num_traits::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rational::Q;

pub fn ell(k: u64) -> Result<u32> {
    if k == 0 {
        return Err(Error::ZeroIndex);
    }
    Ok(k.trailing_zeros() + 1)
}

/// `r_k`, using `Σ_{i<=k} ν₂(i) = ν₂(k!) = k - popcount(k)`.
pub fn r(k: u64) -> Result<u64> {
    if k == 0 {
        return Err(Error::ZeroIndex);
    }
    Ok(2 * k - k.count_ones() as u64)
}

/// `card{k <= 2^N : ℓ(k) = m}` by direct enumeration.
pub fn count_ell(n: u32, m: u32) -> Result<u64> {
    if m == 0 || m > n || n > 40 {
        return Err(Error::CountRange { n, m });
    }
    Ok((1..=1u64 << n).filter(|&k| k.trailing_zeros() + 1 == m).count() as u64)
}

/// The first `K` terms of the schedule.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Schedule {
    pub ell: Vec<u32>,
    pub r: Vec<u64>,
}

impl Schedule {
    pub fn new(horizon: u64) -> Schedule {
        let mut ell = Vec::with_capacity(horizon as usize);
        let mut r = Vec::with_capacity(horizon as usize);
        let mut acc = 0u64;
        for k in 1..=horizon {
            let l = k.trailing_zeros() + 1;
            acc += l as u64;
            ell.push(l);
            r.push(acc);
        }
        Schedule { ell, r }
    }

    /// All steps with `r_k <= depth`.
    pub fn within_depth(depth: u64) -> Schedule {
        let mut k = 0;
        while 2 * (k + 1) - (k + 1u64).count_ones() as u64 <= depth {
            k += 1;
        }
        Schedule::new(k)
    }

    pub fn horizon(&self) -> u64 {
        self.ell.len() as u64
    }

    /// `(k, r_{k-1}, ℓ(k), r_k)` for every step.
    pub fn steps(&self) -> impl Iterator<Item = Step> + '_ {
        (0..self.ell.len()).map(|i| Step {
            k: i as u64 + 1,
            s: if i == 0 { 0 } else { self.r[i - 1] },
            n: self.ell[i],
            r: self.r[i],
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Step {
    pub k: u64,
    /// Level the step starts from, `r_{k-1}`.
    pub s: u64,
    /// `ℓ(k)`.
    pub n: u32,
    /// Level the step reaches, `r_k`.
    pub r: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Checkpoint {
    /// Exponent `N` of the checkpoint `r_{2^N}`.
    pub exponent: u32,
    pub horizon: u64,
    pub count: u64,
    #[serde(with = "crate::rational::serde_q")]
    pub density: Q,
}

/// `{r_k : ℓ(k) = m, r_k <= bound}` with densities at the checkpoints
/// `r_{2^N} <= bound`, `N >= m`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HitLevels {
    pub m: u32,
    pub bound: u64,
    pub levels: Vec<u64>,
    pub checkpoints: Vec<Checkpoint>,
}

impl HitLevels {
    pub fn min_checkpoint_density(&self) -> Option<&Q> {
        self.checkpoints.iter().map(|c| &c.density).min()
    }
}

pub fn hit_levels(m: u32, bound: u64) -> Result<HitLevels> {
    if m == 0 {
        return Err(Error::ZeroIndex);
    }
    let mut levels = Vec::new();
    let mut checkpoints = Vec::new();
    let mut acc = 0u64;
    let mut k = 0u64;
    loop {
        k += 1;
        let l = k.trailing_zeros() + 1;
        acc += l as u64;
        if acc > bound {
            break;
        }
        if l == m {
            levels.push(acc);
        }
        if k.is_power_of_two() && k.trailing_zeros() >= m {
            let count = levels.len() as u64;
            checkpoints.push(Checkpoint {
                exponent: k.trailing_zeros(),
                horizon: acc,
                count,
                density: Q::new(count.into(), (acc + 1).into()),
            });
        }
    }
    Ok(HitLevels { m, bound, levels, checkpoints })
}

/// `card(A ∩ [0, n]) / (n + 1)` for a sorted set `A`.
pub fn running_density(sorted: &[u64], n: u64) -> Q {
    let c = sorted.partition_point(|&a| a <= n) as u64;
    if c == 0 {
        return Q::zero();
    }
    Q::new(c.into(), (n + 1).into())
}
