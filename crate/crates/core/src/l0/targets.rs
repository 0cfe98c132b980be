//! A dense sequence `h_1, h_2, ...` of step functions.
//!
//! Patterns are grouped into blocks `c = 0, 1, 2, ...`; block `c` holds every
//! step function of level `min(c, depth)` whose coordinates lie on the dyadic
//! grid `{a / 2^c : |a| <= c * 2^c}`. Concatenating the blocks lists every
//! dyadic step function, so the patterns `P_0, P_1, ...` are dense in `L^0`.
//! Index `k = 2^j * (2i + 1)` carries pattern `P_j`: each pattern recurs with
//! period `2^(j+1)`, and `P_0` is the zero function.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};

use super::StepFunction;
use crate::error::{Error, Result};
use crate::rational::Q;
use crate::tree::Tree;
use crate::value::{Value, ValueSpace};

pub trait Targets {
    fn space(&self) -> ValueSpace;

    /// `h_k`, `k >= 1`, of level at most `k`.
    fn target(&self, tree: &Tree, k: u64) -> Result<StepFunction>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DyadicTargets {
    space: ValueSpace,
    seed: u64,
}

impl DyadicTargets {
    /// `seed` rotates the order of patterns inside each block.
    pub fn new(space: ValueSpace, seed: u64) -> Self {
        DyadicTargets { space, seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The pattern carried by index `k`: the 2-adic valuation of `k`.
    pub fn pattern_index(k: u64) -> Result<u32> {
        if k == 0 {
            return Err(Error::ZeroIndex);
        }
        Ok(k.trailing_zeros())
    }

    /// Consecutive occurrences of pattern `j` are exactly this far apart.
    pub fn recurrence_bound(j: u32) -> u64 {
        1u64 << (j + 1)
    }

    fn block_shape(tree: &Tree, c: usize) -> (usize, u64, u64) {
        let level = c.min(tree.depth());
        let grid = 2 * (c as u64) * (1u64 << c) + 1;
        (level, grid, tree.level_size(level))
    }

    /// Pattern `P_j`.
    pub fn pattern(&self, tree: &Tree, j: u64) -> Result<StepFunction> {
        let dim = self.space.dim() as u64;
        let mut remaining = BigUint::from(j);
        let mut c = 0usize;
        loop {
            let (level, grid, sectors) = Self::block_shape(tree, c);
            let digits = sectors.checked_mul(dim).ok_or_else(|| Error::Invalid("pattern block too large".into()))?;
            let size = BigUint::from(grid).pow(u32::try_from(digits).map_err(|_| Error::Invalid("pattern block too large".into()))?);
            if remaining < size {
                let index = (remaining + BigUint::from(self.seed)) % &size;
                return Ok(self.decode(tree, c, level, grid, digits, index));
            }
            remaining -= size;
            c += 1;
        }
    }

    fn decode(&self, tree: &Tree, c: usize, level: usize, grid: u64, digits: u64, mut index: BigUint) -> StepFunction {
        let denom = Q::from_integer((1i64 << c).into());
        let base = BigUint::from(grid);
        let mut coords = vec![Q::zero(); digits as usize];
        for slot in coords.iter_mut().rev() {
            let (q, r) = index.div_rem(&base);
            index = q;
            let t = r.to_u64().expect("digit below grid size") as i64;
            let a = if t % 2 == 1 { (t + 1) / 2 } else { -t / 2 };
            *slot = Q::from_integer(a.into()) / &denom;
        }
        let dim = self.space.dim();
        let values = coords.chunks(dim).map(|ch| Value(ch.to_vec())).collect();
        StepFunction::from_sector_values(tree, self.space, level, values).expect("pattern matches level size")
    }
}

impl Targets for DyadicTargets {
    fn space(&self) -> ValueSpace {
        self.space
    }

    fn target(&self, tree: &Tree, k: u64) -> Result<StepFunction> {
        let j = Self::pattern_index(k)?;
        self.pattern(tree, j as u64)
    }
}

/// An explicit finite list: `h_k` is entry `k - 1`.
#[derive(Clone, Debug)]
pub struct TargetList {
    space: ValueSpace,
    items: Vec<StepFunction>,
}

impl TargetList {
    pub fn new(space: ValueSpace, items: Vec<StepFunction>) -> Result<Self> {
        for (i, h) in items.iter().enumerate() {
            if h.space() != space {
                return Err(Error::SpaceMismatch(space.to_string(), h.space().to_string()));
            }
            if h.level() > i + 1 {
                return Err(Error::Invalid(format!("target {} has level {} > {}", i + 1, h.level(), i + 1)));
            }
        }
        Ok(TargetList { space, items })
    }

    pub fn items(&self) -> &[StepFunction] {
        &self.items
    }
}

impl Targets for TargetList {
    fn space(&self) -> ValueSpace {
        self.space
    }

    fn target(&self, _tree: &Tree, k: u64) -> Result<StepFunction> {
        if k == 0 {
            return Err(Error::ZeroIndex);
        }
        self.items
            .get(k as usize - 1)
            .cloned()
            .ok_or_else(|| Error::Invalid(format!("target list has no entry {k}")))
    }
}

/// `h_1, ..., h_count` from the canonical (seed 0) enumeration.
pub fn enumerate_targets(space: ValueSpace, tree: &Tree, count: u64) -> Result<Vec<StepFunction>> {
    let targets = DyadicTargets::new(space, 0);
    (1..=count).map(|k| targets.target(tree, k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;
    use crate::tree::Weights;

    fn t2(d: usize) -> Tree {
        Tree::homogeneous(2, d, Weights::Uniform).unwrap()
    }

    #[test]
    fn first_target_is_zero() {
        let t = t2(4);
        let hs = enumerate_targets(ValueSpace::Scalar, &t, 64).unwrap();
        assert!(hs[0].is_constant());
        assert_eq!(hs[0], StepFunction::zero(ValueSpace::Scalar));
        for (i, h) in hs.iter().enumerate() {
            assert!(h.level() <= i + 1);
        }
    }

    #[test]
    fn zero_recurs_with_bound() {
        let t = t2(4);
        let targets = DyadicTargets::new(ValueSpace::Scalar, 0);
        let zero = StepFunction::zero(ValueSpace::Scalar);
        let bound = DyadicTargets::recurrence_bound(0);
        assert_eq!(bound, 2);
        // Scan the implemented enumeration rather than trusting the formula.
        for m in 0..200u64 {
            let hit = (m + 1..=m + bound).any(|k| targets.target(&t, k).unwrap() == zero);
            assert!(hit, "no zero target in ({m}, {}]", m + bound);
        }
    }

    #[test]
    fn every_pattern_recurs() {
        let t = t2(3);
        let targets = DyadicTargets::new(ValueSpace::Scalar, 3);
        for j in 0..6u64 {
            let p = targets.pattern(&t, j).unwrap();
            let ks: Vec<u64> = (1..=512).filter(|&k| targets.target(&t, k).unwrap() == p).collect();
            assert!(ks.len() >= 512 >> (j + 1), "pattern {j} seen {} times", ks.len());
        }
    }

    #[test]
    fn block_one_lists_all_level_one_patterns() {
        let t = t2(3);
        let targets = DyadicTargets::new(ValueSpace::Scalar, 0);
        let grid = [q(0, 1), q(1, 2), q(-1, 2), q(1, 1), q(-1, 1)];
        let mut seen = std::collections::HashSet::new();
        for j in 1..=25u64 {
            let p = targets.pattern(&t, j).unwrap();
            assert!(p.level() == 1);
            let vals: Vec<String> = p.sector_values(&t).iter().map(|(_, v)| v.to_string()).collect();
            for (_, v) in p.sector_values(&t) {
                assert!(grid.contains(&v.0[0]));
            }
            seen.insert(vals);
        }
        assert_eq!(seen.len(), 25);
        assert_eq!(targets.pattern(&t, 26).unwrap().level(), 2);
    }

    #[test]
    fn seed_rotates_within_block() {
        let t = t2(3);
        let a = DyadicTargets::new(ValueSpace::Scalar, 0);
        let b = DyadicTargets::new(ValueSpace::Scalar, 1);
        assert_eq!(a.pattern(&t, 2).unwrap(), b.pattern(&t, 1).unwrap());
        assert_eq!(a.pattern(&t, 0).unwrap(), b.pattern(&t, 0).unwrap());
    }

    #[test]
    fn product_patterns() {
        let t = t2(3);
        let p = ValueSpace::product(3).unwrap();
        let hs = enumerate_targets(p, &t, 16).unwrap();
        assert!(hs.iter().all(|h| h.space() == p));
        assert_eq!(hs[0], StepFunction::zero(p));
    }
}
