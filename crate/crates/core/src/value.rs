//! Target spaces: exact rational vectors with a translation-invariant metric.

use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, Q};

/// The space values live in. Finite-dimensional; coordinates are rationals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValueSpace {
    /// `Q` with `|a - b|`.
    Scalar,
    /// `Q^dim` with `sum_j t_j / (1 + t_j)`, `t_j = |a_j - b_j|`.
    Product { dim: usize },
    /// `Q^dim` with `sum_j 2^-j t_j / (1 + t_j)`, `j` counted from 0.
    WeightedProduct { dim: usize },
}

impl ValueSpace {
    pub fn product(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid("product dimension must be at least 1".into()));
        }
        Ok(ValueSpace::Product { dim })
    }

    pub fn weighted_product(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid("product dimension must be at least 1".into()));
        }
        Ok(ValueSpace::WeightedProduct { dim })
    }

    pub fn dim(&self) -> usize {
        match *self {
            ValueSpace::Scalar => 1,
            ValueSpace::Product { dim } | ValueSpace::WeightedProduct { dim } => dim,
        }
    }

    pub fn zero(&self) -> Value {
        Value(vec![Q::zero(); self.dim()])
    }

    /// The constant vector with every coordinate equal to `x`.
    pub fn splat(&self, x: Q) -> Value {
        Value(vec![x; self.dim()])
    }

    pub fn check(&self, a: &Value) -> Result<()> {
        if a.0.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: a.0.len() });
        }
        Ok(())
    }

    pub fn add(&self, a: &Value, b: &Value) -> Result<Value> {
        self.check(a)?;
        self.check(b)?;
        Ok(a.add(b))
    }

    pub fn sub(&self, a: &Value, b: &Value) -> Result<Value> {
        self.check(a)?;
        self.check(b)?;
        Ok(a.sub(b))
    }

    pub fn scale(&self, lambda: &Q, a: &Value) -> Result<Value> {
        self.check(a)?;
        Ok(a.scale(lambda))
    }

    pub fn dist(&self, a: &Value, b: &Value) -> Result<Q> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.dist_unchecked(a, b))
    }

    pub(crate) fn dist_unchecked(&self, a: &Value, b: &Value) -> Q {
        let diffs = a.0.iter().zip(&b.0).map(|(x, y)| (x - y).abs());
        match self {
            ValueSpace::Scalar => diffs.sum(),
            ValueSpace::Product { .. } => diffs.map(|t| rational::bounded(&t)).sum(),
            ValueSpace::WeightedProduct { .. } => {
                let mut w = Q::one();
                let half = rational::q(1, 2);
                let mut acc = Q::zero();
                for t in diffs {
                    acc += &w * rational::bounded(&t);
                    w *= &half;
                }
                acc
            }
        }
    }

    /// The scalar space each coordinate lives in.
    pub fn component_space(&self) -> ValueSpace {
        ValueSpace::Scalar
    }
}

impl fmt::Display for ValueSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueSpace::Scalar => write!(f, "scalar"),
            ValueSpace::Product { dim } => write!(f, "product({dim})"),
            ValueSpace::WeightedProduct { dim } => write!(f, "weighted_product({dim})"),
        }
    }
}

/// An element of a [`ValueSpace`]: one exact rational per coordinate.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Value(pub Vec<Q>);

impl Value {
    pub fn scalar(x: Q) -> Self {
        Value(vec![x])
    }

    pub fn coords(&self) -> &[Q] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(Zero::is_zero)
    }

    pub fn add(&self, other: &Value) -> Value {
        Value(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Value) -> Value {
        Value(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, lambda: &Q) -> Value {
        Value(self.0.iter().map(|a| a * lambda).collect())
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.0.iter().map(rational::format).collect()
    }

    pub fn from_strings<S: AsRef<str>>(items: &[S]) -> Result<Self> {
        items.iter().map(|s| rational::parse(s.as_ref())).collect::<Result<Vec<_>>>().map(Value)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.len() == 1 {
            return write!(f, "{}", self.0[0]);
        }
        write!(f, "(")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

impl Serialize for Value {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_strings().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let items = Vec::<String>::deserialize(d)?;
        Value::from_strings(&items).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, q};
    use proptest::prelude::*;

    fn v(xs: &[(i64, i64)]) -> Value {
        Value(xs.iter().map(|&(n, d)| q(n, d)).collect())
    }

    #[test]
    fn arithmetic() {
        let s = ValueSpace::Scalar;
        assert_eq!(s.add(&v(&[(1, 2)]), &v(&[(1, 3)])).unwrap(), v(&[(5, 6)]));
        let p = ValueSpace::product(2).unwrap();
        assert_eq!(p.scale(&int(2), &v(&[(1, 1), (-1, 2)])).unwrap(), v(&[(2, 1), (-1, 1)]));
        let a = v(&[(3, 7), (-2, 5)]);
        assert_eq!(p.add(&a, &p.zero()).unwrap(), a);
        assert!(matches!(p.add(&a, &v(&[(1, 1)])), Err(Error::Dimension { .. })));
    }

    #[test]
    fn distances() {
        let s = ValueSpace::Scalar;
        assert_eq!(s.dist(&v(&[(0, 1)]), &v(&[(1, 1)])).unwrap(), int(1));
        let p = ValueSpace::product(2).unwrap();
        assert_eq!(p.dist(&p.zero(), &p.splat(int(1))).unwrap(), int(1));
        let w = ValueSpace::weighted_product(2).unwrap();
        assert_eq!(w.dist(&w.zero(), &w.splat(int(1))).unwrap(), q(3, 4));
        let a = v(&[(5, 3), (1, 9)]);
        assert_eq!(p.dist(&a, &a).unwrap(), int(0));
    }

    fn rat() -> impl Strategy<Value = Q> {
        (-40i64..40, 1i64..12).prop_map(|(n, d)| q(n, d))
    }

    fn space() -> impl Strategy<Value = ValueSpace> {
        prop_oneof![
            Just(ValueSpace::Scalar),
            (1usize..4).prop_map(|dim| ValueSpace::Product { dim }),
            (1usize..4).prop_map(|dim| ValueSpace::WeightedProduct { dim }),
        ]
    }

    fn triple() -> impl Strategy<Value = (ValueSpace, Value, Value, Value)> {
        space().prop_flat_map(|s| {
            let d = s.dim();
            let val = || proptest::collection::vec(rat(), d).prop_map(Value);
            (Just(s), val(), val(), val())
        })
    }

    proptest! {
        #[test]
        fn metric_axioms((s, a, b, c) in triple()) {
            let dab = s.dist(&a, &b).unwrap();
            prop_assert_eq!(&dab, &s.dist(&b, &a).unwrap());
            prop_assert_eq!(s.dist(&a, &a).unwrap(), int(0));
            prop_assert_eq!(dab.is_zero(), a == b);
            prop_assert!(dab <= s.dist(&a, &c).unwrap() + s.dist(&c, &b).unwrap());
        }

        #[test]
        fn translation_invariant((s, a, b, c) in triple()) {
            let lhs = s.dist(&a.add(&c), &b.add(&c)).unwrap();
            prop_assert_eq!(lhs, s.dist(&a, &b).unwrap());
        }

        #[test]
        fn scaling_bound((s, a, b, _c) in triple(), lambda in rat()) {
            let lhs = s.dist(&a.scale(&lambda), &b.scale(&lambda)).unwrap();
            let factor = crate::rational::max(int(1), lambda.abs());
            prop_assert!(lhs <= factor * s.dist(&a, &b).unwrap());
        }
    }
}
