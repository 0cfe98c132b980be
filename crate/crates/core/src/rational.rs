//! Helpers around [`BigRational`]: parsing, formatting and small constants.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

pub type Q = BigRational;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// `2^-n` exactly.
pub fn pow2_neg(n: u32) -> Q {
    Q::new(BigInt::one(), BigInt::one() << n as usize)
}

/// Parses `"p/q"` or `"p"`; zero denominators are rejected.
pub fn parse(s: &str) -> Result<Q> {
    let s = s.trim();
    let bad = || Error::Fraction(s.to_string());
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n: BigInt = n.parse().map_err(|_| bad())?;
    let d: BigInt = d.parse().map_err(|_| bad())?;
    if d.is_zero() {
        return Err(bad());
    }
    Ok(Q::new(n, d))
}

pub fn format(x: &Q) -> String {
    x.to_string()
}

/// Lossy decimal rendering for human-facing reports.
pub fn approx(x: &Q) -> f64 {
    use num_traits::ToPrimitive;
    x.to_f64().unwrap_or_else(|| {
        // Huge numerators/denominators: scale both down first.
        let bits = x.numer().bits().max(x.denom().bits());
        let shift = bits.saturating_sub(1000) as usize;
        let n = (x.numer() >> shift).to_f64().unwrap_or(f64::NAN);
        let d = (x.denom() >> shift).to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// `t / (1 + t)` for `t >= 0`.
pub fn bounded(t: &Q) -> Q {
    debug_assert!(!t.is_negative());
    t / (Q::one() + t)
}

pub fn min(a: Q, b: Q) -> Q {
    if a <= b {
        a
    } else {
        b
    }
}

pub fn max(a: Q, b: Q) -> Q {
    if a >= b {
        a
    } else {
        b
    }
}

/// Serde adapter writing a fraction as a `"p/q"` string.
pub mod serde_q {
    use super::Q;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Q, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&x.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Q, D::Error> {
        let s = String::deserialize(d)?;
        super::parse(&s).map_err(D::Error::custom)
    }
}

/// Serde adapter for a list of fractions.
pub mod serde_q_vec {
    use super::Q;
    use serde::{de::Error, ser::SerializeSeq, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(xs: &[Q], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(xs.len()))?;
        for x in xs {
            seq.serialize_element(&x.to_string())?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Q>, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        v.iter().map(|s| super::parse(s).map_err(D::Error::custom)).collect()
    }
}
