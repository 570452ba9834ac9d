//! Exact rational helpers shared by every exact computation in the crate.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Q = BigRational;

pub fn q(num: i64, den: i64) -> Q {
    Q::new(BigInt::from(num), BigInt::from(den))
}

pub fn qi(v: i64) -> Q {
    Q::from_integer(BigInt::from(v))
}

pub fn half() -> Q {
    q(1, 2)
}

/// Rational upper bound on Euler's number used wherever `e` enters a bound.
pub fn e_upper() -> Q {
    q(27183, 10000)
}

pub fn pow(base: &Q, exp: usize) -> Q {
    num_traits::pow::pow(base.clone(), exp)
}

pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

pub fn binomial_u128(n: u64, k: u64) -> u128 {
    binomial(n, k).to_u128().expect("binomial coefficient overflows u128")
}

pub fn from_biguint(v: &BigUint) -> Q {
    Q::from_integer(BigInt::from(v.clone()))
}

pub fn check_probability(p: &Q) -> Result<()> {
    if p.is_positive() && p < &Q::one() {
        Ok(())
    } else {
        Err(Error::ProbabilityOutOfRange { value: fmt(p) })
    }
}

/// Formats as `a/b`, or `a` for integers.
pub fn fmt(v: &Q) -> String {
    if v.denom().is_one() {
        v.numer().to_string()
    } else {
        format!("{}/{}", v.numer(), v.denom())
    }
}

/// Parses `a`, `a/b` or a finite decimal such as `0.125`.
pub fn parse(s: &str) -> Option<Q> {
    let s = s.trim();
    if s.is_empty() || s.len() > 4096 {
        return None;
    }
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Q::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let neg = int.starts_with('-');
        let int_part: BigInt = match int {
            "" | "-" | "+" => BigInt::zero(),
            _ => int.parse().ok()?,
        };
        let frac_part: BigInt = frac.parse().ok()?;
        let scale = num_traits::pow::pow(BigInt::from(10), frac.len());
        let mag = int_part.abs() * &scale + frac_part;
        let v = Q::new(mag, scale);
        return Some(if neg { -v } else { v });
    }
    let n: BigInt = s.parse().ok()?;
    Some(Q::from_integer(n))
}

pub fn to_f64(v: &Q) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// Rational approximation of a finite float on a `1/den` grid, rounded to nearest.
pub fn from_f64_grid(x: f64, den: i64) -> Q {
    let scaled = (x * den as f64).round();
    Q::new(BigInt::from(scaled as i128), BigInt::from(den))
}

pub fn floor_to_u64(v: &Q) -> u64 {
    v.floor().to_integer().to_u64().unwrap_or(u64::MAX)
}

pub fn ceil_to_u64(v: &Q) -> u64 {
    v.ceil().to_integer().to_u64().unwrap_or(u64::MAX)
}

pub fn lcm_of_denominators<'a>(values: impl IntoIterator<Item = &'a Q>) -> BigInt {
    values.into_iter().fold(BigInt::one(), |acc, v| acc.lcm(v.denom()))
}

/// Exact `P(Binomial(n, q) >= k)`.
pub fn binomial_tail(n: u64, prob: &Q, k: u64) -> Q {
    if k == 0 {
        return Q::one();
    }
    if k > n {
        return Q::zero();
    }
    let comp = Q::one() - prob;
    (k..=n)
        .map(|j| from_biguint(&binomial(n, j)) * pow(prob, j as usize) * pow(&comp, (n - j) as usize))
        .sum()
}
