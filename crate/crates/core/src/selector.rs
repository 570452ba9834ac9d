//! Positive selector processes `sup_{t∈T} Σ t_i δ_i`: exact and Monte Carlo
//! expectations, threshold families and their cover certificates, and exact
//! checks of the lower bounds for families that are not p-small.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;

use crate::error::{Error, Result};
use crate::mc::{self, Estimate};
use crate::rational::{self, Q};
use crate::sets::{self, k_subsets, CoverCertificate, SearchLimits, SetFamily, Subset};
use crate::witness::{Normalization, WeightedFamily};

pub const MAIN1_L: i64 = 221;
pub const MAIN2_BOUND: (i64, i64) = (1, 220);
pub const MASTER_BOUND: (i64, i64) = (1, 10);
pub const EXACT_MAX_N: usize = 20;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SelectorInstance {
    n: usize,
    vectors: Vec<Vec<Q>>,
    p: Q,
}

impl SelectorInstance {
    pub fn new(n: usize, vectors: Vec<Vec<Q>>, p: Q) -> Result<Self> {
        rational::check_probability(&p)?;
        check_vectors(n, &vectors)?;
        Ok(SelectorInstance { n, vectors, p })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn vectors(&self) -> &[Vec<Q>] {
        &self.vectors
    }

    pub fn p(&self) -> &Q {
        &self.p
    }

    pub fn with_p(&self, p: Q) -> Result<Self> {
        Self::new(self.n, self.vectors.clone(), p)
    }

    /// Same index set with every coefficient multiplied by `factor`.
    pub fn scaled(&self, factor: &Q) -> Result<Self> {
        let vectors = self
            .vectors
            .iter()
            .map(|v| v.iter().map(|x| x * factor).collect())
            .collect();
        Self::new(self.n, vectors, self.p.clone())
    }

    /// `sup_{t∈T} Σ_{i∈I} t_i`.
    pub fn sup_on(&self, set: &Subset) -> Q {
        sup_on(&self.vectors, set)
    }
}

fn check_vectors(n: usize, vectors: &[Vec<Q>]) -> Result<()> {
    if n > sets::MAX_GROUND {
        return Err(Error::GroundSetTooLarge { n });
    }
    if vectors.is_empty() {
        return Err(Error::InvalidParameter("index set T is empty".into()));
    }
    for v in vectors {
        if v.len() != n {
            return Err(Error::InvalidParameter(format!(
                "vector of length {} on ground set of size {n}",
                v.len()
            )));
        }
        if v.iter().any(Signed::is_negative) {
            return Err(Error::InvalidParameter("negative coefficient".into()));
        }
    }
    Ok(())
}

pub fn sup_on(vectors: &[Vec<Q>], set: &Subset) -> Q {
    vectors
        .iter()
        .map(|v| set.iter().map(|i| &v[i]).sum::<Q>())
        .max()
        .unwrap_or_else(Q::zero)
}

/// The coefficient vectors over a common denominator, so sums over subsets are
/// integer arithmetic.
struct IntVectors {
    n: usize,
    denom: BigInt,
    rows: Vec<Vec<i128>>,
}

impl IntVectors {
    fn new(n: usize, vectors: &[Vec<Q>]) -> Result<Self> {
        let denom = rational::lcm_of_denominators(vectors.iter().flatten());
        let too_big = || Error::InvalidParameter("coefficients too large for exact mode".into());
        let limit = i128::MAX / 128;
        let rows = vectors
            .iter()
            .map(|v| {
                v.iter()
                    .map(|x| {
                        (x * Q::from_integer(denom.clone()))
                            .to_integer()
                            .to_i128()
                            .filter(|k| *k <= limit)
                            .ok_or_else(too_big)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(IntVectors { n, denom, rows })
    }

    fn sup(&self, mask: u64) -> i128 {
        self.rows
            .iter()
            .map(|r| {
                let mut s = 0i128;
                let mut rest = mask;
                while rest != 0 {
                    s += r[rest.trailing_zeros() as usize];
                    rest &= rest - 1;
                }
                s
            })
            .max()
            .unwrap_or(0)
    }

    /// Smallest integer sum meeting the rational threshold (`None` if no sum can).
    fn ceil_threshold(&self, threshold: &Q) -> Option<i128> {
        let scaled = (threshold * Q::from_integer(self.denom.clone())).ceil().to_integer();
        if scaled <= BigInt::zero() {
            Some(0)
        } else {
            scaled.to_i128()
        }
    }

    fn to_q(&self, sum: BigInt) -> Q {
        Q::new(sum, self.denom.clone())
    }

    /// `Σ_{|I|=k} sup(I)` for every `k`.
    fn sums_by_size(&self) -> Vec<BigInt> {
        let mut acc: Vec<Acc> = (0..=self.n).map(|_| Acc::default()).collect();
        for mask in 0..(1u64 << self.n) {
            acc[mask.count_ones() as usize].add(self.sup(mask));
        }
        acc.into_iter().map(Acc::finish).collect()
    }

    fn sum_over_size(&self, m: usize) -> BigInt {
        let mut acc = Acc::default();
        for mask in k_subsets(self.n, m) {
            acc.add(self.sup(mask));
        }
        acc.finish()
    }
}

#[derive(Default)]
struct Acc {
    small: i128,
    big: BigInt,
}

impl Acc {
    fn add(&mut self, v: i128) {
        match self.small.checked_add(v) {
            Some(s) => self.small = s,
            None => {
                self.big += self.small;
                self.small = v;
            }
        }
    }

    fn finish(self) -> BigInt {
        self.big + self.small
    }
}

fn guard_exact(n: usize) -> Result<()> {
    if n > EXACT_MAX_N {
        return Err(Error::GuardExceeded {
            what: "n",
            actual: n,
            limit: EXACT_MAX_N,
        });
    }
    Ok(())
}

/// `E sup_{t∈T} Σ t_i δ_i` with iid Bernoulli(`p`) selectors, exactly.
pub fn expected_sup_exact(vectors: &[Vec<Q>], p: &Q) -> Result<Q> {
    let n = vectors.first().map_or(0, Vec::len);
    check_vectors(n, vectors)?;
    guard_exact(n)?;
    let iv = IntVectors::new(n, vectors)?;
    let comp = Q::one() - p;
    let total: Q = iv
        .sums_by_size()
        .into_iter()
        .enumerate()
        .filter(|(_, s)| !s.is_zero())
        .map(|(k, s)| rational::pow(p, k) * rational::pow(&comp, n - k) * Q::from_integer(s))
        .sum();
    Ok(total / Q::from_integer(iv.denom))
}

pub fn expected_sup_mc(vectors: &[Vec<Q>], p: &Q, trials: u64, seed: u64, instance: u64) -> Estimate {
    let rows: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| v.iter().map(rational::to_f64).collect())
        .collect();
    let pf = rational::to_f64(p);
    let n = rows.first().map_or(0, Vec::len);
    mc::estimate(seed, instance, trials, |rng| {
        let sel: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < pf).collect();
        rows.iter()
            .map(|r| r.iter().zip(&sel).filter(|(_, &s)| s).map(|(x, _)| x).sum::<f64>())
            .fold(0.0, f64::max)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Exact,
    MonteCarlo { trials: u64, seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expectation {
    Exact(Q),
    Estimated(Estimate),
}

impl Expectation {
    pub fn value(&self) -> f64 {
        match self {
            Expectation::Exact(q) => rational::to_f64(q),
            Expectation::Estimated(e) => e.mean,
        }
    }

    pub fn std_err(&self) -> f64 {
        match self {
            Expectation::Exact(_) => 0.0,
            Expectation::Estimated(e) => e.std_err,
        }
    }

    pub fn exact(&self) -> Option<&Q> {
        match self {
            Expectation::Exact(q) => Some(q),
            Expectation::Estimated(_) => None,
        }
    }
}

/// `δ(T)`.
pub fn expected_sup(inst: &SelectorInstance, mode: Mode) -> Result<Expectation> {
    match mode {
        Mode::Exact => Ok(Expectation::Exact(expected_sup_exact(&inst.vectors, &inst.p)?)),
        Mode::MonteCarlo { trials, seed } => Ok(Expectation::Estimated(expected_sup_mc(
            &inst.vectors,
            &inst.p,
            trials,
            seed,
            0,
        ))),
    }
}

/// `{I ⊆ [n] : sup_t Σ_{i∈I} t_i >= threshold}`. The family is an up-set, so a
/// set whose one-smaller subset already qualifies is admitted without a sum.
pub fn sup_threshold_family(vectors: &[Vec<Q>], threshold: &Q) -> Result<SetFamily> {
    let n = vectors.first().map_or(0, Vec::len);
    check_vectors(n, vectors)?;
    guard_exact(n)?;
    let iv = IntVectors::new(n, vectors)?;
    let mut family = SetFamily::new(n)?;
    let Some(bar) = iv.ceil_threshold(threshold) else {
        return Ok(family);
    };
    let mut inside = vec![false; 1usize << n];
    for mask in 0..(1u64 << n) {
        let mut rest = mask;
        let mut member = false;
        while rest != 0 {
            let low = rest & rest.wrapping_neg();
            if inside[(mask ^ low) as usize] {
                member = true;
                break;
            }
            rest ^= low;
        }
        if member || iv.sup(mask) >= bar {
            inside[mask as usize] = true;
            family.insert(Subset::raw(n, mask))?;
        }
    }
    Ok(family)
}

/// `{I ⊆ [n] : sup_t Σ_{i∈I} t_i >= L δ(T)}` with `δ(T)` exact.
pub fn threshold_family(inst: &SelectorInstance, l: &Q) -> Result<SetFamily> {
    let delta = expected_sup_exact(&inst.vectors, &inst.p)?;
    sup_threshold_family(&inst.vectors, &(l * delta))
}

/// A threshold family together with the minimal cover found for it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThresholdCertificate {
    pub expectation: Q,
    pub threshold: Q,
    pub family: SetFamily,
    pub cover: CoverCertificate,
}

impl ThresholdCertificate {
    pub fn is_small(&self) -> bool {
        self.cover.is_small()
    }

    pub fn recheck(&self) -> Result<bool> {
        self.cover.recheck(&self.family)
    }
}

/// Covers the family of sets reaching `L δ(T)` at probability `p`.
pub fn certify_main1(inst: &SelectorInstance, l: &Q, limits: SearchLimits) -> Result<ThresholdCertificate> {
    let delta = expected_sup_exact(&inst.vectors, &inst.p)?;
    let threshold = l * &delta;
    let family = sup_threshold_family(&inst.vectors, &threshold)?;
    let cover = sets::min_cover_weight_with(&family, &inst.p, limits)?;
    Ok(ThresholdCertificate {
        expectation: delta,
        threshold,
        family,
        cover,
    })
}

/// Splitting constant `C ∈ [9, 11]` with `Cpn` an integer and `Cp <= 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitParams {
    c: Q,
}

impl SplitParams {
    pub fn new(c: Q, p: &Q, n: usize) -> Result<Self> {
        if c < rational::qi(9) || c > rational::qi(11) {
            return Err(Error::InvalidParameter(format!(
                "C = {} outside [9, 11]",
                rational::fmt(&c)
            )));
        }
        if &c * p > Q::one() {
            return Err(Error::InvalidParameter("Cp exceeds 1".into()));
        }
        if !(&c * p * rational::qi(n as i64)).is_integer() {
            return Err(Error::InvalidParameter("Cpn is not an integer".into()));
        }
        Ok(SplitParams { c })
    }

    /// Smallest admissible `C`: the least integer `k >= 9pn` with
    /// `k <= min(11pn, n)`, giving `C = k / pn`.
    pub fn choose(p: &Q, n: usize) -> Result<Self> {
        rational::check_probability(p)?;
        let pn = p * rational::qi(n as i64);
        let k = (rational::qi(9) * &pn).ceil();
        let upper = (rational::qi(11) * &pn).floor().min(rational::qi(n as i64));
        if pn.is_zero() || k > upper {
            return Err(Error::Unsatisfiable(format!(
                "no C in [9,11] with integral Cpn and Cp <= 1 (p = {}, n = {n})",
                rational::fmt(p)
            )));
        }
        Self::new(k / pn, p, n)
    }

    pub fn c(&self) -> &Q {
        &self.c
    }

    /// Success probability of the coarser selectors, `Cp`.
    pub fn coarse_probability(&self, p: &Q) -> Q {
        &self.c * p
    }

    /// Success probability of the thinning selectors, `1/C`.
    pub fn thinning_probability(&self) -> Q {
        Q::one() / &self.c
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitCertificate {
    pub delta: Q,
    /// `E sup` under the coarser selectors with probability `Cp`.
    pub coarse_delta: Q,
    pub c: Q,
    /// Cover of the coarse threshold family at probability `Cp`.
    pub coarse: ThresholdCertificate,
    /// `{I : sup Σ_{i∈I} t_i >= 221 C δ(T)}`, which the coarse cover must cover.
    pub event_family: SetFamily,
}

impl SplitCertificate {
    pub fn is_small(&self) -> bool {
        self.coarse.is_small()
    }

    pub fn recheck(&self) -> Result<bool> {
        Ok(self.coarse.recheck()?
            && sets::upset_cover_check(&self.coarse.cover.generators, &self.event_family)?
            && self.coarse_delta <= &self.c * &self.delta)
    }
}

/// Shows `{sup Σ t_i δ_i >= 221 C δ(T)}` is `Cp`-small through the coarse
/// selectors, checking `δ′(T) <= C δ(T)` on the way.
pub fn split_certify(inst: &SelectorInstance, sp: &SplitParams, limits: SearchLimits) -> Result<SplitCertificate> {
    let cp = sp.coarse_probability(&inst.p);
    if cp >= Q::one() {
        return Err(Error::InvalidParameter("Cp >= 1".into()));
    }
    let coarse_inst = inst.with_p(cp)?;
    let delta = expected_sup_exact(&inst.vectors, &inst.p)?;
    let coarse = certify_main1(&coarse_inst, &rational::qi(MAIN1_L), limits)?;
    if coarse.expectation > &sp.c * &delta {
        return Err(Error::Hypothesis(format!(
            "coarse expectation {} exceeds C·δ(T) = {}",
            rational::fmt(&coarse.expectation),
            rational::fmt(&(&sp.c * &delta))
        )));
    }
    let event_family = sup_threshold_family(&inst.vectors, &(rational::qi(MAIN1_L) * &sp.c * &delta))?;
    if !sets::upset_cover_check(&coarse.cover.generators, &event_family)? {
        return Err(Error::Hypothesis("coarse cover misses the event family".into()));
    }
    Ok(SplitCertificate {
        coarse_delta: coarse.expectation.clone(),
        delta,
        c: sp.c.clone(),
        coarse,
        event_family,
    })
}

fn dense_rows(w: &WeightedFamily) -> Vec<Vec<Q>> {
    w.members().iter().map(|m| m.dense()).collect()
}

fn require_not_small(w: &WeightedFamily, p: &Q, limits: SearchLimits) -> Result<CoverCertificate> {
    let (small, cert) = sets::is_p_small_with(w.base(), p, limits)?;
    if small {
        return Err(Error::Hypothesis(format!(
            "family is {}-small (cover weight {})",
            rational::fmt(p),
            rational::fmt(&cert.weight)
        )));
    }
    Ok(cert)
}

/// `E sup_{I∈F} Σ_{i∈I} μ_I(i) δ_i` and whether it reaches `1/220`, for a
/// family that is not p-small with unit coefficient mass.
pub fn verify_main2(w: &WeightedFamily, p: &Q, limits: SearchLimits) -> Result<(Q, bool)> {
    if w.normalization() != Normalization::Exact {
        return Err(Error::Hypothesis("coefficients must have unit mass".into()));
    }
    if w.members().is_empty() {
        return Err(Error::Hypothesis("empty family is p-small".into()));
    }
    require_not_small(w, p, limits)?;
    let value = expected_sup_exact(&dense_rows(w), p)?;
    let ok = value >= rational::q(MAIN2_BOUND.0, MAIN2_BOUND.1);
    Ok((value, ok))
}

/// `E_Y sup_t Σ_{i∈Y} t_i` for `Y` uniform on the `m`-subsets of `[n]`.
pub fn uniform_subset_expectation_exact(vectors: &[Vec<Q>], m: usize) -> Result<Q> {
    let n = vectors.first().map_or(0, Vec::len);
    check_vectors(n, vectors)?;
    guard_exact(n)?;
    if m > n {
        return Err(Error::InvalidParameter(format!("m = {m} > n = {n}")));
    }
    let iv = IntVectors::new(n, vectors)?;
    let sum = iv.sum_over_size(m);
    Ok(iv.to_q(sum) / rational::from_biguint(&rational::binomial(n as u64, m as u64)))
}

pub fn uniform_subset_expectation_mc(vectors: &[Vec<Q>], m: usize, trials: u64, seed: u64, instance: u64) -> Estimate {
    let rows: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| v.iter().map(rational::to_f64).collect())
        .collect();
    let n = rows.first().map_or(0, Vec::len);
    mc::estimate(seed, instance, trials, |rng| {
        let picked = rand::seq::index::sample(rng, n, m.min(n));
        rows.iter()
            .map(|r| picked.iter().map(|i| r[i]).sum::<f64>())
            .fold(0.0, f64::max)
    })
}

pub fn uniform_subset_expectation(vectors: &[Vec<Q>], m: usize, mode: Mode) -> Result<Expectation> {
    match mode {
        Mode::Exact => Ok(Expectation::Exact(uniform_subset_expectation_exact(vectors, m)?)),
        Mode::MonteCarlo { trials, seed } => {
            let n = vectors.first().map_or(0, Vec::len);
            if m > n {
                return Err(Error::InvalidParameter(format!("m = {m} > n = {n}")));
            }
            Ok(Expectation::Estimated(uniform_subset_expectation_mc(
                vectors, m, trials, seed, 0,
            )))
        }
    }
}

pub fn weighted_uniform_expectation(w: &WeightedFamily, m: usize) -> Result<Q> {
    if w.members().is_empty() {
        return Ok(Q::zero());
    }
    uniform_subset_expectation_exact(&dense_rows(w), m)
}

/// `E_Y sup_{I∈F} Σ_{i∈I∩Y} μ_I(i) >= 1/10` for `Y` uniform on `m`-subsets
/// when `m >= 9pn`, `μ_I(I) >= 1` and the family is not p-small.
pub fn verify_master(w: &WeightedFamily, p: &Q, m: usize, limits: SearchLimits) -> Result<(Q, bool)> {
    let n = w.ground();
    if rational::qi(m as i64) < rational::qi(9 * n as i64) * p {
        return Err(Error::Hypothesis(format!("m = {m} < 9pn")));
    }
    if m > n {
        return Err(Error::InvalidParameter(format!("m = {m} > n = {n}")));
    }
    if w.members().iter().any(|mem| mem.total() < Q::one()) {
        return Err(Error::Hypothesis("some member has coefficient mass below 1".into()));
    }
    if w.members().is_empty() {
        return Err(Error::Hypothesis("empty family is p-small".into()));
    }
    require_not_small(w, p, limits)?;
    let value = weighted_uniform_expectation(w, m)?;
    let ok = value >= rational::q(MASTER_BOUND.0, MASTER_BOUND.1);
    Ok((value, ok))
}

/// `(E over km-subsets, k · E over m-subsets, holds)`.
pub fn verify_porsup(vectors: &[Vec<Q>], m: usize, k: usize, mode: Mode) -> Result<(f64, f64, bool)> {
    let n = vectors.first().map_or(0, Vec::len);
    if k * m > n {
        return Err(Error::InvalidParameter(format!("km = {} > n = {n}", k * m)));
    }
    match mode {
        Mode::Exact => {
            let big = uniform_subset_expectation_exact(vectors, k * m)?;
            let small = uniform_subset_expectation_exact(vectors, m)? * rational::qi(k as i64);
            Ok((rational::to_f64(&big), rational::to_f64(&small), big <= small))
        }
        Mode::MonteCarlo { trials, seed } => {
            let big = uniform_subset_expectation_mc(vectors, k * m, trials, seed, 1);
            let small = uniform_subset_expectation_mc(vectors, m, trials, seed, 2);
            let rhs = k as f64 * small.mean;
            let slack = 4.0 * (big.std_err.powi(2) + (k as f64 * small.std_err).powi(2)).sqrt();
            Ok((big.mean, rhs, big.mean <= rhs + slack))
        }
    }
}

/// `{I ∈ C([n],m) : sup_t Σ_{i∈I} t_i >= threshold}`.
pub fn uniform_threshold_family(vectors: &[Vec<Q>], m: usize, threshold: &Q) -> Result<SetFamily> {
    let n = vectors.first().map_or(0, Vec::len);
    check_vectors(n, vectors)?;
    guard_exact(n)?;
    let iv = IntVectors::new(n, vectors)?;
    let mut family = SetFamily::new(n)?;
    if let Some(bar) = iv.ceil_threshold(threshold) {
        for mask in k_subsets(n, m) {
            if iv.sup(mask) >= bar {
                family.insert(Subset::raw(n, mask))?;
            }
        }
    }
    Ok(family)
}

fn certify_uniform(
    vectors: &[Vec<Q>],
    m: usize,
    factor: &Q,
    p: Q,
    limits: SearchLimits,
) -> Result<ThresholdCertificate> {
    let s = uniform_subset_expectation_exact(vectors, m)?;
    let threshold = factor * &s;
    let family = uniform_threshold_family(vectors, m, &threshold)?;
    let cover = sets::min_cover_weight_with(&family, &p, limits)?;
    Ok(ThresholdCertificate {
        expectation: s,
        threshold,
        family,
        cover,
    })
}

/// Covers `{I ∈ C([n],m) : sup >= L E_Y sup}` at probability `m/(9n)`; the
/// cover is guaranteed small for `L > 10`.
pub fn certify_malarodzina(vectors: &[Vec<Q>], m: usize, l: &Q, limits: SearchLimits) -> Result<ThresholdCertificate> {
    let n = vectors.first().map_or(0, Vec::len);
    if l <= &rational::qi(10) {
        return Err(Error::Hypothesis(format!("L = {} must exceed 10", rational::fmt(l))));
    }
    if m == 0 || m > n {
        return Err(Error::InvalidParameter(format!("need 1 <= m <= n, got {m}")));
    }
    certify_uniform(vectors, m, l, rational::q(m as i64, 9 * n as i64), limits)
}

/// Covers `{I ∈ C([n],m) : sup >= (90C+1) E_Y sup}` at probability `Cm/n`.
pub fn remark1_certificate(vectors: &[Vec<Q>], m: usize, c: &Q, limits: SearchLimits) -> Result<ThresholdCertificate> {
    let n = vectors.first().map_or(0, Vec::len);
    if m == 0 || m > n {
        return Err(Error::InvalidParameter(format!("need 1 <= m <= n, got {m}")));
    }
    if c < &Q::one() {
        return Err(Error::InvalidParameter("C must be at least 1".into()));
    }
    let p = c * rational::q(m as i64, n as i64);
    rational::check_probability(&p)?;
    let factor = rational::qi(90) * c + Q::one();
    certify_uniform(vectors, m, &factor, p, limits)
}

/// Exact `P(Binomial(n, q) >= k)`.
pub fn binomial_tail(n: u64, q: &Q, k: u64) -> Result<Q> {
    if k > n {
        return Err(Error::InvalidParameter(format!("k = {k} > n = {n}")));
    }
    if q.is_negative() || q > &Q::one() {
        return Err(Error::ProbabilityOutOfRange {
            value: rational::fmt(q),
        });
    }
    Ok(rational::binomial_tail(n, q, k))
}

/// The conditional lower bound used for the selector theorem: for a unit-mass
/// family that is not p-small, `E(sup | |X| = m)` against
/// `(1/2)(1 − Σ_{t=1}^n (4np/m)^t)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConditionalCheck {
    pub m: usize,
    pub conditional: Q,
    pub lower_bound: Q,
}

pub fn conditional_chain(w: &WeightedFamily, p: &Q, m: usize) -> Result<ConditionalCheck> {
    let n = w.ground();
    let bound = crate::witness::key_lemma_bound(n, m, p)?;
    let lower_bound = rational::half() * (Q::one() - bound);
    let conditional = weighted_uniform_expectation(w, m)?;
    Ok(ConditionalCheck {
        m,
        conditional,
        lower_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi};
    use crate::witness::WeightedMember;

    fn unit_vectors(n: usize) -> Vec<Vec<Q>> {
        (0..n)
            .map(|i| (0..n).map(|j| if i == j { qi(1) } else { qi(0) }).collect())
            .collect()
    }

    #[test]
    fn expected_sup_examples() {
        let inst = SelectorInstance::new(2, unit_vectors(2), q(1, 2)).unwrap();
        assert_eq!(expected_sup(&inst, Mode::Exact).unwrap(), Expectation::Exact(q(3, 4)));

        let p = q(1, 7);
        let e = expected_sup_exact(&unit_vectors(5), &p).unwrap();
        assert_eq!(e, Q::one() - rational::pow(&(Q::one() - &p), 5));

        let single = vec![vec![q(1, 2), q(3, 2), qi(2)]];
        assert_eq!(expected_sup_exact(&single, &q(1, 3)).unwrap(), qi(4) * q(1, 3));
    }

    #[test]
    fn expected_sup_guard() {
        let v = vec![vec![qi(1); 21]];
        let inst = SelectorInstance::new(21, v, q(1, 2)).unwrap();
        assert!(matches!(
            expected_sup(&inst, Mode::Exact),
            Err(Error::GuardExceeded { .. })
        ));
    }

    #[test]
    fn mc_matches_exact() {
        let inst = SelectorInstance::new(
            4,
            vec![vec![qi(1), q(1, 2), qi(0), qi(2)], vec![qi(0), qi(3), q(1, 3), qi(0)]],
            q(1, 3),
        )
        .unwrap();
        let exact = rational::to_f64(&expected_sup_exact(inst.vectors(), inst.p()).unwrap());
        let est = expected_sup(
            &inst,
            Mode::MonteCarlo {
                trials: 50_000,
                seed: 3,
            },
        )
        .unwrap();
        assert!((est.value() - exact).abs() <= 4.0 * est.std_err(), "{exact} vs {est:?}");
    }

    #[test]
    fn threshold_family_examples() {
        let inst = SelectorInstance::new(1, vec![vec![qi(1), qi(1)][..1].to_vec()], q(1, 2)).unwrap();
        // L > 1/p = 2: empty.
        assert!(threshold_family(&inst, &qi(3)).unwrap().is_empty());
        let inst = SelectorInstance::new(2, vec![vec![qi(1), qi(1)]], q(1, 2)).unwrap();
        assert_eq!(threshold_family(&inst, &qi(0)).unwrap().len(), 4);
        let fam = threshold_family(&inst, &qi(1)).unwrap();
        let expected = SetFamily::from_index_lists(2, &[&[0], &[1], &[0, 1]]).unwrap();
        assert_eq!(fam, expected);
    }

    #[test]
    fn certify_main1_unit_vectors_empty() {
        let inst = SelectorInstance::new(8, unit_vectors(8), q(1, 10)).unwrap();
        let cert = certify_main1(&inst, &qi(221), SearchLimits::default()).unwrap();
        assert!(cert.family.is_empty());
        assert_eq!(cert.cover.weight, qi(0));
        assert!(cert.is_small());
    }

    #[test]
    fn certify_main1_small_l_nonempty() {
        // At L = 1 the family is nonempty; the certificate still rechecks.
        let inst = SelectorInstance::new(3, unit_vectors(3), q(1, 3)).unwrap();
        let cert = certify_main1(&inst, &qi(1), SearchLimits::default()).unwrap();
        assert!(!cert.family.is_empty());
        assert!(cert.recheck().unwrap());
    }

    #[test]
    fn split_params() {
        let sp = SplitParams::choose(&q(1, 100), 10).unwrap();
        assert_eq!(sp.c(), &qi(10));
        assert_eq!(sp.coarse_probability(&q(1, 100)), q(1, 10));
        assert_eq!(sp.thinning_probability(), q(1, 10));
        assert!(SplitParams::choose(&q(1, 100), 3).is_err());
        assert!(SplitParams::new(qi(12), &q(1, 100), 10).is_err());
        assert!(SplitParams::new(qi(9), &q(1, 100), 10).is_err());
    }

    #[test]
    fn split_certify_example() {
        let inst = SelectorInstance::new(
            10,
            vec![
                (0..10).map(|i| q(i as i64 + 1, 10)).collect(),
                (0..10).map(|i| if i % 2 == 0 { qi(1) } else { qi(0) }).collect(),
            ],
            q(1, 100),
        )
        .unwrap();
        let sp = SplitParams::new(qi(10), inst.p(), 10).unwrap();
        let cert = split_certify(&inst, &sp, SearchLimits::default()).unwrap();
        assert_eq!(cert.coarse.cover.p, q(1, 10));
        assert!(cert.is_small());
        assert!(cert.coarse_delta <= qi(10) * &cert.delta);
        assert!(cert.recheck().unwrap());
    }

    #[test]
    fn split_certify_zero_process() {
        let inst = SelectorInstance::new(10, vec![vec![qi(0); 10]], q(1, 100)).unwrap();
        let sp = SplitParams::new(qi(10), inst.p(), 10).unwrap();
        let cert = split_certify(&inst, &sp, SearchLimits::default()).unwrap();
        // δ = 0, every set reaches the zero threshold: covered by ∅ at weight 1.
        assert_eq!(cert.delta, qi(0));
        assert_eq!(cert.coarse.family.len(), 1024);
        assert_eq!(cert.coarse.cover.weight, qi(1));
    }

    #[test]
    fn main2_examples() {
        let w = WeightedFamily::new(
            1,
            vec![WeightedMember::uniform(Subset::full(1).unwrap())],
            Normalization::Exact,
        )
        .unwrap();
        let (v, ok) = verify_main2(&w, &q(3, 5), SearchLimits::default()).unwrap();
        assert_eq!(v, q(3, 5));
        assert!(ok);
        // np < 1/2: always p-small, so the hypothesis fails.
        assert!(matches!(
            verify_main2(&w, &q(1, 3), SearchLimits::default()),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn uniform_expectation_examples() {
        let v = vec![vec![q(1, 2), q(1, 2), qi(0)]];
        assert_eq!(uniform_subset_expectation_exact(&v, 1).unwrap(), q(1, 3));
        assert_eq!(uniform_subset_expectation_exact(&v, 0).unwrap(), qi(0));
        assert_eq!(uniform_subset_expectation_exact(&v, 3).unwrap(), qi(1));
        let est = uniform_subset_expectation(
            &v,
            1,
            Mode::MonteCarlo {
                trials: 20_000,
                seed: 9,
            },
        )
        .unwrap();
        assert!((est.value() - 1.0 / 3.0).abs() <= 4.0 * est.std_err());
    }

    #[test]
    fn master_examples() {
        let w = WeightedFamily::new(
            1,
            vec![WeightedMember::uniform(Subset::full(1).unwrap())],
            Normalization::Exact,
        )
        .unwrap();
        // p = 1/10 with n = 1 is 1/10-small (weight 1/10), so use p = 3/5 ... but
        // then m >= 9pn fails; the hypothesis check comes first.
        assert!(matches!(
            verify_master(&w, &q(1, 10), 0, SearchLimits::default()),
            Err(Error::Hypothesis(_))
        ));
        let singles = WeightedFamily::uniform(
            &SetFamily::from_index_lists(8, &[&[0], &[1], &[2], &[3], &[4], &[5], &[6], &[7]]).unwrap(),
        )
        .unwrap();
        let (v, ok) = verify_master(&singles, &q(1, 9), 8, SearchLimits::default()).unwrap();
        assert_eq!(v, qi(1));
        assert!(ok);
    }

    #[test]
    fn porsup_examples() {
        let v = unit_vectors(4);
        let (big, small, ok) = verify_porsup(&v, 1, 2, Mode::Exact).unwrap();
        assert_eq!((big, small), (1.0, 2.0));
        assert!(ok);
        let (big, small, ok) = verify_porsup(&v, 2, 1, Mode::Exact).unwrap();
        assert_eq!(big, small);
        assert!(ok);
        assert!(verify_porsup(&v, 3, 2, Mode::Exact).is_err());
    }

    #[test]
    fn remark1_unit_vectors_empty() {
        let cert = remark1_certificate(&unit_vectors(9), 1, &qi(1), SearchLimits::default()).unwrap();
        assert_eq!(cert.expectation, qi(1));
        assert_eq!(cert.threshold, qi(91));
        assert!(cert.family.is_empty());
        assert_eq!(cert.cover.weight, qi(0));
    }

    #[test]
    fn binomial_tail_examples() {
        assert!(binomial_tail(10, &q(3, 10), 3).unwrap() >= q(1, 2));
        assert_eq!(binomial_tail(10, &q(3, 10), 0).unwrap(), qi(1));
        assert_eq!(binomial_tail(4, &q(1, 2), 4).unwrap(), q(1, 16));
        assert!(binomial_tail(4, &q(1, 2), 5).is_err());
    }
}
