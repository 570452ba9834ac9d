//! Bad sets, truncation thresholds, witnesses and the bad-set covers built from
//! them, plus exhaustive checks of the counting lemmas behind the bound on the
//! probability that a uniformly random `m`-set is bad.

use std::collections::{BTreeMap, HashSet};

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::{self, Q};
use crate::sets::{k_subsets, SetFamily, Subset};

/// How the per-member coefficient mass `μ_I(I)` is constrained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalization {
    /// `μ_I(I) = 1` for every member.
    Exact,
    /// `μ_I(I) >= 1` for every member.
    AtLeastOne,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightedMember {
    pub set: Subset,
    /// Coefficients aligned with `set.iter()` (ascending element order).
    pub coeffs: Vec<Q>,
}

impl WeightedMember {
    pub fn new(set: Subset, coeffs: Vec<Q>) -> Result<Self> {
        if coeffs.len() != set.len() {
            return Err(Error::InvalidParameter(format!(
                "member {set} has {} elements but {} coefficients",
                set.len(),
                coeffs.len()
            )));
        }
        if let Some(neg) = coeffs.iter().find(|c| c.is_negative()) {
            return Err(Error::InvalidParameter(format!(
                "negative coefficient {} in member {set}",
                rational::fmt(neg)
            )));
        }
        Ok(WeightedMember { set, coeffs })
    }

    /// Equal coefficients `1/|I|`.
    pub fn uniform(set: Subset) -> Self {
        let k = set.len().max(1) as i64;
        let coeffs = vec![rational::q(1, k); set.len()];
        WeightedMember { set, coeffs }
    }

    pub fn total(&self) -> Q {
        self.coeffs.iter().sum()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, &Q)> + '_ {
        self.set.iter().zip(&self.coeffs)
    }

    /// `μ_I(X ∩ I)`.
    pub fn mass_in(&self, x: &Subset) -> Q {
        self.pairs().filter(|(i, _)| x.contains(*i)).map(|(_, c)| c).sum()
    }

    /// Dense coefficient vector over `[n]`, zero outside the member.
    pub fn dense(&self) -> Vec<Q> {
        let mut v = vec![Q::zero(); self.set.ground()];
        for (i, c) in self.pairs() {
            v[i] = c.clone();
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightedFamily {
    base: SetFamily,
    members: Vec<WeightedMember>,
    normalization: Normalization,
}

impl WeightedFamily {
    pub fn new(n: usize, members: Vec<WeightedMember>, normalization: Normalization) -> Result<Self> {
        let mut base = SetFamily::new(n)?;
        for m in &members {
            if !base.insert(m.set)? {
                return Err(Error::InvalidParameter(format!("member {} listed twice", m.set)));
            }
            let total = m.total();
            let ok = match normalization {
                Normalization::Exact => total.is_one(),
                Normalization::AtLeastOne => total >= Q::one(),
            };
            if !ok {
                return Err(Error::InvalidParameter(format!(
                    "member {} has coefficient mass {} violating {:?} normalization",
                    m.set,
                    rational::fmt(&total),
                    normalization
                )));
            }
        }
        Ok(WeightedFamily {
            base,
            members,
            normalization,
        })
    }

    /// Every member of `family` with equal coefficients (exact normalization).
    /// The empty set cannot carry unit mass and is rejected.
    pub fn uniform(family: &SetFamily) -> Result<Self> {
        let members = family.members().iter().map(|s| WeightedMember::uniform(*s)).collect();
        Self::new(family.ground(), members, Normalization::Exact)
    }

    pub fn ground(&self) -> usize {
        self.base.ground()
    }

    pub fn base(&self) -> &SetFamily {
        &self.base
    }

    pub fn members(&self) -> &[WeightedMember] {
        &self.members
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn index_of(&self, set: &Subset) -> Option<usize> {
        self.members.iter().position(|m| &m.set == set)
    }
}

fn check_c(c: &Q) -> Result<()> {
    if c.is_positive() && c <= &Q::one() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "c = {} must satisfy 0 < c <= 1",
            rational::fmt(c)
        )))
    }
}

fn check_ground(w: &WeightedFamily, x: &Subset) -> Result<()> {
    if x.ground() != w.ground() {
        return Err(Error::GroundSetMismatch {
            left: w.ground(),
            right: x.ground(),
        });
    }
    Ok(())
}

/// `sup_{I∈F} μ_I(X ∩ I) < c`.
pub fn is_c_bad(x: &Subset, w: &WeightedFamily, c: &Q) -> Result<bool> {
    check_c(c)?;
    check_ground(w, x)?;
    Ok(w.members.iter().all(|m| &m.mass_in(x) < c))
}

/// The `j` elements of the member with the largest coefficients, ties broken by
/// ascending index; `j = 0` gives `∅` and `j >= |I|` gives `I`.
pub fn sorted_prefix(member: &WeightedMember, j: usize) -> Subset {
    let mut order: Vec<(usize, &Q)> = member.pairs().collect();
    order.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(&b.0)));
    let bits = order.iter().take(j).fold(0u64, |acc, (i, _)| acc | 1 << i);
    Subset::raw(member.set.ground(), bits)
}

/// The map `ε ↦ Σ_{I∩X} μ∧ε − c Σ_I μ∧ε`.
fn truncated_gap(member: &WeightedMember, x: &Subset, c: &Q, eps: &Q) -> Q {
    let mut inside = Q::zero();
    let mut all = Q::zero();
    for (i, mu) in member.pairs() {
        let v = if mu < eps { mu.clone() } else { eps.clone() };
        if x.contains(i) {
            inside += &v;
        }
        all += v;
    }
    inside - c * all
}

/// Largest `ε ∈ [0,1)` at which `X` still captures a `c`-fraction of the
/// member's mass truncated at `ε`, with the gap strictly negative beyond it.
/// Exact: the gap is linear between consecutive distinct coefficient values.
pub fn threshold_epsilon(member: &WeightedMember, x: &Subset, c: &Q) -> Result<Q> {
    threshold_epsilon_at(member, x, c, 0)
}

fn threshold_epsilon_at(member: &WeightedMember, x: &Subset, c: &Q, idx: usize) -> Result<Q> {
    check_c(c)?;
    let one = Q::one();
    let mut knots: Vec<Q> = vec![Q::zero()];
    knots.extend(member.coeffs.iter().filter(|v| v.is_positive() && *v < &one).cloned());
    knots.push(one);
    knots.sort();
    knots.dedup();

    let values: Vec<Q> = knots.iter().map(|e| truncated_gap(member, x, c, e)).collect();
    if !values.last().expect("knots end at 1").is_negative() {
        return Err(Error::NotBad {
            member: idx,
            c: rational::fmt(c),
        });
    }
    // values[0] = 0, so some knot has a nonnegative gap.
    let k = values
        .iter()
        .rposition(|v| !v.is_negative())
        .expect("gap vanishes at zero");
    let (lo, hi) = (&knots[k], &knots[k + 1]);
    let (f_lo, f_hi) = (&values[k], &values[k + 1]);
    Ok(lo + f_lo * (hi - lo) / (f_lo - f_hi))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelRecord {
    pub epsilon: Q,
    pub j: usize,
    /// `I_j`, which equals the strict exceeders `{i: μ_I(i) > ε}`.
    pub prefix: Subset,
}

pub fn level_j(member: &WeightedMember, x: &Subset, c: &Q) -> Result<LevelRecord> {
    level_j_at(member, x, c, 0)
}

fn level_j_at(member: &WeightedMember, x: &Subset, c: &Q, idx: usize) -> Result<LevelRecord> {
    let epsilon = threshold_epsilon_at(member, x, c, idx)?;
    let exceeders = member
        .pairs()
        .filter(|(_, mu)| *mu > &epsilon)
        .fold(0u64, |acc, (i, _)| acc | 1 << i);
    let j = exceeders.count_ones() as usize;
    let prefix = sorted_prefix(member, j);
    assert_eq!(prefix.bits(), exceeders, "top-j prefix must equal the exceeders");
    let hits = prefix.intersection(x).len();
    assert!(
        Q::from_integer(BigInt::from(hits)) < c * Q::from_integer(BigInt::from(j)),
        "level {j} violates |I_j ∩ X| < c|I_j|"
    );
    Ok(LevelRecord { epsilon, j, prefix })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WitnessRecord {
    /// Index of the member `I′` whose prefix is the witness.
    pub source: usize,
    /// Threshold, level and prefix of `I′` with respect to `X`.
    pub level: LevelRecord,
    /// `W(I,X) \ X`.
    pub fragment: Subset,
}

impl WitnessRecord {
    pub fn witness(&self) -> Subset {
        self.level.prefix
    }

    pub fn epsilon(&self) -> &Q {
        &self.level.epsilon
    }

    pub fn j(&self) -> usize {
        self.level.j
    }

    pub fn t(&self) -> usize {
        self.fragment.len()
    }
}

/// Levels of every member for one fixed bad set; witnesses are selected from it.
pub struct BadSetView<'a> {
    family: &'a WeightedFamily,
    x: Subset,
    c: Q,
    levels: Vec<LevelRecord>,
}

impl<'a> BadSetView<'a> {
    /// Fails unless `x` is `c`-bad for the family.
    pub fn new(family: &'a WeightedFamily, x: Subset, c: &Q) -> Result<Self> {
        if !is_c_bad(&x, family, c)? {
            return Err(Error::Hypothesis(format!("{x} is not {}-bad", rational::fmt(c))));
        }
        let levels = family
            .members
            .iter()
            .enumerate()
            .map(|(k, m)| level_j_at(m, &x, c, k))
            .collect::<Result<Vec<_>>>()?;
        Ok(BadSetView {
            family,
            x,
            c: c.clone(),
            levels,
        })
    }

    pub fn x(&self) -> Subset {
        self.x
    }

    pub fn level(&self, member: usize) -> &LevelRecord {
        &self.levels[member]
    }

    /// Witness for member `member`: among `I′` whose off-`X` prefix sits inside
    /// `I \ X`, minimal level, then minimal off-`X` size, then smallest
    /// fragment bitmask, then smallest prefix bitmask, then smallest index.
    pub fn witness(&self, member: usize) -> WitnessRecord {
        let target = self.family.members[member].set.difference(&self.x);
        let (source, level) = self
            .levels
            .iter()
            .enumerate()
            .filter(|(_, l)| l.prefix.difference(&self.x).is_subset_of(&target))
            .min_by_key(|(k, l)| {
                let frag = l.prefix.difference(&self.x);
                (l.j, frag.len(), frag.bits(), l.prefix.bits(), *k)
            })
            .expect("the member itself satisfies the containment");
        let fragment = level.prefix.difference(&self.x);
        let record = WitnessRecord {
            source,
            level: level.clone(),
            fragment,
        };
        assert!(fragment.is_subset_of(&self.family.members[member].set));
        let (j, t) = (record.j(), record.t());
        assert!(
            j >= t && (Q::one() - &self.c) * Q::from_integer(BigInt::from(j)) <= Q::from_integer(BigInt::from(t)),
            "fragment size {t} outside [(1-c){j}, {j}]"
        );
        record
    }

    pub fn witnesses(&self) -> Vec<WitnessRecord> {
        (0..self.family.members.len()).map(|k| self.witness(k)).collect()
    }

    /// `{W(I,X) \ X : I ∈ F}`.
    pub fn cover(&self) -> SetFamily {
        let mut g = SetFamily::new(self.family.ground()).expect("ground checked");
        for w in self.witnesses() {
            g.insert(w.fragment).expect("same ground");
        }
        g
    }
}

pub fn build_witness(member: &Subset, x: &Subset, c: &Q, family: &WeightedFamily) -> Result<WitnessRecord> {
    let idx = family
        .index_of(member)
        .ok_or_else(|| Error::InvalidParameter(format!("{member} is not a member")))?;
    Ok(BadSetView::new(family, *x, c)?.witness(idx))
}

pub fn build_bad_cover(x: &Subset, family: &WeightedFamily, c: &Q) -> Result<SetFamily> {
    let cover = BadSetView::new(family, *x, c)?.cover();
    assert!(crate::sets::upset_cover_check(&cover, family.base())?);
    Ok(cover)
}

/// `Σ_{t=1}^{n} (4np/m)^t`.
pub fn key_lemma_bound(n: usize, m: usize, p: &Q) -> Result<Q> {
    if m == 0 || m > n {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= m <= n, got m = {m}, n = {n}"
        )));
    }
    let ratio = rational::qi(4 * n as i64) * p / rational::qi(m as i64);
    let mut term = Q::one();
    let mut sum = Q::zero();
    for _ in 0..n {
        term *= &ratio;
        sum += &term;
    }
    Ok(sum)
}

pub const EXACT_ENUMERATION_MAX_N: usize = 20;

/// Exact fraction of `m`-subsets of `[n]` that are `c`-bad.
pub fn bad_probability_exact(family: &WeightedFamily, c: &Q, m: usize) -> Result<Q> {
    check_c(c)?;
    let n = family.ground();
    if n > EXACT_ENUMERATION_MAX_N {
        return Err(Error::GuardExceeded {
            what: "n",
            actual: n,
            limit: EXACT_ENUMERATION_MAX_N,
        });
    }
    if m > n {
        return Err(Error::InvalidParameter(format!("m = {m} > n = {n}")));
    }
    let bad = k_subsets(n, m)
        .filter(|&bits| {
            let x = Subset::raw(n, bits);
            family.members.iter().all(|mem| &mem.mass_in(&x) < c)
        })
        .count();
    Ok(Q::new(
        BigInt::from(bad),
        BigInt::from(rational::binomial(n as u64, m as u64)),
    ))
}

/// Outcome of the exhaustive witness-multiplicity and fragment checks over all
/// bad sets of a family.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CountingReport {
    pub bad_sets: usize,
    pub witness_records: usize,
    /// Distinct `(Z, m, t, j)` buckets with at least one witness.
    pub buckets: usize,
    /// Buckets whose number of distinct `(X, fragment)` pairs exceeds `C(j,t)`.
    pub multiplicity_violations: usize,
    /// Largest observed count divided by its `C(j,t)` bound, as `(count, bound)`.
    pub tightest: (u64, u64),
    /// Assumption-satisfying pairs checked.
    pub pairs: usize,
    /// Pairs with `ε(I′,Y) < ε(I′,X)`.
    pub threshold_violations: usize,
    /// Pairs with `I′_j \ Y != J′_j \ Y`.
    pub fragment_violations: usize,
    /// Records breaking `j >= t >= (1-c)j` or `fragment ⊆ I`.
    pub size_violations: usize,
}

impl CountingReport {
    pub fn is_clean(&self) -> bool {
        self.multiplicity_violations == 0
            && self.threshold_violations == 0
            && self.fragment_violations == 0
            && self.size_violations == 0
    }

    pub fn merge(mut self, other: &CountingReport) -> Self {
        self.bad_sets += other.bad_sets;
        self.witness_records += other.witness_records;
        self.buckets += other.buckets;
        self.multiplicity_violations += other.multiplicity_violations;
        if other.tightest.0 * self.tightest.1.max(1) > self.tightest.0 * other.tightest.1.max(1) {
            self.tightest = other.tightest;
        }
        self.pairs += other.pairs;
        self.threshold_violations += other.threshold_violations;
        self.fragment_violations += other.fragment_violations;
        self.size_violations += other.size_violations;
        self
    }
}

struct BucketEntry {
    x: Subset,
    source: usize,
    epsilon: Q,
    prefix: Subset,
    fragment: Subset,
}

/// Enumerates every `c`-bad `X ⊆ [n]` and every member, groups witness records
/// by `(Z = W ∪ X, |X|, t, j)` and checks within each group: the multiplicity
/// bound `C(j,t)`, the threshold monotonicity `ε(I′,Y) >= ε(I′,X)` and the
/// fragment identity `I′_j \ Y = J′_j \ Y` for every ordered pair.
pub fn check_counting_lemmas(family: &WeightedFamily, c: &Q) -> Result<CountingReport> {
    check_c(c)?;
    let n = family.ground();
    if n > 16 {
        return Err(Error::GuardExceeded {
            what: "n",
            actual: n,
            limit: 16,
        });
    }
    let mut report = CountingReport {
        tightest: (0, 1),
        ..Default::default()
    };
    let mut buckets: BTreeMap<(u64, usize, usize, usize), Vec<BucketEntry>> = BTreeMap::new();
    for bits in 0..(1u64 << n) {
        let x = Subset::raw(n, bits);
        if !is_c_bad(&x, family, c)? {
            continue;
        }
        report.bad_sets += 1;
        let view = BadSetView::new(family, x, c)?;
        for (k, member) in family.members.iter().enumerate() {
            let w = view.witness(k);
            report.witness_records += 1;
            let (j, t) = (w.j(), w.t());
            let lower = (Q::one() - c) * Q::from_integer(BigInt::from(j));
            if t > j || Q::from_integer(BigInt::from(t)) < lower || !w.fragment.is_subset_of(&member.set) {
                report.size_violations += 1;
            }
            let z = w.witness().union(&x);
            buckets.entry((z.bits(), x.len(), t, j)).or_default().push(BucketEntry {
                x,
                source: w.source,
                epsilon: w.level.epsilon.clone(),
                prefix: w.witness(),
                fragment: w.fragment,
            });
        }
    }

    report.buckets = buckets.len();
    for ((_, _, t, j), entries) in &buckets {
        let distinct: HashSet<(u64, u64)> = entries.iter().map(|e| (e.x.bits(), e.fragment.bits())).collect();
        let count = distinct.len() as u64;
        let bound = u64::try_from(rational::binomial(*j as u64, *t as u64)).unwrap_or(u64::MAX);
        if count > bound {
            report.multiplicity_violations += 1;
        }
        if count * report.tightest.1 > report.tightest.0 * bound {
            report.tightest = (count, bound);
        }
        for a in entries {
            for b in entries {
                report.pairs += 1;
                let eps_y = threshold_epsilon(&family.members[a.source], &b.x, c)?;
                if eps_y < a.epsilon {
                    report.threshold_violations += 1;
                }
                if a.prefix.difference(&b.x) != b.prefix.difference(&b.x) {
                    report.fragment_violations += 1;
                }
            }
        }
    }
    Ok(report)
}

/// `(Σ_{j=t}^{2t} C(j,t), C(2t+1,t+1), 4^t)`.
pub fn hockey_stick(t: u64) -> (BigUint, BigUint, BigUint) {
    let lhs = (t..=2 * t).map(|j| rational::binomial(j, t)).sum();
    let closed = rational::binomial(2 * t + 1, t + 1);
    let four = num_traits::pow::pow(BigUint::from(4u32), t as usize);
    (lhs, closed, four)
}

/// `C(n,m+t)/C(n,m) <= (n/m)^t`, checked exactly.
pub fn binomial_ratio_holds(n: u64, m: u64, t: u64) -> bool {
    assert!(m >= 1 && m + t <= n);
    let lhs = Q::new(
        BigInt::from(rational::binomial(n, m + t)),
        BigInt::from(rational::binomial(n, m)),
    );
    lhs <= rational::pow(&rational::q(n as i64, m as i64), t as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi};

    fn member(n: usize, elems: &[usize], coeffs: &[Q]) -> WeightedMember {
        WeightedMember::new(Subset::from_elements(n, elems).unwrap(), coeffs.to_vec()).unwrap()
    }

    fn sub(n: usize, e: &[usize]) -> Subset {
        Subset::from_elements(n, e).unwrap()
    }

    #[test]
    fn bad_set_examples() {
        let w = WeightedFamily::new(2, vec![member(2, &[0, 1], &[q(3, 5), q(2, 5)])], Normalization::Exact).unwrap();
        assert!(is_c_bad(&sub(2, &[1]), &w, &q(1, 2)).unwrap());
        assert!(!is_c_bad(&Subset::full(2).unwrap(), &w, &q(1, 2)).unwrap());
        assert!(is_c_bad(&Subset::empty(2).unwrap(), &w, &q(1, 100)).unwrap());
        assert!(is_c_bad(&Subset::empty(2).unwrap(), &w, &qi(0)).is_err());
    }

    #[test]
    fn prefix_examples() {
        let m = member(3, &[0, 1, 2], &[q(1, 2), q(1, 3), q(1, 6)]);
        assert_eq!(sorted_prefix(&m, 2), sub(3, &[0, 1]));
        assert_eq!(sorted_prefix(&m, 0), Subset::empty(3).unwrap());
        assert_eq!(sorted_prefix(&m, 7), m.set);
        let tied = member(3, &[0, 1, 2], &[q(1, 4), q(1, 2), q(1, 4)]);
        assert_eq!(sorted_prefix(&tied, 2), sub(3, &[0, 1]));
    }

    #[test]
    fn epsilon_examples() {
        let m = member(2, &[0, 1], &[q(3, 5), q(2, 5)]);
        assert_eq!(threshold_epsilon(&m, &sub(2, &[1]), &q(1, 2)).unwrap(), q(2, 5));
        let u = member(3, &[0, 1, 2], &[q(1, 3), q(1, 3), q(1, 3)]);
        assert_eq!(threshold_epsilon(&u, &sub(3, &[0]), &q(1, 2)).unwrap(), qi(0));
        let single = member(1, &[0], &[qi(1)]);
        assert_eq!(
            threshold_epsilon(&single, &Subset::empty(1).unwrap(), &q(1, 2)).unwrap(),
            qi(0)
        );
        // X = I is not bad.
        assert!(matches!(
            threshold_epsilon(&single, &sub(1, &[0]), &q(1, 2)),
            Err(Error::NotBad { .. })
        ));
    }

    #[test]
    fn epsilon_interior_root() {
        // Gap is ε/2 on [0,1/4], then 1/4·... root strictly inside a piece.
        let m = member(3, &[0, 1, 2], &[q(1, 4), q(1, 4), q(1, 2)]);
        let x = sub(3, &[0, 1]);
        // Inside: 2 min(1/4,ε); all: 2 min(1/4,ε) + min(1/2,ε); c = 1/2.
        // On [1/4,1/2]: 1/2 - (1/2)(1/2 + ε) = 1/4 - ε/2, root at ε = 1/2.
        // X captures 1/2 of total mass, not bad at c=1/2; use c = 3/5.
        let c = q(3, 5);
        let eps = threshold_epsilon(&m, &x, &c).unwrap();
        // On [1/4,1/2]: 1/2 - 3/5(1/2 + ε) = 1/5 - 3ε/5 → root 1/3.
        assert_eq!(eps, q(1, 3));
        assert_eq!(truncated_gap(&m, &x, &c, &eps), qi(0));
    }

    #[test]
    fn level_examples() {
        let m = member(2, &[0, 1], &[q(3, 5), q(2, 5)]);
        let l = level_j(&m, &sub(2, &[1]), &q(1, 2)).unwrap();
        assert_eq!((l.j, l.prefix), (1, sub(2, &[0])));
        let u = member(3, &[0, 1, 2], &[q(1, 3), q(1, 3), q(1, 3)]);
        let l = level_j(&u, &sub(3, &[0]), &q(1, 2)).unwrap();
        assert_eq!((l.j, l.prefix), (3, u.set));
    }

    #[test]
    fn zero_mass_member_rejected_by_normalization() {
        let zero = member(2, &[0], &[qi(0)]);
        assert!(WeightedFamily::new(2, vec![zero], Normalization::AtLeastOne).is_err());
    }

    #[test]
    fn singleton_family_witness_is_own_prefix() {
        let m = member(3, &[0, 1, 2], &[q(1, 2), q(1, 3), q(1, 6)]);
        let w = WeightedFamily::new(3, vec![m.clone()], Normalization::Exact).unwrap();
        let x = sub(3, &[2]);
        let rec = build_witness(&m.set, &x, &q(1, 2), &w).unwrap();
        assert_eq!(rec.witness(), level_j(&m, &x, &q(1, 2)).unwrap().prefix);
        let cover = build_bad_cover(&x, &w, &q(1, 2)).unwrap();
        assert_eq!(cover.len(), 1);
    }

    #[test]
    fn witness_is_deterministic() {
        let a = WeightedMember::uniform(sub(3, &[0, 1]));
        let b = WeightedMember::uniform(sub(3, &[0, 1, 2]));
        let w = WeightedFamily::new(3, vec![a, b.clone()], Normalization::Exact).unwrap();
        let x = Subset::empty(3).unwrap();
        let r1 = build_witness(&b.set, &x, &q(1, 2), &w).unwrap();
        let r2 = build_witness(&b.set, &x, &q(1, 2), &w).unwrap();
        assert_eq!(r1, r2);
        // The 2-set has level 2 < 3 and its prefix sits inside {1,2,3}.
        assert_eq!(r1.source, 0);
        assert_eq!(r1.fragment, sub(3, &[0, 1]));
    }

    #[test]
    fn empty_bad_set_gives_positive_support() {
        let m = member(3, &[0, 1, 2], &[q(1, 2), q(1, 2), qi(0)]);
        let w = WeightedFamily::new(3, vec![m], Normalization::Exact).unwrap();
        let cover = build_bad_cover(&Subset::empty(3).unwrap(), &w, &q(1, 2)).unwrap();
        assert_eq!(cover.members(), &[sub(3, &[0, 1])]);
    }

    #[test]
    fn witness_rejects_non_bad() {
        let m = WeightedMember::uniform(sub(2, &[0]));
        let w = WeightedFamily::new(2, vec![m.clone()], Normalization::Exact).unwrap();
        assert!(build_witness(&m.set, &sub(2, &[0]), &q(1, 2), &w).is_err());
    }

    #[test]
    fn key_lemma_bound_examples() {
        assert_eq!(key_lemma_bound(6, 3, &q(1, 24)).unwrap(), q(364, 729));
        assert_eq!(key_lemma_bound(1, 1, &q(1, 7)).unwrap(), q(4, 7));
        assert!(key_lemma_bound(4, 1, &q(1, 2)).unwrap() >= qi(4));
        assert!(key_lemma_bound(4, 0, &q(1, 2)).is_err());
    }

    #[test]
    fn bad_probability_examples() {
        let w = WeightedFamily::new(2, vec![WeightedMember::uniform(sub(2, &[0]))], Normalization::Exact).unwrap();
        assert_eq!(bad_probability_exact(&w, &q(1, 2), 1).unwrap(), q(1, 2));
        assert_eq!(bad_probability_exact(&w, &q(1, 2), 2).unwrap(), qi(0));
        let tiny = Q::new(BigInt::from(1), BigInt::from(1_000_000));
        assert_eq!(bad_probability_exact(&w, &tiny, 2).unwrap(), qi(0));
    }

    #[test]
    fn counting_identities_small() {
        for t in 0..=20 {
            let (lhs, closed, four) = hockey_stick(t);
            assert_eq!(lhs, closed);
            assert!(closed <= four);
        }
        assert!(binomial_ratio_holds(10, 3, 4));
    }
}
