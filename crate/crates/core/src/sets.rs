//! Bitmask subsets of `[n]`, finite set families, up-set covers and the exact
//! minimum-weight cover search that decides p-smallness.

use std::collections::HashSet;
use std::fmt;
use std::ops::Add;

use num_bigint::{BigInt, BigUint};
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::rational::{self, Q};

pub const MAX_GROUND: usize = 64;

/// A subset of the ground set `[n]`, stored as a bitmask. Element `i` (0-based)
/// is bit `i`; the text formats print elements 1-based.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Subset {
    bits: u64,
    n: u8,
}

impl Subset {
    pub fn empty(n: usize) -> Result<Self> {
        Self::from_bits(n, 0)
    }

    pub fn full(n: usize) -> Result<Self> {
        let bits = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        Self::from_bits(n, bits)
    }

    pub fn from_bits(n: usize, bits: u64) -> Result<Self> {
        if n > MAX_GROUND {
            return Err(Error::GroundSetTooLarge { n });
        }
        if n < 64 && bits >> n != 0 {
            return Err(Error::ElementOutOfRange {
                index: 63 - bits.leading_zeros() as usize,
                n,
            });
        }
        Ok(Subset { bits, n: n as u8 })
    }

    pub fn from_elements(n: usize, elements: &[usize]) -> Result<Self> {
        if n > MAX_GROUND {
            return Err(Error::GroundSetTooLarge { n });
        }
        let mut bits = 0u64;
        for &i in elements {
            if i >= n {
                return Err(Error::ElementOutOfRange { index: i, n });
            }
            bits |= 1 << i;
        }
        Ok(Subset { bits, n: n as u8 })
    }

    /// Unchecked constructor for callers that already masked to `n` bits.
    pub(crate) fn raw(n: usize, bits: u64) -> Self {
        debug_assert!(n == 64 || bits >> n == 0);
        Subset { bits, n: n as u8 }
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn ground(&self) -> usize {
        self.n as usize
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    pub fn contains(&self, i: usize) -> bool {
        i < 64 && self.bits >> i & 1 == 1
    }

    pub fn is_subset_of(&self, other: &Subset) -> bool {
        self.bits & !other.bits == 0
    }

    pub fn union(&self, other: &Subset) -> Subset {
        Subset::raw(self.ground(), self.bits | other.bits)
    }

    pub fn intersection(&self, other: &Subset) -> Subset {
        Subset::raw(self.ground(), self.bits & other.bits)
    }

    pub fn difference(&self, other: &Subset) -> Subset {
        Subset::raw(self.ground(), self.bits & !other.bits)
    }

    /// Elements in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        let mut rest = self.bits;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let i = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(i)
            }
        })
    }
}

impl fmt::Debug for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        write!(f, "}}")
    }
}

/// All `m`-element subsets of `[n]`, in increasing bitmask order.
pub fn k_subsets(n: usize, m: usize) -> impl Iterator<Item = u64> {
    let limit: u64 = if n >= 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut next = if m == 0 {
        Some(0u64)
    } else if m > n {
        None
    } else if m == 64 {
        Some(u64::MAX)
    } else {
        Some((1u64 << m) - 1)
    };
    std::iter::from_fn(move || {
        let cur = next?;
        next = if cur == 0 || cur == limit {
            None
        } else {
            // Gosper's hack
            let c = cur & cur.wrapping_neg();
            let r = cur.wrapping_add(c);
            if r == 0 {
                None
            } else {
                let nxt = (((r ^ cur) >> 2) / c) | r;
                (nxt & !limit == 0 && nxt.count_ones() as usize == m).then_some(nxt)
            }
        };
        Some(cur)
    })
}

/// A finite family of subsets of `[n]` with duplicates removed. Insertion order
/// is kept for reproducible output; equality is set-based.
#[derive(Clone, Debug, Eq)]
pub struct SetFamily {
    n: usize,
    members: Vec<Subset>,
}

impl PartialEq for SetFamily {
    fn eq(&self, other: &Self) -> bool {
        if self.n != other.n || self.members.len() != other.members.len() {
            return false;
        }
        let mut a: Vec<u64> = self.members.iter().map(Subset::bits).collect();
        let mut b: Vec<u64> = other.members.iter().map(Subset::bits).collect();
        a.sort_unstable();
        b.sort_unstable();
        a == b
    }
}

impl SetFamily {
    pub fn new(n: usize) -> Result<Self> {
        if n > MAX_GROUND {
            return Err(Error::GroundSetTooLarge { n });
        }
        Ok(SetFamily { n, members: Vec::new() })
    }

    pub fn from_members(n: usize, members: impl IntoIterator<Item = Subset>) -> Result<Self> {
        let mut fam = Self::new(n)?;
        for s in members {
            fam.insert(s)?;
        }
        Ok(fam)
    }

    pub fn from_index_lists(n: usize, lists: &[&[usize]]) -> Result<Self> {
        let mut fam = Self::new(n)?;
        for l in lists {
            fam.insert(Subset::from_elements(n, l)?)?;
        }
        Ok(fam)
    }

    /// Returns `true` when `s` was not already present.
    pub fn insert(&mut self, s: Subset) -> Result<bool> {
        if s.ground() != self.n {
            return Err(Error::GroundSetMismatch {
                left: self.n,
                right: s.ground(),
            });
        }
        if self.members.contains(&s) {
            Ok(false)
        } else {
            self.members.push(s);
            Ok(true)
        }
    }

    pub fn ground(&self) -> usize {
        self.n
    }

    pub fn members(&self) -> &[Subset] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, s: &Subset) -> bool {
        self.members.contains(s)
    }

    pub fn is_subfamily_of(&self, other: &SetFamily) -> bool {
        let theirs: HashSet<u64> = other.members.iter().map(Subset::bits).collect();
        self.n == other.n && self.members.iter().all(|s| theirs.contains(&s.bits()))
    }

    /// Inclusion-minimal members, sorted by cardinality then bitmask.
    pub fn minimal_members(&self) -> Vec<Subset> {
        let mut sorted = self.members.clone();
        sorted.sort_by_key(|s| (s.len(), s.bits()));
        let mut minimal: Vec<Subset> = Vec::new();
        for s in sorted {
            if !minimal.iter().any(|m| m.is_subset_of(&s)) {
                minimal.push(s);
            }
        }
        minimal
    }
}

/// True iff every member of `family` contains some generator, i.e. the family
/// lies inside the up-set generated by `generators`.
pub fn upset_cover_check(generators: &SetFamily, family: &SetFamily) -> Result<bool> {
    if generators.n != family.n {
        return Err(Error::GroundSetMismatch {
            left: generators.n,
            right: family.n,
        });
    }
    Ok(family
        .members
        .iter()
        .all(|i| generators.members.iter().any(|s| s.is_subset_of(i))))
}

/// Exact `Σ_{S∈G} p^{|S|}`.
pub fn cover_weight(generators: &SetFamily, p: &Q) -> Result<Q> {
    rational::check_probability(p)?;
    let mut by_size = vec![0u64; generators.n + 1];
    for s in &generators.members {
        by_size[s.len()] += 1;
    }
    Ok(by_size
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(k, &c)| rational::pow(p, k) * Q::from_integer(BigInt::from(c)))
        .sum())
}

/// Proof object for (non-)p-smallness: a cover and its exact weight.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoverCertificate {
    pub generators: SetFamily,
    pub p: Q,
    pub weight: Q,
}

impl CoverCertificate {
    pub fn new(generators: SetFamily, p: Q) -> Result<Self> {
        let weight = cover_weight(&generators, &p)?;
        Ok(CoverCertificate { generators, p, weight })
    }

    pub fn empty(n: usize, p: Q) -> Result<Self> {
        Self::new(SetFamily::new(n)?, p)
    }

    pub fn is_small(&self) -> bool {
        self.weight <= rational::half()
    }

    /// Re-derives the weight from the generators and checks it covers `family`.
    pub fn recheck(&self, family: &SetFamily) -> Result<bool> {
        Ok(upset_cover_check(&self.generators, family)? && cover_weight(&self.generators, &self.p)? == self.weight)
    }
}

/// Limits for the exact cover search. `max_members` applies to the
/// inclusion-minimal members, which are all a cover has to hit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchLimits {
    pub max_n: usize,
    pub max_members: usize,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits {
            max_n: 20,
            max_members: 64,
        }
    }
}

pub fn min_cover_weight(family: &SetFamily, p: &Q) -> Result<CoverCertificate> {
    min_cover_weight_with(family, p, SearchLimits::default())
}

pub fn min_cover_weight_with(family: &SetFamily, p: &Q, limits: SearchLimits) -> Result<CoverCertificate> {
    rational::check_probability(p)?;
    let n = family.ground();
    if n > limits.max_n {
        return Err(Error::GuardExceeded {
            what: "n",
            actual: n,
            limit: limits.max_n,
        });
    }
    let minimal = family.minimal_members();
    if minimal.len() > limits.max_members.min(64) {
        return Err(Error::GuardExceeded {
            what: "minimal members",
            actual: minimal.len(),
            limit: limits.max_members.min(64),
        });
    }
    if minimal.is_empty() {
        return CoverCertificate::empty(n, p.clone());
    }
    if minimal[0].is_empty() {
        return CoverCertificate::new(SetFamily::from_members(n, [minimal[0]])?, p.clone());
    }

    let problem = CoverProblem::build(&minimal);
    let max_card = minimal.iter().map(Subset::len).max().unwrap_or(0);
    let a = p.numer().to_biguint().expect("positive p");
    let b = p.denom().to_biguint().expect("positive denominator");

    // Weights scaled by b^max_card are integers: a^k b^(max_card-k).
    let scaled_total = num_traits::pow::pow(b.clone(), max_card) * BigUint::from(minimal.len());
    let chosen = if scaled_total.to_u128().is_some() {
        let a = a.to_u128().unwrap();
        let b = b.to_u128().unwrap();
        problem.solve(|k| a.pow(k as u32) * b.pow((max_card - k) as u32))
    } else {
        problem.solve(|k| num_traits::pow::pow(a.clone(), k) * num_traits::pow::pow(b.clone(), max_card - k))
    };

    let generators = SetFamily::from_members(n, chosen.into_iter().map(|s| Subset::raw(n, s)))?;
    let cert = CoverCertificate::new(generators, p.clone())?;
    debug_assert!(upset_cover_check(&cert.generators, family)?);
    Ok(cert)
}

/// Decides p-smallness exactly. The certificate is the minimal cover either way.
pub fn is_p_small(family: &SetFamily, p: &Q) -> Result<(bool, CoverCertificate)> {
    is_p_small_with(family, p, SearchLimits::default())
}

pub fn is_p_small_with(family: &SetFamily, p: &Q, limits: SearchLimits) -> Result<(bool, CoverCertificate)> {
    let cert = min_cover_weight_with(family, p, limits)?;
    Ok((cert.is_small(), cert))
}

trait Weight: Clone + Ord + Zero + Add<Output = Self> {}
impl<T: Clone + Ord + Zero + Add<Output = T>> Weight for T {}

struct Candidate {
    set: u64,
    size: usize,
    covers: u64,
}

/// Branch-and-bound over per-member candidate generators. Every generator of an
/// optimal cover can be replaced by the intersection of all members that
/// contain it, so candidates for member `I` are the intersections of
/// subfamilies containing `I`.
struct CoverProblem {
    members: Vec<u64>,
    candidates: Vec<Vec<Candidate>>,
}

impl CoverProblem {
    fn build(minimal: &[Subset]) -> Self {
        let members: Vec<u64> = minimal.iter().map(Subset::bits).collect();
        let candidates = members
            .iter()
            .map(|&i| {
                let mut closed: Vec<u64> = vec![i];
                let mut seen: HashSet<u64> = HashSet::from([i]);
                for &j in &members {
                    let fresh: Vec<u64> = closed.iter().map(|&s| s & j).filter(|s| seen.insert(*s)).collect();
                    closed.extend(fresh);
                }
                let mut cands: Vec<Candidate> = closed
                    .into_iter()
                    .map(|s| Candidate {
                        set: s,
                        size: s.count_ones() as usize,
                        covers: members
                            .iter()
                            .enumerate()
                            .filter(|(_, &m)| s & !m == 0)
                            .fold(0u64, |acc, (k, _)| acc | 1 << k),
                    })
                    .collect();
                // Larger generators are cheaper; among equals prefer wider coverage.
                cands.sort_by(|x, y| {
                    y.size
                        .cmp(&x.size)
                        .then(y.covers.count_ones().cmp(&x.covers.count_ones()))
                        .then(x.set.cmp(&y.set))
                });
                cands
            })
            .collect();
        CoverProblem { members, candidates }
    }

    fn solve<W: Weight>(&self, weight_of_size: impl Fn(usize) -> W) -> Vec<u64> {
        let max_size = self.members.iter().map(|m| m.count_ones() as usize).max().unwrap_or(0);
        let table: Vec<W> = (0..=max_size).map(&weight_of_size).collect();
        let all = if self.members.len() == 64 {
            u64::MAX
        } else {
            (1u64 << self.members.len()) - 1
        };
        // Incumbent: the family's own minimal members.
        let mut best_cost = self
            .members
            .iter()
            .fold(W::zero(), |acc, m| acc + table[m.count_ones() as usize].clone());
        let mut best = self.members.clone();
        let mut stack = Vec::new();
        self.dfs(0, all, W::zero(), &table, &mut stack, &mut best_cost, &mut best);
        best
    }

    #[allow(clippy::too_many_arguments)]
    fn dfs<W: Weight>(
        &self,
        covered: u64,
        all: u64,
        cost: W,
        table: &[W],
        stack: &mut Vec<u64>,
        best_cost: &mut W,
        best: &mut Vec<u64>,
    ) {
        if covered == all {
            if cost < *best_cost {
                *best_cost = cost;
                *best = stack.clone();
            }
            return;
        }
        let next = (!covered & all).trailing_zeros() as usize;
        for cand in &self.candidates[next] {
            let total = cost.clone() + table[cand.size].clone();
            if total >= *best_cost {
                // Candidates are sorted by decreasing size, so weights only grow.
                break;
            }
            stack.push(cand.set);
            self.dfs(covered | cand.covers, all, total, table, stack, best_cost, best);
            stack.pop();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi};

    fn fam(n: usize, lists: &[&[usize]]) -> SetFamily {
        SetFamily::from_index_lists(n, lists).unwrap()
    }

    #[test]
    fn subset_rejects_high_bits() {
        assert!(Subset::from_bits(3, 0b1000).is_err());
        assert!(Subset::from_elements(3, &[3]).is_err());
        assert!(Subset::from_bits(65, 0).is_err());
        assert_eq!(Subset::full(64).unwrap().len(), 64);
    }

    #[test]
    fn k_subsets_enumerates_binomial_counts() {
        for n in 0..=10 {
            for m in 0..=n + 1 {
                let all: Vec<u64> = k_subsets(n, m).collect();
                assert_eq!(all.len() as u128, rational::binomial_u128(n as u64, m as u64));
                assert!(all.iter().all(|s| s.count_ones() as usize == m && s >> n == 0));
                assert!(all.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }

    #[test]
    fn family_dedups_and_compares_as_sets() {
        let a = fam(3, &[&[0], &[1, 2], &[0]]);
        let b = fam(3, &[&[1, 2], &[0]]);
        assert_eq!(a.len(), 2);
        assert_eq!(a, b);
        let mut c = SetFamily::new(3).unwrap();
        assert!(c.insert(Subset::empty(4).unwrap()).is_err());
    }

    #[test]
    fn upset_cover_examples() {
        // G={{1}}, F={{1},{1,2}}
        assert!(upset_cover_check(&fam(3, &[&[0]]), &fam(3, &[&[0], &[0, 1]])).unwrap());
        // G={{1,2}}, F={{1}}
        assert!(!upset_cover_check(&fam(3, &[&[0, 1]]), &fam(3, &[&[0]])).unwrap());
        // G={∅}
        assert!(upset_cover_check(&fam(3, &[&[]]), &fam(3, &[&[0], &[1, 2], &[]])).unwrap());
        assert!(upset_cover_check(&fam(3, &[&[]]), &fam(4, &[&[0]])).is_err());
    }

    #[test]
    fn cover_weight_examples() {
        assert_eq!(cover_weight(&fam(3, &[&[0], &[1, 2]]), &q(1, 2)).unwrap(), q(3, 4));
        assert_eq!(cover_weight(&fam(3, &[&[]]), &q(2, 7)).unwrap(), qi(1));
        let singles = fam(4, &[&[0], &[1], &[2], &[3]]);
        let p = q(1, 10);
        let w = cover_weight(&singles, &p).unwrap();
        assert_eq!(w, q(4, 10));
        assert!(w < rational::half());
        assert!(cover_weight(&singles, &qi(1)).is_err());
        assert!(cover_weight(&singles, &qi(0)).is_err());
    }

    #[test]
    fn min_cover_examples() {
        let two_subsets = fam(3, &[&[0, 1], &[0, 2], &[1, 2]]);
        let cert = min_cover_weight(&two_subsets, &q(1, 10)).unwrap();
        assert_eq!(cert.weight, q(3, 100));
        assert_eq!(cert.generators, two_subsets);

        let with_empty = fam(3, &[&[0], &[]]);
        let cert = min_cover_weight(&with_empty, &q(1, 3)).unwrap();
        assert_eq!(cert.weight, qi(1));
        assert_eq!(cert.generators, fam(3, &[&[]]));

        let single = fam(1, &[&[0]]);
        let cert = min_cover_weight(&single, &q(3, 5)).unwrap();
        assert_eq!(cert.weight, q(3, 5));
        assert_eq!(cert.generators, single);
    }

    #[test]
    fn is_p_small_examples() {
        let (small, cert) = is_p_small(&fam(2, &[&[0], &[1]]), &q(1, 5)).unwrap();
        assert!(small);
        assert_eq!(cert.weight, q(2, 5));
        let (small, cert) = is_p_small(&fam(1, &[&[0]]), &q(3, 5)).unwrap();
        assert!(!small);
        assert_eq!(cert.weight, q(3, 5));
    }

    #[test]
    fn guards_fail_fast() {
        let big = SetFamily::from_members(21, [Subset::from_elements(21, &[0]).unwrap()]).unwrap();
        assert!(matches!(
            min_cover_weight(&big, &q(1, 2)),
            Err(Error::GuardExceeded { what: "n", .. })
        ));
        let limits = SearchLimits {
            max_n: 20,
            max_members: 2,
        };
        let f = fam(4, &[&[0], &[1], &[2]]);
        assert!(matches!(
            min_cover_weight_with(&f, &q(1, 2), limits),
            Err(Error::GuardExceeded { .. })
        ));
    }

    #[test]
    fn shared_generator_beats_members() {
        // {1,2},{1,3},{1,4} at p=1/2: generator {1} costs 1/2 < 3/4.
        let f = fam(4, &[&[0, 1], &[0, 2], &[0, 3]]);
        let cert = min_cover_weight(&f, &q(1, 2)).unwrap();
        assert_eq!(cert.weight, q(1, 2));
        assert!(cert.recheck(&f).unwrap());
    }

    #[test]
    fn bignum_weight_path_agrees() {
        // p with a large denominator forces the BigUint weight path.
        let p = Q::new(BigInt::from(1u64), BigInt::from(10u64).pow(9));
        let f = fam(6, &[&[0, 1, 2, 3, 4, 5], &[0, 1, 2]]);
        let cert = min_cover_weight(&f, &p).unwrap();
        assert_eq!(cert.weight, rational::pow(&p, 3));
    }
}
