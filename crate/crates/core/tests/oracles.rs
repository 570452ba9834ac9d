use num_traits::{One, Zero};

use selcert::rational::{self, q, qi};
use selcert::selector::{self, Mode, SelectorInstance, SplitParams};
use selcert::sets::{self, k_subsets, SetFamily, Subset};
use selcert::witness::{self, Normalization, WeightedFamily, WeightedMember};
use selcert::{SearchLimits, Q};

fn fam(n: usize, lists: &[&[usize]]) -> SetFamily {
    SetFamily::from_index_lists(n, lists).unwrap()
}

fn sub(n: usize, e: &[usize]) -> Subset {
    Subset::from_elements(n, e).unwrap()
}

fn member(n: usize, e: &[usize], c: &[Q]) -> WeightedMember {
    WeightedMember::new(sub(n, e), c.to_vec()).unwrap()
}

fn unit_vectors(n: usize) -> Vec<Vec<Q>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { qi(1) } else { qi(0) }).collect())
        .collect()
}

#[test]
fn cover_examples() {
    assert!(sets::upset_cover_check(&fam(2, &[&[0]]), &fam(2, &[&[0], &[0, 1]])).unwrap());
    assert!(!sets::upset_cover_check(&fam(2, &[&[0, 1]]), &fam(2, &[&[0]])).unwrap());
    assert!(sets::upset_cover_check(&fam(3, &[&[]]), &fam(3, &[&[2], &[0, 1]])).unwrap());
    assert_eq!(
        sets::cover_weight(&fam(3, &[&[0], &[1, 2]]), &q(1, 2)).unwrap(),
        q(3, 4)
    );
    assert_eq!(sets::cover_weight(&fam(3, &[&[]]), &q(2, 7)).unwrap(), qi(1));
    assert!(sets::cover_weight(&fam(1, &[&[0]]), &qi(1)).is_err());
    assert!(sets::upset_cover_check(&fam(2, &[&[0]]), &fam(3, &[&[0]])).is_err());
}

#[test]
fn min_cover_examples() {
    let pairs = fam(3, &[&[0, 1], &[0, 2], &[1, 2]]);
    let c = sets::min_cover_weight(&pairs, &q(1, 10)).unwrap();
    assert_eq!(c.weight, q(3, 100));
    assert_eq!(c.generators, pairs);
    let c = sets::min_cover_weight(&fam(3, &[&[], &[1]]), &q(1, 3)).unwrap();
    assert_eq!(c.weight, qi(1));
    let (small, c) = sets::is_p_small(&fam(1, &[&[0]]), &q(3, 5)).unwrap();
    assert!(!small);
    assert_eq!(c.weight, q(3, 5));
    let (small, c) = sets::is_p_small(&fam(2, &[&[0], &[1]]), &q(1, 5)).unwrap();
    assert!(small);
    assert_eq!(c.weight, q(2, 5));
}

#[test]
fn below_half_over_n_everything_is_small() {
    let n = 5;
    let all: Vec<Subset> = (1..1u64 << n).map(|b| Subset::from_bits(n, b).unwrap()).collect();
    let family = SetFamily::from_members(n, all).unwrap();
    let limits = SearchLimits {
        max_n: 20,
        max_members: 64,
    };
    let (small, c) = sets::is_p_small_with(&family, &q(1, 11), limits).unwrap();
    assert!(small);
    assert!(c.weight <= q(5, 11));
}

#[test]
fn witness_examples() {
    let half = rational::half();
    let w = WeightedFamily::new(2, vec![member(2, &[0, 1], &[q(3, 5), q(2, 5)])], Normalization::Exact).unwrap();
    assert!(witness::is_c_bad(&sub(2, &[1]), &w, &half).unwrap());
    assert!(!witness::is_c_bad(&sub(2, &[0, 1]), &w, &half).unwrap());
    assert!(witness::is_c_bad(&sub(2, &[]), &w, &half).unwrap());

    let m = &w.members()[0];
    assert_eq!(witness::threshold_epsilon(m, &sub(2, &[1]), &half).unwrap(), q(2, 5));
    let lvl = witness::level_j(m, &sub(2, &[1]), &half).unwrap();
    assert_eq!((lvl.j, lvl.prefix), (1, sub(2, &[0])));

    let tri = member(3, &[0, 1, 2], &[q(1, 2), q(1, 3), q(1, 6)]);
    assert_eq!(witness::sorted_prefix(&tri, 2), sub(3, &[0, 1]));
    assert_eq!(witness::sorted_prefix(&tri, 0), sub(3, &[]));
    assert_eq!(witness::sorted_prefix(&tri, 7), sub(3, &[0, 1, 2]));

    let uni = WeightedMember::uniform(sub(3, &[0, 1, 2]));
    assert_eq!(witness::threshold_epsilon(&uni, &sub(3, &[0]), &half).unwrap(), qi(0));
    let lvl = witness::level_j(&uni, &sub(3, &[0]), &half).unwrap();
    assert_eq!((lvl.j, lvl.prefix), (3, sub(3, &[0, 1, 2])));

    let single = member(1, &[0], &[qi(1)]);
    assert_eq!(witness::threshold_epsilon(&single, &sub(1, &[]), &half).unwrap(), qi(0));
    assert!(witness::threshold_epsilon(&single, &sub(1, &[0]), &half).is_err());
}

#[test]
fn witness_and_cover_on_empty_bad_set() {
    let half = rational::half();
    let w = WeightedFamily::new(
        4,
        vec![
            member(4, &[0, 1, 2], &[q(1, 2), q(1, 2), qi(0)]),
            member(4, &[2, 3], &[q(1, 4), q(3, 4)]),
        ],
        Normalization::Exact,
    )
    .unwrap();
    let x = sub(4, &[]);
    let cover = witness::build_bad_cover(&x, &w, &half).unwrap();
    assert!(sets::upset_cover_check(&cover, w.base()).unwrap());
    for m in w.members() {
        let lvl = witness::level_j(m, &x, &half).unwrap();
        assert_eq!(lvl.epsilon, qi(0));
        assert_eq!(lvl.j, m.coeffs.iter().filter(|c| !c.is_zero()).count());
    }
    let single = WeightedFamily::new(4, vec![member(4, &[1, 3], &[q(1, 2), q(1, 2)])], Normalization::Exact).unwrap();
    let rec = witness::build_witness(&sub(4, &[1, 3]), &sub(4, &[0]), &half, &single).unwrap();
    assert_eq!(rec.witness(), sub(4, &[1, 3]));
    assert_eq!(
        witness::build_bad_cover(&sub(4, &[0]), &single, &half).unwrap().len(),
        1
    );
}

#[test]
fn key_lemma_examples() {
    assert_eq!(witness::key_lemma_bound(6, 3, &q(1, 24)).unwrap(), q(364, 729));
    assert_eq!(witness::key_lemma_bound(1, 1, &q(1, 7)).unwrap(), q(4, 7));
    assert!(witness::key_lemma_bound(4, 1, &q(1, 2)).unwrap() >= qi(4));
    assert!(witness::key_lemma_bound(3, 0, &q(1, 2)).is_err());
    let w = WeightedFamily::new(2, vec![member(2, &[0], &[qi(1)])], Normalization::Exact).unwrap();
    assert_eq!(
        witness::bad_probability_exact(&w, &rational::half(), 1).unwrap(),
        q(1, 2)
    );
    assert_eq!(witness::bad_probability_exact(&w, &qi(1), 2).unwrap(), qi(0));
}

#[test]
fn counting_identities() {
    for t in 0..=20u64 {
        let (sum, closed, four) = witness::hockey_stick(t);
        assert_eq!(sum, closed);
        assert!(closed <= four);
    }
    for n in 1..=30u64 {
        for m in 1..=n {
            for t in 0..=n - m {
                assert!(witness::binomial_ratio_holds(n, m, t), "n={n} m={m} t={t}");
            }
        }
    }
}

#[test]
fn expectation_examples() {
    let inst = SelectorInstance::new(2, unit_vectors(2), q(1, 2)).unwrap();
    assert_eq!(selector::expected_sup_exact(inst.vectors(), inst.p()).unwrap(), q(3, 4));
    for n in 1..=6 {
        let p = q(2, 7);
        let expect = Q::one() - rational::pow(&(Q::one() - &p), n);
        assert_eq!(selector::expected_sup_exact(&unit_vectors(n), &p).unwrap(), expect);
    }
    let t = vec![vec![q(1, 3), qi(2), qi(0), q(5, 2)]];
    let sum: Q = t[0].iter().sum();
    assert_eq!(selector::expected_sup_exact(&t, &q(1, 5)).unwrap(), sum * q(1, 5));
}

#[test]
fn threshold_family_examples() {
    let inst = SelectorInstance::new(2, vec![vec![qi(1), qi(1)]], q(1, 2)).unwrap();
    let f = selector::threshold_family(&inst, &qi(1)).unwrap();
    assert_eq!(f, fam(2, &[&[0], &[1], &[0, 1]]));
    let all = selector::threshold_family(&inst, &qi(0)).unwrap();
    assert_eq!(all.len(), 4);
    let big = selector::threshold_family(&inst, &qi(3)).unwrap();
    assert!(big.is_empty());
}

#[test]
fn main1_examples() {
    let inst = SelectorInstance::new(8, unit_vectors(8), q(1, 10)).unwrap();
    let cert = selector::certify_main1(&inst, &qi(221), SearchLimits::default()).unwrap();
    assert!(cert.family.is_empty());
    assert_eq!(cert.cover.weight, qi(0));
    assert!(cert.recheck().unwrap());
}

#[test]
fn split_example() {
    let inst = SelectorInstance::new(10, unit_vectors(10), q(1, 100)).unwrap();
    let sp = SplitParams::new(qi(10), inst.p(), 10).unwrap();
    assert_eq!(sp.coarse_probability(inst.p()), q(1, 10));
    assert_eq!(sp.thinning_probability(), q(1, 10));
    let cert = selector::split_certify(&inst, &sp, SearchLimits::default()).unwrap();
    assert!(cert.is_small());
    assert!(cert.recheck().unwrap());
    assert!(cert.coarse_delta <= &cert.c * &cert.delta);
}

#[test]
fn main2_and_master_examples() {
    let w = WeightedFamily::new(1, vec![member(1, &[0], &[qi(1)])], Normalization::Exact).unwrap();
    let (v, ok) = selector::verify_main2(&w, &q(3, 5), SearchLimits::default()).unwrap();
    assert_eq!(v, q(3, 5));
    assert!(ok);
    // F = {{1}} is 1/10-small, so the hypothesis guard fires even though E = 1.
    assert_eq!(selector::weighted_uniform_expectation(&w, 1).unwrap(), qi(1));
    assert!(selector::verify_master(&w, &q(1, 10), 1, SearchLimits::default()).is_err());
    assert!(selector::verify_main2(&w, &q(1, 3), SearchLimits::default()).is_err());
    let w3 = WeightedFamily::new(
        3,
        vec![member(3, &[0, 1, 2], &[q(1, 3), q(1, 3), q(1, 3)])],
        Normalization::Exact,
    )
    .unwrap();
    assert!(selector::verify_master(&w3, &q(1, 2), 1, SearchLimits::default()).is_err());
}

#[test]
fn uniform_subset_examples() {
    let w = WeightedFamily::new(3, vec![member(3, &[0, 1], &[q(1, 2), q(1, 2)])], Normalization::Exact).unwrap();
    assert_eq!(selector::weighted_uniform_expectation(&w, 1).unwrap(), q(1, 3));
    assert_eq!(selector::weighted_uniform_expectation(&w, 3).unwrap(), qi(1));
    assert_eq!(selector::weighted_uniform_expectation(&w, 0).unwrap(), qi(0));
    let (a, b, ok) = selector::verify_porsup(&unit_vectors(4), 1, 2, Mode::Exact).unwrap();
    assert_eq!((a, b, ok), (1.0, 2.0, true));
    let rows = vec![vec![qi(1), qi(2), qi(0), q(1, 2), qi(3)]];
    let (a, b, ok) = selector::verify_porsup(&rows, 2, 1, Mode::Exact).unwrap();
    assert!(ok && a == b);
    assert!(selector::verify_porsup(&rows, 3, 2, Mode::Exact).is_err());
}

#[test]
fn uniform_threshold_examples() {
    let cert = selector::remark1_certificate(&unit_vectors(9), 1, &qi(1), SearchLimits::default()).unwrap();
    assert_eq!(cert.expectation, qi(1));
    assert_eq!(cert.threshold, qi(91));
    assert!(cert.family.is_empty());
    assert_eq!(cert.cover.weight, qi(0));
    assert!(selector::certify_malarodzina(&unit_vectors(4), 1, &qi(10), SearchLimits::default()).is_err());
}

#[test]
fn binomial_tail_examples() {
    let tail = selector::binomial_tail(10, &q(3, 10), 3).unwrap();
    assert!(tail >= rational::half());
    let direct: Q = (3..=10u64)
        .map(|k| {
            rational::from_biguint(&rational::binomial(10, k))
                * rational::pow(&q(3, 10), k as usize)
                * rational::pow(&q(7, 10), (10 - k) as usize)
        })
        .sum();
    assert_eq!(tail, direct);
    assert_eq!(selector::binomial_tail(7, &q(1, 3), 0).unwrap(), qi(1));
    assert_eq!(
        selector::binomial_tail(7, &q(1, 3), 7).unwrap(),
        rational::pow(&q(1, 3), 7)
    );
    assert!(selector::binomial_tail(3, &q(1, 3), 4).is_err());
}

#[test]
fn integer_mean_median() {
    for n in 1..=40u64 {
        for k in 1..n {
            let qv = q(k as i64, n as i64);
            assert!(
                selector::binomial_tail(n, &qv, k).unwrap() >= rational::half(),
                "n={n} k={k}"
            );
        }
    }
}

#[test]
fn conditional_chain_small() {
    let n = 6;
    let members: Vec<WeightedMember> = (0..n).map(|i| member(n, &[i], &[qi(1)])).collect();
    let w = WeightedFamily::new(n, members, Normalization::Exact).unwrap();
    let p = q(1, 6);
    assert!(!sets::is_p_small(w.base(), &p).unwrap().0);
    for m in 1..=n {
        if rational::qi(m as i64) >= qi(9) * qi(n as i64) * &p {
            let c = selector::conditional_chain(&w, &p, m).unwrap();
            assert!(c.conditional >= c.lower_bound);
        }
    }
    assert_eq!(k_subsets(6, 3).count(), 20);
}
