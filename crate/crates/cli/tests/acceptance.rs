//! One line per acceptance criterion, then informational diagnostics.
//! Exits nonzero when any criterion fails.

use std::process::ExitCode;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use selcert::certificate::{DeltaSmallCertificate, OrbitLimits};
use selcert::empirical::{self, EmpConfig};
use selcert::format::{Instance, Kind};
use selcert::levy::{self, IdConfig, VerifyReport};
use selcert::rational::{self, q, qi};
use selcert::selector::{self, Mode};
use selcert::sets::{self, k_subsets, SetFamily, Subset};
use selcert::witness::{self, CountingReport, WeightedFamily};
use selcert::{mc, SearchLimits, Q};
use selcert_cli::campaign::S_HAT_GRID;
use selcert_cli::generate::{generate_instances, GenSpec};

const SEED: u64 = 20_240_601;
const MC_TRIALS: u64 = 100_000;

/// Certificates emitted during the run and how many failed their re-check.
#[derive(Default)]
struct Ledger {
    emitted: AtomicU64,
    failed: AtomicU64,
}

impl Ledger {
    fn record(&self, ok: bool) -> bool {
        self.emitted.fetch_add(1, Ordering::Relaxed);
        if !ok {
            self.failed.fetch_add(1, Ordering::Relaxed);
        }
        ok
    }
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn selectors(count: usize, min_n: usize, max_n: usize, seed: u64) -> Vec<selector::SelectorInstance> {
    generate_instances(&GenSpec::new(Kind::Selector, count, min_n, max_n, seed))
        .expect("selector generation")
        .into_iter()
        .map(|(_, inst)| match inst {
            Instance::Selector(s) => s,
            _ => unreachable!(),
        })
        .collect()
}

fn weighted(spec: &GenSpec) -> Vec<(WeightedFamily, Q)> {
    generate_instances(spec)
        .expect("weighted generation")
        .into_iter()
        .map(|(_, inst)| match inst {
            Instance::Weighted { family, p } => (family, p),
            _ => unreachable!(),
        })
        .collect()
}

fn main1(ledger: &Ledger) -> Outcome {
    let insts = selectors(100, 1, 12, SEED);
    let l = qi(selector::MAIN1_L);
    let results: Vec<(bool, bool)> = insts
        .par_iter()
        .map(|inst| {
            let cert = selector::certify_main1(inst, &l, SearchLimits::default()).expect("certify_main1");
            let empty = cert.family.is_empty();
            (
                cert.is_small() && ledger.record(cert.recheck().expect("recheck")),
                empty,
            )
        })
        .collect();
    let ok = results.iter().filter(|r| r.0).count();
    let empty = results.iter().filter(|r| r.1).count();
    outcome(
        ok == insts.len(),
        format!(
            "{ok}/{} covers of weight <= 1/2 ({empty} empty threshold families)",
            insts.len()
        ),
    )
}

fn main2_and_key_lemma(ledger: &Ledger) -> (Outcome, Outcome) {
    let fams = weighted(&GenSpec::new(Kind::Weighted, 100, 2, 10, SEED + 1));
    let results: Vec<(bool, Q, usize, usize)> = fams
        .par_iter()
        .map(|(w, p)| {
            let (small, cover) = sets::is_p_small(w.base(), p).expect("oracle");
            ledger.record(cover.recheck(w.base()).expect("cover recheck"));
            let (e, ok) = selector::verify_main2(w, p, SearchLimits::default()).expect("main2");
            let mut key_ok = 0;
            for m in 1..=w.ground() {
                let bad = witness::bad_probability_exact(w, &rational::half(), m).expect("bad probability");
                if bad <= witness::key_lemma_bound(w.ground(), m, p).expect("bound") {
                    key_ok += 1;
                }
            }
            (ok && !small, e, key_ok, w.ground())
        })
        .collect();
    let ok = results.iter().filter(|r| r.0).count();
    let min_e = results.iter().map(|r| r.1.clone()).min().expect("nonempty");
    let key_ok: usize = results.iter().map(|r| r.2).sum();
    let key_total: usize = results.iter().map(|r| r.3).sum();
    (
        outcome(
            ok == fams.len(),
            format!(
                "{ok}/{} non-p-small families with E sup >= 1/220 (min {:.5})",
                fams.len(),
                rational::to_f64(&min_e)
            ),
        ),
        outcome(
            key_ok == key_total,
            format!("{key_ok}/{key_total} (family, m) pairs within the key lemma bound"),
        ),
    )
}

/// Random weighted families on `[2, max_n]` plus every uniform `k`-uniform
/// family on `[1, max_n]`.
fn counting_families(max_n: usize, seed: u64) -> Vec<WeightedFamily> {
    let mut out: Vec<WeightedFamily> = weighted(&GenSpec::new(Kind::Weighted, 60, 2, max_n, seed))
        .into_iter()
        .map(|(w, _)| w)
        .collect();
    for n in 1..=max_n {
        for k in 1..=n {
            let fam = SetFamily::from_members(n, k_subsets(n, k).map(|b| Subset::from_bits(n, b).unwrap())).unwrap();
            out.push(WeightedFamily::uniform(&fam).unwrap());
        }
    }
    out
}

fn counting_report(fams: &[WeightedFamily]) -> CountingReport {
    let cs = [q(1, 4), q(1, 2), q(3, 4)];
    fams.par_iter()
        .flat_map(|w| {
            cs.par_iter()
                .map(move |c| witness::check_counting_lemmas(w, c).expect("counting"))
        })
        .reduce(
            || CountingReport {
                tightest: (0, 1),
                ..Default::default()
            },
            |a, b| a.merge(&b),
        )
}

fn zlicz() -> Outcome {
    let r = counting_report(&counting_families(8, SEED + 2));
    outcome(
        r.multiplicity_violations == 0 && r.size_violations == 0 && r.buckets > 0,
        format!(
            "{} buckets over {} witness records, {} multiplicity violations, tightest {}/{}",
            r.buckets, r.witness_records, r.multiplicity_violations, r.tightest.0, r.tightest.1
        ),
    )
}

fn pom_zaw() -> Outcome {
    let r = counting_report(&counting_families(7, SEED + 3));
    outcome(
        r.threshold_violations == 0 && r.fragment_violations == 0 && r.pairs > 0,
        format!(
            "{} pairs, {} threshold and {} fragment exceptions",
            r.pairs, r.threshold_violations, r.fragment_violations
        ),
    )
}

fn counting_identities() -> Outcome {
    let mut bad = 0;
    let mut checked = 0;
    for t in 0..=20 {
        let (lhs, closed, four) = witness::hockey_stick(t);
        checked += 1;
        if lhs != closed || closed > four {
            bad += 1;
        }
    }
    for n in 1..=30u64 {
        for m in 1..=n {
            for t in 0..=n - m {
                checked += 1;
                if !witness::binomial_ratio_holds(n, m, t) {
                    bad += 1;
                }
            }
        }
    }
    outcome(bad == 0, format!("{checked} identities, {bad} failures"))
}

/// Families on `[6, 8]` that are not `1/10`-small, so that `m >= 9pn` leaves
/// a nonempty grid.
fn master_families() -> Vec<(WeightedFamily, Q)> {
    let mut spec = GenSpec::new(Kind::Weighted, 25, 6, 8, SEED + 4);
    spec.p = Some(q(1, 10));
    weighted(&spec)
}

fn theorems_small(ledger: &Ledger) -> Outcome {
    let mut failures = Vec::new();
    let mut checks = 0usize;

    let fams = master_families();
    let master: Vec<(usize, Vec<String>)> = fams
        .par_iter()
        .map(|(w, p)| {
            let n = w.ground();
            let mut fails = Vec::new();
            let mut count = 0;
            for m in 1..=n {
                if qi(m as i64) < qi(9) * p * qi(n as i64) {
                    continue;
                }
                count += 1;
                let (e, ok) = selector::verify_master(w, p, m, SearchLimits::default()).expect("master");
                if !ok {
                    fails.push(format!("master n={n} m={m} E={}", rational::fmt(&e)));
                }
            }
            (count, fails)
        })
        .collect();
    let master_checks: usize = master.iter().map(|r| r.0).sum();
    checks += master_checks;
    failures.extend(master.into_iter().flat_map(|r| r.1));

    let vecs = selectors(40, 2, 8, SEED + 5);
    let uniform: Vec<(usize, Vec<String>)> = vecs
        .par_iter()
        .map(|inst| {
            let v = inst.vectors();
            let n = inst.n();
            let mut fails = Vec::new();
            let mut count = 0;
            for m in 1..=n {
                count += 1;
                let c = selector::certify_malarodzina(v, m, &qi(11), SearchLimits::default()).expect("malarodzina");
                if !(c.is_small() && ledger.record(c.recheck().expect("recheck"))) {
                    fails.push(format!("malarodzina n={n} m={m}"));
                }
                if m < n {
                    count += 1;
                    let c = selector::remark1_certificate(v, m, &qi(1), SearchLimits::default()).expect("remark1");
                    if !(c.is_small() && ledger.record(c.recheck().expect("recheck"))) {
                        fails.push(format!("remark1 n={n} m={m}"));
                    }
                }
                for k in 2..=n / m {
                    count += 1;
                    let (a, b, ok) = selector::verify_porsup(v, m, k, Mode::Exact).expect("porsup");
                    if !ok {
                        fails.push(format!("porsup n={n} m={m} k={k}: {a} > {b}"));
                    }
                }
            }
            (count, fails)
        })
        .collect();
    checks += uniform.iter().map(|r| r.0).sum::<usize>();
    failures.extend(uniform.into_iter().flat_map(|r| r.1));

    let detail = format!(
        "{checks} checks ({master_checks} master over {} families), {} failures{}",
        fams.len(),
        failures.len(),
        failures.first().map(|f| format!(", first: {f}")).unwrap_or_default()
    );
    outcome(failures.is_empty() && master_checks > 0, detail)
}

fn stage_summary(report: &VerifyReport) -> String {
    report
        .stages
        .iter()
        .map(|(s, hits, bound)| {
            let (f, _) = VerifyReport::frequency(*hits, report.trials);
            format!("{}={f:.2e}<={:.2e}", s.name(), rational::to_f64(bound))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn round_trips(cert: &DeltaSmallCertificate) -> bool {
    DeltaSmallCertificate::from_text(&cert.to_text()).is_ok_and(|c| &c == cert)
}

fn levy_pipeline(ledger: &Ledger) -> Outcome {
    let specs = levy::reference_specs();
    let lines: Vec<(bool, String)> = specs
        .par_iter()
        .enumerate()
        .map(|(i, (name, spec))| {
            let seed = mc::derive_seed(SEED, i as u64);
            let est = levy::estimate_s(spec, MC_TRIALS, seed);
            let s_hat = rational::from_f64_grid(est.mean, S_HAT_GRID);
            let cfg = IdConfig::default();
            let part = levy::prepare(spec, &s_hat, &cfg).expect("prepare");
            let cert = levy::build_id_certificate(spec, &part, &cfg.k, &s_hat, cfg.orbit).expect("certificate");
            ledger.record(round_trips(&cert) && levy::recheck_id_certificate(&cert, spec, cfg.orbit).expect("recheck"));
            let report = levy::verify_id_certificate(&cert, spec, MC_TRIALS, mc::derive_seed(seed, 1)).expect("verify");
            let total = cert.total_bound();
            let ok = total <= rational::half() && report.violations == 0 && report.frequencies_ok(4.0);
            (
                ok,
                format!(
                    "{name}: total {:.3e}, {} events, {} violations, {}",
                    rational::to_f64(&total),
                    report.events,
                    report.violations,
                    stage_summary(&report)
                ),
            )
        })
        .collect();
    let ok = lines.iter().all(|l| l.0) && lines.len() >= 3;
    outcome(ok, lines.into_iter().map(|l| l.1).collect::<Vec<_>>().join("; "))
}

fn empirical_pipeline(ledger: &Ledger) -> Outcome {
    let insts = empirical::reference_instances();
    let lines: Vec<(bool, String)> = insts
        .par_iter()
        .enumerate()
        .map(|(i, (name, inst))| {
            let seed = mc::derive_seed(SEED + 7, i as u64);
            let s = empirical::exact_s_emp(inst).expect("exact S");
            let cfg = EmpConfig::default();
            let part = empirical::prepare_emp(inst, &s, &cfg).expect("prepare");
            let cert = empirical::build_emp_certificate(inst, &part, &cfg.k, &s, cfg.orbit).expect("certificate");
            ledger.record(
                round_trips(&cert) && empirical::recheck_emp_certificate(&cert, inst, cfg.orbit).expect("recheck"),
            );
            let report = empirical::verify_emp_certificate(&cert, inst, MC_TRIALS, seed).expect("verify");
            let total = cert.total_bound();
            let ok =
                inst.d() <= 10 && total <= rational::half() && report.violations == 0 && report.frequencies_ok(4.0);
            (
                ok,
                format!(
                    "{name}: total {:.3e}, {} events, {} violations, {}",
                    rational::to_f64(&total),
                    report.events,
                    report.violations,
                    stage_summary(&report)
                ),
            )
        })
        .collect();
    let ok = lines.iter().all(|l| l.0) && lines.len() >= 3;
    outcome(ok, lines.into_iter().map(|l| l.1).collect::<Vec<_>>().join("; "))
}

/// Containment on partitions coarse enough, with `K` small enough, that the
/// event is reachable.
fn small_k_containment() -> String {
    let inst = &empirical::reference_instances()[1].1;
    let s = empirical::exact_s_emp(inst).unwrap();
    let part = empirical::discretize_emp(inst, 2, 4, &q(1, 4096)).unwrap();
    let cert = empirical::assemble_emp_certificate(inst, &part, &qi(3), &s, OrbitLimits::default()).unwrap();
    let r = empirical::verify_emp_certificate(&cert, inst, MC_TRIALS, SEED).unwrap();
    let (spec_name, spec) = &levy::reference_specs()[0];
    let cfg = IdConfig {
        k: qi(4),
        grid: Some(2),
        trunc: Some(4),
        p: Some(q(1, 4096)),
        orbit: OrbitLimits::default(),
    };
    let s_hat = rational::from_f64_grid(levy::estimate_s(spec, MC_TRIALS, SEED).mean, S_HAT_GRID);
    let levy_line = levy::prepare(spec, &s_hat, &cfg)
        .and_then(|part| levy::assemble_id_certificate(spec, &part, &cfg.k, &s_hat, cfg.orbit))
        .and_then(|cert| levy::verify_id_certificate(&cert, spec, MC_TRIALS, SEED))
        .map(|r| format!("{spec_name} K=4: {} events, {} violations", r.events, r.violations))
        .unwrap_or_else(|e| format!("{spec_name} K=4: {e}"));
    format!(
        "two-spikes K=3: {} events, {} violations; {levy_line}",
        r.events, r.violations
    )
}

fn bridge_uniformity() -> String {
    let (s, d) = (8u64, 3u64);
    let counts = empirical::bridge_occupancy_counts(s, &q(1, 16), d, MC_TRIALS, SEED).unwrap();
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    let chi: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).unwrap();
    format!(
        "{} occupied subsets of {} slices over {total} paths, chi-square {chi:.1} (p-value {:.3})",
        counts.len(),
        s,
        1.0 - dist.cdf(chi)
    )
}

fn xy_bridge() -> String {
    let insts = selectors(30, 8, 12, SEED + 8);
    let (mut held, mut eligible, mut eight) = (0, 0, 0);
    for inst in &insts {
        let n = inst.n() as i64;
        let b = empirical::xy_bridge_exact(inst.vectors(), &q(1, n), 2).unwrap();
        held += usize::from(b.conditional_holds());
        if let Some(ok) = b.eight_sevenths() {
            eligible += 1;
            eight += usize::from(ok);
        }
    }
    format!(
        "E_X >= P(good) E_Y on {held}/{}; (8/7) E_X >= E_Y on {eight}/{eligible} with P(good) >= 7/8",
        insts.len()
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let ledger = Ledger::default();
    let timed = |f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let mut o = f();
        o.detail.push_str(&format!(" [{:.1}s]", t.elapsed().as_secs_f64()));
        o
    };
    let mut failed = 0;
    let mut report = |i: usize, name: &str, o: Outcome| {
        println!(
            "criterion {i:>2} {}: {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.pass);
    };
    report(1, "main1 selector covers", timed(&|| main1(&ledger)));
    let t = Instant::now();
    let (c2, c3) = main2_and_key_lemma(&ledger);
    let took = format!(" [{:.1}s]", t.elapsed().as_secs_f64());
    report(
        2,
        "main2 lower bound",
        Outcome {
            detail: c2.detail + &took,
            ..c2
        },
    );
    report(
        3,
        "key lemma",
        Outcome {
            detail: c3.detail + &took,
            ..c3
        },
    );
    report(4, "witness multiplicity", timed(&zlicz));
    report(5, "threshold and fragment lemmas", timed(&pom_zaw));
    report(6, "counting identities", timed(&counting_identities));
    report(
        7,
        "master, malarodzina, porsup, remark1",
        timed(&|| theorems_small(&ledger)),
    );
    report(8, "ID pipeline", timed(&|| levy_pipeline(&ledger)));
    report(9, "empirical pipeline", timed(&|| empirical_pipeline(&ledger)));
    let emitted = ledger.emitted.load(Ordering::Relaxed);
    let bad = ledger.failed.load(Ordering::Relaxed);
    let pass10 = bad == 0 && emitted > 0;
    report(
        10,
        "certificate re-check",
        outcome(pass10, format!("{emitted} certificates, {bad} mismatches")),
    );
    println!("info: small-K containment: {}", small_k_containment());
    println!("info: bridge uniformity: {}", bridge_uniformity());
    println!("info: uniform-subset bridge: {}", xy_bridge());
    println!(
        "acceptance: {} of 10 criteria passed in {:.1}s",
        10 - failed,
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
