use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use selcert::certificate::{DeltaSmallCertificate, OrbitLimits};
use selcert::empirical::{self, EmpConfig, EmpiricalInstance};
use selcert::format::{self, Instance};
use selcert::levy::{self, IdConfig, LevyMeasureSpec, VerifyReport};
use selcert::mc::{self, Estimate};
use selcert::rational::{self, Q};
use selcert::selector::{self, Mode as ExpMode, SelectorInstance, SplitParams};
use selcert::sets;
use selcert::witness::{self, Normalization, WeightedFamily};

use crate::config::{CampaignConfig, Mode};

/// Rational grid used to turn a Monte Carlo estimate of `S` into `Ŝ`.
pub const S_HAT_GRID: i64 = 1 << 20;

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Exact(Q),
    Estimate(Estimate),
    Count(u64),
    None,
}

impl Value {
    fn provenance(&self) -> &'static str {
        match self {
            Value::Exact(_) | Value::Count(_) => "exact",
            Value::Estimate(_) => "mc",
            Value::None => "",
        }
    }

    fn render(&self) -> String {
        match self {
            Value::Exact(q) => rational::fmt(q),
            Value::Estimate(e) => format!("{:.6}", e.mean),
            Value::Count(c) => c.to_string(),
            Value::None => String::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Info,
    Skipped,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "FAIL",
            Status::Info => "info",
            Status::Skipped => "skipped",
        }
    }

    fn of(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: Value,
    pub status: Status,
    pub note: String,
}

impl Check {
    fn new(name: impl Into<String>, value: Value, status: Status, note: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            value,
            status,
            note: note.into(),
        }
    }

    fn info(name: impl Into<String>, value: Value) -> Self {
        Self::new(name, value, Status::Info, "")
    }

    fn test(name: impl Into<String>, value: Value, ok: bool, note: impl Into<String>) -> Self {
        Self::new(name, value, Status::of(ok), note)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub id: String,
    pub path: PathBuf,
    pub kind: &'static str,
    pub checks: Vec<Check>,
    /// Relative to the output directory.
    pub certificate: Option<PathBuf>,
    pub error: Option<String>,
}

impl Row {
    pub fn failed(&self) -> bool {
        self.error.is_some() || self.checks.iter().any(|c| c.status == Status::Fail)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Summary {
    pub instances: usize,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
    pub errors: usize,
    pub violations: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub mode: Mode,
    pub seed: u64,
    pub trials: u64,
    pub constants: String,
    pub rows: Vec<Row>,
    pub summary: Summary,
}

impl RunReport {
    pub fn success(&self) -> bool {
        self.summary.failed == 0 && self.summary.errors == 0 && self.summary.violations == 0
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "selcert report v1");
        let _ = writeln!(out, "mode {}", self.mode.name());
        let _ = writeln!(out, "seed {}", self.seed);
        let _ = writeln!(out, "trials {}", self.trials);
        let _ = writeln!(out, "constants {}", self.constants);
        for row in &self.rows {
            let _ = writeln!(out, "\ninstance {} ({}, {})", row.id, row.kind, row.path.display());
            if let Some(e) = &row.error {
                let _ = writeln!(out, "  error: {e}");
            }
            for c in &row.checks {
                let mut line = format!("  [{}] {}", c.status.name(), c.name);
                if c.value != Value::None {
                    let _ = write!(line, " = {}", c.value.render());
                    match &c.value {
                        Value::Estimate(e) => {
                            let _ = write!(line, " ± {:.6} (mc, {} trials)", e.std_err, e.trials);
                        }
                        v => {
                            let _ = write!(line, " ({})", v.provenance());
                        }
                    }
                }
                if !c.note.is_empty() {
                    let _ = write!(line, "  {}", c.note);
                }
                let _ = writeln!(out, "{line}");
            }
            if let Some(cert) = &row.certificate {
                let _ = writeln!(out, "  certificate {}", cert.display());
            }
        }
        let s = &self.summary;
        let _ = writeln!(
            out,
            "\nsummary instances={} passed={} failed={} skipped={} errors={} violations={}",
            s.instances, s.passed, s.failed, s.skipped, s.errors, s.violations
        );
        out
    }

    pub fn to_csv(&self) -> Result<String, String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let e = |e: csv::Error| e.to_string();
        w.write_record([
            "instance",
            "kind",
            "check",
            "value",
            "provenance",
            "std_err",
            "trials",
            "status",
            "note",
            "certificate",
            "seed",
        ])
        .map_err(e)?;
        let seed = self.seed.to_string();
        for row in &self.rows {
            let cert = row
                .certificate
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default();
            if let Some(msg) = &row.error {
                w.write_record([&row.id, row.kind, "error", "", "", "", "", "error", msg, &cert, &seed])
                    .map_err(e)?;
            }
            for c in &row.checks {
                let (se, trials) = match &c.value {
                    Value::Estimate(est) => (format!("{:.6}", est.std_err), est.trials.to_string()),
                    _ => (String::new(), String::new()),
                };
                w.write_record([
                    row.id.as_str(),
                    row.kind,
                    &c.name,
                    &c.value.render(),
                    c.value.provenance(),
                    &se,
                    &trials,
                    c.status.name(),
                    &c.note,
                    &cert,
                    &seed,
                ])
                .map_err(e)?;
            }
        }
        String::from_utf8(w.into_inner().map_err(|e| e.to_string())?).map_err(|e| e.to_string())
    }
}

/// Expands directories into their files, sorted by name.
pub fn collect_paths(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, String> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| format!("{}: {e}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file())
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

pub fn load_instance(path: &Path) -> Result<Instance, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    format::parse_instance(&text).map_err(|e| match e {
        selcert::Error::Parse { line, msg } => format!("{}:{line}: {msg}", path.display()),
        e => format!("{}: {e}", path.display()),
    })
}

/// Runs every instance, writes certificates under `out/certificates` and the
/// report as `out/report.txt` and `out/report.csv`. Instance files that fail
/// to parse abort the run.
pub fn run(cfg: &CampaignConfig) -> Result<RunReport, String> {
    let mut cfg = cfg.clone();
    cfg.validate()?;
    let paths = collect_paths(&cfg.instances)?;
    let instances = paths.iter().map(|p| load_instance(p)).collect::<Result<Vec<_>, _>>()?;
    let cert_dir = cfg.out.join("certificates");
    std::fs::create_dir_all(&cert_dir).map_err(|e| format!("{}: {e}", cert_dir.display()))?;
    let rows: Vec<Row> = instances
        .par_iter()
        .zip(paths.par_iter())
        .enumerate()
        .map(|(i, (inst, path))| {
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let id = format!("{i:03}-{stem}");
            let seed = mc::derive_seed(cfg.seed, i as u64);
            let mut row = Row {
                id: id.clone(),
                path: path.clone(),
                kind: inst.kind().name(),
                checks: Vec::new(),
                certificate: None,
                error: None,
            };
            match dispatch(&cfg, inst, seed) {
                Ok(out) => {
                    row.checks = out.checks;
                    if let Some((ext, text)) = out.certificate {
                        let name = format!("{id}.{ext}");
                        let file = cert_dir.join(&name);
                        match std::fs::write(&file, text) {
                            Ok(()) => row.certificate = Some(Path::new("certificates").join(name)),
                            Err(e) => row.error = Some(format!("writing {}: {e}", file.display())),
                        }
                    }
                }
                Err(e) => row.error = Some(format!("{id}: {e}")),
            }
            row
        })
        .collect();
    let mut summary = Summary {
        instances: rows.len(),
        ..Default::default()
    };
    for row in &rows {
        if row.error.is_some() {
            summary.errors += 1;
        } else if row.failed() {
            summary.failed += 1;
        } else if row.checks.iter().all(|c| c.status != Status::Pass) {
            summary.skipped += 1;
        } else {
            summary.passed += 1;
        }
        for c in &row.checks {
            if c.name == "containment-violations" {
                if let Value::Count(v) = c.value {
                    summary.violations += v;
                }
            }
        }
    }
    let k = rational::fmt(&cfg.k_for(cfg.mode));
    let c = &cfg.constants;
    let report = RunReport {
        mode: cfg.mode,
        seed: cfg.seed,
        trials: cfg.trials,
        constants: format!(
            "L={} K={k} c={} C={} max_n={} exact_only={}",
            rational::fmt(&c.l),
            rational::fmt(&c.c),
            rational::fmt(&c.big_c),
            cfg.max_n,
            cfg.exact_only
        ),
        rows,
        summary,
    };
    let write = |name: &str, text: String| {
        let f = cfg.out.join(name);
        std::fs::write(&f, text).map_err(|e| format!("{}: {e}", f.display()))
    };
    write("report.txt", report.to_text())?;
    write("report.csv", report.to_csv()?)?;
    Ok(report)
}

struct Outcome {
    checks: Vec<Check>,
    certificate: Option<(&'static str, String)>,
}

fn stage(name: &'static str) -> impl Fn(selcert::Error) -> String {
    move |e| format!("stage {name}: {e}")
}

fn dispatch(cfg: &CampaignConfig, inst: &Instance, seed: u64) -> Result<Outcome, String> {
    match (cfg.mode, inst) {
        (Mode::CertifySelector, Instance::Selector(s)) => certify_selector(cfg, s, seed),
        (Mode::VerifyKeyLemma, Instance::SetFamily { family, p }) => {
            let w = WeightedFamily::uniform(family).map_err(stage("weights"))?;
            key_lemma(cfg, &w, p)
        }
        (Mode::VerifyKeyLemma, Instance::Weighted { family, p }) => key_lemma(cfg, family, p),
        (Mode::VerifyTheorems, Instance::SetFamily { family, p }) => {
            let w = WeightedFamily::uniform(family).map_err(stage("weights"))?;
            theorems(cfg, &w, p)
        }
        (Mode::VerifyTheorems, Instance::Weighted { family, p }) => theorems(cfg, family, p),
        (Mode::VerifyTheorems, Instance::Selector(s)) => selector_theorems(cfg, s),
        (Mode::SimulateId, Instance::LevySpec(spec)) => simulate_id(cfg, spec, seed),
        (Mode::SimulateEmpirical, Instance::Empirical(e)) => simulate_empirical(cfg, e, seed),
        (mode, inst) => Err(format!(
            "mode {} does not accept {} instances",
            mode.name(),
            inst.kind().name()
        )),
    }
}

fn guard_n(cfg: &CampaignConfig, n: usize) -> Result<(), String> {
    if n > cfg.max_n {
        return Err(format!("stage guard: n = {n} exceeds --max-n {}", cfg.max_n));
    }
    Ok(())
}

fn certify_selector(cfg: &CampaignConfig, inst: &SelectorInstance, seed: u64) -> Result<Outcome, String> {
    let mut checks = Vec::new();
    if !cfg.exact_only {
        let est = selector::expected_sup_mc(inst.vectors(), inst.p(), cfg.trials, seed, 0);
        checks.push(Check::info("delta-mc", Value::Estimate(est)));
    }
    if inst.n() > cfg.max_n {
        checks.push(Check::new(
            "cover",
            Value::None,
            Status::Skipped,
            format!("n = {} exceeds --max-n {}", inst.n(), cfg.max_n),
        ));
        return Ok(Outcome {
            checks,
            certificate: None,
        });
    }
    let cert = selector::certify_main1(inst, &cfg.constants.l, cfg.limits).map_err(stage("cover"))?;
    let delta = rational::to_f64(&cert.expectation);
    if let Some(Check {
        value: Value::Estimate(est),
        ..
    }) = checks.first()
    {
        let est = *est;
        checks.push(Check::test(
            "delta-mc-agreement",
            Value::Estimate(est),
            est.within(delta, 4.0),
            "within 4 SE of the exact value",
        ));
    }
    checks.insert(0, Check::info("delta", Value::Exact(cert.expectation.clone())));
    checks.push(Check::info("threshold", Value::Exact(cert.threshold.clone())));
    checks.push(Check::info("family-size", Value::Count(cert.family.len() as u64)));
    if cfg.constants.l > Q::from_integer(1.into()) / inst.p() {
        checks.push(Check::test(
            "empty-family",
            Value::Count(cert.family.len() as u64),
            cert.family.is_empty(),
            "L > 1/p",
        ));
    }
    checks.push(Check::test(
        "cover-weight",
        Value::Exact(cert.cover.weight.clone()),
        cert.is_small(),
        "<= 1/2",
    ));
    let text = format::write_cover(&cert.threshold, &cert.cover);
    let parsed = format::parse_cover(&text).map_err(stage("recheck"))?;
    let family = selector::sup_threshold_family(inst.vectors(), &parsed.threshold).map_err(stage("recheck"))?;
    let ok = parsed.cover.recheck(&family).map_err(stage("recheck"))?;
    checks.push(Check::test(
        "recheck",
        Value::None,
        ok,
        "cover and weight recomputed from the file",
    ));
    Ok(Outcome {
        checks,
        certificate: Some(("cover", text)),
    })
}

fn not_small(cfg: &CampaignConfig, w: &WeightedFamily, p: &Q) -> Result<(bool, Check), String> {
    let (small, cover) = sets::is_p_small_with(w.base(), p, cfg.limits).map_err(stage("smallness"))?;
    Ok((
        !small,
        Check::new(
            "min-cover-weight",
            Value::Exact(cover.weight),
            Status::Info,
            if small {
                "family is p-small"
            } else {
                "family is not p-small"
            },
        ),
    ))
}

fn key_lemma(cfg: &CampaignConfig, w: &WeightedFamily, p: &Q) -> Result<Outcome, String> {
    let n = w.ground();
    guard_n(cfg, n)?;
    let (ok_hyp, check) = not_small(cfg, w, p)?;
    let mut checks = vec![check];
    for m in 1..=n {
        let bad = witness::bad_probability_exact(w, &cfg.constants.c, m).map_err(stage("bad-probability"))?;
        let bound = witness::key_lemma_bound(n, m, p).map_err(stage("bound"))?;
        let note = format!("bound {}", rational::fmt(&bound));
        checks.push(if ok_hyp {
            Check::test(
                format!("key-lemma m={m}"),
                Value::Exact(bad.clone()),
                bad <= bound,
                note,
            )
        } else {
            Check::new(format!("key-lemma m={m}"), Value::Exact(bad), Status::Skipped, note)
        });
    }
    if n <= 16 {
        let r = witness::check_counting_lemmas(w, &cfg.constants.c).map_err(stage("counting"))?;
        checks.push(Check::info("bad-sets", Value::Count(r.bad_sets as u64)));
        checks.push(Check::info("witness-buckets", Value::Count(r.buckets as u64)));
        checks.push(Check::test(
            "witness-multiplicity",
            Value::Count(r.multiplicity_violations as u64),
            r.multiplicity_violations == 0,
            format!("tightest {}/{}", r.tightest.0, r.tightest.1),
        ));
        checks.push(Check::test(
            "threshold-monotone",
            Value::Count(r.threshold_violations as u64),
            r.threshold_violations == 0,
            format!("{} pairs", r.pairs),
        ));
        checks.push(Check::test(
            "fragment-equality",
            Value::Count(r.fragment_violations as u64),
            r.fragment_violations == 0,
            "",
        ));
        checks.push(Check::test(
            "witness-sizes",
            Value::Count(r.size_violations as u64),
            r.size_violations == 0,
            "",
        ));
    }
    Ok(Outcome {
        checks,
        certificate: None,
    })
}

fn small_cover_check(name: String, cert: &selector::ThresholdCertificate) -> Result<Check, String> {
    let recheck = cert.recheck().map_err(stage("recheck"))?;
    Ok(Check::test(
        name,
        Value::Exact(cert.cover.weight.clone()),
        cert.is_small() && recheck,
        format!("family size {}", cert.family.len()),
    ))
}

fn theorems(cfg: &CampaignConfig, w: &WeightedFamily, p: &Q) -> Result<Outcome, String> {
    let n = w.ground();
    guard_n(cfg, n)?;
    let (ok_hyp, check) = not_small(cfg, w, p)?;
    let mut checks = vec![check];
    let nq = rational::qi(n as i64);
    if ok_hyp && w.normalization() == Normalization::Exact {
        let (value, ok) = selector::verify_main2(w, p, cfg.limits).map_err(stage("main2"))?;
        checks.push(Check::test("main2", Value::Exact(value), ok, ">= 1/220"));
    }
    let rows: Vec<Vec<Q>> = w.members().iter().map(|m| m.dense()).collect();
    for m in 1..=n {
        let mq = rational::qi(m as i64);
        if ok_hyp && mq >= rational::qi(9) * &nq * p {
            let (value, ok) = selector::verify_master(w, p, m, cfg.limits).map_err(stage("master"))?;
            checks.push(Check::test(format!("master m={m}"), Value::Exact(value), ok, ">= 1/10"));
            let chain = selector::conditional_chain(w, p, m).map_err(stage("conditional"))?;
            checks.push(Check::test(
                format!("conditional m={m}"),
                Value::Exact(chain.conditional.clone()),
                chain.conditional >= chain.lower_bound,
                format!("lower bound {}", rational::fmt(&chain.lower_bound)),
            ));
        }
        if rows.is_empty() {
            continue;
        }
        for k in 2..=3 {
            if k * m <= n {
                let (big, rhs, ok) = selector::verify_porsup(&rows, m, k, ExpMode::Exact).map_err(stage("porsup"))?;
                checks.push(Check::test(
                    format!("porsup m={m} k={k}"),
                    Value::None,
                    ok,
                    format!("{big:.6} <= {rhs:.6}"),
                ));
            }
        }
        let cert = selector::certify_malarodzina(&rows, m, &rational::qi(11), cfg.limits)
            .map_err(stage("uniform-threshold"))?;
        checks.push(small_cover_check(format!("m/9n-small m={m}"), &cert)?);
        if &cfg.constants.big_c * &mq < nq {
            let cert =
                selector::remark1_certificate(&rows, m, &cfg.constants.big_c, cfg.limits).map_err(stage("remark1"))?;
            checks.push(small_cover_check(format!("Cm/n-small m={m}"), &cert)?);
        }
    }
    Ok(Outcome {
        checks,
        certificate: None,
    })
}

fn selector_theorems(cfg: &CampaignConfig, inst: &SelectorInstance) -> Result<Outcome, String> {
    let n = inst.n();
    guard_n(cfg, n)?;
    let mut checks = Vec::new();
    for m in 1..=n {
        for k in 2..=3 {
            if k * m <= n {
                let (big, rhs, ok) =
                    selector::verify_porsup(inst.vectors(), m, k, ExpMode::Exact).map_err(stage("porsup"))?;
                checks.push(Check::test(
                    format!("porsup m={m} k={k}"),
                    Value::None,
                    ok,
                    format!("{big:.6} <= {rhs:.6}"),
                ));
            }
        }
    }
    match SplitParams::choose(inst.p(), n) {
        Ok(sp) if sp.coarse_probability(inst.p()) < Q::from_integer(1.into()) => {
            let cert = selector::split_certify(inst, &sp, cfg.limits).map_err(stage("split"))?;
            let ok = cert.is_small() && cert.recheck().map_err(stage("split"))?;
            checks.push(Check::test(
                "split",
                Value::Exact(cert.coarse.cover.weight.clone()),
                ok,
                format!("C = {}", rational::fmt(&cert.c)),
            ));
        }
        _ => checks.push(Check::new("split", Value::None, Status::Skipped, "no admissible C")),
    }
    Ok(Outcome {
        checks,
        certificate: None,
    })
}

fn s_hat_from(est: &Estimate) -> Result<Q, String> {
    let s = rational::from_f64_grid(est.mean, S_HAT_GRID);
    if s <= Q::from_integer(0.into()) {
        return Err("stage estimate: S estimate is not positive".into());
    }
    Ok(s)
}

fn certificate_checks(cert: &DeltaSmallCertificate, checks: &mut Vec<Check>) {
    checks.push(Check::info("slices", Value::Count(cert.slice_count())));
    for s in cert.process.stages() {
        checks.push(Check::info(
            format!("stage-total {}", s.name()),
            Value::Exact(cert.stage_total(*s)),
        ));
    }
    checks.push(Check::test(
        "total-bound",
        Value::Exact(cert.total_bound()),
        cert.total_bound() <= rational::half(),
        "<= 1/2",
    ));
}

fn report_checks(report: &VerifyReport, s_hat: &Q, checks: &mut Vec<Check>) {
    checks.push(Check::info("events", Value::Count(report.events)));
    checks.push(Check::test(
        "containment-violations",
        Value::Count(report.violations),
        report.violations == 0,
        "",
    ));
    for (stage, hits, bound) in &report.stages {
        let (f, se) = VerifyReport::frequency(*hits, report.trials);
        checks.push(Check::test(
            format!("frequency {}", stage.name()),
            Value::Estimate(Estimate {
                mean: f,
                std_err: se,
                trials: report.trials,
            }),
            f <= rational::to_f64(bound) + 4.0 * se + 1e-12,
            format!("bound {:.6e}", rational::to_f64(bound)),
        ));
    }
    let two = 2.0 * rational::to_f64(s_hat);
    checks.push(Check::test(
        "discretized-sup",
        Value::Estimate(report.s_prime),
        report.s_prime.mean <= two + 4.0 * report.s_prime.std_err,
        format!("<= 2Ŝ = {two:.6}"),
    ));
}

fn simulate_id(cfg: &CampaignConfig, spec: &LevyMeasureSpec, seed: u64) -> Result<Outcome, String> {
    let est = levy::estimate_s(spec, cfg.trials, seed);
    let s_hat = s_hat_from(&est)?;
    let mut checks = vec![
        Check::info("S", Value::Estimate(est)),
        Check::info("S-hat", Value::Exact(s_hat.clone())),
    ];
    let id = IdConfig {
        k: cfg.k_for(Mode::SimulateId),
        ..IdConfig::default()
    };
    let part = levy::prepare(spec, &s_hat, &id).map_err(stage("tune"))?;
    levy::check_slicing(&part, &s_hat).map_err(stage("slicing"))?;
    let cert = levy::build_id_certificate(spec, &part, &id.k, &s_hat, id.orbit).map_err(stage("certificate"))?;
    certificate_checks(&cert, &mut checks);
    let text = cert.to_text();
    let parsed = DeltaSmallCertificate::from_text(&text).map_err(stage("recheck"))?;
    let ok = parsed == cert && levy::recheck_id_certificate(&parsed, spec, id.orbit).map_err(stage("recheck"))?;
    checks.push(Check::test(
        "recheck",
        Value::None,
        ok,
        "entries recomputed from the file",
    ));
    let report =
        levy::verify_id_certificate(&cert, spec, cfg.trials, mc::derive_seed(seed, 1)).map_err(stage("verify"))?;
    report_checks(&report, &s_hat, &mut checks);
    Ok(Outcome {
        checks,
        certificate: Some(("cert", text)),
    })
}

fn simulate_empirical(cfg: &CampaignConfig, inst: &EmpiricalInstance, seed: u64) -> Result<Outcome, String> {
    let mut checks = Vec::new();
    let s_hat = match empirical::exact_s_emp(inst) {
        Ok(s) => {
            checks.push(Check::info("S", Value::Exact(s.clone())));
            s
        }
        Err(_) if !cfg.exact_only => {
            let est = empirical::estimate_s_emp(inst, cfg.trials, seed);
            checks.push(Check::info("S", Value::Estimate(est)));
            s_hat_from(&est)?
        }
        Err(e) => return Err(stage("estimate")(e)),
    };
    if s_hat <= Q::from_integer(0.into()) {
        return Err("stage estimate: S is zero".into());
    }
    let ec = EmpConfig {
        k: cfg.k_for(Mode::SimulateEmpirical),
        ..EmpConfig::default()
    };
    let part = empirical::prepare_emp(inst, &s_hat, &ec).map_err(stage("tune"))?;
    empirical::check_slicing_emp(&part).map_err(stage("slicing"))?;
    let cert = empirical::build_emp_certificate(inst, &part, &ec.k, &s_hat, ec.orbit).map_err(stage("certificate"))?;
    certificate_checks(&cert, &mut checks);
    let n = rational::qi(part.slice_count().max(1) as i64);
    let prob = rational::qi(4) * rational::e_upper() * rational::qi(inst.d() as i64) / n;
    checks.push(Check::info(
        "final-weight 4ed/n",
        Value::Exact(empirical::final_weight_at(&cert, &prob)),
    ));
    let text = cert.to_text();
    let parsed = DeltaSmallCertificate::from_text(&text).map_err(stage("recheck"))?;
    let ok = parsed == cert
        && empirical::recheck_emp_certificate(&parsed, inst, OrbitLimits::default()).map_err(stage("recheck"))?;
    checks.push(Check::test(
        "recheck",
        Value::None,
        ok,
        "entries recomputed from the file",
    ));
    let report = empirical::verify_emp_certificate(&cert, inst, cfg.trials, mc::derive_seed(seed, 1))
        .map_err(stage("verify"))?;
    report_checks(&report, &s_hat, &mut checks);
    Ok(Outcome {
        checks,
        certificate: Some(("cert", text)),
    })
}

/// Parses certificate files written by [`run`] and re-checks each against its
/// instance.
pub fn recheck_file(cert_path: &Path, inst: &Instance) -> Result<bool, String> {
    let text = std::fs::read_to_string(cert_path).map_err(|e| format!("{}: {e}", cert_path.display()))?;
    let fail = |e: selcert::Error| format!("{}: {e}", cert_path.display());
    match inst {
        Instance::Selector(s) => {
            let parsed = format::parse_cover(&text).map_err(fail)?;
            let family = selector::sup_threshold_family(s.vectors(), &parsed.threshold).map_err(fail)?;
            parsed.cover.recheck(&family).map_err(fail)
        }
        Instance::LevySpec(spec) => {
            let cert = DeltaSmallCertificate::from_text(&text).map_err(fail)?;
            Ok(cert.check_budgets().is_ok()
                && levy::recheck_id_certificate(&cert, spec, OrbitLimits::default()).map_err(fail)?)
        }
        Instance::Empirical(e) => {
            let cert = DeltaSmallCertificate::from_text(&text).map_err(fail)?;
            Ok(cert.check_budgets().is_ok()
                && empirical::recheck_emp_certificate(&cert, e, OrbitLimits::default()).map_err(fail)?)
        }
        _ => Err("no certificate format for this kind".into()),
    }
}
