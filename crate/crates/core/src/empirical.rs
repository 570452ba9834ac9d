//! Positive empirical processes `sup_t Σ_{i<=d} t(X_i)` for iid uniform
//! samples on `[0,1)` and nonnegative step functions `t`.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;

use crate::certificate::{
    self, CellRecord, CountProblem, DeltaSmallCertificate, Entry, Generator, Observation, OrbitLimits, Process, Stage,
};
use crate::error::{Error, Result};
use crate::mc::{self, Estimate};
use crate::rational::{self, Q};
use crate::selector;

pub const DEFAULT_K: i64 = 2240;
pub const MAX_GRID: u32 = 24;
pub const EXACT_S_MAX_OUTCOMES: u64 = 200_000;
pub const BRIDGE_MAX_OUTCOMES: u64 = 1_000_000;

/// `2 · (8/7) · (360e + 1)`, rounded up to `2240`.
pub fn k_derived() -> Q {
    rational::qi(2) * rational::q(8, 7) * (rational::qi(360) * rational::e_upper() + rational::qi(1))
}

/// Piecewise constant function on `[0,1)`: `values[i]` on `[starts[i], starts[i+1])`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepFunction {
    starts: Vec<Q>,
    values: Vec<Q>,
}

impl StepFunction {
    pub fn new(pieces: Vec<(Q, Q)>) -> Result<Self> {
        if pieces.first().is_none_or(|(s, _)| !s.is_zero()) {
            return Err(Error::InvalidParameter("first piece must start at 0".into()));
        }
        for w in pieces.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::InvalidParameter("piece starts must increase".into()));
            }
        }
        if pieces.last().is_some_and(|(s, _)| s >= &Q::one()) {
            return Err(Error::InvalidParameter("piece starts must lie in [0,1)".into()));
        }
        if pieces.iter().any(|(_, v)| v.is_negative()) {
            return Err(Error::InvalidParameter("step functions must be nonnegative".into()));
        }
        let (starts, values) = pieces.into_iter().unzip();
        Ok(StepFunction { starts, values })
    }

    pub fn constant(v: Q) -> Result<Self> {
        Self::new(vec![(Q::zero(), v)])
    }

    /// `c · 1_{[a,b)}`.
    pub fn indicator(a: Q, b: Q, c: Q) -> Result<Self> {
        let mut pieces = Vec::new();
        if a.is_positive() {
            pieces.push((Q::zero(), Q::zero()));
        }
        pieces.push((a, c));
        if b < Q::one() {
            pieces.push((b, Q::zero()));
        }
        Self::new(pieces)
    }

    pub fn pieces(&self) -> impl Iterator<Item = (&Q, &Q)> {
        self.starts.iter().zip(&self.values)
    }

    pub fn value_at(&self, x: &Q) -> &Q {
        let i = self.starts.partition_point(|s| s <= x);
        &self.values[i.saturating_sub(1)]
    }

    pub fn integral(&self) -> Q {
        let mut ends: Vec<Q> = self.starts[1..].to_vec();
        ends.push(Q::one());
        self.starts
            .iter()
            .zip(&ends)
            .zip(&self.values)
            .map(|((a, b), v)| (b - a) * v)
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EmpiricalInstance {
    d: u64,
    functions: Vec<StepFunction>,
}

/// Maximal intervals on which every function is constant.
#[derive(Clone, Debug)]
struct Atoms {
    starts: Vec<Q>,
    ends: Vec<Q>,
    /// `values[t][i]`.
    values: Vec<Vec<Q>>,
    starts_f: Vec<f64>,
    values_f: Vec<Vec<f64>>,
}

impl Atoms {
    fn locate(&self, x: f64) -> usize {
        self.starts_f.partition_point(|&s| s <= x).saturating_sub(1)
    }
}

impl EmpiricalInstance {
    pub fn new(d: u64, functions: Vec<StepFunction>) -> Result<Self> {
        if functions.is_empty() {
            return Err(Error::InvalidParameter("index set T is empty".into()));
        }
        if d > 1_000_000 {
            return Err(Error::InvalidParameter(format!("d = {d} is too large")));
        }
        Ok(EmpiricalInstance { d, functions })
    }

    pub fn d(&self) -> u64 {
        self.d
    }

    pub fn functions(&self) -> &[StepFunction] {
        &self.functions
    }

    fn atoms(&self) -> Atoms {
        let mut starts: Vec<Q> = self.functions.iter().flat_map(|f| f.starts.iter().cloned()).collect();
        starts.sort();
        starts.dedup();
        let mut ends: Vec<Q> = starts[1..].to_vec();
        ends.push(Q::one());
        let values: Vec<Vec<Q>> = self
            .functions
            .iter()
            .map(|f| starts.iter().map(|s| f.value_at(s).clone()).collect())
            .collect();
        Atoms {
            starts_f: starts.iter().map(rational::to_f64).collect(),
            values_f: values
                .iter()
                .map(|row| row.iter().map(rational::to_f64).collect())
                .collect(),
            starts,
            ends,
            values,
        }
    }

    /// `μ(t >= M)`.
    pub fn tail_mass(&self, t: usize, m: &Q) -> Q {
        let f = &self.functions[t];
        let mut ends: Vec<Q> = f.starts[1..].to_vec();
        ends.push(Q::one());
        f.starts
            .iter()
            .zip(&ends)
            .zip(&f.values)
            .filter(|(_, v)| *v >= m)
            .map(|((a, b), _)| b - a)
            .sum()
    }

    pub fn sample_sup<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let atoms = self.atoms();
        let xs: Vec<f64> = (0..self.d).map(|_| rng.random::<f64>()).collect();
        sup_at(&atoms, &xs)
    }
}

fn sup_at(atoms: &Atoms, xs: &[f64]) -> f64 {
    let idx: Vec<usize> = xs.iter().map(|&x| atoms.locate(x)).collect();
    atoms
        .values_f
        .iter()
        .map(|row| idx.iter().map(|&i| row[i]).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Monte Carlo `S = E sup_t Σ_i t(X_i)`.
pub fn estimate_s_emp(inst: &EmpiricalInstance, trials: u64, seed: u64) -> Estimate {
    let atoms = inst.atoms();
    let d = inst.d as usize;
    mc::estimate(seed, 0, trials, |rng| {
        let xs: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        sup_at(&atoms, &xs)
    })
}

/// Exact `S` by summing over atom occupancy vectors, when there are at most
/// [`EXACT_S_MAX_OUTCOMES`] of them.
pub fn exact_s_emp(inst: &EmpiricalInstance) -> Result<Q> {
    let atoms = inst.atoms();
    let r = atoms.starts.len() as u64;
    let outcomes = rational::binomial(inst.d + r - 1, r - 1);
    if outcomes > BigUint::from(EXACT_S_MAX_OUTCOMES) {
        return Err(Error::GuardExceeded {
            what: "occupancy vectors",
            actual: outcomes.to_usize().unwrap_or(usize::MAX),
            limit: EXACT_S_MAX_OUTCOMES as usize,
        });
    }
    let masses: Vec<Q> = atoms.starts.iter().zip(&atoms.ends).map(|(a, b)| b - a).collect();
    let mut counts = vec![0u64; r as usize];
    let mut total = Q::zero();
    compositions(inst.d, 0, &mut counts, &mut |c| {
        let mut weight = rational::from_biguint(&multinomial(inst.d, c));
        for (m, &k) in masses.iter().zip(c) {
            weight *= rational::pow(m, k as usize);
        }
        if weight.is_zero() {
            return;
        }
        let sup = atoms
            .values
            .iter()
            .map(|row| row.iter().zip(c).map(|(v, &k)| v * rational::qi(k as i64)).sum::<Q>())
            .max()
            .unwrap_or_else(Q::zero);
        total += weight * sup;
    });
    Ok(total)
}

fn compositions(left: u64, i: usize, counts: &mut Vec<u64>, f: &mut impl FnMut(&[u64])) {
    if i + 1 == counts.len() {
        counts[i] = left;
        f(counts);
        return;
    }
    for k in 0..=left {
        counts[i] = k;
        compositions(left - k, i + 1, counts, f);
    }
    counts[i] = 0;
}

fn multinomial(d: u64, counts: &[u64]) -> BigUint {
    let mut left = d;
    let mut acc = BigUint::one();
    for &c in counts {
        acc *= rational::binomial(left, c);
        left -= c;
    }
    acc
}

#[derive(Clone, Debug)]
pub struct EmpCell {
    pub levels: Vec<i64>,
    pub mass: Q,
    pub slices: u64,
    pub remainder: Q,
    /// Atom intervals in increasing order with the mass before each.
    pieces: Vec<(f64, f64, f64)>,
}

impl EmpCell {
    pub fn coeff_units(&self, t: usize) -> u64 {
        self.levels[t] as u64 + 1
    }
}

#[derive(Clone, Debug)]
pub struct EmpiricalPartition {
    grid: u32,
    trunc: u64,
    p: Q,
    d: u64,
    cells: Vec<EmpCell>,
    /// Per atom: its cell, or `None` when some function reaches `M` there.
    atom_cell: Vec<Option<usize>>,
    atoms: Atoms,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmpLocation {
    Tail,
    Slice { cell: usize, slice: u64 },
    Remainder { cell: usize },
}

/// Level-band cells on `∩_t {t < M}` sliced into pieces of mass `p`.
/// Mass and `[start, end)` pieces of a cell under construction.
type CellBuild = (Q, Vec<(Q, Q)>);

pub fn discretize_emp(inst: &EmpiricalInstance, grid: u32, trunc: u64, p: &Q) -> Result<EmpiricalPartition> {
    if grid > MAX_GRID {
        return Err(Error::GuardExceeded {
            what: "N",
            actual: grid as usize,
            limit: MAX_GRID as usize,
        });
    }
    if trunc == 0 || trunc > 1 << 20 {
        return Err(Error::InvalidParameter(format!(
            "truncation level M = {trunc} outside [1, 2^20]"
        )));
    }
    if !p.is_positive() {
        return Err(Error::InvalidParameter("slice mass p must be positive".into()));
    }
    let atoms = inst.atoms();
    let scale = rational::qi(1i64 << (2 * grid));
    let m = rational::qi(trunc as i64);
    let mut builds: BTreeMap<Vec<i64>, CellBuild> = BTreeMap::new();
    let mut keys = Vec::with_capacity(atoms.starts.len());
    for i in 0..atoms.starts.len() {
        if atoms.values.iter().any(|row| row[i] >= m) {
            keys.push(None);
            continue;
        }
        let levels: Vec<i64> = atoms
            .values
            .iter()
            .map(|row| (&row[i] * &scale).floor().to_integer().to_i64().unwrap_or(i64::MAX))
            .collect();
        let b = builds.entry(levels.clone()).or_insert_with(|| (Q::zero(), Vec::new()));
        b.0 += &atoms.ends[i] - &atoms.starts[i];
        b.1.push((atoms.starts[i].clone(), atoms.ends[i].clone()));
        keys.push(Some(levels));
    }
    let order: BTreeMap<Vec<i64>, usize> = builds.keys().cloned().enumerate().map(|(i, k)| (k, i)).collect();
    let cells: Vec<EmpCell> = builds
        .into_iter()
        .map(|(levels, (mass, ivs))| {
            let slices = rational::floor_to_u64(&(&mass / p));
            let remainder = &mass - rational::qi(slices as i64) * p;
            let mut before = 0.0;
            let pieces = ivs
                .iter()
                .map(|(a, b)| {
                    let piece = (rational::to_f64(a), rational::to_f64(b), before);
                    before += rational::to_f64(&(b - a));
                    piece
                })
                .collect();
            EmpCell {
                levels,
                mass,
                slices,
                remainder,
                pieces,
            }
        })
        .collect();
    Ok(EmpiricalPartition {
        grid,
        trunc,
        p: p.clone(),
        d: inst.d,
        atom_cell: keys.into_iter().map(|k| k.map(|k| order[&k])).collect(),
        cells,
        atoms,
    })
}

impl EmpiricalPartition {
    pub fn grid(&self) -> u32 {
        self.grid
    }

    pub fn trunc(&self) -> u64 {
        self.trunc
    }

    pub fn p(&self) -> &Q {
        &self.p
    }

    pub fn cells(&self) -> &[EmpCell] {
        &self.cells
    }

    pub fn slice_count(&self) -> u64 {
        self.cells.iter().map(|c| c.slices).sum()
    }

    pub fn cell_mass(&self) -> Q {
        self.cells.iter().map(|c| &c.mass).sum()
    }

    pub fn remainder_mass(&self) -> Q {
        self.cells.iter().map(|c| &c.remainder).sum()
    }

    pub fn coefficient(&self, cell: usize, t: usize) -> Q {
        rational::q(self.cells[cell].coeff_units(t) as i64, 1i64 << (2 * self.grid))
    }

    pub fn records(&self) -> Vec<CellRecord> {
        self.cells
            .iter()
            .map(|c| CellRecord {
                levels: c.levels.clone(),
                mass: c.mass.clone(),
                slices: c.slices,
            })
            .collect()
    }

    pub fn locate(&self, x: f64) -> EmpLocation {
        let atom = self.atoms.locate(x);
        let Some(cell) = self.atom_cell[atom] else {
            return EmpLocation::Tail;
        };
        let c = &self.cells[cell];
        let (lo, _, before) = c
            .pieces
            .iter()
            .copied()
            .find(|&(lo, hi, _)| lo <= x && x < hi)
            .unwrap_or(c.pieces[c.pieces.len() - 1]);
        let slice = ((before + (x - lo)) / rational::to_f64(&self.p)).floor().max(0.0) as u64;
        if slice < c.slices {
            EmpLocation::Slice { cell, slice }
        } else {
            EmpLocation::Remainder { cell }
        }
    }

    /// Observation of one sample plus `sup_t Σ_{sliced X_i} t(A)`.
    pub fn observe(&self, xs: &[f64]) -> (Observation, f64) {
        let dim = self.atoms.values.len();
        let m = self.trunc as f64;
        let mut obs = Observation::new(dim);
        let mut hits = Vec::new();
        let mut sliced = vec![0u64; dim];
        for &x in xs {
            let atom = self.atoms.locate(x);
            for t in 0..dim {
                if self.atoms.values_f[t][atom] >= m {
                    obs.tail_hits[t] += 1;
                }
            }
            match self.locate(x) {
                EmpLocation::Slice { cell, slice } => {
                    hits.push((cell, slice));
                    for (t, s) in sliced.iter_mut().enumerate() {
                        *s += self.cells[cell].coeff_units(t);
                    }
                }
                EmpLocation::Remainder { cell } => *obs.remainder_hits.entry(cell).or_default() += 1,
                EmpLocation::Tail => {}
            }
        }
        obs.set_slice_hits(hits);
        let scale = (1u64 << (2 * self.grid)) as f64;
        (obs, sliced.iter().map(|&s| s as f64 / scale).fold(0.0, f64::max))
    }
}

/// `1 - (1-p)^d - d p (1-p)^{d-1}`.
pub fn double_hit_probability(p: &Q, d: u64) -> Q {
    if d < 2 {
        return Q::zero();
    }
    let comp = Q::one() - p;
    Q::one() - rational::pow(&comp, d as usize) - rational::qi(d as i64) * p * rational::pow(&comp, d as usize - 1)
}

/// `(1/(1-p)) C(d,k) (pk)^k`.
pub fn final_bound(p: &Q, d: u64, k: u64) -> Q {
    rational::from_biguint(&rational::binomial(d, k)) * rational::pow(&(p * rational::qi(k as i64)), k as usize)
        / (Q::one() - p)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EmpTuning {
    pub grid: u32,
    pub trunc: u64,
    pub p: Q,
}

/// Checks the slicing preconditions, naming the first one violated.
pub fn check_slicing_emp(part: &EmpiricalPartition) -> Result<()> {
    let d = part.d;
    if let Some(c) = part.cells.iter().find(|c| c.slices < 16 * d) {
        return Err(Error::Unsatisfiable(format!(
            "m(A) >= 16d fails for a cell with {} slices",
            c.slices
        )));
    }
    let dq = rational::qi(d as i64);
    if &dq * part.remainder_mass() > rational::q(1, 16) {
        return Err(Error::Unsatisfiable("d Σ μ(A_*) <= 1/16".into()));
    }
    let n = rational::qi(part.slice_count() as i64);
    if &n * &part.p * &part.p * &dq * &dq > rational::q(1, 16) {
        return Err(Error::Unsatisfiable("n p² d² <= 1/16".into()));
    }
    Ok(())
}

/// Smallest `N` with `d 4^-N <= Ŝ`, smallest dyadic `M` with
/// `Σ_t μ(t >= M) <= 1/(16d)`, then the largest dyadic `p` meeting the slicing bounds.
pub fn tune_emp(inst: &EmpiricalInstance, s_hat: &Q) -> Result<EmpTuning> {
    if !s_hat.is_positive() {
        return Err(Error::InvalidParameter("S estimate must be positive".into()));
    }
    let d = rational::qi(inst.d as i64);
    let grid = (0..=MAX_GRID)
        .find(|&n| &d / rational::qi(1i64 << (2 * n)) <= *s_hat)
        .ok_or_else(|| Error::Unsatisfiable("d 4^-N <= S".into()))?;
    let budget = rational::q(1, 16) / d.clone().max(Q::one());
    let trunc = (0..=20)
        .map(|e| 1u64 << e)
        .find(|&m| {
            let mq = rational::qi(m as i64);
            (0..inst.functions.len()).map(|t| inst.tail_mass(t, &mq)).sum::<Q>() <= budget
        })
        .ok_or_else(|| Error::Unsatisfiable("Σ_t μ(t >= M) <= 1/(16d)".into()))?;
    let mut p = rational::q(1, 2);
    for _ in 0..62 {
        let part = discretize_emp(inst, grid, trunc, &p)?;
        if check_slicing_emp(&part).is_ok() {
            return Ok(EmpTuning { grid, trunc, p });
        }
        p /= rational::qi(2);
    }
    Err(Error::Unsatisfiable(
        "no dyadic p >= 2^-63 meets the slicing bounds".into(),
    ))
}

#[derive(Clone, Debug)]
pub struct EmpConfig {
    pub k: Q,
    pub grid: Option<u32>,
    pub trunc: Option<u64>,
    pub p: Option<Q>,
    pub orbit: OrbitLimits,
}

impl Default for EmpConfig {
    fn default() -> Self {
        EmpConfig {
            k: rational::qi(DEFAULT_K),
            grid: None,
            trunc: None,
            p: None,
            orbit: OrbitLimits::default(),
        }
    }
}

pub fn prepare_emp(inst: &EmpiricalInstance, s_hat: &Q, cfg: &EmpConfig) -> Result<EmpiricalPartition> {
    let tuned = match (cfg.grid, cfg.trunc, &cfg.p) {
        (Some(grid), Some(trunc), Some(p)) => EmpTuning {
            grid,
            trunc,
            p: p.clone(),
        },
        _ => {
            let t = tune_emp(inst, s_hat)?;
            EmpTuning {
                grid: cfg.grid.unwrap_or(t.grid),
                trunc: cfg.trunc.unwrap_or(t.trunc),
                p: cfg.p.clone().unwrap_or(t.p),
            }
        }
    };
    discretize_emp(inst, tuned.grid, tuned.trunc, &tuned.p)
}

fn final_problem(part: &EmpiricalPartition, threshold: &Q) -> CountProblem {
    let scale = rational::qi(1i64 << (2 * part.grid));
    let dim = part.atoms.values.len();
    CountProblem {
        caps: part.cells.iter().map(|c| c.slices).collect(),
        coeffs: (0..dim)
            .map(|t| part.cells.iter().map(|c| c.coeff_units(t)).collect())
            .collect(),
        bar: (threshold * scale).ceil().to_integer().to_u128().unwrap_or(u128::MAX),
        max_total: Some(part.d),
    }
}

/// Every entry in proof order, without checking the stage budgets.
pub fn assemble_emp_certificate(
    inst: &EmpiricalInstance,
    part: &EmpiricalPartition,
    k: &Q,
    s_hat: &Q,
    orbit: OrbitLimits,
) -> Result<DeltaSmallCertificate> {
    if !s_hat.is_positive() {
        return Err(Error::InvalidParameter("S estimate must be positive".into()));
    }
    if inst.d == 0 {
        return Err(Error::InvalidParameter("d must be positive".into()));
    }
    let d = inst.d;
    let dq = rational::qi(d as i64);
    let one_over_d = Q::one() / &dq;
    let threshold = k * s_hat;
    let mut entries = Vec::new();
    let m = rational::qi(part.trunc as i64);
    for t in 0..inst.functions.len() {
        let tail = inst.tail_mass(t, &m);
        if tail.is_positive() {
            entries.push(Entry::single(Generator::Tail { t }, one_over_d.clone(), &dq * tail));
        }
    }
    for (cell, c) in part.cells.iter().enumerate() {
        if c.remainder.is_positive() {
            entries.push(Entry::single(
                Generator::Remainder { cell },
                one_over_d.clone(),
                &dq * &c.remainder,
            ));
        }
    }
    let double = double_hit_probability(&part.p, d);
    if double.is_positive() {
        for (cell, c) in part.cells.iter().enumerate() {
            if c.slices > 0 {
                entries.push(Entry {
                    generator: Generator::DoubleHit { cell },
                    u: rational::qi(2) / &dq,
                    multiplicity: c.slices.into(),
                    bound: double.clone(),
                });
            }
        }
    }
    let problem = final_problem(part, &threshold);
    let p = part.p.clone();
    entries.extend(certificate::final_stage_entries(
        &problem,
        part.slice_count(),
        |size| rational::q(size as i64, d as i64),
        |size| final_bound(&p, d, size),
        orbit,
    ));
    Ok(DeltaSmallCertificate {
        process: Process::Empirical,
        k: k.clone(),
        s_hat: s_hat.clone(),
        threshold,
        grid: part.grid,
        trunc: part.trunc,
        p: part.p.clone(),
        d,
        cells: part.records(),
        entries,
    })
}

pub fn build_emp_certificate(
    inst: &EmpiricalInstance,
    part: &EmpiricalPartition,
    k: &Q,
    s_hat: &Q,
    orbit: OrbitLimits,
) -> Result<DeltaSmallCertificate> {
    if k < &rational::qi(DEFAULT_K) {
        return Err(Error::InvalidParameter(format!(
            "K = {} is below the derived minimum {DEFAULT_K}",
            rational::fmt(k)
        )));
    }
    let cert = assemble_emp_certificate(inst, part, k, s_hat, orbit)?;
    cert.check_budgets()?;
    Ok(cert)
}

/// `Σ_G (prob)^{|G|}` over the final-stage sets; with `prob = 4ed/n` this is
/// the smallness weight of the selector cover.
pub fn final_weight_at(cert: &DeltaSmallCertificate, prob: &Q) -> Q {
    cert.entries
        .iter()
        .filter(|e| e.generator.stage() == Stage::Final)
        .map(|e| rational::from_biguint(&e.multiplicity) * rational::pow(prob, e.generator.size() as usize))
        .sum()
}

pub fn recheck_emp_certificate(
    cert: &DeltaSmallCertificate,
    inst: &EmpiricalInstance,
    orbit: OrbitLimits,
) -> Result<bool> {
    if cert.process != Process::Empirical || cert.d != inst.d || inst.d == 0 {
        return Ok(false);
    }
    let part = discretize_emp(inst, cert.grid, cert.trunc, &cert.p)?;
    if part.records() != cert.cells || cert.threshold != &cert.k * &cert.s_hat {
        return Ok(false);
    }
    let d = inst.d;
    let dq = rational::qi(d as i64);
    let m = rational::qi(part.trunc as i64);
    let double = double_hit_probability(&part.p, d);
    let caps: Vec<u64> = part.cells.iter().map(|c| c.slices).collect();
    let n = part.slice_count();
    for e in &cert.entries {
        let (u, mult, bound): (Q, BigUint, Q) = match &e.generator {
            Generator::Tail { t } if *t < inst.functions.len() => {
                (Q::one() / &dq, 1u32.into(), &dq * inst.tail_mass(*t, &m))
            }
            Generator::Remainder { cell } => (Q::one() / &dq, 1u32.into(), &dq * &part.cells[*cell].remainder),
            Generator::DoubleHit { cell } => (rational::qi(2) / &dq, part.cells[*cell].slices.into(), double.clone()),
            g @ (Generator::Orbit { .. } | Generator::Cardinality { .. }) => {
                if let Generator::Orbit { counts } = g {
                    if counts.iter().any(|(a, c)| *c > caps[*a]) {
                        return Ok(false);
                    }
                }
                (
                    rational::q(g.size() as i64, d as i64),
                    certificate::final_multiplicity(g, &caps, n).unwrap_or_default(),
                    final_bound(&part.p, d, g.size()),
                )
            }
            _ => return Ok(false),
        };
        if e.u != u || e.multiplicity != mult || e.bound != bound {
            return Ok(false);
        }
    }
    let count = |stage: Stage| cert.entries.iter().filter(|e| e.generator.stage() == stage).count();
    let tails = (0..inst.functions.len())
        .filter(|&t| inst.tail_mass(t, &m).is_positive())
        .count();
    let rems = part.cells.iter().filter(|c| c.remainder.is_positive()).count();
    let doubles = if double.is_positive() {
        part.cells.iter().filter(|c| c.slices > 0).count()
    } else {
        0
    };
    if count(Stage::Tail) != tails || count(Stage::Remainder) != rems || count(Stage::DoubleHit) != doubles {
        return Ok(false);
    }
    let finals: Vec<&Entry> = cert
        .entries
        .iter()
        .filter(|e| e.generator.stage() == Stage::Final)
        .collect();
    let problem = final_problem(&part, &cert.threshold);
    Ok(certificate::final_cover_is_complete(&problem, &finals, orbit))
}

pub use crate::levy::VerifyReport;

/// Draws `trials` samples of size `d` and checks that every sample with
/// `sup_t Σ t(X_i) >= K Ŝ` fires some entry.
pub fn verify_emp_certificate(
    cert: &DeltaSmallCertificate,
    inst: &EmpiricalInstance,
    trials: u64,
    seed: u64,
) -> Result<VerifyReport> {
    let part = discretize_emp(inst, cert.grid, cert.trunc, &cert.p)?;
    if part.records() != cert.cells {
        return Err(Error::InvalidParameter(
            "certificate cells do not match the instance".into(),
        ));
    }
    let threshold = rational::to_f64(&cert.threshold);
    let stages = Process::Empirical.stages();
    let d = inst.d as usize;
    #[derive(Default)]
    struct Acc {
        events: u64,
        violations: u64,
        hits: Vec<u64>,
        n: u64,
        sum: f64,
        sum_sq: f64,
    }
    let acc = mc::fold_trials(
        seed,
        1,
        trials,
        || Acc {
            hits: vec![0; stages.len()],
            ..Default::default()
        },
        |acc, rng| {
            let xs: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
            let (obs, s_prime) = part.observe(&xs);
            acc.n += 1;
            acc.sum += s_prime;
            acc.sum_sq += s_prime * s_prime;
            let mut any = false;
            for (i, stage) in stages.iter().enumerate() {
                if cert
                    .entries
                    .iter()
                    .filter(|e| e.generator.stage() == *stage)
                    .any(|e| cert.fires(e, &obs))
                {
                    acc.hits[i] += 1;
                    any = true;
                }
            }
            if sup_at(&part.atoms, &xs) >= threshold {
                acc.events += 1;
                if !any {
                    acc.violations += 1;
                }
            }
        },
        |mut a, b| {
            for (x, y) in a.hits.iter_mut().zip(b.hits) {
                *x += y;
            }
            Acc {
                events: a.events + b.events,
                violations: a.violations + b.violations,
                hits: a.hits,
                n: a.n + b.n,
                sum: a.sum + b.sum,
                sum_sq: a.sum_sq + b.sum_sq,
            }
        },
    );
    let n = acc.n.max(1) as f64;
    let mean = acc.sum / n;
    let var = if acc.n > 1 {
        ((acc.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(VerifyReport {
        trials,
        events: acc.events,
        violations: acc.violations,
        stages: stages
            .iter()
            .zip(&acc.hits)
            .map(|(s, h)| (*s, *h, cert.stage_total(*s)))
            .collect(),
        s_prime: Estimate {
            mean,
            std_err: (var / n).sqrt(),
            trials: acc.n,
        },
    })
}

/// Colex rank of a sorted `d`-subset of `{0..s}`.
pub fn subset_rank(sorted: &[u64]) -> u64 {
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| rational::binomial(x, i as u64 + 1).to_u64().unwrap_or(u64::MAX))
        .sum()
}

/// Draws `d` uniform points on `[0,1)` over `s` slices of mass `p` (the rest
/// of the interval is outside every slice) and tallies the occupied set by
/// colex rank on paths where the points sit in distinct slices.
pub fn bridge_occupancy_counts(s: u64, p: &Q, d: u64, trials: u64, seed: u64) -> Result<Vec<u64>> {
    if rational::qi(s as i64) * p > Q::one() || d > s || d == 0 {
        return Err(Error::InvalidParameter("need s p <= 1 and 1 <= d <= s".into()));
    }
    let count = rational::binomial(s, d).to_usize().unwrap_or(usize::MAX);
    if count > 1 << 20 {
        return Err(Error::GuardExceeded {
            what: "C(s,d)",
            actual: count,
            limit: 1 << 20,
        });
    }
    let cells = count;
    let pf = rational::to_f64(p);
    Ok(mc::fold_trials(
        seed,
        2,
        trials,
        || vec![0u64; cells],
        |acc, rng| {
            let mut occ: Vec<u64> = Vec::with_capacity(d as usize);
            for _ in 0..d {
                let k = (rng.random::<f64>() / pf).floor() as u64;
                if k >= s || occ.contains(&k) {
                    return;
                }
                occ.push(k);
            }
            occ.sort_unstable();
            acc[subset_rank(&occ) as usize] += 1;
        },
        |mut a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
            a
        },
    ))
}

/// Exact comparison behind the uniform-subset bridge.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct XyBridge {
    /// `E sup_t Σ_{A∈X} t(A) X(A)`.
    pub e_x: Q,
    /// `E_Y sup_t Σ_{A∈Y} t(A)` for `Y` uniform on `d`-subsets of slices.
    pub e_y: Q,
    /// `P(|X| = d, every X(A) <= 1)`.
    pub p_good: Q,
}

impl XyBridge {
    /// `E_X >= P(good) · E_Y`, which always holds.
    pub fn conditional_holds(&self) -> bool {
        self.e_x >= &self.p_good * &self.e_y
    }

    /// `(8/7) E_X >= E_Y` when `P(good) >= 7/8`; `None` otherwise.
    pub fn eight_sevenths(&self) -> Option<bool> {
        (self.p_good >= rational::q(7, 8)).then(|| rational::q(8, 7) * &self.e_x >= self.e_y)
    }
}

/// Enumerates every placement of `d` points among `s` slices of mass `p`
/// and the outside.
pub fn xy_bridge_exact(vectors: &[Vec<Q>], p: &Q, d: u64) -> Result<XyBridge> {
    let s = vectors.first().map_or(0, Vec::len) as u64;
    let outside = Q::one() - rational::qi(s as i64) * p;
    if outside.is_negative() || !p.is_positive() {
        return Err(Error::InvalidParameter("need p > 0 and s p <= 1".into()));
    }
    if d == 0 || d > s {
        return Err(Error::InvalidParameter("need 1 <= d <= s".into()));
    }
    let outcomes = (s + 1).checked_pow(d as u32).unwrap_or(u64::MAX);
    if outcomes > BRIDGE_MAX_OUTCOMES {
        return Err(Error::GuardExceeded {
            what: "(s+1)^d",
            actual: outcomes as usize,
            limit: BRIDGE_MAX_OUTCOMES as usize,
        });
    }
    let mut e_x = Q::zero();
    let mut p_good = Q::zero();
    let mut digits = vec![0u64; d as usize];
    for mut code in 0..outcomes {
        for dgt in digits.iter_mut() {
            *dgt = code % (s + 1);
            code /= s + 1;
        }
        let inside: Vec<usize> = digits.iter().filter(|&&k| k < s).map(|&k| k as usize).collect();
        let prob = rational::pow(p, inside.len()) * rational::pow(&outside, d as usize - inside.len());
        let sup = vectors
            .iter()
            .map(|row| inside.iter().map(|&k| &row[k]).sum::<Q>())
            .max()
            .unwrap_or_else(Q::zero);
        let mut sorted = inside.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() == d as usize {
            p_good += &prob;
        }
        e_x += prob * sup;
    }
    let e_y = selector::uniform_subset_expectation_exact(vectors, d as usize)?;
    Ok(XyBridge { e_x, e_y, p_good })
}

/// Reference instances used by the acceptance suite and the CLI.
pub fn reference_instances() -> Vec<(String, EmpiricalInstance)> {
    let q = rational::q;
    let ind = |a: Q, b: Q, c: Q| StepFunction::indicator(a, b, c).expect("valid step function");
    vec![
        (
            "spike".into(),
            EmpiricalInstance::new(10, vec![ind(q(0, 1), q(1, 4096), q(1, 1))]).expect("valid"),
        ),
        (
            "two-spikes".into(),
            EmpiricalInstance::new(
                8,
                vec![ind(q(0, 1), q(1, 64), q(1, 1)), ind(q(1, 128), q(3, 128), q(2, 1))],
            )
            .expect("valid"),
        ),
        (
            "half-indicator".into(),
            EmpiricalInstance::new(2, vec![ind(q(0, 1), q(1, 2), q(1, 1))]).expect("valid"),
        ),
        (
            "two-level".into(),
            EmpiricalInstance::new(
                3,
                vec![StepFunction::new(vec![(q(0, 1), q(1, 4)), (q(1, 2), q(3, 4))]).expect("valid")],
            )
            .expect("valid"),
        ),
    ]
}
