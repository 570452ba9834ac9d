//! Positive infinitely divisible processes `|X|_t = Σ_i t(Y_i)` driven by a
//! Poisson point process whose intensity is a finite mixture of uniform boxes.
//!
//! The discretization cuts the space into level-band cells, slices each cell
//! into pieces of mass exactly `p`, and assembles a δ-small certificate for
//! `{sup_t |X|_t >= K Ŝ}` stage by stage.

use std::collections::{BTreeMap, HashMap};

use num_traits::{Signed, ToPrimitive, Zero};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Poisson;

use crate::certificate::{
    self, CellRecord, CountProblem, DeltaSmallCertificate, Entry, Generator, Observation, OrbitLimits, Process, Stage,
};
use crate::error::{Error, Result};
use crate::mc::{self, Estimate};
use crate::rational::{self, Q};

pub const DEFAULT_K: i64 = 2500;
pub const MAX_GRID: u32 = 20;
pub const MAX_CELL_PIECES: usize = 400_000;
const SMALL: i64 = -1;

/// `K_min = (32/31) · 2 · 221 · 2e`: the final stage runs at `(31/32) K Ŝ`
/// and needs `221 · 2e · S̄` with `S̄ <= S' <= 2S`.
pub fn k_min() -> Q {
    rational::q(32, 31) * rational::qi(2 * 221 * 2) * rational::e_upper()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevyBox {
    pub mass: Q,
    pub lower: Vec<Q>,
    pub upper: Vec<Q>,
}

impl LevyBox {
    fn frac(&self, t: usize, lo: &Q, hi: &Q) -> Q {
        let a = self.lower[t].clone().max(lo.clone());
        let b = self.upper[t].clone().min(hi.clone());
        if b <= a {
            Q::zero()
        } else {
            (b - a) / (&self.upper[t] - &self.lower[t])
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevyMeasureSpec {
    labels: Vec<String>,
    boxes: Vec<LevyBox>,
}

impl LevyMeasureSpec {
    pub fn new(labels: Vec<String>, boxes: Vec<LevyBox>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidParameter("index set T is empty".into()));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = labels.iter().find(|l| !seen.insert(l.as_str())) {
            return Err(Error::InvalidParameter(format!("duplicate label `{dup}`")));
        }
        for (j, b) in boxes.iter().enumerate() {
            if !b.mass.is_positive() {
                return Err(Error::InvalidParameter(format!("box {} has nonpositive mass", j + 1)));
            }
            if b.lower.len() != labels.len() || b.upper.len() != labels.len() {
                return Err(Error::InvalidParameter(format!(
                    "box {} has the wrong number of coordinates",
                    j + 1
                )));
            }
            for (lo, hi) in b.lower.iter().zip(&b.upper) {
                if lo.is_negative() || hi <= lo {
                    return Err(Error::InvalidParameter(format!(
                        "box {} needs 0 <= lower < upper in every coordinate",
                        j + 1
                    )));
                }
            }
        }
        Ok(LevyMeasureSpec { labels, boxes })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn boxes(&self) -> &[LevyBox] {
        &self.boxes
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    /// `Λ`.
    pub fn total_mass(&self) -> Q {
        self.boxes.iter().map(|b| &b.mass).sum()
    }

    /// `ν(t >= M)`.
    pub fn tail_mass(&self, t: usize, m: &Q) -> Q {
        let inf = m + self.max_upper();
        self.boxes.iter().map(|b| &b.mass * b.frac(t, m, &inf)).sum()
    }

    /// `∫ t 1{t < h} dν`.
    pub fn small_integral(&self, t: usize, h: &Q) -> Q {
        self.boxes
            .iter()
            .filter(|b| &b.lower[t] < h)
            .map(|b| {
                let a = &b.lower[t];
                let top = b.upper[t].clone().min(h.clone());
                &b.mass * (&top * &top - a * a) / (rational::qi(2) * (&b.upper[t] - a))
            })
            .sum()
    }

    /// `ν(t < h for every t)`.
    pub fn all_small_mass(&self, h: &Q) -> Q {
        self.boxes
            .iter()
            .map(|b| {
                (0..self.dim())
                    .map(|t| b.frac(t, &Q::zero(), h))
                    .fold(b.mass.clone(), |acc, f| acc * f)
            })
            .sum()
    }

    fn max_upper(&self) -> Q {
        self.boxes
            .iter()
            .flat_map(|b| b.upper.iter())
            .max()
            .cloned()
            .unwrap_or_else(Q::zero)
    }
}

/// Float view of a spec for sampling.
pub struct Sampler {
    lambda: f64,
    pick: Option<WeightedIndex<f64>>,
    boxes: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Sampler {
    pub fn new(spec: &LevyMeasureSpec) -> Self {
        let weights: Vec<f64> = spec.boxes.iter().map(|b| rational::to_f64(&b.mass)).collect();
        let boxes = spec
            .boxes
            .iter()
            .map(|b| {
                (
                    b.lower.iter().map(rational::to_f64).collect(),
                    b.upper.iter().map(rational::to_f64).collect(),
                )
            })
            .collect();
        Sampler {
            lambda: weights.iter().sum(),
            pick: WeightedIndex::new(&weights).ok(),
            boxes,
        }
    }

    /// One realization of the point process.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Vec<f64>> {
        let Some(pick) = &self.pick else {
            return Vec::new();
        };
        let count = Poisson::new(self.lambda).map_or(0.0, |d| d.sample(rng)) as usize;
        (0..count)
            .map(|_| {
                let (lo, hi) = &self.boxes[pick.sample(rng)];
                lo.iter()
                    .zip(hi)
                    .map(|(a, b)| a + (b - a) * rng.random::<f64>())
                    .collect()
            })
            .collect()
    }
}

pub fn sample_ppp<R: Rng + ?Sized>(spec: &LevyMeasureSpec, rng: &mut R) -> Vec<Vec<f64>> {
    Sampler::new(spec).sample(rng)
}

pub fn sup_sum(points: &[Vec<f64>], dim: usize) -> f64 {
    (0..dim)
        .map(|t| points.iter().map(|x| x[t]).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Monte Carlo `S = E sup_t Σ_i t(Y_i)`.
pub fn estimate_s(spec: &LevyMeasureSpec, trials: u64, seed: u64) -> Estimate {
    let sampler = Sampler::new(spec);
    let dim = spec.dim();
    mc::estimate(seed, 0, trials, |rng| sup_sum(&sampler.sample(rng), dim))
}

#[derive(Clone, Debug)]
pub struct Cell {
    pub levels: Vec<i64>,
    pub mass: Q,
    pub slices: u64,
    pub remainder: Q,
    /// Pieces `(lo, hi, mass per unit length)` along the first coordinate.
    sweep: Vec<(f64, f64, f64)>,
}

impl Cell {
    /// Integer coefficient `4^N t(A)` for coordinate `t`.
    pub fn coeff_units(&self, t: usize) -> u64 {
        match self.levels[t] {
            SMALL => 0,
            k => k as u64 + 1,
        }
    }

    fn position(&self, x0: f64) -> f64 {
        self.sweep
            .iter()
            .map(|&(lo, hi, rate)| rate * (x0.min(hi) - lo).max(0.0))
            .sum()
    }
}

/// Where a point of the process lands.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Location {
    /// Some coordinate is at or above `M`.
    Tail,
    /// Every coordinate is below `2^-N`.
    AllSmall,
    Slice {
        cell: usize,
        slice: u64,
    },
    Remainder {
        cell: usize,
    },
}

#[derive(Clone, Debug)]
pub struct CellPartition {
    grid: u32,
    trunc: u64,
    p: Q,
    dim: usize,
    cells: Vec<Cell>,
    index: HashMap<Vec<i64>, usize>,
}

struct CellBuild {
    mass: Q,
    sweep: Vec<(Q, Q, Q)>,
}

fn level_pieces(b: &LevyBox, t: usize, grid: u32, trunc: u64) -> Vec<(i64, Q, Q)> {
    let scale = 1u64 << (2 * grid);
    let h = rational::q(1, 1i64 << grid);
    let m = rational::qi(trunc as i64);
    let (a, bb) = (&b.lower[t], &b.upper[t]);
    let mut out = Vec::new();
    if a < &h {
        out.push((SMALL, a.clone(), bb.clone().min(h.clone())));
    }
    let first = rational::floor_to_u64(&(a * rational::qi(scale as i64))).max(1u64 << grid);
    let last_excl = rational::ceil_to_u64(&(bb.clone().min(m) * rational::qi(scale as i64)));
    for k in first..last_excl.min(trunc * scale) {
        let lo = rational::q(k as i64, scale as i64).max(a.clone());
        let hi = rational::q(k as i64 + 1, scale as i64).min(bb.clone());
        if lo < hi {
            out.push((k as i64, lo, hi));
        }
    }
    out
}

/// Cells of `𝒜_N` on `∩_t {t < M}`, sliced into pieces of mass `p`.
pub fn discretize(spec: &LevyMeasureSpec, grid: u32, trunc: u64, p: &Q) -> Result<CellPartition> {
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
    let dim = spec.dim();
    let mut builds: BTreeMap<Vec<i64>, CellBuild> = BTreeMap::new();
    let mut pieces_seen = 0usize;
    for b in &spec.boxes {
        let per: Vec<Vec<(i64, Q, Q)>> = (0..dim).map(|t| level_pieces(b, t, grid, trunc)).collect();
        let combos = per.iter().map(Vec::len).product::<usize>();
        pieces_seen = pieces_seen.saturating_add(combos);
        if pieces_seen > MAX_CELL_PIECES {
            return Err(Error::GuardExceeded {
                what: "cell pieces",
                actual: pieces_seen,
                limit: MAX_CELL_PIECES,
            });
        }
        if combos == 0 {
            continue;
        }
        let widths: Vec<Q> = (0..dim).map(|t| &b.upper[t] - &b.lower[t]).collect();
        let mut idx = vec![0usize; dim];
        loop {
            let levels: Vec<i64> = (0..dim).map(|t| per[t][idx[t]].0).collect();
            if levels.iter().any(|&l| l != SMALL) {
                let mass = (0..dim)
                    .map(|t| (&per[t][idx[t]].2 - &per[t][idx[t]].1) / &widths[t])
                    .fold(b.mass.clone(), |acc, f| acc * f);
                let (_, lo0, hi0) = &per[0][idx[0]];
                let rate = &mass / (hi0 - lo0);
                let entry = builds.entry(levels).or_insert_with(|| CellBuild {
                    mass: Q::zero(),
                    sweep: Vec::new(),
                });
                entry.mass += &mass;
                entry.sweep.push((lo0.clone(), hi0.clone(), rate));
            }
            let mut t = 0;
            loop {
                if t == dim {
                    break;
                }
                idx[t] += 1;
                if idx[t] < per[t].len() {
                    break;
                }
                idx[t] = 0;
                t += 1;
            }
            if t == dim {
                break;
            }
        }
    }
    let mut cells = Vec::with_capacity(builds.len());
    let mut index = HashMap::new();
    for (levels, b) in builds {
        let slices = rational::floor_to_u64(&(&b.mass / p));
        let remainder = &b.mass - rational::qi(slices as i64) * p;
        index.insert(levels.clone(), cells.len());
        cells.push(Cell {
            levels,
            slices,
            remainder,
            sweep: b
                .sweep
                .iter()
                .map(|(lo, hi, r)| (rational::to_f64(lo), rational::to_f64(hi), rational::to_f64(r)))
                .collect(),
            mass: b.mass,
        });
    }
    Ok(CellPartition {
        grid,
        trunc,
        p: p.clone(),
        dim,
        cells,
        index,
    })
}

impl CellPartition {
    pub fn grid(&self) -> u32 {
        self.grid
    }

    pub fn trunc(&self) -> u64 {
        self.trunc
    }

    pub fn p(&self) -> &Q {
        &self.p
    }

    pub fn cells(&self) -> &[Cell] {
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

    /// `t(A)` as a rational.
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

    pub fn locate(&self, x: &[f64]) -> Location {
        let scale = (1u64 << (2 * self.grid)) as f64;
        let small = (1u64 << self.grid) as f64;
        let m = self.trunc as f64;
        if x.iter().any(|&v| v >= m) {
            return Location::Tail;
        }
        let levels: Vec<i64> = x
            .iter()
            .map(|&v| {
                let k = (v * scale).floor();
                if k < small {
                    SMALL
                } else {
                    k as i64
                }
            })
            .collect();
        if levels.iter().all(|&l| l == SMALL) {
            return Location::AllSmall;
        }
        let Some(&cell) = self.index.get(&levels) else {
            // Boundary of a box, a null set; keep it out of every slice.
            return Location::AllSmall;
        };
        let c = &self.cells[cell];
        let pos = c.position(x[0]) / rational::to_f64(&self.p);
        let slice = pos.floor().max(0.0) as u64;
        if slice < c.slices {
            Location::Slice { cell, slice }
        } else {
            Location::Remainder { cell }
        }
    }

    /// Sorts the points into an observation; also returns `Σ_B t(B) Y(B)`
    /// maximized over `t`.
    pub fn observe(&self, points: &[Vec<f64>]) -> (Observation, f64) {
        let small = 1.0 / (1u64 << self.grid) as f64;
        let m = self.trunc as f64;
        let mut obs = Observation::new(self.dim);
        let mut hits = Vec::new();
        let mut sliced = vec![0u64; self.dim];
        for x in points {
            for (t, &v) in x.iter().enumerate() {
                if v < small {
                    obs.small_sums[t] += v;
                }
                if v >= m {
                    obs.tail_hits[t] += 1;
                }
            }
            match self.locate(x) {
                Location::Slice { cell, slice } => {
                    hits.push((cell, slice));
                    for (t, s) in sliced.iter_mut().enumerate() {
                        *s += self.cells[cell].coeff_units(t);
                    }
                }
                Location::Remainder { cell } => *obs.remainder_hits.entry(cell).or_default() += 1,
                Location::Tail | Location::AllSmall => {}
            }
        }
        obs.set_slice_hits(hits);
        let scale = (1u64 << (2 * self.grid)) as f64;
        let s_prime = sliced.iter().map(|&s| s as f64 / scale).fold(0.0, f64::max);
        (obs, s_prime)
    }
}

/// Discretization parameters found by [`tune`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tuning {
    pub grid: u32,
    pub trunc: u64,
    pub p: Q,
}

fn step1_residual(spec: &LevyMeasureSpec, grid: u32, u_small: &Q) -> Q {
    let h = rational::q(1, 1i64 << grid);
    (0..spec.dim()).map(|t| spec.small_integral(t, &h)).sum::<Q>() / u_small
}

fn tail_total(spec: &LevyMeasureSpec, trunc: u64) -> Q {
    let m = rational::qi(trunc as i64);
    (0..spec.dim()).map(|t| spec.tail_mass(t, &m)).sum()
}

/// Checks the slice preconditions at `p`, naming the first one violated.
pub fn check_slicing(part: &CellPartition, s_hat: &Q) -> Result<()> {
    let need = rational::qi(16 * (1i64 << part.grid)) * s_hat;
    if let Some(c) = part.cells.iter().find(|c| rational::qi(c.slices as i64) < need) {
        return Err(Error::Unsatisfiable(format!(
            "m(A) >= 16·2^N·S fails for a cell with {} slices",
            c.slices
        )));
    }
    if part.remainder_mass() > rational::q(1, 16) {
        return Err(Error::Unsatisfiable("Σ ν(A_*) <= 1/16".into()));
    }
    if rational::qi(part.slice_count() as i64) * &part.p * &part.p >= rational::q(1, 16) {
        return Err(Error::Unsatisfiable("n p² < 1/16".into()));
    }
    Ok(())
}

/// Smallest `N`, then smallest `M` (doubling), then largest dyadic `p`
/// (halving) meeting every precondition of the discretization.
pub fn tune(spec: &LevyMeasureSpec, s_hat: &Q, k: &Q) -> Result<Tuning> {
    if !s_hat.is_positive() {
        return Err(Error::InvalidParameter("S estimate must be positive".into()));
    }
    let u_small = k * s_hat / rational::qi(32);
    let total = spec.total_mass();
    let grid = (0..=MAX_GRID)
        .find(|&n| {
            let h = rational::q(1, 1i64 << n);
            let cells = &total - spec.all_small_mass(&h);
            step1_residual(spec, n, &u_small) < rational::q(1, 16) && cells / rational::qi(1i64 << (2 * n)) <= *s_hat
        })
        .ok_or_else(|| Error::Unsatisfiable("Step-1 residual < 1/16 and ν(cells)/4^N <= S".into()))?;
    let trunc = (0..=20)
        .map(|e| 1u64 << e)
        .find(|&m| tail_total(spec, m) <= rational::q(1, 16))
        .ok_or_else(|| Error::Unsatisfiable("Σ_t ν(t >= M) <= 1/16".into()))?;
    let base = discretize(spec, grid, trunc, &rational::q(1, 2))?;
    let mut p = rational::q(1, 2);
    for _ in 0..62 {
        let part = CellPartition {
            cells: base
                .cells
                .iter()
                .map(|c| {
                    let slices = rational::floor_to_u64(&(&c.mass / &p));
                    Cell {
                        slices,
                        remainder: &c.mass - rational::qi(slices as i64) * &p,
                        ..c.clone()
                    }
                })
                .collect(),
            p: p.clone(),
            ..base.clone()
        };
        if check_slicing(&part, s_hat).is_ok() {
            return Ok(Tuning { grid, trunc, p });
        }
        p /= rational::qi(2);
    }
    Err(Error::Unsatisfiable(
        "no dyadic p >= 2^-63 meets the slicing bounds".into(),
    ))
}

#[derive(Clone, Debug)]
pub struct IdConfig {
    pub k: Q,
    pub grid: Option<u32>,
    pub trunc: Option<u64>,
    pub p: Option<Q>,
    pub orbit: OrbitLimits,
}

impl Default for IdConfig {
    fn default() -> Self {
        IdConfig {
            k: rational::qi(DEFAULT_K),
            grid: None,
            trunc: None,
            p: None,
            orbit: OrbitLimits::default(),
        }
    }
}

/// Tunes (unless overridden) and discretizes.
pub fn prepare(spec: &LevyMeasureSpec, s_hat: &Q, cfg: &IdConfig) -> Result<CellPartition> {
    let tuned = match (cfg.grid, cfg.trunc, &cfg.p) {
        (Some(grid), Some(trunc), Some(p)) => Tuning {
            grid,
            trunc,
            p: p.clone(),
        },
        _ => {
            let t = tune(spec, s_hat, &cfg.k)?;
            Tuning {
                grid: cfg.grid.unwrap_or(t.grid),
                trunc: cfg.trunc.unwrap_or(t.trunc),
                p: cfg.p.clone().unwrap_or(t.p),
            }
        }
    };
    discretize(spec, tuned.grid, tuned.trunc, &tuned.p)
}

fn final_problem(part: &CellPartition, tau: &Q) -> CountProblem {
    let scale = rational::qi(1i64 << (2 * part.grid));
    let bar = (tau * scale).ceil().to_integer().to_u128().unwrap_or(u128::MAX);
    CountProblem {
        caps: part.cells.iter().map(|c| c.slices).collect(),
        coeffs: (0..part.dim)
            .map(|t| part.cells.iter().map(|c| c.coeff_units(t)).collect())
            .collect(),
        bar,
        max_total: None,
    }
}

fn final_threshold(k: &Q, s_hat: &Q) -> Q {
    rational::q(31, 32) * k * s_hat
}

fn final_bound(p: &Q, size: u64) -> Q {
    rational::pow(&(rational::e_upper() * p), size as usize)
}

/// Every entry in proof order, without checking `K` or the stage budgets.
pub fn assemble_id_certificate(
    spec: &LevyMeasureSpec,
    part: &CellPartition,
    k: &Q,
    s_hat: &Q,
    orbit: OrbitLimits,
) -> Result<DeltaSmallCertificate> {
    if !s_hat.is_positive() {
        return Err(Error::InvalidParameter("S estimate must be positive".into()));
    }
    let threshold = k * s_hat;
    let mut entries = Vec::new();
    let h = rational::q(1, 1i64 << part.grid);
    let u_small = &threshold / rational::qi(32);
    for t in 0..spec.dim() {
        let integral = spec.small_integral(t, &h);
        if integral.is_positive() {
            entries.push(Entry::single(
                Generator::SmallValue { t },
                u_small.clone(),
                integral / &u_small,
            ));
        }
    }
    let m = rational::qi(part.trunc as i64);
    for t in 0..spec.dim() {
        let tail = spec.tail_mass(t, &m);
        if tail.is_positive() {
            entries.push(Entry::single(Generator::Tail { t }, rational::qi(1), tail));
        }
    }
    for (cell, c) in part.cells.iter().enumerate() {
        if c.remainder.is_positive() {
            entries.push(Entry::single(
                Generator::Remainder { cell },
                rational::qi(1),
                c.remainder.clone(),
            ));
        }
    }
    let p2 = &part.p * &part.p;
    for (cell, c) in part.cells.iter().enumerate() {
        if c.slices > 0 {
            entries.push(Entry {
                generator: Generator::DoubleHit { cell },
                u: rational::qi(2),
                multiplicity: c.slices.into(),
                bound: p2.clone(),
            });
        }
    }
    let problem = final_problem(part, &final_threshold(k, s_hat));
    let p = part.p.clone();
    entries.extend(certificate::final_stage_entries(
        &problem,
        part.slice_count(),
        |size| rational::qi(size as i64),
        |size| final_bound(&p, size),
        orbit,
    ));
    Ok(DeltaSmallCertificate {
        process: Process::Levy,
        k: k.clone(),
        s_hat: s_hat.clone(),
        threshold,
        grid: part.grid,
        trunc: part.trunc,
        p: part.p.clone(),
        d: 0,
        cells: part.records(),
        entries,
    })
}

/// Checked build: refuses `K < K_min` and any stage over budget.
pub fn build_id_certificate(
    spec: &LevyMeasureSpec,
    part: &CellPartition,
    k: &Q,
    s_hat: &Q,
    orbit: OrbitLimits,
) -> Result<DeltaSmallCertificate> {
    if k < &k_min() {
        return Err(Error::InvalidParameter(format!(
            "K = {} is below K_min ≈ {:.1}",
            rational::fmt(k),
            rational::to_f64(&k_min())
        )));
    }
    let cert = assemble_id_certificate(spec, part, k, s_hat, orbit)?;
    cert.check_budgets()?;
    Ok(cert)
}

/// Recomputes every cell, entry bound and multiplicity from the spec and
/// checks that the final-stage entries cover the final event.
pub fn recheck_id_certificate(
    cert: &DeltaSmallCertificate,
    spec: &LevyMeasureSpec,
    orbit: OrbitLimits,
) -> Result<bool> {
    if cert.process != Process::Levy {
        return Ok(false);
    }
    let part = discretize(spec, cert.grid, cert.trunc, &cert.p)?;
    if part.records() != cert.cells || cert.threshold != &cert.k * &cert.s_hat {
        return Ok(false);
    }
    let h = rational::q(1, 1i64 << part.grid);
    let u_small = &cert.threshold / rational::qi(32);
    let m = rational::qi(part.trunc as i64);
    let p2 = &part.p * &part.p;
    let caps: Vec<u64> = part.cells.iter().map(|c| c.slices).collect();
    let n = part.slice_count();
    for e in &cert.entries {
        let (u, mult, bound) = match &e.generator {
            Generator::SmallValue { t } if *t < spec.dim() => {
                (u_small.clone(), 1u32.into(), spec.small_integral(*t, &h) / &u_small)
            }
            Generator::Tail { t } if *t < spec.dim() => (rational::qi(1), 1u32.into(), spec.tail_mass(*t, &m)),
            Generator::Remainder { cell } => (rational::qi(1), 1u32.into(), part.cells[*cell].remainder.clone()),
            Generator::DoubleHit { cell } => (rational::qi(2), part.cells[*cell].slices.into(), p2.clone()),
            g @ (Generator::Orbit { .. } | Generator::Cardinality { .. }) => {
                if let Generator::Orbit { counts } = g {
                    if counts.iter().any(|(a, c)| *c > caps[*a]) {
                        return Ok(false);
                    }
                }
                (
                    rational::qi(g.size() as i64),
                    certificate::final_multiplicity(g, &caps, n).unwrap_or_default(),
                    final_bound(&part.p, g.size()),
                )
            }
            _ => return Ok(false),
        };
        if e.u != u || e.multiplicity != mult || e.bound != bound {
            return Ok(false);
        }
    }
    let covered =
        |stage: Stage, want: usize| cert.entries.iter().filter(|e| e.generator.stage() == stage).count() == want;
    let small = (0..spec.dim())
        .filter(|&t| spec.small_integral(t, &h).is_positive())
        .count();
    let tails = (0..spec.dim()).filter(|&t| spec.tail_mass(t, &m).is_positive()).count();
    let rems = part.cells.iter().filter(|c| c.remainder.is_positive()).count();
    let doubles = part.cells.iter().filter(|c| c.slices > 0).count();
    if !(covered(Stage::SmallValue, small)
        && covered(Stage::Tail, tails)
        && covered(Stage::Remainder, rems)
        && covered(Stage::DoubleHit, doubles))
    {
        return Ok(false);
    }
    let finals: Vec<&Entry> = cert
        .entries
        .iter()
        .filter(|e| e.generator.stage() == Stage::Final)
        .collect();
    let problem = final_problem(&part, &final_threshold(&cert.k, &cert.s_hat));
    Ok(certificate::final_cover_is_complete(&problem, &finals, orbit))
}

/// Containment and frequency report over simulated paths.
#[derive(Clone, Debug, PartialEq)]
pub struct VerifyReport {
    pub trials: u64,
    /// Paths with `sup_t |X|_t >= K Ŝ`.
    pub events: u64,
    /// Event paths on which no entry fires.
    pub violations: u64,
    /// Per stage: paths on which some entry of the stage fires, and the stage's bound.
    pub stages: Vec<(Stage, u64, Q)>,
    /// `E sup_t Σ_B t(B) Y(B)`.
    pub s_prime: Estimate,
}

impl VerifyReport {
    pub fn frequency(hits: u64, trials: u64) -> (f64, f64) {
        let f = hits as f64 / trials.max(1) as f64;
        (f, (f * (1.0 - f) / trials.max(1) as f64).sqrt())
    }

    /// Every stage frequency within its bound plus `k` standard errors.
    pub fn frequencies_ok(&self, k: f64) -> bool {
        self.stages.iter().all(|(_, hits, bound)| {
            let (f, se) = Self::frequency(*hits, self.trials);
            f <= rational::to_f64(bound) + k * se + 1e-12
        })
    }

    /// Markov sanity: `P(sup >= K Ŝ)` against `1/K`.
    pub fn event_frequency(&self) -> (f64, f64) {
        Self::frequency(self.events, self.trials)
    }
}

#[derive(Clone, Default)]
struct Tally {
    events: u64,
    violations: u64,
    stage_hits: Vec<u64>,
    n: u64,
    sum: f64,
    sum_sq: f64,
}

impl Tally {
    fn merge(mut self, o: Tally) -> Tally {
        if self.stage_hits.len() < o.stage_hits.len() {
            self.stage_hits.resize(o.stage_hits.len(), 0);
        }
        for (a, b) in self.stage_hits.iter_mut().zip(o.stage_hits) {
            *a += b;
        }
        Tally {
            events: self.events + o.events,
            violations: self.violations + o.violations,
            n: self.n + o.n,
            sum: self.sum + o.sum,
            sum_sq: self.sum_sq + o.sum_sq,
            stage_hits: self.stage_hits,
        }
    }

    fn estimate(&self) -> Estimate {
        let n = self.n.max(1) as f64;
        let mean = self.sum / n;
        let var = if self.n > 1 {
            ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        Estimate {
            mean,
            std_err: (var / n).sqrt(),
            trials: self.n,
        }
    }
}

/// Simulates `trials` paths and checks that every path with
/// `sup_t |X|_t >= K Ŝ` fires some entry.
pub fn verify_id_certificate(
    cert: &DeltaSmallCertificate,
    spec: &LevyMeasureSpec,
    trials: u64,
    seed: u64,
) -> Result<VerifyReport> {
    let part = discretize(spec, cert.grid, cert.trunc, &cert.p)?;
    if part.records() != cert.cells {
        return Err(Error::InvalidParameter(
            "certificate cells do not match the spec".into(),
        ));
    }
    let sampler = Sampler::new(spec);
    let threshold = rational::to_f64(&cert.threshold);
    let stages = Process::Levy.stages();
    let tally = mc::fold_trials(
        seed,
        1,
        trials,
        || Tally {
            stage_hits: vec![0; stages.len()],
            ..Default::default()
        },
        |acc, rng| {
            let points = sampler.sample(rng);
            let (obs, s_prime) = part.observe(&points);
            acc.n += 1;
            acc.sum += s_prime;
            acc.sum_sq += s_prime * s_prime;
            let mut any = false;
            for (i, stage) in stages.iter().enumerate() {
                let fired = cert
                    .entries
                    .iter()
                    .filter(|e| e.generator.stage() == *stage)
                    .any(|e| cert.fires(e, &obs));
                if fired {
                    acc.stage_hits[i] += 1;
                    any = true;
                }
            }
            if sup_sum(&points, spec.dim()) >= threshold {
                acc.events += 1;
                if !any {
                    acc.violations += 1;
                }
            }
        },
        Tally::merge,
    );
    Ok(VerifyReport {
        trials,
        events: tally.events,
        violations: tally.violations,
        stages: stages
            .iter()
            .zip(&tally.stage_hits)
            .map(|(s, h)| (*s, *h, cert.stage_total(*s)))
            .collect(),
        s_prime: tally.estimate(),
    })
}

/// Reference specs used by the acceptance suite and the CLI.
pub fn reference_specs() -> Vec<(String, LevyMeasureSpec)> {
    let q = rational::q;
    let bx = |mass: Q, lo: &[Q], hi: &[Q]| LevyBox {
        mass,
        lower: lo.to_vec(),
        upper: hi.to_vec(),
    };
    let one = LevyMeasureSpec::new(vec!["t".into()], vec![bx(q(1, 2), &[q(1, 1)], &[q(2, 1)])]).expect("valid spec");
    let two = LevyMeasureSpec::new(
        vec!["s".into(), "t".into()],
        vec![
            bx(q(1, 1), &[q(0, 1), q(0, 1)], &[q(1, 1), q(1, 2)]),
            bx(q(1, 2), &[q(1, 2), q(1, 1)], &[q(3, 2), q(2, 1)]),
        ],
    )
    .expect("valid spec");
    let three = LevyMeasureSpec::new(
        vec!["a".into(), "b".into(), "c".into()],
        vec![
            bx(q(2, 1), &[q(0, 1), q(0, 1), q(0, 1)], &[q(1, 4), q(1, 4), q(1, 4)]),
            bx(q(1, 10), &[q(0, 1), q(1, 2), q(2, 1)], &[q(4, 1), q(1, 1), q(3, 1)]),
            bx(q(1, 50), &[q(3, 1), q(3, 1), q(3, 1)], &[q(5, 1), q(4, 1), q(4, 1)]),
        ],
    )
    .expect("valid spec");
    vec![
        ("single-box".into(), one),
        ("two-boxes".into(), two),
        ("three-coordinates".into(), three),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi};

    fn single() -> LevyMeasureSpec {
        reference_specs().remove(0).1
    }

    #[test]
    fn spec_validation() {
        let bx = LevyBox {
            mass: qi(1),
            lower: vec![qi(1)],
            upper: vec![qi(1)],
        };
        assert!(LevyMeasureSpec::new(vec!["t".into()], vec![bx]).is_err());
        assert!(LevyMeasureSpec::new(vec![], vec![]).is_err());
        let empty = LevyMeasureSpec::new(vec!["t".into()], vec![]).unwrap();
        assert_eq!(empty.total_mass(), qi(0));
    }

    #[test]
    fn empty_measure_samples_nothing() {
        let empty = LevyMeasureSpec::new(vec!["t".into()], vec![]).unwrap();
        let mut rng = mc::trial_rng(1, 0, 0);
        for _ in 0..10 {
            assert!(sample_ppp(&empty, &mut rng).is_empty());
        }
        assert_eq!(estimate_s(&empty, 100, 1).mean, 0.0);
    }

    #[test]
    fn poisson_count_mean() {
        let spec = single();
        let sampler = Sampler::new(&spec);
        let est = mc::estimate(4, 0, 100_000, |rng| sampler.sample(rng).len() as f64);
        assert!(est.within(0.5, 4.0), "{est:?}");
    }

    #[test]
    fn s_for_single_box() {
        let est = estimate_s(&single(), 100_000, 5);
        assert!(est.within(0.75, 4.0), "{est:?}");
    }

    #[test]
    fn duplicate_coordinates_same_s() {
        let spec = single();
        let b = &spec.boxes()[0];
        let dup = LevyMeasureSpec::new(
            vec!["t".into(), "u".into()],
            vec![LevyBox {
                mass: b.mass.clone(),
                lower: vec![b.lower[0].clone(); 2],
                upper: vec![b.upper[0].clone(); 2],
            }],
        )
        .unwrap();
        // Independent coordinates within the box differ; the same coordinate twice does not.
        let mut rng = mc::trial_rng(2, 0, 0);
        let pts = sample_ppp(&spec, &mut rng);
        let doubled: Vec<Vec<f64>> = pts.iter().map(|x| vec![x[0], x[0]]).collect();
        assert_eq!(sup_sum(&pts, 1), sup_sum(&doubled, 2));
        assert_eq!(dup.dim(), 2);
    }

    #[test]
    fn discretize_example() {
        let part = discretize(&single(), 1, 2, &q(1, 40)).unwrap();
        assert_eq!(part.cells().len(), 4);
        let levels: Vec<i64> = part.cells().iter().map(|c| c.levels[0]).collect();
        assert_eq!(levels, vec![4, 5, 6, 7]);
        for c in part.cells() {
            assert_eq!(c.mass, q(1, 8));
            assert_eq!(c.slices, 5);
            assert_eq!(c.remainder, qi(0));
        }
        assert_eq!(part.cell_mass(), q(1, 2));
        assert_eq!(part.coefficient(0, 0), q(5, 4));
        assert_eq!(single().small_integral(0, &q(1, 2)), qi(0));
    }

    #[test]
    fn masses_sum_to_truncated_measure() {
        for (_, spec) in reference_specs() {
            let part = discretize(&spec, 1, 4, &q(1, 1024)).unwrap();
            let h = q(1, 2);
            // ν(∩{t < M}) minus the all-small part, with M above every box.
            let expect = spec.total_mass()
                - spec.all_small_mass(&h)
                - (0..spec.dim()).map(|t| spec.tail_mass(t, &qi(4))).sum::<Q>();
            let slices: Q = part
                .cells()
                .iter()
                .map(|c| rational::qi(c.slices as i64) * part.p() + &c.remainder)
                .sum();
            assert_eq!(slices, part.cell_mass());
            if (0..spec.dim()).all(|t| spec.tail_mass(t, &qi(4)).is_zero()) {
                assert_eq!(part.cell_mass(), expect);
            }
        }
    }

    #[test]
    fn coefficient_sandwich() {
        for (_, spec) in reference_specs() {
            let part = discretize(&spec, 2, 8, &q(1, 4096)).unwrap();
            let sampler = Sampler::new(&spec);
            let eps = 1.0 / 16.0;
            for trial in 0..2000 {
                let mut rng = mc::trial_rng(9, 0, trial);
                for x in sampler.sample(&mut rng) {
                    if let Location::Slice { cell, .. } | Location::Remainder { cell } = part.locate(&x) {
                        for (t, &v) in x.iter().enumerate() {
                            let ta = rational::to_f64(&part.coefficient(cell, t));
                            if part.cells()[cell].levels[t] == SMALL {
                                assert!(v < 0.25);
                            } else {
                                assert!(ta - eps <= v && v < ta, "{v} vs {ta}");
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn slices_have_mass_p() {
        let spec = reference_specs().remove(1).1;
        let part = discretize(&spec, 1, 2, &q(1, 64)).unwrap();
        let sampler = Sampler::new(&spec);
        let trials = 40_000u64;
        let mut counts: HashMap<(usize, u64), u64> = HashMap::new();
        for trial in 0..trials {
            let mut rng = mc::trial_rng(11, 0, trial);
            for x in sampler.sample(&mut rng) {
                if let Location::Slice { cell, slice } = part.locate(&x) {
                    *counts.entry((cell, slice)).or_default() += 1;
                }
            }
        }
        let expected = trials as f64 / 64.0;
        let total: u64 = counts.values().sum();
        let mean = total as f64 / part.slice_count() as f64;
        assert!((mean - expected).abs() < 4.0 * (expected / part.slice_count() as f64).sqrt());
        let worst = counts
            .values()
            .map(|&c| (c as f64 - expected).abs())
            .fold(0.0, f64::max);
        assert!(worst < 6.0 * expected.sqrt(), "{worst} vs {expected}");
    }

    #[test]
    fn chernoff_entry_sanity() {
        let p = q(1, 10);
        let bound = final_bound(&p, 1);
        let exact = 1.0 - (-0.1f64).exp();
        assert!((exact - 0.0952).abs() < 1e-4);
        assert!(exact <= rational::to_f64(&bound));
    }

    #[test]
    fn k_min_value() {
        let k = rational::to_f64(&k_min());
        assert!(k > 2403.0 && k < 2500.0, "{k}");
    }

    #[test]
    fn refuses_small_k() {
        let spec = single();
        let part = discretize(&spec, 1, 2, &q(1, 1024)).unwrap();
        assert!(matches!(
            build_id_certificate(&spec, &part, &qi(100), &q(3, 4), OrbitLimits::default()),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn end_to_end_single_box() {
        let spec = single();
        let s_hat = q(3, 4);
        let cfg = IdConfig::default();
        let part = prepare(&spec, &s_hat, &cfg).unwrap();
        check_slicing(&part, &s_hat).unwrap();
        let cert = build_id_certificate(&spec, &part, &cfg.k, &s_hat, cfg.orbit).unwrap();
        assert!(cert.total_bound() <= q(1, 2));
        assert!(recheck_id_certificate(&cert, &spec, cfg.orbit).unwrap());
        let text = cert.to_text();
        assert_eq!(DeltaSmallCertificate::from_text(&text).unwrap(), cert);
        let report = verify_id_certificate(&cert, &spec, 2000, 1).unwrap();
        assert_eq!(report.violations, 0);
    }

    #[test]
    fn containment_at_small_k() {
        let spec = single();
        let s_hat = q(3, 4);
        let part = discretize(&spec, 1, 2, &q(1, 256)).unwrap();
        let cert = assemble_id_certificate(&spec, &part, &qi(3), &s_hat, OrbitLimits::default()).unwrap();
        let report = verify_id_certificate(&cert, &spec, 20_000, 3).unwrap();
        assert!(report.events > 100);
        assert_eq!(report.violations, 0);
        assert!(recheck_id_certificate(&cert, &spec, OrbitLimits::default()).unwrap());
    }
}
