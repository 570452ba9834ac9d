//! δ-small certificates: finite lists of pairs `(g, u)` whose events
//! `{|X|_g >= u}` jointly contain a large-supremum event, each with an exact
//! upper bound on its probability.

use std::collections::HashMap;
use std::fmt::Write as _;

use num_bigint::BigUint;
use num_traits::One;

use crate::error::{Error, Result};
use crate::rational::{self, Q};

pub const HEADER: &str = "selcert-certificate v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Process {
    Levy,
    Empirical,
}

impl Process {
    pub fn name(self) -> &'static str {
        match self {
            Process::Levy => "levy",
            Process::Empirical => "empirical",
        }
    }

    pub fn stages(self) -> &'static [Stage] {
        match self {
            Process::Levy => &[
                Stage::SmallValue,
                Stage::Tail,
                Stage::Remainder,
                Stage::DoubleHit,
                Stage::Final,
            ],
            Process::Empirical => &[Stage::Tail, Stage::Remainder, Stage::DoubleHit, Stage::Final],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    SmallValue,
    Tail,
    Remainder,
    DoubleHit,
    Final,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::SmallValue => "small-value",
            Stage::Tail => "tail",
            Stage::Remainder => "remainder",
            Stage::DoubleHit => "double-hit",
            Stage::Final => "final",
        }
    }

    pub fn budget(self) -> Q {
        match self {
            Stage::Final => rational::q(1, 4),
            _ => rational::q(1, 16),
        }
    }
}

/// The function `g` of an entry, described on the cell/slice partition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Generator {
    /// `g = |t| 1{|t| < 2^-N}`.
    SmallValue { t: usize },
    /// `g = 1{t >= M}`.
    Tail { t: usize },
    /// `g = 1_{A_*}`.
    Remainder { cell: usize },
    /// `g = 1_B`, one entry for each slice `B` of the cell.
    DoubleHit { cell: usize },
    /// `g = 1_{∪F}` for every slice set `F` holding `c_A` slices of each cell `A`.
    Orbit { counts: Vec<(usize, u64)> },
    /// `g = 1_{∪F}` for every set `F` of `k` slices.
    Cardinality { k: u64 },
}

impl Generator {
    pub fn stage(&self) -> Stage {
        match self {
            Generator::SmallValue { .. } => Stage::SmallValue,
            Generator::Tail { .. } => Stage::Tail,
            Generator::Remainder { .. } => Stage::Remainder,
            Generator::DoubleHit { .. } => Stage::DoubleHit,
            Generator::Orbit { .. } | Generator::Cardinality { .. } => Stage::Final,
        }
    }

    /// `|F|` for final-stage generators.
    pub fn size(&self) -> u64 {
        match self {
            Generator::Orbit { counts } => counts.iter().map(|(_, c)| c).sum(),
            Generator::Cardinality { k } => *k,
            _ => 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entry {
    pub generator: Generator,
    pub u: Q,
    /// Number of `(g, u)` pairs this line stands for.
    pub multiplicity: BigUint,
    /// Upper bound on `P(|X|_g >= u)` for each of them.
    pub bound: Q,
}

impl Entry {
    pub fn single(generator: Generator, u: Q, bound: Q) -> Self {
        Entry {
            generator,
            u,
            multiplicity: BigUint::one(),
            bound,
        }
    }

    pub fn total(&self) -> Q {
        rational::from_biguint(&self.multiplicity) * &self.bound
    }
}

/// A partition cell as stored in a certificate: its level per coordinate
/// (`-1` for the small band), mass and slice count.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellRecord {
    pub levels: Vec<i64>,
    pub mass: Q,
    pub slices: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeltaSmallCertificate {
    pub process: Process,
    pub k: Q,
    pub s_hat: Q,
    /// `K Ŝ`.
    pub threshold: Q,
    pub grid: u32,
    pub trunc: u64,
    pub p: Q,
    /// Sample count of the empirical process; zero for the Lévy process.
    pub d: u64,
    pub cells: Vec<CellRecord>,
    pub entries: Vec<Entry>,
}

impl DeltaSmallCertificate {
    pub fn slice_count(&self) -> u64 {
        self.cells.iter().map(|c| c.slices).sum()
    }

    pub fn stage_total(&self, stage: Stage) -> Q {
        self.entries
            .iter()
            .filter(|e| e.generator.stage() == stage)
            .map(Entry::total)
            .sum()
    }

    pub fn total_bound(&self) -> Q {
        self.entries.iter().map(Entry::total).sum()
    }

    /// Errors on the first stage over budget, or a grand total above `1/2`.
    pub fn check_budgets(&self) -> Result<()> {
        for &stage in self.process.stages() {
            let total = self.stage_total(stage);
            if total > stage.budget() {
                return Err(Error::StageBudget {
                    stage: stage.name(),
                    bound: rational::fmt(&total),
                    budget: rational::fmt(&stage.budget()),
                });
            }
        }
        let total = self.total_bound();
        if total > rational::half() {
            return Err(Error::StageBudget {
                stage: "total",
                bound: rational::fmt(&total),
                budget: "1/2".into(),
            });
        }
        Ok(())
    }

    pub fn is_valid(&self) -> bool {
        self.check_budgets().is_ok()
    }

    /// Scale turning `(1/d) Σ g(X_i)` into the raw count for empirical entries.
    fn norm(&self) -> u64 {
        match self.process {
            Process::Levy => 1,
            Process::Empirical => self.d.max(1),
        }
    }

    /// True when some entry fires on the observation.
    pub fn any_fires(&self, obs: &Observation) -> bool {
        self.entries.iter().any(|e| self.fires(e, obs))
    }

    pub fn fires(&self, entry: &Entry, obs: &Observation) -> bool {
        match &entry.generator {
            Generator::SmallValue { t } => obs.small_sums.get(*t).copied().unwrap_or(0.0) >= rational::to_f64(&entry.u),
            Generator::Tail { t } => obs.tail_hits.get(*t).copied().unwrap_or(0) as u128 >= self.count_needed(&entry.u),
            Generator::Remainder { cell } => {
                obs.remainder_hits.get(cell).copied().unwrap_or(0) as u128 >= self.count_needed(&entry.u)
            }
            Generator::DoubleHit { cell } => obs
                .cells
                .get(cell)
                .and_then(|v| v.first())
                .is_some_and(|&top| top as u128 >= self.count_needed(&entry.u)),
            Generator::Orbit { counts } => {
                let got: u128 = counts.iter().map(|(cell, c)| obs.top_sum(*cell, *c) as u128).sum();
                got >= self.count_needed(&entry.u)
            }
            Generator::Cardinality { k } => obs.top_sum_all(*k) as u128 >= self.count_needed(&entry.u),
        }
    }

    fn count_needed(&self, u: &Q) -> u128 {
        (u * rational::qi(self.norm() as i64))
            .ceil()
            .to_integer()
            .try_into()
            .unwrap_or(u128::MAX)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{HEADER}");
        let _ = writeln!(s, "process {}", self.process.name());
        let _ = writeln!(s, "K {}", rational::fmt(&self.k));
        let _ = writeln!(s, "S {}", rational::fmt(&self.s_hat));
        let _ = writeln!(s, "threshold {}", rational::fmt(&self.threshold));
        let _ = writeln!(s, "N {}", self.grid);
        let _ = writeln!(s, "M {}", self.trunc);
        let _ = writeln!(s, "p {}", rational::fmt(&self.p));
        let _ = writeln!(s, "d {}", self.d);
        for (i, c) in self.cells.iter().enumerate() {
            let levels: Vec<String> = c.levels.iter().map(i64::to_string).collect();
            let _ = writeln!(
                s,
                "cell {} levels={} mass={} slices={}",
                i + 1,
                levels.join(","),
                rational::fmt(&c.mass),
                c.slices
            );
        }
        for e in &self.entries {
            let g = match &e.generator {
                Generator::SmallValue { t } => format!("small t={}", t + 1),
                Generator::Tail { t } => format!("tail t={}", t + 1),
                Generator::Remainder { cell } => format!("remainder cell={}", cell + 1),
                Generator::DoubleHit { cell } => format!("double cell={}", cell + 1),
                Generator::Orbit { counts } => {
                    let parts: Vec<String> = counts.iter().map(|(a, c)| format!("{}:{c}", a + 1)).collect();
                    format!("orbit counts={}", parts.join(","))
                }
                Generator::Cardinality { k } => format!("cardinality k={k}"),
            };
            let _ = writeln!(
                s,
                "entry {g} u={} mult={} bound={}",
                rational::fmt(&e.u),
                e.multiplicity,
                rational::fmt(&e.bound)
            );
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        match lines.find(|(_, l)| !l.is_empty() && !l.starts_with('#')) {
            Some((_, l)) if l == HEADER => {}
            Some((n, _)) => return Err(Error::parse(n, format!("expected `{HEADER}`"))),
            None => return Err(Error::parse(1, "empty certificate")),
        }
        let mut fields: HashMap<&str, (usize, &str)> = HashMap::new();
        let mut cells = Vec::new();
        let mut entries = Vec::new();
        for (n, line) in lines {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
            let rest = rest.trim();
            match key {
                "cell" => cells.push(parse_cell(n, rest, cells.len())?),
                "entry" => entries.push(parse_entry(n, rest)?),
                "process" | "K" | "S" | "threshold" | "N" | "M" | "p" | "d" => {
                    if fields.insert(key, (n, rest)).is_some() {
                        return Err(Error::parse(n, format!("duplicate `{key}`")));
                    }
                }
                other => return Err(Error::parse(n, format!("unknown key `{other}`"))),
            }
        }
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| Error::parse(0, format!("missing `{k}`")))
        };
        let rat = |k: &str| -> Result<Q> {
            let (n, v) = get(k)?;
            rational::parse(v).ok_or_else(|| Error::parse(n, format!("bad fraction for `{k}`")))
        };
        let int = |k: &str| -> Result<u64> {
            let (n, v) = get(k)?;
            v.parse().map_err(|_| Error::parse(n, format!("bad integer for `{k}`")))
        };
        let process = match get("process")? {
            (_, "levy") => Process::Levy,
            (_, "empirical") => Process::Empirical,
            (n, other) => return Err(Error::parse(n, format!("unknown process `{other}`"))),
        };
        let grid = int("N")?;
        let grid_line = get("N")?.0;
        let cert = DeltaSmallCertificate {
            process,
            k: rat("K")?,
            s_hat: rat("S")?,
            threshold: rat("threshold")?,
            grid: u32::try_from(grid).map_err(|_| Error::parse(grid_line, "N too large"))?,
            trunc: int("M")?,
            p: rat("p")?,
            d: int("d")?,
            cells,
            entries,
        };
        for e in &cert.entries {
            let bad = match &e.generator {
                Generator::Remainder { cell } | Generator::DoubleHit { cell } => *cell >= cert.cells.len(),
                Generator::Orbit { counts } => counts.iter().any(|(c, _)| *c >= cert.cells.len()),
                _ => false,
            };
            if bad {
                return Err(Error::parse(0, "entry refers to an unknown cell"));
            }
        }
        Ok(cert)
    }
}

fn kv<'a>(n: usize, token: &'a str, key: &str) -> Result<&'a str> {
    token
        .strip_prefix(key)
        .and_then(|r| r.strip_prefix('='))
        .ok_or_else(|| Error::parse(n, format!("expected `{key}=`")))
}

fn parse_q(n: usize, s: &str) -> Result<Q> {
    rational::parse(s).ok_or_else(|| Error::parse(n, format!("bad fraction `{s}`")))
}

fn parse_u64(n: usize, s: &str) -> Result<u64> {
    s.parse().map_err(|_| Error::parse(n, format!("bad integer `{s}`")))
}

fn parse_index(n: usize, s: &str) -> Result<usize> {
    let i: usize = s.parse().map_err(|_| Error::parse(n, format!("bad index `{s}`")))?;
    i.checked_sub(1).ok_or_else(|| Error::parse(n, "indices are 1-based"))
}

fn parse_cell(n: usize, rest: &str, expected: usize) -> Result<CellRecord> {
    let tokens: Vec<&str> = rest.split_whitespace().collect();
    if tokens.len() != 4 {
        return Err(Error::parse(n, "cell needs index, levels, mass, slices"));
    }
    if parse_index(n, tokens[0])? != expected {
        return Err(Error::parse(n, "cells must be numbered consecutively"));
    }
    let levels = kv(n, tokens[1], "levels")?
        .split(',')
        .map(|s| {
            s.parse::<i64>()
                .map_err(|_| Error::parse(n, format!("bad level `{s}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CellRecord {
        levels,
        mass: parse_q(n, kv(n, tokens[2], "mass")?)?,
        slices: parse_u64(n, kv(n, tokens[3], "slices")?)?,
    })
}

fn parse_entry(n: usize, rest: &str) -> Result<Entry> {
    let tokens: Vec<&str> = rest.split_whitespace().collect();
    if tokens.len() != 5 {
        return Err(Error::parse(n, "entry needs kind, argument, u, mult, bound"));
    }
    let arg = tokens[1];
    let generator = match tokens[0] {
        "small" => Generator::SmallValue {
            t: parse_index(n, kv(n, arg, "t")?)?,
        },
        "tail" => Generator::Tail {
            t: parse_index(n, kv(n, arg, "t")?)?,
        },
        "remainder" => Generator::Remainder {
            cell: parse_index(n, kv(n, arg, "cell")?)?,
        },
        "double" => Generator::DoubleHit {
            cell: parse_index(n, kv(n, arg, "cell")?)?,
        },
        "orbit" => {
            let counts = kv(n, arg, "counts")?
                .split(',')
                .map(|pair| {
                    let (a, c) = pair
                        .split_once(':')
                        .ok_or_else(|| Error::parse(n, format!("bad count `{pair}`")))?;
                    Ok((parse_index(n, a)?, parse_u64(n, c)?))
                })
                .collect::<Result<Vec<_>>>()?;
            Generator::Orbit { counts }
        }
        "cardinality" => Generator::Cardinality {
            k: parse_u64(n, kv(n, arg, "k")?)?,
        },
        other => return Err(Error::parse(n, format!("unknown entry kind `{other}`"))),
    };
    let multiplicity: BigUint = kv(n, tokens[3], "mult")?
        .parse()
        .map_err(|_| Error::parse(n, "bad multiplicity"))?;
    Ok(Entry {
        generator,
        u: parse_q(n, kv(n, tokens[2], "u")?)?,
        multiplicity,
        bound: parse_q(n, kv(n, tokens[4], "bound")?)?,
    })
}

/// What one sample path looks like on the partition.
#[derive(Clone, Debug, Default)]
pub struct Observation {
    /// Per coordinate, the summed small values.
    pub small_sums: Vec<f64>,
    /// Per coordinate, points at or above the truncation level.
    pub tail_hits: Vec<u64>,
    pub remainder_hits: HashMap<usize, u64>,
    /// Per cell, positive slice occupancies in decreasing order.
    pub cells: HashMap<usize, Vec<u64>>,
}

impl Observation {
    pub fn new(dim: usize) -> Self {
        Observation {
            small_sums: vec![0.0; dim],
            tail_hits: vec![0; dim],
            ..Default::default()
        }
    }

    /// Builds the per-cell occupancy lists from `(cell, slice)` hits.
    pub fn set_slice_hits(&mut self, hits: impl IntoIterator<Item = (usize, u64)>) {
        let mut counts: HashMap<(usize, u64), u64> = HashMap::new();
        for h in hits {
            *counts.entry(h).or_default() += 1;
        }
        self.cells.clear();
        for ((cell, _), c) in counts {
            self.cells.entry(cell).or_default().push(c);
        }
        for v in self.cells.values_mut() {
            v.sort_unstable_by(|a, b| b.cmp(a));
        }
    }

    pub fn top_sum(&self, cell: usize, c: u64) -> u64 {
        self.cells.get(&cell).map_or(0, |v| v.iter().take(c as usize).sum())
    }

    pub fn top_sum_all(&self, k: u64) -> u64 {
        let mut all: Vec<u64> = self.cells.values().flatten().copied().collect();
        all.sort_unstable_by(|a, b| b.cmp(a));
        all.iter().take(k as usize).sum()
    }

    pub fn occupied_slices(&self) -> u64 {
        self.cells.values().map(|v| v.len() as u64).sum()
    }
}

/// Integer form of the final-stage event `{max_t Σ_A coeff_t(A) c_A >= bar}`
/// on per-cell counts `0 <= c_A <= cap_A`, optionally with `Σ c_A <= max_total`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountProblem {
    pub caps: Vec<u64>,
    pub coeffs: Vec<Vec<u64>>,
    pub bar: u128,
    pub max_total: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OrbitLimits {
    pub max_vectors: usize,
    pub max_nodes: u64,
}

impl Default for OrbitLimits {
    fn default() -> Self {
        OrbitLimits {
            max_vectors: 20_000,
            max_nodes: 2_000_000,
        }
    }
}

impl CountProblem {
    pub fn reaches(&self, counts: &[(usize, u64)]) -> bool {
        self.coeffs
            .iter()
            .any(|row| counts.iter().map(|(a, c)| row[*a] as u128 * *c as u128).sum::<u128>() >= self.bar)
    }

    /// In the event, and dropping any single unit leaves it.
    pub fn is_minimal(&self, counts: &[(usize, u64)]) -> bool {
        if !self.reaches(counts) || counts.iter().any(|(_, c)| *c == 0) {
            return false;
        }
        if self
            .max_total
            .is_some_and(|m| counts.iter().map(|(_, c)| c).sum::<u64>() > m)
        {
            return false;
        }
        let sums: Vec<u128> = self
            .coeffs
            .iter()
            .map(|row| counts.iter().map(|(a, c)| row[*a] as u128 * *c as u128).sum())
            .collect();
        counts.iter().all(|(a, _)| {
            self.coeffs
                .iter()
                .zip(&sums)
                .all(|(row, s)| s - (row[*a] as u128) < self.bar)
        })
    }

    /// Least `Σ c_A` over the event (greedy per coordinate), or `None` if the
    /// event is empty.
    pub fn min_cardinality(&self) -> Option<u64> {
        if self.bar == 0 {
            return Some(0);
        }
        let best = self
            .coeffs
            .iter()
            .filter_map(|row| {
                let mut order: Vec<usize> = (0..row.len()).filter(|&a| row[a] > 0).collect();
                order.sort_by(|&a, &b| row[b].cmp(&row[a]));
                let mut need = self.bar;
                let mut used = 0u64;
                for a in order {
                    let per = row[a] as u128;
                    let take = need.div_ceil(per).min(self.caps[a] as u128);
                    used += take as u64;
                    need = need.saturating_sub(take * per);
                    if need == 0 {
                        return Some(used);
                    }
                }
                None
            })
            .min()?;
        match self.max_total {
            Some(m) if best > m => None,
            _ => Some(best),
        }
    }

    /// All minimal count vectors of the event (sparse, by ascending cell), or
    /// `None` once a limit is hit.
    pub fn minimal_vectors(&self, limits: OrbitLimits) -> Option<Vec<Vec<(usize, u64)>>> {
        if self.bar == 0 {
            return Some(vec![Vec::new()]);
        }
        let mut order: Vec<usize> = (0..self.caps.len())
            .filter(|&a| self.caps[a] > 0 && self.coeffs.iter().any(|r| r[a] > 0))
            .collect();
        order.sort_by_key(|&a| std::cmp::Reverse(self.coeffs.iter().map(|r| r[a]).max().unwrap_or(0)));
        let dims = self.coeffs.len();
        let mut suffix = vec![vec![0u128; order.len() + 1]; dims];
        for (t, row) in self.coeffs.iter().enumerate() {
            for i in (0..order.len()).rev() {
                let a = order[i];
                suffix[t][i] = suffix[t][i + 1].saturating_add(row[a] as u128 * self.caps[a] as u128);
            }
        }
        let mut search = Dfs {
            problem: self,
            order: &order,
            suffix: &suffix,
            limits,
            nodes: 0,
            current: Vec::new(),
            found: Vec::new(),
        };
        let sums = vec![0u128; dims];
        if !search.visit(0, &sums, 0) {
            return None;
        }
        let mut found = search.found;
        for v in &mut found {
            v.sort_unstable();
        }
        found.sort();
        Some(found)
    }
}

struct Dfs<'a> {
    problem: &'a CountProblem,
    order: &'a [usize],
    suffix: &'a [Vec<u128>],
    limits: OrbitLimits,
    nodes: u64,
    current: Vec<(usize, u64)>,
    found: Vec<Vec<(usize, u64)>>,
}

impl Dfs<'_> {
    /// Returns false when a limit was hit.
    fn visit(&mut self, i: usize, sums: &[u128], total: u64) -> bool {
        self.nodes += 1;
        if self.nodes > self.limits.max_nodes {
            return false;
        }
        let bar = self.problem.bar;
        if sums.iter().any(|s| *s >= bar) {
            if self.problem.is_minimal(&self.current) {
                self.found.push(self.current.clone());
                if self.found.len() > self.limits.max_vectors {
                    return false;
                }
            }
            return true;
        }
        if i == self.order.len() || sums.iter().enumerate().all(|(t, s)| s + self.suffix[t][i] < bar) {
            return true;
        }
        let a = self.order[i];
        let room = self.problem.max_total.map_or(u64::MAX, |m| m - total);
        let cap = self.problem.caps[a].min(room);
        let mut next = sums.to_vec();
        for c in 0..=cap {
            if c > 0 {
                for (t, row) in self.problem.coeffs.iter().enumerate() {
                    next[t] += row[a] as u128;
                }
                self.current.push((a, c));
            }
            let reached = next.iter().any(|s| *s >= bar);
            let ok = self.visit(i + 1, &next, total + c);
            if c > 0 {
                self.current.pop();
            }
            if !ok {
                return false;
            }
            if reached {
                break;
            }
        }
        true
    }
}

/// Final-stage cover choice: the minimal count vectors when they can be
/// listed, else all sets of the least possible size; whichever totals less.
pub fn final_stage_entries(
    problem: &CountProblem,
    slices: u64,
    u_of: impl Fn(u64) -> Q,
    bound_of: impl Fn(u64) -> Q,
    limits: OrbitLimits,
) -> Vec<Entry> {
    let Some(k_min) = problem.min_cardinality() else {
        return Vec::new();
    };
    let cardinality = vec![Entry {
        generator: Generator::Cardinality { k: k_min },
        u: u_of(k_min),
        multiplicity: rational::binomial(slices, k_min),
        bound: bound_of(k_min),
    }];
    let Some(vectors) = problem.minimal_vectors(limits) else {
        return cardinality;
    };
    let orbits: Vec<Entry> = vectors
        .into_iter()
        .map(|counts| {
            let size: u64 = counts.iter().map(|(_, c)| c).sum();
            let multiplicity = counts
                .iter()
                .map(|(a, c)| rational::binomial(problem.caps[*a], *c))
                .product();
            Entry {
                generator: Generator::Orbit { counts },
                u: u_of(size),
                multiplicity,
                bound: bound_of(size),
            }
        })
        .collect();
    let total = |es: &[Entry]| es.iter().map(Entry::total).sum::<Q>();
    if total(&orbits) <= total(&cardinality) {
        orbits
    } else {
        cardinality
    }
}

/// Recomputes the multiplicity each final-stage entry must carry.
pub fn final_multiplicity(generator: &Generator, caps: &[u64], slices: u64) -> Option<BigUint> {
    match generator {
        Generator::Orbit { counts } => Some(counts.iter().map(|(a, c)| rational::binomial(caps[*a], *c)).product()),
        Generator::Cardinality { k } => Some(rational::binomial(slices, *k)),
        _ => None,
    }
}

/// Checks that the final-stage entries cover the event: either one
/// cardinality entry at the least event size, or exactly the minimal vectors.
pub fn final_cover_is_complete(problem: &CountProblem, entries: &[&Entry], limits: OrbitLimits) -> bool {
    let k_min = problem.min_cardinality();
    match (entries, k_min) {
        ([], None) => true,
        ([], Some(_)) | (_, None) => false,
        ([e], Some(k)) if matches!(e.generator, Generator::Cardinality { .. }) => e.generator.size() <= k,
        (es, Some(_)) => {
            let mut listed: Vec<Vec<(usize, u64)>> = Vec::new();
            for e in es {
                match &e.generator {
                    Generator::Orbit { counts } => {
                        let mut c = counts.clone();
                        c.sort_unstable();
                        listed.push(c);
                    }
                    _ => return false,
                }
            }
            listed.sort();
            problem.minimal_vectors(limits).is_some_and(|v| v == listed)
        }
    }
}
