use std::path::{Path, PathBuf};

use rand::Rng;

use selcert::empirical::{EmpiricalInstance, StepFunction};
use selcert::format::{write_instance, Instance, Kind};
use selcert::levy::{LevyBox, LevyMeasureSpec};
use selcert::rational::{self, Q};
use selcert::selector::SelectorInstance;
use selcert::sets::{self, SearchLimits, SetFamily, Subset};
use selcert::witness::{WeightedFamily, WeightedMember};
use selcert::{mc, Error, Result};

pub const MAX_ATTEMPTS: usize = 2000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenSpec {
    pub kind: Kind,
    pub count: usize,
    pub min_n: usize,
    pub max_n: usize,
    /// Selector probability; drawn per instance when absent.
    pub p: Option<Q>,
    pub seed: u64,
}

impl GenSpec {
    pub fn new(kind: Kind, count: usize, min_n: usize, max_n: usize, seed: u64) -> Self {
        GenSpec {
            kind,
            count,
            min_n,
            max_n,
            p: None,
            seed,
        }
    }
}

fn kind_stream(kind: Kind) -> u64 {
    1000 + Kind::ALL.iter().position(|k| *k == kind).unwrap_or(0) as u64
}

/// `count` reproducible instances named `<kind>-<index>`. Set families are
/// redrawn until the exact oracle shows they are not p-small, selectors until
/// some vector is nonzero.
pub fn generate_instances(spec: &GenSpec) -> Result<Vec<(String, Instance)>> {
    if spec.min_n == 0 || spec.min_n > spec.max_n {
        return Err(Error::InvalidParameter(format!(
            "size bounds [{}, {}] are empty",
            spec.min_n, spec.max_n
        )));
    }
    let ground_limit = match spec.kind {
        Kind::SetFamily | Kind::Weighted | Kind::Selector => selcert::selector::EXACT_MAX_N,
        _ => 64,
    };
    if spec.max_n > ground_limit {
        return Err(Error::InvalidParameter(format!(
            "max n {} exceeds {ground_limit}",
            spec.max_n
        )));
    }
    if let Some(p) = &spec.p {
        rational::check_probability(p)?;
    }
    (0..spec.count)
        .map(|i| {
            let mut rng = mc::trial_rng(spec.seed, kind_stream(spec.kind), i as u64);
            let inst = match spec.kind {
                Kind::SetFamily => random_family(&mut rng, spec, false)?,
                Kind::Weighted => random_family(&mut rng, spec, true)?,
                Kind::Selector => random_selector(&mut rng, spec)?,
                Kind::LevySpec => random_levy(&mut rng)?,
                Kind::Empirical => random_empirical(&mut rng, spec)?,
            };
            Ok((format!("{}-{:03}", spec.kind.name(), i), inst))
        })
        .collect()
}

pub fn write_instances(dir: &Path, instances: &[(String, Instance)]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    instances
        .iter()
        .map(|(name, inst)| {
            let path = dir.join(format!("{name}.txt"));
            std::fs::write(&path, write_instance(inst))?;
            Ok(path)
        })
        .collect()
}

fn pick_p<R: Rng>(rng: &mut R, spec: &GenSpec, lo: i64, hi: i64) -> Q {
    spec.p
        .clone()
        .unwrap_or_else(|| rational::q(1, rng.random_range(lo..=hi)))
}

fn random_family<R: Rng>(rng: &mut R, spec: &GenSpec, weighted: bool) -> Result<Instance> {
    for _ in 0..MAX_ATTEMPTS {
        let n = rng.random_range(spec.min_n..=spec.max_n);
        let p = pick_p(rng, spec, 2, n.max(2) as i64);
        let mut family = SetFamily::new(n)?;
        for _ in 0..rng.random_range(1..=2 * n) {
            let size = rng.random_range(1..=n.min(3));
            let mut elems: Vec<usize> = Vec::with_capacity(size);
            while elems.len() < size {
                let e = rng.random_range(0..n);
                if !elems.contains(&e) {
                    elems.push(e);
                }
            }
            family.insert(Subset::from_elements(n, &elems)?)?;
        }
        let limits = SearchLimits {
            max_n: n,
            max_members: 2 * n + 1,
        };
        let (small, _) = sets::is_p_small_with(&family, &p, limits)?;
        if small {
            continue;
        }
        if !weighted {
            return Ok(Instance::SetFamily { family, p });
        }
        let members = family
            .members()
            .iter()
            .map(|s| {
                let raw: Vec<i64> = (0..s.len()).map(|_| rng.random_range(1..=4)).collect();
                let total: i64 = raw.iter().sum();
                WeightedMember::new(*s, raw.iter().map(|&w| rational::q(w, total)).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        let family = WeightedFamily::new(n, members, selcert::witness::Normalization::Exact)?;
        return Ok(Instance::Weighted { family, p });
    }
    Err(Error::Unsatisfiable(format!(
        "no family that is not p-small within {MAX_ATTEMPTS} draws"
    )))
}

fn random_selector<R: Rng>(rng: &mut R, spec: &GenSpec) -> Result<Instance> {
    let n = rng.random_range(spec.min_n..=spec.max_n);
    let p = pick_p(rng, spec, 3, 20);
    for _ in 0..MAX_ATTEMPTS {
        let rows: Vec<Vec<Q>> = (0..rng.random_range(1..=8))
            .map(|_| {
                (0..n)
                    .map(|_| {
                        if rng.random_bool(0.5) {
                            Q::from_integer(0.into())
                        } else {
                            rational::q(rng.random_range(1..=4), 4)
                        }
                    })
                    .collect()
            })
            .collect();
        if rows.iter().flatten().any(|v| v > &Q::from_integer(0.into())) {
            return Ok(Instance::Selector(SelectorInstance::new(n, rows, p)?));
        }
    }
    Err(Error::Unsatisfiable(format!(
        "no nonzero process within {MAX_ATTEMPTS} draws"
    )))
}

fn random_levy<R: Rng>(rng: &mut R) -> Result<Instance> {
    let dim = rng.random_range(1..=2);
    let labels = (1..=dim).map(|t| format!("t{t}")).collect();
    let boxes = (0..rng.random_range(1..=3))
        .map(|_| {
            let lower: Vec<Q> = (0..dim).map(|_| rational::q(rng.random_range(0..=4), 4)).collect();
            let upper = lower
                .iter()
                .map(|l| l + rational::q(rng.random_range(1..=4), 4))
                .collect();
            LevyBox {
                mass: rational::q(rng.random_range(1..=4), 4),
                lower,
                upper,
            }
        })
        .collect();
    Ok(Instance::LevySpec(LevyMeasureSpec::new(labels, boxes)?))
}

fn random_empirical<R: Rng>(rng: &mut R, spec: &GenSpec) -> Result<Instance> {
    let d = rng.random_range(spec.min_n.min(10)..=spec.max_n.min(10)) as u64;
    let functions = (0..rng.random_range(1..=3))
        .map(|_| {
            let mut starts: Vec<i64> = vec![0];
            for _ in 1..rng.random_range(1..=4) {
                let s = rng.random_range(1..16);
                if !starts.contains(&s) {
                    starts.push(s);
                }
            }
            starts.sort_unstable();
            let pieces = starts
                .into_iter()
                .map(|s| (rational::q(s, 16), rational::q(rng.random_range(1..=8), 4)))
                .collect();
            StepFunction::new(pieces)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Instance::Empirical(EmpiricalInstance::new(d, functions)?))
}
