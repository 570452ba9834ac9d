//! Line-based instance files.
//!
//! Every file starts with `selcert <kind> v1`; `#` starts a comment and blank
//! lines are ignored. Element indices are 1-based.
//!
//! ```text
//! selcert selector v1
//! n 3
//! p 1/4
//! t 1 0 1/2
//! t 0 1 1/2
//! ```

use std::fmt::Write as _;

use crate::empirical::{EmpiricalInstance, StepFunction};
use crate::error::{Error, Result};
use crate::levy::{LevyBox, LevyMeasureSpec};
use crate::rational::{self, Q};
use crate::selector::SelectorInstance;
use crate::sets::{CoverCertificate, SetFamily, Subset, MAX_GROUND};
use crate::witness::{Normalization, WeightedFamily, WeightedMember};

pub const MAX_ROWS: usize = 100_000;
pub const MAX_DIM: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kind {
    SetFamily,
    Weighted,
    Selector,
    LevySpec,
    Empirical,
}

impl Kind {
    pub const ALL: [Kind; 5] = [
        Kind::SetFamily,
        Kind::Weighted,
        Kind::Selector,
        Kind::LevySpec,
        Kind::Empirical,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::SetFamily => "set-family",
            Kind::Weighted => "weighted-family",
            Kind::Selector => "selector",
            Kind::LevySpec => "levy-spec",
            Kind::Empirical => "empirical",
        }
    }

    pub fn from_name(s: &str) -> Option<Kind> {
        Kind::ALL.into_iter().find(|k| k.name() == s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Instance {
    SetFamily { family: SetFamily, p: Q },
    Weighted { family: WeightedFamily, p: Q },
    Selector(SelectorInstance),
    LevySpec(LevyMeasureSpec),
    Empirical(EmpiricalInstance),
}

impl Instance {
    pub fn kind(&self) -> Kind {
        match self {
            Instance::SetFamily { .. } => Kind::SetFamily,
            Instance::Weighted { .. } => Kind::Weighted,
            Instance::Selector(_) => Kind::Selector,
            Instance::LevySpec(_) => Kind::LevySpec,
            Instance::Empirical(_) => Kind::Empirical,
        }
    }
}

struct Line<'a> {
    no: usize,
    key: &'a str,
    rest: Vec<&'a str>,
}

fn lines(text: &str) -> impl Iterator<Item = Line<'_>> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let body = raw.split('#').next().unwrap_or("");
        let mut toks = body.split_whitespace();
        let key = toks.next()?;
        Some(Line {
            no: i + 1,
            key,
            rest: toks.collect(),
        })
    })
}

fn frac(no: usize, s: &str) -> Result<Q> {
    rational::parse(s).ok_or_else(|| Error::parse(no, format!("`{s}` is not a fraction")))
}

fn count(no: usize, s: &str) -> Result<usize> {
    s.parse().map_err(|_| Error::parse(no, format!("`{s}` is not a count")))
}

fn single<'a>(l: &Line<'a>) -> Result<&'a str> {
    match l.rest.as_slice() {
        [v] => Ok(v),
        _ => Err(Error::parse(l.no, format!("`{}` takes exactly one value", l.key))),
    }
}

fn index(no: usize, s: &str, n: usize) -> Result<usize> {
    let i = count(no, s)?;
    if i == 0 || i > n {
        return Err(Error::parse(no, format!("index {i} outside 1..={n}")));
    }
    Ok(i - 1)
}

fn at(no: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        e @ Error::Parse { .. } => e,
        e => Error::parse(no, e.to_string()),
    }
}

#[derive(Default)]
struct Header {
    n: Option<usize>,
    p: Option<Q>,
}

impl Header {
    fn take(&mut self, l: &Line) -> Result<bool> {
        match l.key {
            "n" => {
                if self.n.is_some() {
                    return Err(Error::parse(l.no, "duplicate `n`"));
                }
                let n = count(l.no, single(l)?)?;
                if n > MAX_GROUND {
                    return Err(Error::parse(l.no, format!("n = {n} exceeds {MAX_GROUND}")));
                }
                self.n = Some(n);
            }
            "p" => {
                if self.p.is_some() {
                    return Err(Error::parse(l.no, "duplicate `p`"));
                }
                let p = frac(l.no, single(l)?)?;
                rational::check_probability(&p).map_err(at(l.no))?;
                self.p = Some(p);
            }
            _ => return Ok(false),
        }
        Ok(true)
    }

    fn n(&self, no: usize) -> Result<usize> {
        self.n.ok_or_else(|| Error::parse(no, "`n` must come first"))
    }

    fn p(&self, no: usize) -> Result<Q> {
        self.p.clone().ok_or_else(|| Error::parse(no, "missing `p`"))
    }
}

/// Parses any instance file, dispatching on its header.
pub fn parse_instance(text: &str) -> Result<Instance> {
    let mut it = lines(text);
    let head = it.next().ok_or_else(|| Error::parse(1, "empty file"))?;
    let kind = match (head.key, head.rest.as_slice()) {
        ("selcert", [kind, "v1"]) => {
            Kind::from_name(kind).ok_or_else(|| Error::parse(head.no, format!("unknown kind `{kind}`")))?
        }
        _ => return Err(Error::parse(head.no, "expected `selcert <kind> v1`")),
    };
    let body: Vec<Line> = it.collect();
    let last = body.last().map_or(head.no, |l| l.no);
    match kind {
        Kind::SetFamily => parse_set_family(&body, last),
        Kind::Weighted => parse_weighted(&body, last),
        Kind::Selector => parse_selector(&body, last),
        Kind::LevySpec => parse_levy(&body, last),
        Kind::Empirical => parse_empirical(&body, last),
    }
}

fn too_many(no: usize, rows: usize) -> Result<()> {
    if rows >= MAX_ROWS {
        return Err(Error::parse(no, format!("more than {MAX_ROWS} rows")));
    }
    Ok(())
}

fn unknown(l: &Line) -> Error {
    Error::parse(l.no, format!("unknown key `{}`", l.key))
}

fn parse_set_family(body: &[Line], last: usize) -> Result<Instance> {
    let mut h = Header::default();
    let mut family: Option<SetFamily> = None;
    for l in body {
        if h.take(l)? {
            continue;
        }
        match l.key {
            "set" => {
                let n = h.n(l.no)?;
                let f = family.get_or_insert_with(|| SetFamily::new(n).expect("n checked"));
                too_many(l.no, f.len())?;
                let elems = l.rest.iter().map(|s| index(l.no, s, n)).collect::<Result<Vec<_>>>()?;
                let s = Subset::from_elements(n, &elems).map_err(at(l.no))?;
                if !f.insert(s).map_err(at(l.no))? {
                    return Err(Error::parse(l.no, format!("duplicate set {s}")));
                }
            }
            _ => return Err(unknown(l)),
        }
    }
    let n = h.n(last)?;
    Ok(Instance::SetFamily {
        family: family.unwrap_or_else(|| SetFamily::new(n).expect("n checked")),
        p: h.p(last)?,
    })
}

fn parse_weighted(body: &[Line], last: usize) -> Result<Instance> {
    let mut h = Header::default();
    let mut norm: Option<Normalization> = None;
    let mut members: Vec<(usize, WeightedMember)> = Vec::new();
    for l in body {
        if h.take(l)? {
            continue;
        }
        match l.key {
            "normalization" => {
                norm = Some(match single(l)? {
                    "exact" => Normalization::Exact,
                    "at-least-one" => Normalization::AtLeastOne,
                    other => return Err(Error::parse(l.no, format!("unknown normalization `{other}`"))),
                });
            }
            "member" => {
                let n = h.n(l.no)?;
                too_many(l.no, members.len())?;
                let mut pairs = Vec::with_capacity(l.rest.len());
                for tok in &l.rest {
                    let (i, c) = tok
                        .split_once(':')
                        .ok_or_else(|| Error::parse(l.no, format!("expected `index:coefficient`, got `{tok}`")))?;
                    pairs.push((index(l.no, i, n)?, frac(l.no, c)?));
                }
                pairs.sort_by_key(|(i, _)| *i);
                if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
                    return Err(Error::parse(l.no, "repeated element in member"));
                }
                let elems: Vec<usize> = pairs.iter().map(|(i, _)| *i).collect();
                let set = Subset::from_elements(n, &elems).map_err(at(l.no))?;
                let m = WeightedMember::new(set, pairs.into_iter().map(|(_, c)| c).collect()).map_err(at(l.no))?;
                members.push((l.no, m));
            }
            _ => return Err(unknown(l)),
        }
    }
    let n = h.n(last)?;
    let norm = norm.ok_or_else(|| Error::parse(last, "missing `normalization`"))?;
    let no = members.last().map_or(last, |(no, _)| *no);
    let family = WeightedFamily::new(n, members.into_iter().map(|(_, m)| m).collect(), norm).map_err(at(no))?;
    Ok(Instance::Weighted { family, p: h.p(last)? })
}

fn parse_selector(body: &[Line], last: usize) -> Result<Instance> {
    let mut h = Header::default();
    let mut rows = Vec::new();
    for l in body {
        if h.take(l)? {
            continue;
        }
        match l.key {
            "t" => {
                let n = h.n(l.no)?;
                too_many(l.no, rows.len())?;
                if l.rest.len() != n {
                    return Err(Error::parse(
                        l.no,
                        format!("row has {} entries, expected {n}", l.rest.len()),
                    ));
                }
                rows.push(l.rest.iter().map(|s| frac(l.no, s)).collect::<Result<Vec<_>>>()?);
            }
            _ => return Err(unknown(l)),
        }
    }
    let inst = SelectorInstance::new(h.n(last)?, rows, h.p(last)?).map_err(at(last))?;
    Ok(Instance::Selector(inst))
}

fn parse_levy(body: &[Line], last: usize) -> Result<Instance> {
    let mut labels: Option<Vec<String>> = None;
    let mut boxes = Vec::new();
    for l in body {
        match l.key {
            "labels" => {
                if labels.is_some() {
                    return Err(Error::parse(l.no, "duplicate `labels`"));
                }
                if l.rest.is_empty() || l.rest.len() > MAX_DIM {
                    return Err(Error::parse(l.no, format!("need 1 to {MAX_DIM} labels")));
                }
                labels = Some(l.rest.iter().map(|s| s.to_string()).collect());
            }
            "box" => {
                let dim = labels
                    .as_ref()
                    .ok_or_else(|| Error::parse(l.no, "`labels` must come first"))?
                    .len();
                too_many(l.no, boxes.len())?;
                let (mut mass, mut lower, mut upper) = (None, None, None);
                for tok in &l.rest {
                    let (k, v) = tok
                        .split_once('=')
                        .ok_or_else(|| Error::parse(l.no, format!("expected `key=value`, got `{tok}`")))?;
                    let list = || -> Result<Vec<Q>> {
                        let v: Vec<Q> = v.split(',').map(|s| frac(l.no, s)).collect::<Result<_>>()?;
                        if v.len() != dim {
                            return Err(Error::parse(
                                l.no,
                                format!("`{k}` has {} coordinates, expected {dim}", v.len()),
                            ));
                        }
                        Ok(v)
                    };
                    match k {
                        "mass" => mass = Some(frac(l.no, v)?),
                        "lower" => lower = Some(list()?),
                        "upper" => upper = Some(list()?),
                        _ => return Err(Error::parse(l.no, format!("unknown box field `{k}`"))),
                    }
                }
                let missing = |f: &str| Error::parse(l.no, format!("box is missing `{f}`"));
                boxes.push(LevyBox {
                    mass: mass.ok_or_else(|| missing("mass"))?,
                    lower: lower.ok_or_else(|| missing("lower"))?,
                    upper: upper.ok_or_else(|| missing("upper"))?,
                });
            }
            _ => return Err(unknown(l)),
        }
    }
    let labels = labels.ok_or_else(|| Error::parse(last, "missing `labels`"))?;
    Ok(Instance::LevySpec(
        LevyMeasureSpec::new(labels, boxes).map_err(at(last))?,
    ))
}

fn parse_empirical(body: &[Line], last: usize) -> Result<Instance> {
    let mut d = None;
    let mut functions = Vec::new();
    for l in body {
        match l.key {
            "d" => {
                if d.is_some() {
                    return Err(Error::parse(l.no, "duplicate `d`"));
                }
                d = Some(count(l.no, single(l)?)? as u64);
            }
            "fn" => {
                too_many(l.no, functions.len())?;
                let mut pieces = Vec::with_capacity(l.rest.len());
                for tok in &l.rest {
                    let (x, v) = tok
                        .split_once(':')
                        .ok_or_else(|| Error::parse(l.no, format!("expected `start:value`, got `{tok}`")))?;
                    pieces.push((frac(l.no, x)?, frac(l.no, v)?));
                }
                functions.push(StepFunction::new(pieces).map_err(at(l.no))?);
            }
            _ => return Err(unknown(l)),
        }
    }
    let d = d.ok_or_else(|| Error::parse(last, "missing `d`"))?;
    Ok(Instance::Empirical(
        EmpiricalInstance::new(d, functions).map_err(at(last))?,
    ))
}

fn join<T>(items: impl IntoIterator<Item = T>, sep: &str, f: impl Fn(T) -> String) -> String {
    items.into_iter().map(f).collect::<Vec<_>>().join(sep)
}

pub fn write_instance(inst: &Instance) -> String {
    let mut out = format!("selcert {} v1\n", inst.kind().name());
    match inst {
        Instance::SetFamily { family, p } => {
            let _ = writeln!(out, "n {}\np {}", family.ground(), rational::fmt(p));
            for s in family.members() {
                let _ = writeln!(out, "set{}", join(s.iter(), "", |i| format!(" {}", i + 1)));
            }
        }
        Instance::Weighted { family, p } => {
            let norm = match family.normalization() {
                Normalization::Exact => "exact",
                Normalization::AtLeastOne => "at-least-one",
            };
            let _ = writeln!(
                out,
                "n {}\np {}\nnormalization {norm}",
                family.ground(),
                rational::fmt(p)
            );
            for m in family.members() {
                let _ = writeln!(
                    out,
                    "member{}",
                    join(m.pairs(), "", |(i, c)| format!(" {}:{}", i + 1, rational::fmt(c)))
                );
            }
        }
        Instance::Selector(s) => {
            let _ = writeln!(out, "n {}\np {}", s.n(), rational::fmt(s.p()));
            for row in s.vectors() {
                let _ = writeln!(out, "t{}", join(row, "", |v| format!(" {}", rational::fmt(v))));
            }
        }
        Instance::LevySpec(spec) => {
            let _ = writeln!(out, "labels {}", spec.labels().join(" "));
            for b in spec.boxes() {
                let _ = writeln!(
                    out,
                    "box mass={} lower={} upper={}",
                    rational::fmt(&b.mass),
                    join(&b.lower, ",", rational::fmt),
                    join(&b.upper, ",", rational::fmt)
                );
            }
        }
        Instance::Empirical(e) => {
            let _ = writeln!(out, "d {}", e.d());
            for f in e.functions() {
                let _ = writeln!(
                    out,
                    "fn{}",
                    join(f.pieces(), "", |(x, v)| format!(
                        " {}:{}",
                        rational::fmt(x),
                        rational::fmt(v)
                    ))
                );
            }
        }
    }
    out
}

pub const COVER_HEADER: &str = "selcert-cover v1";

/// A cover of `{I : sup_t Σ_{i∈I} t_i >= threshold}` as written to disk. The
/// stored weight is kept verbatim so a re-check can compare it against the
/// generators.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoverFile {
    pub threshold: Q,
    pub cover: CoverCertificate,
}

pub fn write_cover(threshold: &Q, cover: &CoverCertificate) -> String {
    let mut out = format!(
        "{COVER_HEADER}\nn {}\np {}\nthreshold {}\nweight {}\n",
        cover.generators.ground(),
        rational::fmt(&cover.p),
        rational::fmt(threshold),
        rational::fmt(&cover.weight)
    );
    for g in cover.generators.members() {
        let _ = writeln!(out, "gen{}", join(g.iter(), "", |i| format!(" {}", i + 1)));
    }
    out
}

pub fn parse_cover(text: &str) -> Result<CoverFile> {
    let mut it = lines(text);
    let head = it.next().ok_or_else(|| Error::parse(1, "empty file"))?;
    if head.key != "selcert-cover" || head.rest != ["v1"] {
        return Err(Error::parse(head.no, format!("expected `{COVER_HEADER}`")));
    }
    let mut h = Header::default();
    let (mut threshold, mut weight) = (None, None);
    let mut gens: Option<SetFamily> = None;
    let mut last = head.no;
    for l in it {
        last = l.no;
        if h.take(&l)? {
            continue;
        }
        match l.key {
            "threshold" => threshold = Some(frac(l.no, single(&l)?)?),
            "weight" => weight = Some(frac(l.no, single(&l)?)?),
            "gen" => {
                let n = h.n(l.no)?;
                let f = gens.get_or_insert_with(|| SetFamily::new(n).expect("n checked"));
                too_many(l.no, f.len())?;
                let elems = l.rest.iter().map(|s| index(l.no, s, n)).collect::<Result<Vec<_>>>()?;
                let s = Subset::from_elements(n, &elems).map_err(at(l.no))?;
                if !f.insert(s).map_err(at(l.no))? {
                    return Err(Error::parse(l.no, format!("duplicate generator {s}")));
                }
            }
            _ => return Err(unknown(&l)),
        }
    }
    let n = h.n(last)?;
    Ok(CoverFile {
        threshold: threshold.ok_or_else(|| Error::parse(last, "missing `threshold`"))?,
        cover: CoverCertificate {
            generators: gens.unwrap_or_else(|| SetFamily::new(n).expect("n checked")),
            p: h.p(last)?,
            weight: weight.ok_or_else(|| Error::parse(last, "missing `weight`"))?,
        },
    })
}
