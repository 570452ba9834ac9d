use std::path::{Path, PathBuf};

use serde::Deserialize;

use selcert::rational::{self, Q};
use selcert::{empirical, levy, selector, SearchLimits};

pub const DEFAULT_TRIALS: u64 = 100_000;
pub const DEFAULT_OUT: &str = "selcert-out";
pub const OUT_ENV: &str = "SELCERT_OUT";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    CertifySelector,
    VerifyKeyLemma,
    VerifyTheorems,
    SimulateId,
    SimulateEmpirical,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::CertifySelector => "certify-selector",
            Mode::VerifyKeyLemma => "verify-key-lemma",
            Mode::VerifyTheorems => "verify-theorems",
            Mode::SimulateId => "simulate-id",
            Mode::SimulateEmpirical => "simulate-empirical",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constants {
    /// Threshold multiplier for the selector cover.
    pub l: Q,
    /// Threshold multiplier for the δ-small certificates; `None` picks the
    /// pipeline default.
    pub k: Option<Q>,
    /// Badness level.
    pub c: Q,
    /// Constant of the `(90C+1)S` family.
    pub big_c: Q,
}

impl Default for Constants {
    fn default() -> Self {
        Constants {
            l: rational::qi(selector::MAIN1_L),
            k: None,
            c: rational::half(),
            big_c: rational::qi(1),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CampaignConfig {
    pub mode: Mode,
    pub instances: Vec<PathBuf>,
    pub seed: u64,
    pub trials: u64,
    pub out: PathBuf,
    pub max_n: usize,
    pub exact_only: bool,
    pub limits: SearchLimits,
    pub constants: Constants,
}

impl CampaignConfig {
    pub fn new(mode: Mode) -> Self {
        CampaignConfig {
            mode,
            instances: Vec::new(),
            seed: 0,
            trials: DEFAULT_TRIALS,
            out: PathBuf::from(DEFAULT_OUT),
            max_n: selector::EXACT_MAX_N,
            exact_only: false,
            limits: SearchLimits::default(),
            constants: Constants::default(),
        }
    }

    pub fn k_for(&self, mode: Mode) -> Q {
        self.constants.k.clone().unwrap_or_else(|| match mode {
            Mode::SimulateEmpirical => rational::qi(empirical::DEFAULT_K),
            _ => rational::qi(levy::DEFAULT_K),
        })
    }

    /// Rejects overrides below the constants the theorems are stated with.
    pub fn validate(&mut self) -> Result<(), String> {
        let c = &self.constants;
        if c.l < rational::qi(selector::MAIN1_L) {
            return Err(format!("--L {} is below {}", rational::fmt(&c.l), selector::MAIN1_L));
        }
        if let Some(k) = &c.k {
            let min = match self.mode {
                Mode::SimulateEmpirical => rational::qi(empirical::DEFAULT_K),
                _ => levy::k_min(),
            };
            if k < &min {
                return Err(format!(
                    "--K {} is below {:.1}",
                    rational::fmt(k),
                    rational::to_f64(&min)
                ));
            }
        }
        if !(c.c > Q::from_integer(0.into()) && c.c <= rational::qi(1)) {
            return Err(format!("--c {} must lie in (0, 1]", rational::fmt(&c.c)));
        }
        if c.big_c < rational::qi(1) {
            return Err(format!("--C {} is below 1", rational::fmt(&c.big_c)));
        }
        if self.max_n > selector::EXACT_MAX_N {
            return Err(format!("--max-n {} exceeds {}", self.max_n, selector::EXACT_MAX_N));
        }
        if self.trials == 0 {
            return Err("--trials must be positive".into());
        }
        self.limits.max_n = self.max_n;
        Ok(())
    }
}

/// Either a TOML integer or a fraction string such as `"221/2"`.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Fraction {
    Int(i64),
    Text(String),
}

impl Fraction {
    pub fn to_q(&self) -> Result<Q, String> {
        match self {
            Fraction::Int(v) => Ok(rational::qi(*v)),
            Fraction::Text(s) => rational::parse(s).ok_or_else(|| format!("`{s}` is not a fraction")),
        }
    }
}

/// Config file contents; every present field overrides the command line.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub mode: Option<Mode>,
    pub instances: Option<Vec<PathBuf>>,
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub out: Option<PathBuf>,
    #[serde(rename = "L")]
    pub l: Option<Fraction>,
    #[serde(rename = "K")]
    pub k: Option<Fraction>,
    pub c: Option<Fraction>,
    #[serde(rename = "C")]
    pub big_c: Option<Fraction>,
    pub max_n: Option<usize>,
    pub exact_only: Option<bool>,
    pub max_members: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Relative instance paths resolve against `base`, the config file's directory.
    pub fn apply(self, cfg: &mut CampaignConfig, base: &Path) -> Result<(), String> {
        if let Some(m) = self.mode {
            cfg.mode = m;
        }
        if let Some(list) = self.instances {
            cfg.instances = list.into_iter().map(|p| base.join(p)).collect();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(o) = self.out {
            cfg.out = base.join(o);
        }
        if let Some(l) = self.l {
            cfg.constants.l = l.to_q()?;
        }
        if let Some(k) = self.k {
            cfg.constants.k = Some(k.to_q()?);
        }
        if let Some(c) = self.c {
            cfg.constants.c = c.to_q()?;
        }
        if let Some(c) = self.big_c {
            cfg.constants.big_c = c.to_q()?;
        }
        if let Some(n) = self.max_n {
            cfg.max_n = n;
        }
        if let Some(e) = self.exact_only {
            cfg.exact_only = e;
        }
        if let Some(m) = self.max_members {
            cfg.limits.max_members = m;
        }
        Ok(())
    }
}
