use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use selcert::format::Kind;
use selcert::rational::{self, Q};
use selcert_cli::config::{self, CampaignConfig, FileConfig, Mode};
use selcert_cli::generate::{self, GenSpec};

#[derive(Parser)]
#[command(
    name = "selcert",
    version,
    about = "Cover certificates for suprema of positive processes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn parse_q(s: &str) -> Result<Q, String> {
    rational::parse(s).ok_or_else(|| format!("`{s}` is not a fraction"))
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Run a campaign over instance files or directories.
    Run {
        /// Instance files or directories of instance files.
        instances: Vec<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = config::DEFAULT_TRIALS)]
        trials: u64,
        /// Output directory.
        #[arg(long, env = config::OUT_ENV, default_value = config::DEFAULT_OUT)]
        out: PathBuf,
        /// Selector threshold multiplier, at least 221.
        #[arg(long = "L", value_parser = parse_q)]
        l: Option<Q>,
        /// δ-small threshold multiplier; defaults to 2500 (ID) or 2240 (empirical).
        #[arg(long = "K", value_parser = parse_q)]
        k: Option<Q>,
        /// Badness level in (0, 1].
        #[arg(long = "c", value_parser = parse_q)]
        c: Option<Q>,
        /// Constant of the (90C+1) family, at least 1.
        #[arg(long = "C", value_parser = parse_q)]
        big_c: Option<Q>,
        /// Largest ground set for exact enumeration, at most 20.
        #[arg(long)]
        max_n: Option<usize>,
        /// Skip Monte Carlo estimates where an exact value is available.
        #[arg(long)]
        exact_only: bool,
        /// TOML file whose fields override the flags.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Write reproducible random instances.
    Generate {
        /// set-family, weighted-family, selector, levy-spec or empirical.
        #[arg(long, value_parser = parse_kind)]
        kind: Kind,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 4)]
        min_n: usize,
        #[arg(long, default_value_t = 8)]
        max_n: usize,
        /// Fixed selector probability; drawn per instance when absent.
        #[arg(long, value_parser = parse_q)]
        p: Option<Q>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, env = config::OUT_ENV, default_value = config::DEFAULT_OUT)]
        out: PathBuf,
    },
}

fn parse_kind(s: &str) -> Result<Kind, String> {
    Kind::from_name(s).ok_or_else(|| {
        let names: Vec<&str> = Kind::ALL.iter().map(|k| k.name()).collect();
        format!("unknown kind `{s}`; expected one of {}", names.join(", "))
    })
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<bool, String> {
    match Cli::parse().command {
        Command::Run {
            instances,
            mode,
            seed,
            trials,
            out,
            l,
            k,
            c,
            big_c,
            max_n,
            exact_only,
            config,
        } => {
            let mut cfg = CampaignConfig::new(mode.unwrap_or(Mode::CertifySelector));
            cfg.instances = instances;
            cfg.seed = seed;
            cfg.trials = trials;
            cfg.out = out;
            cfg.exact_only = exact_only;
            if let Some(l) = l {
                cfg.constants.l = l;
            }
            cfg.constants.k = k;
            if let Some(c) = c {
                cfg.constants.c = c;
            }
            if let Some(big_c) = big_c {
                cfg.constants.big_c = big_c;
            }
            if let Some(n) = max_n {
                cfg.max_n = n;
            }
            if let Some(path) = config {
                let base = path.parent().map(PathBuf::from).unwrap_or_default();
                FileConfig::load(&path)?.apply(&mut cfg, &base)?;
            } else if mode.is_none() {
                return Err("--mode is required without --config".into());
            }
            let report = selcert_cli::run(&cfg)?;
            let s = &report.summary;
            println!(
                "{}: {} instances, {} passed, {} failed, {} skipped, {} errors, {} violations; report in {}",
                cfg.mode.name(),
                s.instances,
                s.passed,
                s.failed,
                s.skipped,
                s.errors,
                s.violations,
                cfg.out.join("report.txt").display()
            );
            for row in report.rows.iter().filter(|r| r.failed()) {
                match &row.error {
                    Some(e) => eprintln!("error: {e}"),
                    None => eprintln!("failed: {}", row.id),
                }
            }
            Ok(report.success())
        }
        Command::Generate {
            kind,
            count,
            min_n,
            max_n,
            p,
            seed,
            out,
        } => {
            let mut spec = GenSpec::new(kind, count, min_n, max_n, seed);
            spec.p = p;
            let instances = generate::generate_instances(&spec).map_err(|e| e.to_string())?;
            let paths = generate::write_instances(&out, &instances).map_err(|e| e.to_string())?;
            println!("wrote {} {} instances to {}", paths.len(), kind.name(), out.display());
            Ok(true)
        }
    }
}
