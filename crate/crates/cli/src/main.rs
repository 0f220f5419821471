use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use fieldclt::bvdecomp::{jordan_decompose, PiecewiseMonotoneFn};
use fieldclt::dependence::ThetaSequence;
use fieldclt::estimation::{covariance_sum_check, sigma_squared, DEFAULT_QUAD_TOL};
use fieldclt::fields::FieldModel;
use fieldclt::harness::{
    run_multivariate_clt, run_transformed_clt, run_univariate_clt, Branch, ExperimentConfig, NullCache, RunContext,
    RunOutput,
};
use fieldclt::windows::{vh_diagnostics, vh_rows_to_csv, Window};

const EXIT_FAIL: u8 = 1;
const EXIT_ERROR: u8 = 2;

#[derive(Parser)]
#[command(
    name = "fieldclt",
    version,
    about = "Monte Carlo checks of central limit theorems for integrals of random fields"
)]
struct Cli {
    /// Print progress and summaries to stderr
    #[arg(long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Univariate CLT experiment (one component)
    CltRun(RunArgs),
    /// Multivariate CLT experiment over Cramer-Wold directions
    CltMulti(RunArgs),
    /// Asymptotic variance of a field model
    Sigma2 {
        /// Field model JSON
        #[arg(long)]
        model: PathBuf,
        /// Truncation radius (defaults to the model's own)
        #[arg(long)]
        radius: Option<f64>,
        /// Absolute quadrature tolerance
        #[arg(long, default_value_t = DEFAULT_QUAD_TOL)]
        tol: f64,
    },
    /// Compare the block covariance sum with sigma^2, printed as JSON
    CovSumCheck {
        /// Field model JSON
        #[arg(long)]
        model: PathBuf,
        /// Largest lag |j|_inf included in the block sum
        #[arg(long)]
        max_lag: u32,
    },
    /// Tabulate a dependence sequence as CSV `r,theta_r`
    Theta {
        /// Sequence JSON
        #[arg(long)]
        config: PathBuf,
        /// Last index to print
        #[arg(long, default_value_t = 20)]
        max_r: u64,
        /// Write the CSV here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample a Jordan decomposition as CSV `t,f,f_plus,f_minus,h,g_of_h`
    DecomposeBv {
        /// Piecewise monotone function JSON
        #[arg(long)]
        config: PathBuf,
        /// Number of evaluation points over the breakpoint range
        #[arg(long, default_value_t = 401)]
        points: usize,
        /// Write the CSV here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Van Hove diagnostics for a JSON list of windows
    VhCheck {
        /// Window list JSON
        #[arg(long)]
        config: PathBuf,
        /// Write the CSV here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Experiment JSON
    #[arg(long)]
    config: PathBuf,
    /// Report JSON (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sample CSV `rep,direction,value`; QQ data goes to `<stem>.qq<k>.csv` beside it
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Master seed, overriding the config
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (results do not depend on this)
    #[arg(long)]
    threads: Option<usize>,
    /// Directory that persists tabulated null moments between runs
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let verbose = cli.verbose;
    match cli.command {
        Command::CltRun(args) => experiment(args, false, verbose),
        Command::CltMulti(args) => experiment(args, true, verbose),
        Command::Sigma2 { model, radius, tol } => {
            let model: FieldModel = read_json(&model)?;
            let radius = radius.unwrap_or_else(|| model.suggested_truncation_radius());
            let s2 = sigma_squared(&model, radius, tol)?;
            println!("{s2:?}");
            Ok(ExitCode::SUCCESS)
        }
        Command::CovSumCheck { model, max_lag } => {
            let model: FieldModel = read_json(&model)?;
            let check = covariance_sum_check(&model, max_lag)?;
            println!("{}", serde_json::to_string(&check)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Theta { config, max_r, out } => {
            let theta: ThetaSequence = read_json(&config)?;
            theta.validate()?;
            let mut csv = String::from("r,theta_r\n");
            for (r, v) in theta.table(max_r) {
                writeln!(csv, "{r},{v:?}")?;
            }
            emit(out.as_deref(), &csv)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::DecomposeBv { config, points, out } => {
            let f: PiecewiseMonotoneFn = read_json(&config)?;
            if points < 2 {
                bail!("--points must be at least 2");
            }
            let (a, b) = (f.lower(), f.upper());
            let dec = jordan_decompose(&f, (a, b))?;
            let mut csv = String::from("t,f,f_plus,f_minus,h,g_of_h\n");
            for k in 0..points {
                let t = a + (b - a) * k as f64 / (points - 1) as f64;
                let h = dec.h(t);
                writeln!(
                    csv,
                    "{t:?},{:?},{:?},{:?},{h:?},{:?}",
                    dec.f(t),
                    dec.f_plus(t),
                    dec.f_minus(t),
                    dec.g(h)
                )?;
            }
            emit(out.as_deref(), &csv)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::VhCheck { config, out } => {
            let windows: Vec<Window> = read_json(&config)?;
            let rows = vh_diagnostics(&windows)?;
            emit(out.as_deref(), &vh_rows_to_csv(&rows))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn experiment(args: RunArgs, multi: bool, verbose: bool) -> Result<ExitCode> {
    let text = fs::read_to_string(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    let mut cfg = ExperimentConfig::from_json(&text).with_context(|| format!("parsing {}", args.config.display()))?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let ctx = RunContext {
        threads: args.threads,
        cache: match &args.cache_dir {
            Some(dir) => NullCache::with_dir(dir),
            None => NullCache::new(),
        },
    };
    let output = if multi {
        run_multivariate_clt(&cfg, &ctx)?
    } else if cfg.components() != 1 {
        bail!("clt-run takes one component; use clt-multi for {}", cfg.components());
    } else if cfg.branch() == Branch::BoundedVariation {
        run_transformed_clt(&cfg, &ctx)?
    } else {
        run_univariate_clt(&cfg, &ctx)?
    };
    if verbose {
        summarize(&output);
    }
    emit(args.out.as_deref(), &(output.report.to_json() + "\n"))?;
    if let Some(csv) = &args.csv {
        write_atomic(csv, &output.samples.to_csv())?;
        for k in 0..output.samples.directions.len() {
            write_atomic(&qq_path(csv, k), &output.samples.qq_csv(k))?;
        }
    }
    Ok(if output.report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAIL)
    })
}

fn summarize(output: &RunOutput) {
    let r = &output.report;
    eprintln!(
        "{} d={} volume={} M={} seed={} ({:.2}s)",
        r.family, r.dim, r.volume, r.replications, r.seed, r.timing.elapsed_seconds
    );
    for d in &r.directions {
        eprintln!(
            "  u={:?} null_var={:.6} mean={:.5} var={:.5} D={:.5} p={:.4} {:?}",
            d.direction, d.null_variance, d.mean, d.variance, d.ks_statistic, d.p_value, d.verdict
        );
    }
    eprintln!("verdict: {:?}", r.verdict);
}

fn qq_path(csv: &Path, k: usize) -> PathBuf {
    let stem = csv
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    csv.with_file_name(format!("{stem}.qq{k}.csv"))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, text),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp =
        tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating a file in {}", dir.display()))?;
    tmp.write_all(text.as_bytes())?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
