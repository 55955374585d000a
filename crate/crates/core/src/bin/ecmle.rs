use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ecmle::estimators::Method;
use ecmle::harness::{
    export_regions, run_replications, summarize, sweep_alpha, variance_sweep, write_proxy_csv, write_results_csv,
    write_summary_csv, write_timing_csv, ModelConfig, ResultRow, RunConfig,
};
use ecmle::par::Execution;
use ecmle::Error;

#[derive(Parser)]
#[command(name = "ecmle", version, about = "Evidence estimation with ellipsoidal HPD coverings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One method on one model.
    Estimate(Common),
    /// Several methods on identical draws, with an RMSE / time summary.
    Compare(Common),
    /// Replications over a grid of HPD levels.
    SweepAlpha(Sweep),
    /// Second-moment proxy of the covering across HPD levels.
    Variance(Sweep),
    /// Covering, THAMES ellipse and labelled draws for plotting.
    ExportRegions(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// gaussian, mixture, rosenbrock or uniform.
    #[arg(long)]
    model: Option<String>,
    /// Model dimension.
    #[arg(long)]
    d: Option<usize>,
    /// Estimator name; repeat or comma-separate for several.
    #[arg(long, value_delimiter = ',')]
    method: Vec<String>,
    /// Draws per half.
    #[arg(long = "T")]
    t: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Candidate subsample rate for the covering.
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file (a directory for export-regions). Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run without the thread pool.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args, Clone)]
struct Sweep {
    #[command(flatten)]
    common: Common,
    /// HPD levels, comma-separated.
    #[arg(long, value_delimiter = ',')]
    alphas: Vec<f64>,
}

enum Failure {
    Config(String),
    Estimator(String),
    Other(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidParameter(_) => Failure::Config(e.to_string()),
            other => Failure::Other(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Other(e.to_string())
    }
}

fn load(c: &Common, default_methods: &[Method]) -> Result<RunConfig, Failure> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::from_path(p).map_err(|e| match e {
            Error::Io(_) => Failure::Config(format!("cannot read {}: {e}", p.display())),
            other => Failure::from(other),
        })?,
        None => RunConfig { methods: default_methods.to_vec(), ..RunConfig::default() },
    };
    if let Some(m) = &c.model {
        if *m != cfg.model.name {
            cfg.model = ModelConfig::named(m);
        }
    }
    if c.d.is_some() {
        cfg.model.d = c.d;
    }
    if !c.method.is_empty() {
        cfg.methods = c.method.iter().map(|s| s.parse()).collect::<Result<_, _>>()?;
    }
    cfg.t = c.t.unwrap_or(cfg.t);
    cfg.alpha = c.alpha.unwrap_or(cfg.alpha);
    cfg.k = c.k.unwrap_or(cfg.k);
    cfg.reps = c.reps.unwrap_or(cfg.reps);
    cfg.base_seed = c.seed.unwrap_or(cfg.base_seed);
    if c.out.is_some() {
        cfg.out = c.out.clone();
    }
    if c.sequential {
        cfg.exec = Execution::Sequential;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

/// Results to `--out` (or stdout), timings and summary next to it.
fn emit_rows(rows: &[ResultRow], out: Option<&Path>) -> Result<(), Failure> {
    write_results_csv(rows, output(out)?)?;
    let summary = summarize(rows);
    match out {
        Some(p) => {
            write_timing_csv(rows, BufWriter::new(File::create(sidecar(p, ".timing.csv"))?))?;
            write_summary_csv(&summary, BufWriter::new(File::create(sidecar(p, ".summary.csv"))?))?;
            let mut err = io::stderr().lock();
            for s in &summary {
                let rmse = s.rmse.map(|v| format!("{v:.5}")).unwrap_or_else(|| "-".into());
                writeln!(err, "{:<18} alpha={:.2} ok={:<3} rmse={rmse:<9} time={:.4}s", s.method, s.alpha, s.n_ok, s.mean_time_s)?;
            }
        }
        None => write_summary_csv(&summary, io::stderr().lock())?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Estimate(c) => {
            let cfg = load(&c, &[Method::Ecmle])?;
            if cfg.methods.len() != 1 {
                return Err(Failure::Config("estimate takes exactly one method".into()));
            }
            let rows = run_replications(&cfg)?;
            write_results_csv(&rows, output(cfg.out.as_deref())?)?;
            if let Some(bad) = rows.iter().find(|r| !r.is_ok()) {
                return Err(Failure::Estimator(format!("{} failed on replication {}: {}", bad.method, bad.rep, bad.status)));
            }
        }
        Command::Compare(c) => {
            let cfg = load(&c, &Method::ALL)?;
            let rows = run_replications(&cfg)?;
            emit_rows(&rows, cfg.out.as_deref())?;
        }
        Command::SweepAlpha(s) => {
            let mut cfg = load(&s.common, &[Method::Ecmle])?;
            if !s.alphas.is_empty() {
                cfg.alphas = s.alphas;
            }
            let rows = sweep_alpha(&cfg, &cfg.alphas)?;
            emit_rows(&rows, cfg.out.as_deref())?;
        }
        Command::Variance(s) => {
            let mut cfg = load(&s.common, &[Method::Ecmle])?;
            if !s.alphas.is_empty() {
                cfg.alphas = s.alphas;
                cfg.validate()?;
            }
            let rows = variance_sweep(&cfg)?;
            write_proxy_csv(&rows, output(cfg.out.as_deref())?)?;
        }
        Command::ExportRegions(c) => {
            let cfg = load(&c, &[Method::Ecmle])?;
            let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("regions"));
            let paths = export_regions(&cfg, &dir)?;
            eprintln!("wrote {}, {}, {}", paths.union.display(), paths.thames.display(), paths.draws.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("configuration error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Estimator(m)) => {
            eprintln!("estimator failure: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Other(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
