use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fairbayes::error::{Error, Result};
use fairbayes::experiment::{
    closed_form_frontier, cmd_fit, cmd_multiclass, cmd_synthetic, empirical_frontier, even_grid, parse_grid, write_frontier,
    FitSpec, MulticlassSpec, SyntheticSpec, SEED_ENV,
};
use fairbayes::io::{default_feature_names, ingest_csv, write_csv, Table};
use fairbayes::model_file::ModelFile;
use fairbayes::oracle::{run_all, OracleOptions};
use fairbayes_core::algorithms::{FairFitConfig, FairPipeline, Method, Mode};
use fairbayes_core::{DisparityKind, DEFAULT_TOL};

#[derive(Parser)]
#[command(name = "fairbayes", version, about = "Fair Bayes-optimal classifiers under a disparity budget")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one fair classifier on a CSV and report metrics as JSON.
    Fit(FitArgs),
    /// Accuracy and disparities across a grid of levels, as CSV.
    Frontier(FrontierArgs),
    /// Repeated experiments on a Gaussian model, as JSON.
    Synthetic(SyntheticArgs),
    /// Draw a labeled sample from a Gaussian model, as CSV.
    Sample(SampleArgs),
    /// Check every solver against its exhaustive oracle.
    OracleCheck(OracleArgs),
    /// Perfect demographic parity across several Gaussian groups.
    Multiclass(MulticlassArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "label")]
    label_col: String,
    #[arg(long, default_value = "group")]
    protected_col: String,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, default_value = "fpir")]
    method: Method,
    /// dd, do or pd.
    #[arg(long, default_value = "dd")]
    disparity: DisparityKind,
    /// Decide without reading the protected attribute at prediction time.
    #[arg(long)]
    blind: bool,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    seed: u64,
    /// Training fraction.
    #[arg(long, default_value_t = 0.7)]
    split: f64,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
}

impl SolveArgs {
    fn spec(&self, delta: f64) -> FitSpec {
        let mut spec = FitSpec::new(self.method, self.disparity, delta);
        spec.mode = if self.blind { Mode::Blind } else { Mode::Aware };
        spec.seed = self.seed;
        spec.split = self.split;
        spec.tol = self.tol;
        spec
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    solve: SolveArgs,
    #[arg(long)]
    delta: f64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FrontierArgs {
    /// Input CSV; without it the frontier is exact on the Gaussian model.
    #[arg(long, conflicts_with = "model")]
    data: Option<PathBuf>,
    #[arg(long, default_value = "label")]
    label_col: String,
    #[arg(long, default_value = "group")]
    protected_col: String,
    /// Gaussian model file; the built-in model when absent.
    #[arg(long)]
    model: Option<PathBuf>,
    #[command(flatten)]
    solve: SolveArgs,
    /// Comma-separated ascending levels.
    #[arg(long, conflicts_with = "points")]
    delta_grid: Option<String>,
    /// Evenly spaced levels from 0 to the unconstrained disparity.
    #[arg(long, default_value_t = 11)]
    points: usize,
    #[arg(long)]
    parallel: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SyntheticArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    repeats: usize,
    #[arg(long, default_value_t = 10_000)]
    n_train: usize,
    #[arg(long, default_value_t = 5_000)]
    n_test: usize,
    #[arg(long, default_value = "0,0.1,0.2,0.3")]
    delta_grid: String,
    /// Restrict to one method.
    #[arg(long)]
    method: Option<Method>,
    /// Restrict to one disparity kind.
    #[arg(long)]
    disparity: Option<DisparityKind>,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long)]
    parallel: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "label")]
    label_col: String,
    #[arg(long, default_value = "group")]
    protected_col: String,
    /// Also write the model file used.
    #[arg(long)]
    save_model: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    seed: u64,
    /// Perturb every solver output by this amount; the suites must fail.
    #[arg(long)]
    inject_fault: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MulticlassArgs {
    #[arg(long, default_value_t = 4)]
    groups: usize,
    #[arg(long, default_value_t = 5)]
    dim: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output(path: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| Error::io(p, e))?;
            let mut w = BufWriter::new(file);
            body(&mut w)?;
            w.flush().map_err(|e| Error::io(p, e))
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            body(&mut w)?;
            w.flush().map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn write_json<T: serde::Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    output(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w).map_err(|e| Error::io("<output>", e))
    })
}

fn load_model(path: Option<&Path>) -> Result<ModelFile> {
    path.map_or_else(|| Ok(ModelFile::synthetic()), ModelFile::load)
}

fn frontier(args: &FrontierArgs) -> Result<()> {
    let spec = args.solve.spec(0.0);
    let rows = match &args.data {
        Some(path) => {
            let data = ingest_csv(path, &args.label_col, &args.protected_col)?;
            let deltas = match &args.delta_grid {
                Some(g) => parse_grid(g)?,
                None => {
                    let (train, _) = data.split(spec.split, spec.seed)?;
                    let mut config = FairFitConfig::new(spec.kind, 0.0);
                    config.mode = spec.mode;
                    let (_, report) = FairPipeline::new(spec.method, &train, config)?.solve(f64::MAX)?;
                    even_grid(args.points, report.train_disparity.abs())
                }
            };
            empirical_frontier(&data, &spec, &deltas, args.parallel)?
        }
        None => {
            let model = load_model(args.model.as_deref())?.to_model()?;
            let deltas = match &args.delta_grid {
                Some(g) => parse_grid(g)?,
                None => even_grid(args.points, model.disparity_curve(spec.kind).eval(0.0)?.abs()),
            };
            closed_form_frontier(&model, spec.kind, &deltas, spec.tol)?
        }
    };
    output(args.out.as_deref(), |w| write_frontier(w, &rows))
}

fn synthetic(args: &SyntheticArgs) -> Result<()> {
    let mut spec = SyntheticSpec {
        n_train: args.n_train,
        n_test: args.n_test,
        repeats: args.repeats,
        seed: args.seed,
        deltas: parse_grid(&args.delta_grid)?,
        tol: args.tol,
        ..SyntheticSpec::default()
    };
    if let Some(m) = args.method {
        spec.methods = vec![m];
    }
    if let Some(k) = args.disparity {
        spec.kinds = vec![k];
    }
    let report = cmd_synthetic(&load_model(args.model.as_deref())?, &spec, args.parallel)?;
    write_json(args.out.as_deref(), &report)
}

fn sample(args: &SampleArgs) -> Result<()> {
    let file = load_model(args.model.as_deref())?;
    if let Some(p) = &args.save_model {
        file.save(p)?;
    }
    let model = file.to_model()?;
    let data = model.sample(args.n, args.seed)?;
    let table = Table { feature_names: default_feature_names(data.dim()), data };
    output(args.out.as_deref(), |w| write_csv(w, &table, &args.label_col, &args.protected_col))
}

fn oracle_check(args: &OracleArgs) -> Result<bool> {
    let opts = OracleOptions { seed: args.seed, fault: args.inject_fault };
    let suites = run_all(&opts)?;
    for s in &suites {
        let status = if s.passed() { "PASS" } else { "FAIL" };
        eprintln!(
            "{status} {}: {} instances, worst residual {:.3e} (tolerance {:.0e})",
            s.name,
            s.instances,
            s.worst_residual,
            s.tolerance
        );
        for f in s.failures.iter().take(10) {
            eprintln!("  failed: {f}");
        }
        if s.failures.len() > 10 {
            eprintln!("  ... and {} more", s.failures.len() - 10);
        }
    }
    write_json(args.out.as_deref(), &suites)?;
    Ok(suites.iter().all(|s| s.passed()))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Fit(args) => {
            let data = ingest_csv(&args.data.data, &args.data.label_col, &args.data.protected_col)?;
            let doc = cmd_fit(&data, &args.solve.spec(args.delta))?;
            write_json(args.out.as_deref(), &doc)?;
        }
        Command::Frontier(args) => frontier(&args)?,
        Command::Synthetic(args) => synthetic(&args)?,
        Command::Sample(args) => sample(&args)?,
        Command::OracleCheck(args) => return oracle_check(&args),
        Command::Multiclass(args) => {
            let spec = MulticlassSpec { groups: args.groups, dim: args.dim, sigma: args.sigma, seed: args.seed };
            write_json(args.out.as_deref(), &cmd_multiclass(&spec)?)?;
        }
    }
    Ok(true)
}

/// A closed downstream pipe (`fairbayes sample | head`) is not an error.
fn broken_pipe(e: &Error) -> bool {
    let kind = match e {
        Error::Io { source, .. } => Some(source.kind()),
        Error::Csv(c) => match c.kind() {
            csv::ErrorKind::Io(source) => Some(source.kind()),
            _ => None,
        },
        Error::Json(j) => j.io_error_kind(),
        _ => None,
    };
    kind == Some(io::ErrorKind::BrokenPipe)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) if broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
