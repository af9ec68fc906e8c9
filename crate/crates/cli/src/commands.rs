use std::path::{Path, PathBuf};

use adahuber::simlab::{
    self, kurtosis, run_neff_experiment, run_phase_transition, run_table1, ExperimentReport, Field, NeffConfig,
    NeffSizes, PhaseConfig, Table, Table1Config,
};
use adahuber::tuning::{
    cross_validate_with, default_t, lepski_select_with, CvOutcome, LepskiGrid, LepskiOutcome, DEFAULT_CONSTANTS,
};
use adahuber::{
    default_params, estimate_sigma_crude, fit_huber, fit_l1_huber, fit_truncated, Dataset, Error, FitResult,
    HuberParams, Regime, SolverConfig, TuningGrid,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::io::{load_csv, load_numeric, write_file, Format, IoError, LoadedData};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "adahuber", version, about = "Adaptive Huber regression toolkit")]
pub struct Cli {
    /// Worker threads for tuning and simulation (default: all cores).
    #[arg(long, global = true, env = "ADAHUBER_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Unpenalized adaptive Huber regression (IRLS).
    Fit(FitArgs),
    /// l1-penalized adaptive Huber regression (LAMM).
    FitL1(FitArgs),
    /// l1-penalized fit on covariates truncated at --varpi.
    FitTruncated(FitArgs),
    /// Data-driven choice of tau (and lambda).
    Tune(TuneArgs),
    /// Monte Carlo experiments.
    Simulate(SimulateArgs),
    /// Per-column kurtosis with heavy-tail flags.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Name of the response column; all other columns are covariates.
    #[arg(long)]
    pub response: String,
    #[arg(long, default_value = ",", value_parser = parse_delimiter)]
    pub delimiter: u8,
    /// Append an unpenalized intercept column.
    #[arg(long)]
    pub intercept: bool,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output file (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub varpi: Option<f64>,
    /// Constant in the plug-in robustification level.
    #[arg(long, default_value_t = 1.0)]
    pub c_tau: f64,
    /// Constant in the plug-in penalty level.
    #[arg(long, default_value_t = 1.0)]
    pub c_lambda: f64,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Cv,
    Lepski,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegimeArg {
    Low,
    High,
}

#[derive(Debug, Clone, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value_t = Method::Cv)]
    pub method: Method,
    /// Comma-separated constants used for both c_tau and c_lambda.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_CONSTANTS.to_vec())]
    pub grid: Vec<f64>,
    #[arg(long, default_value_t = 3)]
    pub folds: usize,
    /// Low dimensions fit IRLS and ignore the c_lambda candidates.
    #[arg(long, value_enum, default_value_t = RegimeArg::High)]
    pub regime: RegimeArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Lepski grid spans [s / K, K s] around the OLS residual scale s.
    #[arg(long, default_value_t = 3.0)]
    pub lepski_k: f64,
    #[arg(long, default_value_t = 1.5)]
    pub lepski_ratio: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    Table1,
    Phase,
    Neff,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub experiment: Experiment,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Sample size (table1).
    #[arg(long)]
    pub n: Option<usize>,
    /// Dimension (table1, phase).
    #[arg(long)]
    pub d: Option<usize>,
    /// Fold count for the table1 cross-validation.
    #[arg(long)]
    pub folds: Option<usize>,
    /// c_tau candidates for the table1 cross-validation.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    /// Degrees of freedom (phase).
    #[arg(long, value_delimiter = ',')]
    pub df_grid: Option<Vec<f64>>,
    /// Sample sizes (phase; neff uses them for every d).
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Option<Vec<usize>>,
    /// Target n / log d values (neff).
    #[arg(long, value_delimiter = ',', conflicts_with = "n_grid")]
    pub neff_grid: Option<Vec<f64>>,
    /// Dimensions (neff).
    #[arg(long, value_delimiter = ',')]
    pub d_grid: Option<Vec<usize>>,
    /// Use the l1-penalized estimator with n_eff = n / log d (phase).
    #[arg(long)]
    pub high_dim: bool,
}

#[derive(Debug, Clone, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = ",", value_parser = parse_delimiter)]
    pub delimiter: u8,
    #[command(flatten)]
    pub output: OutputArgs,
}

fn parse_delimiter(s: &str) -> Result<u8, String> {
    let s = if s == "\\t" { "\t" } else { s };
    match s.as_bytes() {
        [b] => Ok(*b),
        _ => Err(format!("delimiter must be a single byte, got {s:?}")),
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{context}: {source}")]
    Model { context: String, source: Error },
}

fn model(context: impl Into<String>) -> impl FnOnce(Error) -> CliError {
    let context = context.into();
    move |source| CliError::Model { context, source }
}

/// Parses `args` and runs the selected subcommand, returning the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

pub fn execute(cli: &Cli) -> Result<i32, CliError> {
    let threads = cli.threads;
    let pooled = |f: &(dyn Fn() -> Result<i32, CliError> + Sync)| -> Result<i32, CliError> {
        simlab::with_threads(threads, f).map_err(model("--threads"))?
    };
    match &cli.command {
        Command::Fit(a) => pooled(&|| cmd_fit(a, Solver::Irls)),
        Command::FitL1(a) => pooled(&|| cmd_fit(a, Solver::Lamm)),
        Command::FitTruncated(a) => pooled(&|| cmd_fit(a, Solver::Truncated)),
        Command::Tune(a) => pooled(&|| cmd_tune(a)),
        Command::Simulate(a) => pooled(&|| cmd_simulate(a)),
        Command::Diagnose(a) => cmd_diagnose(a),
    }
}

fn emit(output: &OutputArgs, table: &Table) -> Result<(), CliError> {
    let text = output.format.render(table);
    match &output.out {
        Some(path) => write_file(path, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn load(input: &InputArgs) -> Result<LoadedData, CliError> {
    Ok(load_csv(&input.input, &input.response, input.delimiter, input.intercept)?)
}

fn coefficient_names(loaded: &LoadedData) -> Vec<String> {
    let mut names = loaded.covariates.clone();
    if loaded.data.intercept() {
        names.push("(intercept)".into());
    }
    names
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Irls,
    Lamm,
    Truncated,
}

impl Solver {
    fn name(self) -> &'static str {
        match self {
            Solver::Irls => "irls",
            Solver::Lamm => "lamm",
            Solver::Truncated => "lamm_truncated",
        }
    }

    fn regime(self) -> Regime {
        match self {
            Solver::Irls => Regime::Low,
            _ => Regime::High,
        }
    }
}

/// Fills in the levels not given on the command line: plug-in `tau` and
/// `lambda` from the crude response scale with `t = log n`, and for the
/// truncated fit `varpi = (n / log d)^(1/4)`.
fn resolve_params(a: &FitArgs, data: &Dataset, solver: Solver) -> Result<HuberParams, CliError> {
    let n = data.n();
    let plug_in = || -> Result<HuberParams, Error> {
        let sigma = estimate_sigma_crude(data.y().as_slice())?;
        let n_eff = solver.regime().effective_sample_size(n, data.d());
        default_params(sigma, n_eff, default_t(n), a.c_tau, a.c_lambda)
    };
    let needs_plug_in = a.tau.is_none() || (solver != Solver::Irls && a.lambda.is_none());
    let base = if needs_plug_in {
        Some(plug_in().map_err(model("default tuning"))?)
    } else {
        None
    };
    let tau = a.tau.or(base.map(|p| p.tau)).expect("tau resolved");
    let lambda = match solver {
        Solver::Irls => 0.0,
        _ => a.lambda.or(base.map(|p| p.lambda)).expect("lambda resolved"),
    };
    let varpi = match solver {
        Solver::Truncated => Some(a.varpi.unwrap_or_else(|| Regime::High.effective_sample_size(n, data.d()).powf(0.25))),
        _ => a.varpi,
    };
    HuberParams::new(tau, lambda, varpi).map_err(model("parameters"))
}

fn solver_config(a: &FitArgs, solver: Solver) -> SolverConfig {
    let mut cfg = match solver {
        Solver::Irls => SolverConfig::irls(),
        _ => SolverConfig::lamm(),
    };
    if let Some(tol) = a.tol {
        cfg = cfg.with_tol(tol);
    }
    if let Some(m) = a.max_iter {
        cfg = cfg.with_max_iter(m);
    }
    cfg
}

fn in_sample_mae(data: &Dataset, fit: &FitResult, varpi: Option<f64>) -> f64 {
    let fitted = match varpi {
        Some(v) => adahuber::predict_truncated(data, &data.x().clone_owned(), &fit.beta, v),
        None => data.predict(&data.x().clone_owned(), &fit.beta),
    };
    fitted
        .ok()
        .and_then(|f| simlab::mae(data.y().as_slice(), f.as_slice()).ok())
        .unwrap_or(f64::NAN)
}

/// Report rows `field,value`: resolved levels, convergence diagnostics,
/// in-sample MAE, then one `coef:<name>` row per coefficient.
pub fn cmd_fit(a: &FitArgs, solver: Solver) -> Result<i32, CliError> {
    let loaded = load(&a.input)?;
    let data = &loaded.data;
    let params = resolve_params(a, data, solver)?;
    let cfg = solver_config(a, solver);
    let context = format!("{} on {}", solver.name(), a.input.input.display());
    let fit = match solver {
        Solver::Irls => fit_huber(data, params.tau, &cfg),
        Solver::Lamm => fit_l1_huber(data, &params, &cfg),
        Solver::Truncated => fit_truncated(data, &params, &cfg),
    }
    .map_err(model(context))?;

    let mut t = Table::new("fit", &["field", "value"]);
    let mut row = |k: &str, v: Field| t.push(vec![k.into(), v]);
    row("solver", solver.name().into());
    row("n", data.n().into());
    row("d", data.d().into());
    row("tau", params.tau.into());
    row("tau_source", if a.tau.is_some() { "given" } else { "plug_in" }.into());
    row("lambda", params.lambda.into());
    row("varpi", Field::opt_real(params.varpi));
    row("converged", fit.converged.into());
    row("iterations", fit.iterations.into());
    row("objective", fit.objective.into());
    row("gradient_norm", fit.gradient_norm.into());
    row("in_sample_mae", in_sample_mae(data, &fit, params.varpi).into());
    for (name, b) in coefficient_names(&loaded).iter().zip(fit.beta.iter()) {
        row(&format!("coef:{name}"), (*b).into());
    }
    emit(&a.output, &t)?;
    Ok(if fit.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn cv_table(out: &CvOutcome, data: &Dataset, grid: &TuningGrid, regime: Regime) -> Result<Table, CliError> {
    let folds = grid.folds;
    let mut cols: Vec<String> = ["c_tau", "c_lambda", "tau", "lambda"].iter().map(|s| s.to_string()).collect();
    cols.extend((1..=folds).map(|k| format!("fold_{k}_mae")));
    cols.extend(["mean_mae", "status", "selected", "forced"].iter().map(|s| s.to_string()));
    let mut t = Table::new("cv", &cols.iter().map(String::as_str).collect::<Vec<_>>());
    let sigma = estimate_sigma_crude(data.y().as_slice()).map_err(model("scale estimate"))?;
    let n_eff = regime.effective_sample_size(data.n(), data.d());
    let level_t = grid.t.unwrap_or_else(|| default_t(data.n()));
    for cell in &out.table {
        let p = default_params(sigma, n_eff, level_t, cell.c_tau, cell.c_lambda.unwrap_or(1.0))
            .map_err(model("plug-in levels"))?;
        let mut row = vec![
            cell.c_tau.into(),
            Field::opt_real(cell.c_lambda),
            p.tau.into(),
            if cell.c_lambda.is_some() { p.lambda.into() } else { 0.0.into() },
        ];
        for k in 0..folds {
            row.push(Field::opt_real(cell.fold_mae.get(k).copied()));
        }
        row.push(Field::opt_real(cell.mean_mae));
        row.push(cell.error.clone().unwrap_or_else(|| "ok".into()).into());
        row.push((cell.c_tau == out.c_tau && cell.c_lambda == out.c_lambda).into());
        row.push(out.forced.into());
        t.push(row);
    }
    Ok(t)
}

fn lepski_table(out: &LepskiOutcome) -> Table {
    let m = out.sigmas.len();
    let mut cols: Vec<String> = ["j", "sigma", "tau", "threshold", "max_distance", "passes", "selected", "fallback"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    cols.extend((0..m).map(|k| format!("distance_to_{k}")));
    let mut t = Table::new("lepski", &cols.iter().map(String::as_str).collect::<Vec<_>>());
    for j in 0..m {
        let later = &out.distances[j][j + 1..];
        let max = later.iter().copied().fold(0.0, f64::max);
        let mut row = vec![
            j.into(),
            out.sigmas[j].into(),
            out.taus[j].into(),
            out.thresholds[j].into(),
            max.into(),
            later.iter().all(|&d| d <= out.thresholds[j]).into(),
            (j == out.index).into(),
            out.fallback.into(),
        ];
        row.extend((0..m).map(|k| if k > j { out.distances[j][k].into() } else { Field::Missing }));
        t.push(row);
    }
    t
}

pub fn cmd_tune(a: &TuneArgs) -> Result<i32, CliError> {
    let loaded = load(&a.input)?;
    let data = &loaded.data;
    let context = format!("tuning on {}", a.input.input.display());
    let (table, fit) = match a.method {
        Method::Cv => {
            let regime = match a.regime {
                RegimeArg::Low => Regime::Low,
                RegimeArg::High => Regime::High,
            };
            let grid = TuningGrid {
                c_tau: a.grid.clone(),
                c_lambda: a.grid.clone(),
                folds: a.folds,
                t: None,
                seed: a.seed,
            };
            let out = cross_validate_with(data, &grid, regime, &SolverConfig::irls(), &SolverConfig::lamm())
                .map_err(model(context))?;
            eprintln!(
                "selected c_tau = {}, c_lambda = {}, tau = {}, lambda = {}{}",
                out.c_tau,
                out.c_lambda.map_or("-".into(), |c| c.to_string()),
                out.params.tau,
                out.params.lambda,
                if out.forced { " (forced: single cell)" } else { "" }
            );
            (cv_table(&out, data, &grid, regime)?, out.fit)
        }
        Method::Lepski => {
            let grid = LepskiGrid::from_data(data, a.lepski_k, a.lepski_ratio, None).map_err(model(context.clone()))?;
            let out = lepski_select_with(data, &grid, &SolverConfig::irls()).map_err(model(context))?;
            eprintln!(
                "selected j = {} of {}, tau = {}{}",
                out.index,
                out.sigmas.len(),
                out.taus[out.index],
                if out.sigmas.len() == 1 { " (forced: single grid point)" } else { "" }
            );
            (lepski_table(&out), out.fit)
        }
    };
    emit(&a.output, &table)?;
    Ok(if fit.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

/// Runs the experiment and writes `<name>_<table>.<ext>` for every table plus
/// `<name>_metadata.json` into the output directory.
pub fn cmd_simulate(a: &SimulateArgs) -> Result<i32, CliError> {
    let (name, report) = match a.experiment {
        Experiment::Table1 => {
            let mut cfg = Table1Config {
                seed: a.seed,
                ..Table1Config::default()
            };
            cfg.reps = a.reps.unwrap_or(cfg.reps);
            cfg.n = a.n.unwrap_or(cfg.n);
            cfg.d = a.d.unwrap_or(cfg.d);
            cfg.folds = a.folds.unwrap_or(cfg.folds);
            if let Some(g) = &a.grid {
                cfg.c_tau = g.clone();
            }
            ("table1", run_table1(&cfg))
        }
        Experiment::Phase => {
            let mut cfg = PhaseConfig {
                seed: a.seed,
                high_dim: a.high_dim,
                ..PhaseConfig::default()
            };
            cfg.reps = a.reps.unwrap_or(cfg.reps);
            cfg.d = a.d.unwrap_or(cfg.d);
            if let Some(g) = &a.df_grid {
                cfg.df_grid = g.clone();
            }
            if let Some(g) = &a.n_grid {
                cfg.n_grid = g.clone();
            }
            ("phase", run_phase_transition(&cfg))
        }
        Experiment::Neff => {
            let mut cfg = NeffConfig {
                seed: a.seed,
                ..NeffConfig::default()
            };
            cfg.reps = a.reps.unwrap_or(cfg.reps);
            if let Some(g) = &a.d_grid {
                cfg.d_grid = g.clone();
            }
            if let Some(g) = &a.n_grid {
                cfg.sizes = NeffSizes::Fixed(g.clone());
            }
            if let Some(g) = &a.neff_grid {
                cfg.sizes = NeffSizes::Matched(g.clone());
            }
            ("neff", run_neff_experiment(&cfg))
        }
    };
    let report = report.map_err(model(format!("{name} experiment")))?;
    write_report(&a.out, name, &report, a.format)?;
    eprintln!("{name}: finished in {:.2} s", report.wall_time.as_secs_f64());
    Ok(EXIT_OK)
}

pub fn write_report(dir: &Path, name: &str, report: &ExperimentReport, format: Format) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| IoError::Write {
        path: dir.to_owned(),
        source,
    })?;
    for table in &report.tables {
        let path = dir.join(format!("{name}_{}.{}", table.name, format.extension()));
        write_file(&path, &format.render(table))?;
    }
    write_file(&dir.join(format!("{name}_metadata.json")), &report.metadata_json())?;
    Ok(())
}

/// Kurtosis above this marks a column as heavier-tailed than the normal.
pub const NORMAL_KURTOSIS: f64 = 3.0;
/// Kurtosis of Student's t with 5 degrees of freedom.
pub const T5_KURTOSIS: f64 = 9.0;

pub fn cmd_diagnose(a: &DiagnoseArgs) -> Result<i32, CliError> {
    let table = load_numeric(&a.input, a.delimiter)?;
    let mut t = Table::new(
        "diagnose",
        &["column", "kurtosis", "above_normal", "above_t5", "status"],
    );
    let (mut heavy3, mut heavy9, mut degenerate) = (0, 0, 0);
    for (j, name) in table.names.iter().enumerate() {
        let col: Vec<f64> = table.values.column(j).iter().copied().collect();
        match kurtosis(&col) {
            Ok(k) => {
                heavy3 += usize::from(k > NORMAL_KURTOSIS);
                heavy9 += usize::from(k > T5_KURTOSIS);
                t.push(vec![
                    name.as_str().into(),
                    k.into(),
                    (k > NORMAL_KURTOSIS).into(),
                    (k > T5_KURTOSIS).into(),
                    "ok".into(),
                ]);
            }
            Err(e) => {
                degenerate += 1;
                let status = match e {
                    Error::DegenerateSample(_) => "degenerate".to_owned(),
                    other => format!("degenerate: {other}"),
                };
                t.push(vec![name.as_str().into(), Field::Missing, Field::Missing, Field::Missing, status.into()]);
            }
        }
    }
    emit(&a.output, &t)?;
    eprintln!(
        "{} columns: {heavy3} above kurtosis 3 (normal), {heavy9} above 9 (t5), {degenerate} degenerate",
        table.names.len()
    );
    Ok(EXIT_OK)
}
