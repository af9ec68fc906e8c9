use std::time::Instant;

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{ExperimentReport, Field, RunMetadata, Table};
use super::stats::mean_std;
use super::{derive_seed, gen_linear_data, rng_from_seed, ExperimentSpec, NoiseSpec};
use crate::data::{Dataset, HuberParams};
use crate::error::{invalid, Result};
use crate::fit::{FitResult, SolverConfig};
use crate::irls::{fit_huber, fit_ols};
use crate::lamm::fit_l1_huber;
use crate::truncation::{default_sparsity_guess, default_truncation_params, fit_truncated};
use crate::tuning::{
    cross_validate, default_params, default_t, estimate_sigma_crude, moment_estimate, Regime, TuningGrid,
    DEFAULT_CONSTANTS,
};

const TUNING_STREAM: u64 = 1 << 32;

/// Outcome of one estimator on one replication.
#[derive(Clone)]
struct Outcome {
    error: Option<f64>,
    converged: bool,
    status: String,
}

impl Outcome {
    fn from_fit(fit: Result<FitResult>, beta_star: &DVector<f64>) -> Self {
        match fit {
            Ok(f) => Outcome {
                error: Some((&f.beta - beta_star).norm()),
                converged: f.converged,
                status: "ok".into(),
            },
            Err(e) => Outcome {
                error: None,
                converged: false,
                status: e.to_string(),
            },
        }
    }

    fn failed(e: crate::error::Error) -> Self {
        Outcome {
            error: None,
            converged: false,
            status: e.to_string(),
        }
    }
}

/// Index-ordered parallel map over `0..count`.
fn run_indexed<T: Send>(count: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..count).into_par_iter().map(f).collect()
}

fn summarize(errors: impl Iterator<Item = Option<f64>>) -> (Field, Field, usize, usize) {
    let mut ok = Vec::new();
    let mut failed = 0;
    for e in errors {
        match e {
            Some(v) => ok.push(v),
            None => failed += 1,
        }
    }
    if ok.is_empty() {
        return (Field::Missing, Field::Missing, 0, failed);
    }
    let (m, s) = mean_std(&ok);
    (Field::Real(m), Field::opt_real(s.is_finite().then_some(s)), ok.len(), failed)
}

fn pick_outcome(r: &(u64, Outcome, Outcome), which: usize) -> &Outcome {
    if which == 0 {
        &r.1
    } else {
        &r.2
    }
}

fn check_reps(reps: usize) -> Result<()> {
    if reps == 0 {
        return Err(invalid("replications must be at least 1"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Config {
    pub n: usize,
    pub d: usize,
    pub reps: usize,
    pub seed: u64,
    pub folds: usize,
    pub noises: Vec<NoiseSpec>,
    pub c_tau: Vec<f64>,
}

impl Default for Table1Config {
    fn default() -> Self {
        Self {
            n: 100,
            d: 5,
            reps: 100,
            seed: 0,
            folds: 3,
            noises: vec![
                NoiseSpec::Normal { variance: 4.0 },
                NoiseSpec::StudentT { df: 1.5 },
                NoiseSpec::LogNormal {
                    log_variance: 4.0,
                    centered: true,
                },
            ],
            c_tau: DEFAULT_CONSTANTS.to_vec(),
        }
    }
}

/// OLS against cross-validated adaptive Huber regression for each noise family.
pub fn run_table1(cfg: &Table1Config) -> Result<ExperimentReport> {
    let start = Instant::now();
    check_reps(cfg.reps)?;
    if cfg.n <= cfg.d {
        return Err(invalid(format!("need n > d, got n = {}, d = {}", cfg.n, cfg.d)));
    }
    for noise in &cfg.noises {
        noise.validate()?;
    }
    let tasks = cfg.noises.len() * cfg.reps;
    let results = run_indexed(tasks, |task| {
        let (cell, rep) = (task / cfg.reps, task % cfg.reps);
        let seed = derive_seed(cfg.seed, cell as u64, rep as u64);
        let spec = ExperimentSpec::benchmark(cfg.n, cfg.d, cfg.noises[cell], 1, seed);
        let (data, beta) = match gen_linear_data(&spec) {
            Ok(v) => v,
            Err(e) => {
                let o = Outcome::failed(e);
                return (seed, o.clone(), o);
            }
        };
        let grid = TuningGrid {
            c_tau: cfg.c_tau.clone(),
            c_lambda: vec![1.0],
            folds: cfg.folds,
            t: None,
            seed: derive_seed(seed, TUNING_STREAM, 0),
        };
        let ahr = Outcome::from_fit(cross_validate(&data, &grid, false).map(|o| o.fit), &beta);
        let ols = Outcome::from_fit(fit_ols(&data), &beta);
        (seed, ahr, ols)
    });

    let mut reps = Table::new(
        "replications",
        &["cell", "estimator", "replication", "seed", "l2_error", "converged", "status"],
    );
    let mut summary = Table::new(
        "summary",
        &["cell", "estimator", "mean_l2_error", "std_l2_error", "completed", "failed"],
    );
    for (cell, noise) in cfg.noises.iter().enumerate() {
        let block = &results[cell * cfg.reps..(cell + 1) * cfg.reps];
        for (name, pick) in [("ahr", 0usize), ("ols", 1)] {
            for (rep, r) in block.iter().enumerate() {
                let o = pick_outcome(r, pick);
                reps.push(vec![
                    noise.to_string().into(),
                    name.into(),
                    rep.into(),
                    Field::Seed(r.0),
                    Field::opt_real(o.error),
                    o.converged.into(),
                    o.status.clone().into(),
                ]);
            }
            let (m, s, ok, failed) = summarize(block.iter().map(|r| pick_outcome(r, pick).error));
            summary.push(vec![noise.to_string().into(), name.into(), m, s, ok.into(), failed.into()]);
        }
    }
    Ok(ExperimentReport {
        metadata: RunMetadata::new("table1", cfg.seed, cfg.reps, serde_json::to_value(cfg).expect("config")),
        tables: vec![reps, summary],
        wall_time: start.elapsed(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseConfig {
    pub df_grid: Vec<f64>,
    pub n_grid: Vec<usize>,
    pub d: usize,
    pub reps: usize,
    pub high_dim: bool,
    pub seed: u64,
    pub c_tau: f64,
    pub c_lambda: f64,
    /// Confidence parameter; `None` means `log n`.
    pub t: Option<f64>,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        Self {
            df_grid: (11..=30).map(|k| k as f64 / 10.0).collect(),
            n_grid: vec![500],
            d: 5,
            reps: 100,
            high_dim: false,
            seed: 0,
            c_tau: 0.5,
            c_lambda: 0.5,
            t: None,
        }
    }
}

/// Moment index used for Student-t errors with `df` degrees of freedom.
pub(crate) fn delta_for_df(df: f64) -> f64 {
    df - 1.0 - 0.05
}

/// `tau = c_tau v_delta (n_eff / t)^(1 / (1 + min(delta, 1)))`, where
/// `v_delta` is the `(1 + min(delta, 1))`-th absolute central moment of `pilot`.
pub(crate) fn moment_tau(pilot: &[f64], delta: f64, n_eff: f64, t: f64, c_tau: f64) -> Result<f64> {
    let delta = delta.min(1.0);
    let v = moment_estimate(pilot, delta)?;
    Ok(c_tau * v * (n_eff / t).powf(1.0 / (1.0 + delta)))
}

/// l1-penalized fit with `tau` from [`moment_tau`] on the centered response and
/// `lambda` from [`default_params`].
fn fit_sparse_moment(data: &Dataset, delta: f64, n_eff: f64, t: f64, c_tau: f64, c_lambda: f64) -> Result<FitResult> {
    let y = data.y().as_slice();
    let tau = moment_tau(y, delta, n_eff, t, c_tau)?;
    let sigma = estimate_sigma_crude(y)?;
    let lambda = default_params(sigma, n_eff, t, c_tau, c_lambda)?.lambda;
    fit_l1_huber(data, &HuberParams::new(tau, lambda, None)?, &SolverConfig::lamm())
}

/// Error of the adaptive Huber estimator across `df` and `n` under Student-t errors.
pub fn run_phase_transition(cfg: &PhaseConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    check_reps(cfg.reps)?;
    if cfg.df_grid.is_empty() || cfg.n_grid.is_empty() {
        return Err(invalid("df and n grids must be nonempty"));
    }
    if let Some(df) = cfg.df_grid.iter().find(|&&df| !(df > 1.05 && df.is_finite())) {
        return Err(invalid(format!("every df must exceed 1.05, got {df}")));
    }
    if !cfg.high_dim {
        if let Some(n) = cfg.n_grid.iter().find(|&&n| n <= cfg.d) {
            return Err(invalid(format!("low-dimensional runs need n > d, got n = {n}")));
        }
    }
    let regime = if cfg.high_dim { Regime::High } else { Regime::Low };
    let points: Vec<(f64, usize)> = cfg
        .df_grid
        .iter()
        .flat_map(|&df| cfg.n_grid.iter().map(move |&n| (df, n)))
        .collect();
    let results = run_indexed(points.len() * cfg.reps, |task| {
        let (point, rep) = (task / cfg.reps, task % cfg.reps);
        let (df, n) = points[point];
        let seed = derive_seed(cfg.seed, point as u64, rep as u64);
        let spec = ExperimentSpec::benchmark(n, cfg.d, NoiseSpec::StudentT { df }, 1, seed);
        let (data, beta) = match gen_linear_data(&spec) {
            Ok(v) => v,
            Err(e) => return (seed, Outcome::failed(e)),
        };
        let delta = delta_for_df(df);
        let t = cfg.t.unwrap_or_else(|| default_t(n));
        let n_eff = regime.effective_sample_size(n, cfg.d);
        let fit = match regime {
            Regime::Low => fit_ols(&data)
                .and_then(|pilot| moment_tau(data.residuals(&pilot.beta).as_slice(), delta, n_eff, t, cfg.c_tau))
                .and_then(|tau| fit_huber(&data, tau, &SolverConfig::irls())),
            Regime::High => fit_sparse_moment(&data, delta, n_eff, t, cfg.c_tau, cfg.c_lambda),
        };
        (seed, Outcome::from_fit(fit, &beta))
    });

    let mut reps = Table::new(
        "replications",
        &["df", "n", "replication", "seed", "l2_error", "converged", "status"],
    );
    let mut summary = Table::new(
        "summary",
        &[
            "df",
            "delta",
            "n",
            "d",
            "n_eff",
            "mean_l2_error",
            "std_l2_error",
            "mean_neg_log_l2_error",
            "completed",
            "failed",
        ],
    );
    for (point, &(df, n)) in points.iter().enumerate() {
        let block = &results[point * cfg.reps..(point + 1) * cfg.reps];
        for (rep, (seed, o)) in block.iter().enumerate() {
            reps.push(vec![
                df.into(),
                n.into(),
                rep.into(),
                Field::Seed(*seed),
                Field::opt_real(o.error),
                o.converged.into(),
                o.status.clone().into(),
            ]);
        }
        let (m, s, ok, failed) = summarize(block.iter().map(|r| r.1.error));
        let (neg_log, _, _, _) = summarize(block.iter().map(|r| r.1.error.map(|e| -e.ln())));
        summary.push(vec![
            df.into(),
            delta_for_df(df).into(),
            n.into(),
            cfg.d.into(),
            regime.effective_sample_size(n, cfg.d).into(),
            m,
            s,
            neg_log,
            ok.into(),
            failed.into(),
        ]);
    }
    Ok(ExperimentReport {
        metadata: RunMetadata::new("phase", cfg.seed, cfg.reps, serde_json::to_value(cfg).expect("config")),
        tables: vec![reps, summary],
        wall_time: start.elapsed(),
    })
}

/// Sample sizes for the effective-sample-size study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeffSizes {
    /// The same `n` values for every `d`.
    Fixed(Vec<usize>),
    /// Target `n / log d` values; `n` is rounded per `d`.
    Matched(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeffConfig {
    pub d_grid: Vec<usize>,
    pub sizes: NeffSizes,
    pub reps: usize,
    pub seed: u64,
    pub df: f64,
    pub c_tau: f64,
    pub c_lambda: f64,
}

impl Default for NeffConfig {
    fn default() -> Self {
        Self {
            d_grid: vec![100, 500],
            sizes: NeffSizes::Matched(vec![25.0, 50.0, 100.0, 200.0]),
            reps: 100,
            seed: 0,
            df: 1.5,
            c_tau: 0.5,
            c_lambda: 0.5,
        }
    }
}

impl NeffConfig {
    fn sizes_for(&self, d: usize) -> Vec<usize> {
        match &self.sizes {
            NeffSizes::Fixed(ns) => ns.clone(),
            NeffSizes::Matched(targets) => targets
                .iter()
                .map(|r| ((r * (d as f64).ln()).round() as usize).max(2))
                .collect(),
        }
    }
}

/// Sparse adaptive Huber error against `n` and `n / log d` under Student-t errors.
pub fn run_neff_experiment(cfg: &NeffConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    check_reps(cfg.reps)?;
    if cfg.d_grid.is_empty() || cfg.d_grid.iter().any(|&d| d < 2) {
        return Err(invalid("every d must be at least 2"));
    }
    let noise = NoiseSpec::StudentT { df: cfg.df };
    noise.validate()?;
    if !(cfg.df > 1.05) {
        return Err(invalid(format!("df must exceed 1.05, got {}", cfg.df)));
    }
    let points: Vec<(usize, usize)> = cfg
        .d_grid
        .iter()
        .flat_map(|&d| cfg.sizes_for(d).into_iter().map(move |n| (d, n)))
        .collect();
    if points.is_empty() {
        return Err(invalid("sample-size grid must be nonempty"));
    }
    let delta = delta_for_df(cfg.df);
    let results = run_indexed(points.len() * cfg.reps, |task| {
        let (point, rep) = (task / cfg.reps, task % cfg.reps);
        let (d, n) = points[point];
        let seed = derive_seed(cfg.seed, point as u64, rep as u64);
        let spec = ExperimentSpec::benchmark(n, d, noise, 1, seed);
        let (data, beta) = match gen_linear_data(&spec) {
            Ok(v) => v,
            Err(e) => return (seed, Outcome::failed(e)),
        };
        let n_eff = Regime::High.effective_sample_size(n, d);
        let fit = fit_sparse_moment(&data, delta, n_eff, default_t(n), cfg.c_tau, cfg.c_lambda);
        (seed, Outcome::from_fit(fit, &beta))
    });

    let mut reps = Table::new(
        "replications",
        &["d", "n", "replication", "seed", "l2_error", "converged", "status"],
    );
    let mut summary = Table::new(
        "summary",
        &["d", "n", "n_over_log_d", "mean_l2_error", "std_l2_error", "completed", "failed"],
    );
    for (point, &(d, n)) in points.iter().enumerate() {
        let block = &results[point * cfg.reps..(point + 1) * cfg.reps];
        for (rep, (seed, o)) in block.iter().enumerate() {
            reps.push(vec![
                d.into(),
                n.into(),
                rep.into(),
                Field::Seed(*seed),
                Field::opt_real(o.error),
                o.converged.into(),
                o.status.clone().into(),
            ]);
        }
        let (m, s, ok, failed) = summarize(block.iter().map(|r| r.1.error));
        summary.push(vec![
            d.into(),
            n.into(),
            (n as f64 / (d as f64).ln()).into(),
            m,
            s,
            ok.into(),
            failed.into(),
        ]);
    }
    Ok(ExperimentReport {
        metadata: RunMetadata::new("neff", cfg.seed, cfg.reps, serde_json::to_value(cfg).expect("config")),
        tables: vec![reps, summary],
        wall_time: start.elapsed(),
    })
}

/// Sparse regression with one grossly corrupted covariate cell per replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminationConfig {
    pub n: usize,
    pub d: usize,
    pub reps: usize,
    pub seed: u64,
    pub noise: NoiseSpec,
    /// Value written into the corrupted cell of a support column.
    pub outlier: f64,
    pub varpi: f64,
}

impl Default for ContaminationConfig {
    fn default() -> Self {
        Self {
            n: 100,
            d: 20,
            reps: 50,
            seed: 0,
            noise: NoiseSpec::Normal { variance: 1.0 },
            outlier: 1e6,
            varpi: 5.0,
        }
    }
}

/// Truncated against untruncated l1-penalized Huber fits on designs whose
/// first covariate has one entry replaced by `outlier` after the response
/// was generated. Both fits share the rate-matched `(tau, lambda)`.
pub fn run_contamination(cfg: &ContaminationConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    check_reps(cfg.reps)?;
    if cfg.d < 2 {
        return Err(invalid("contamination study needs d >= 2"));
    }
    let base = default_truncation_params(cfg.n, cfg.d, default_sparsity_guess(cfg.d), 1.0, 1.0, 1.0)?;
    let params = HuberParams::new(base.tau, base.lambda, Some(cfg.varpi))?;
    let results = run_indexed(cfg.reps, |rep| {
        let seed = derive_seed(cfg.seed, 0, rep as u64);
        let spec = ExperimentSpec::benchmark(cfg.n, cfg.d, cfg.noise, 1, seed);
        let (clean, beta) = gen_linear_data(&spec)?;
        let row = rng_from_seed(derive_seed(seed, TUNING_STREAM, 1)).random_range(0..cfg.n);
        let mut x = clean.x().clone_owned();
        x[(row, 0)] = cfg.outlier;
        let dirty = Dataset::new(x, clean.y().clone(), false)?;
        let lamm = SolverConfig::lamm();
        let trunc = Outcome::from_fit(fit_truncated(&dirty, &params, &lamm), &beta);
        let plain = Outcome::from_fit(fit_l1_huber(&dirty, &params, &lamm), &beta);
        Ok((seed, row, trunc, plain))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut reps = Table::new(
        "replications",
        &[
            "replication",
            "seed",
            "corrupted_row",
            "truncated_l2_error",
            "plain_l2_error",
            "truncated_wins",
        ],
    );
    let mut wins = 0;
    for (rep, (seed, row, t, p)) in results.iter().enumerate() {
        let win = matches!((t.error, p.error), (Some(a), Some(b)) if a < b) || (t.error.is_some() && p.error.is_none());
        wins += usize::from(win);
        reps.push(vec![
            rep.into(),
            Field::Seed(*seed),
            (*row).into(),
            Field::opt_real(t.error),
            Field::opt_real(p.error),
            win.into(),
        ]);
    }
    let mut summary = Table::new(
        "summary",
        &["tau", "lambda", "varpi", "mean_truncated_l2_error", "mean_plain_l2_error", "win_fraction"],
    );
    let (mt, _, _, _) = summarize(results.iter().map(|r| r.2.error));
    let (mp, _, _, _) = summarize(results.iter().map(|r| r.3.error));
    summary.push(vec![
        params.tau.into(),
        params.lambda.into(),
        cfg.varpi.into(),
        mt,
        mp,
        (wins as f64 / cfg.reps as f64).into(),
    ]);
    Ok(ExperimentReport {
        metadata: RunMetadata::new(
            "contamination",
            cfg.seed,
            cfg.reps,
            serde_json::to_value(cfg).expect("config"),
        ),
        tables: vec![reps, summary],
        wall_time: start.elapsed(),
    })
}
