use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{default_params, default_t, estimate_sigma_crude, Regime, DEFAULT_CONSTANTS};
use crate::data::{Dataset, HuberParams};
use crate::error::{invalid, Error, Result};
use crate::fit::{FitResult, SolverConfig};
use crate::irls::fit_huber;
use crate::lamm::fit_l1_huber;

/// Candidate constants for k-fold cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningGrid {
    pub c_tau: Vec<f64>,
    pub c_lambda: Vec<f64>,
    pub folds: usize,
    /// Confidence parameter; `None` means `log n` of the full sample.
    pub t: Option<f64>,
    /// Seed for the row shuffle preceding the fold split.
    pub seed: u64,
}

impl Default for TuningGrid {
    fn default() -> Self {
        Self {
            c_tau: DEFAULT_CONSTANTS.to_vec(),
            c_lambda: DEFAULT_CONSTANTS.to_vec(),
            folds: 3,
            t: None,
            seed: 0,
        }
    }
}

impl TuningGrid {
    fn validate(&self, n: usize) -> Result<()> {
        if self.c_tau.is_empty() || self.c_lambda.is_empty() {
            return Err(invalid("tuning grid must be nonempty"));
        }
        if self
            .c_tau
            .iter()
            .chain(&self.c_lambda)
            .any(|c| !(c.is_finite() && *c > 0.0))
        {
            return Err(invalid("grid constants must be positive"));
        }
        if self.folds < 2 || self.folds > n {
            return Err(invalid(format!(
                "folds must lie in [2, n = {n}], got {}",
                self.folds
            )));
        }
        if let Some(t) = self.t {
            if !(t.is_finite() && t > 0.0) {
                return Err(invalid(format!("t must be positive, got {t}")));
            }
        }
        Ok(())
    }
}

/// One row of the cross-validation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCell {
    pub c_tau: f64,
    /// `None` in the low-dimensional regime, where no penalty is fitted.
    pub c_lambda: Option<f64>,
    /// Held-out MAE per fold; empty when the cell failed.
    pub fold_mae: Vec<f64>,
    pub mean_mae: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct CvOutcome {
    pub c_tau: f64,
    pub c_lambda: Option<f64>,
    pub params: HuberParams,
    pub fit: FitResult,
    pub table: Vec<CvCell>,
    /// The grid had a single cell, so nothing was selected.
    pub forced: bool,
}

/// Seeded shuffle of `0..n` cut into `folds` contiguous blocks; the first
/// `n % folds` blocks get one extra row.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = n / folds;
    let extra = n % folds;
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for k in 0..folds {
        let len = base + usize::from(k < extra);
        out.push(idx[start..start + len].to_vec());
        start += len;
    }
    out
}

struct Setup {
    regime: Regime,
    t: f64,
    irls: SolverConfig,
    lamm: SolverConfig,
}

impl Setup {
    fn params(&self, data: &Dataset, c_tau: f64, c_lambda: Option<f64>) -> Result<HuberParams> {
        let sigma = estimate_sigma_crude(data.y().as_slice())?;
        let n_eff = self.regime.effective_sample_size(data.n(), data.d());
        let p = default_params(sigma, n_eff, self.t, c_tau, c_lambda.unwrap_or(1.0))?;
        Ok(match c_lambda {
            Some(_) => p,
            None => HuberParams { lambda: 0.0, ..p },
        })
    }

    fn fit(&self, data: &Dataset, params: &HuberParams) -> Result<FitResult> {
        match self.regime {
            Regime::Low => fit_huber(data, params.tau, &self.irls),
            Regime::High => fit_l1_huber(data, params, &self.lamm),
        }
    }
}

fn mae_on(data: &Dataset, rows: &[usize], fit: &FitResult) -> f64 {
    let x = data.design();
    rows.iter()
        .map(|&i| (data.y()[i] - x.row(i).transpose().dot(&fit.beta)).abs())
        .sum::<f64>()
        / rows.len() as f64
}

/// k-fold cross-validation of `(c_tau, c_lambda)` scored by held-out MAE.
///
/// With `high_dim = false` the unpenalized estimator is fitted by IRLS and the
/// `c_lambda` candidates are not used; otherwise the l1-penalized estimator is
/// fitted by LAMM with `n_eff = n / log d`. Ties go to the larger `c_tau`,
/// then the larger `c_lambda`. The winner is refitted on all rows.
pub fn cross_validate(data: &Dataset, grid: &TuningGrid, high_dim: bool) -> Result<CvOutcome> {
    let regime = if high_dim { Regime::High } else { Regime::Low };
    cross_validate_with(data, grid, regime, &SolverConfig::irls(), &SolverConfig::lamm())
}

pub fn cross_validate_with(
    data: &Dataset,
    grid: &TuningGrid,
    regime: Regime,
    irls: &SolverConfig,
    lamm: &SolverConfig,
) -> Result<CvOutcome> {
    grid.validate(data.n())?;
    let setup = Setup {
        regime,
        t: grid.t.unwrap_or_else(|| default_t(data.n())),
        irls: *irls,
        lamm: *lamm,
    };
    let cells: Vec<(f64, Option<f64>)> = match regime {
        Regime::Low => grid.c_tau.iter().map(|&c| (c, None)).collect(),
        Regime::High => grid
            .c_tau
            .iter()
            .flat_map(|&ct| grid.c_lambda.iter().map(move |&cl| (ct, Some(cl))))
            .collect(),
    };
    let folds = fold_assignment(data.n(), grid.folds, grid.seed);
    let splits: Vec<(Dataset, &[usize])> = (0..folds.len())
        .map(|k| {
            let train: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .flat_map(|(_, f)| f.iter().copied())
                .collect();
            (data.select_rows(&train), folds[k].as_slice())
        })
        .collect();

    let table: Vec<CvCell> = cells
        .par_iter()
        .map(|&(c_tau, c_lambda)| {
            let scored: Result<Vec<f64>> = splits
                .iter()
                .map(|(train, test)| {
                    let p = setup.params(train, c_tau, c_lambda)?;
                    let fit = setup.fit(train, &p)?;
                    Ok(mae_on(data, test, &fit))
                })
                .collect();
            match scored {
                Ok(fold_mae) => {
                    let mean = fold_mae.iter().sum::<f64>() / fold_mae.len() as f64;
                    let ok = mean.is_finite();
                    CvCell {
                        c_tau,
                        c_lambda,
                        fold_mae,
                        mean_mae: ok.then_some(mean),
                        error: (!ok).then(|| "non-finite held-out error".to_string()),
                    }
                }
                Err(e) => CvCell {
                    c_tau,
                    c_lambda,
                    fold_mae: Vec::new(),
                    mean_mae: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let best = table
        .iter()
        .filter_map(|c| c.mean_mae.map(|m| (m, c)))
        .min_by(|(ma, a), (mb, b)| {
            ma.total_cmp(mb)
                .then(b.c_tau.total_cmp(&a.c_tau))
                .then(b.c_lambda.unwrap_or(0.0).total_cmp(&a.c_lambda.unwrap_or(0.0)))
        })
        .map(|(_, c)| (c.c_tau, c.c_lambda))
        .ok_or_else(|| Error::Tuning("every cross-validation cell failed".into()))?;

    let params = setup.params(data, best.0, best.1)?;
    let fit = setup.fit(data, &params)?;
    Ok(CvOutcome {
        c_tau: best.0,
        c_lambda: best.1,
        params,
        fit,
        forced: table.len() == 1,
        table,
    })
}
