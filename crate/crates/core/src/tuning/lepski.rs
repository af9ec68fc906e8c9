use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::default_t;
use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::fit::{FitResult, SolverConfig};
use crate::irls::{fit_huber, fit_ols, RANK_TOL};

/// Geometric scale grid `sigma_j = sigma_min a^j`, `sigma_min <= sigma_j < a sigma_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LepskiGrid {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub a: f64,
    pub t: f64,
}

impl LepskiGrid {
    pub fn new(sigma_min: f64, sigma_max: f64, a: f64, t: f64) -> Result<Self> {
        if !(sigma_min > 0.0 && sigma_min.is_finite() && sigma_max.is_finite() && sigma_min <= sigma_max) {
            return Err(invalid(format!(
                "need 0 < sigma_min <= sigma_max, got [{sigma_min}, {sigma_max}]"
            )));
        }
        if !(a > 1.0 && a.is_finite()) {
            return Err(invalid(format!("grid ratio must exceed 1, got {a}")));
        }
        if !(t > 0.0 && t.is_finite()) {
            return Err(invalid(format!("t must be positive, got {t}")));
        }
        Ok(Self {
            sigma_min,
            sigma_max,
            a,
            t,
        })
    }

    /// Practical defaults: `sigma_min = s / k`, `sigma_max = k s` where `s^2` is
    /// the OLS residual variance with `n - d` degrees of freedom; `t = log n`
    /// unless given.
    pub fn from_data(data: &Dataset, k: f64, a: f64, t: Option<f64>) -> Result<Self> {
        if !(k > 1.0) {
            return Err(invalid(format!("K must exceed 1, got {k}")));
        }
        let p = data.n_coef();
        if data.n() <= p {
            return Err(invalid("the Lepski grid needs n > d"));
        }
        let ols = fit_ols(data)?;
        let rss = data.residuals(&ols.beta).norm_squared();
        let sigma = (rss / (data.n() - p) as f64).sqrt();
        if !(sigma > 0.0) {
            return Err(Error::DegenerateSample("OLS residuals are all zero".into()));
        }
        Self::new(sigma / k, k * sigma, a, t.unwrap_or_else(|| default_t(data.n())))
    }

    pub fn sigmas(&self) -> Vec<f64> {
        let upper = self.a * self.sigma_max;
        let mut out = Vec::new();
        let mut j = 0;
        loop {
            let s = self.sigma_min * self.a.powi(j);
            if s >= upper {
                break;
            }
            out.push(s);
            j += 1;
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct LepskiOutcome {
    pub fit: FitResult,
    pub index: usize,
    pub sigmas: Vec<f64>,
    pub taus: Vec<f64>,
    pub fits: Vec<FitResult>,
    /// `distances[j][k] = ||S^{1/2} (beta_k - beta_j)||_2` for `k > j`, zero otherwise.
    pub distances: Vec<Vec<f64>>,
    pub thresholds: Vec<f64>,
    pub l_tilde: f64,
    /// No index satisfied the rule and the largest grid point was returned.
    pub fallback: bool,
}

/// Smallest `j` with `distances[j][k] <= thresholds[j]` for every `k > j`.
pub fn lepski_index(distances: &[Vec<f64>], thresholds: &[f64]) -> Option<usize> {
    let m = thresholds.len();
    (0..m).find(|&j| ((j + 1)..m).all(|k| distances[j][k] <= thresholds[j]))
}

fn sym_power(s: &DMatrix<f64>, power: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let eig = s.clone().symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(max > 0.0) || min <= RANK_TOL * max {
        return Err(Error::RankDeficient {
            what: "Gram matrix S_n".into(),
            condition: if min > 0.0 { max / min } else { f64::INFINITY },
        });
    }
    let v = &eig.eigenvectors;
    let up = v * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.powf(power))) * v.transpose();
    let down = v * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.powf(-power))) * v.transpose();
    Ok((up, down))
}

/// Lepski-type choice of `tau` over `tau_j = sigma_j sqrt(n / t)`.
pub fn lepski_select(data: &Dataset, grid: &LepskiGrid) -> Result<LepskiOutcome> {
    lepski_select_with(data, grid, &SolverConfig::irls())
}

pub fn lepski_select_with(data: &Dataset, grid: &LepskiGrid, cfg: &SolverConfig) -> Result<LepskiOutcome> {
    let n = data.n() as f64;
    let p = data.n_coef();
    if data.n() <= p {
        return Err(invalid("Lepski selection needs n > d"));
    }
    let x = data.design();
    let s = x.tr_mul(x) / n;
    let (s_half, s_neg_half) = sym_power(&s, 0.5)?;
    let l_tilde = (x * &s_neg_half).amax();

    let sigmas = grid.sigmas();
    let taus: Vec<f64> = sigmas.iter().map(|s| s * (n / grid.t).sqrt()).collect();
    let fits: Vec<FitResult> = taus
        .par_iter()
        .map(|&tau| fit_huber(data, tau, cfg))
        .collect::<Result<_>>()?;

    let m = fits.len();
    let scaled: Vec<DVector<f64>> = fits.iter().map(|f| &s_half * &f.beta).collect();
    let mut distances = vec![vec![0.0; m]; m];
    for j in 0..m {
        for k in (j + 1)..m {
            distances[j][k] = (&scaled[k] - &scaled[j]).norm();
        }
    }
    let factor = 8.0 * l_tilde * (p as f64).sqrt() * (grid.t / n).sqrt();
    let thresholds: Vec<f64> = sigmas.iter().map(|s| factor * s).collect();

    let (index, fallback) = match lepski_index(&distances, &thresholds) {
        Some(j) => (j, false),
        None => (m - 1, true),
    };
    Ok(LepskiOutcome {
        fit: fits[index].clone(),
        index,
        sigmas,
        taus,
        fits,
        distances,
        thresholds,
        l_tilde,
        fallback,
    })
}
