//! Unpenalized adaptive Huber regression by iteratively reweighted least
//! squares, and the ordinary least squares baseline.
//!
//! Each IRLS step minimizes the quadratic majorizer
//! `sum_i w_i (y_i - <x_i, beta>)^2 / 2` with `w_i = psi_tau(r_i) / r_i`
//! evaluated at the current residuals, so the Huber objective never increases.

use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::fit::{FitResult, SolverConfig};
use crate::huber::{gradient_from_residuals, mean_loss, weight};

/// Relative eigenvalue floor below which a Gram matrix is treated as singular.
pub(crate) const RANK_TOL: f64 = 1e-12;

/// Solves `gram * beta = rhs` for a symmetric positive definite `gram`.
pub(crate) fn solve_spd(gram: DMatrix<f64>, rhs: &DVector<f64>, what: &str) -> Result<DVector<f64>> {
    let eig = gram.symmetric_eigenvalues();
    let max = eig.max();
    let min = eig.min();
    if !(max > 0.0) || min <= RANK_TOL * max || !min.is_finite() {
        let condition = if min > 0.0 { max / min } else { f64::INFINITY };
        return Err(Error::RankDeficient {
            what: what.to_string(),
            condition,
        });
    }
    let chol = gram.cholesky().ok_or_else(|| Error::RankDeficient {
        what: what.to_string(),
        condition: max / min,
    })?;
    Ok(chol.solve(rhs))
}

/// Ordinary least squares.
pub fn fit_ols(data: &Dataset) -> Result<FitResult> {
    let n = data.n() as f64;
    if data.n() < data.n_coef() {
        return Err(Error::RankDeficient {
            what: format!("Gram matrix ({} rows, {} columns)", data.n(), data.n_coef()),
            condition: f64::INFINITY,
        });
    }
    let x = data.design();
    let gram = x.tr_mul(x) / n;
    let rhs = x.tr_mul(data.y()) / n;
    let beta = solve_spd(gram, &rhs, "Gram matrix n^-1 X^T X")?;
    let r = data.residuals(&beta);
    let objective = 0.5 * r.norm_squared() / n;
    let gradient_norm = (x.tr_mul(&r) / n).norm();
    Ok(FitResult {
        beta,
        iterations: 1,
        converged: true,
        objective,
        trajectory: None,
        gradient_norm,
        max_inner: 0,
    })
}

fn weighted_step(data: &Dataset, residuals: &DVector<f64>, tau: f64) -> Result<DVector<f64>> {
    let x = data.design();
    let w = residuals.map(|r| weight(r, tau));
    let mut xw = x.clone();
    for mut col in xw.column_iter_mut() {
        col.component_mul_assign(&w);
    }
    let gram = x.tr_mul(&xw);
    let rhs = xw.tr_mul(data.y());
    solve_spd(gram, &rhs, "weighted Gram matrix")
}

/// Adaptive Huber regression `argmin_beta n^-1 sum_i l_tau(y_i - <x_i, beta>)`.
///
/// Starts from the OLS solution (zero when OLS is rank deficient). Reaching
/// `cfg.max_iter` returns the last iterate with `converged = false`.
pub fn fit_huber(data: &Dataset, tau: f64, cfg: &SolverConfig) -> Result<FitResult> {
    cfg.validate()?;
    if !(tau.is_finite() && tau > 0.0) {
        return Err(invalid(format!("tau must be positive and finite, got {tau}")));
    }
    let mut beta = match fit_ols(data) {
        Ok(fit) => fit.beta,
        Err(Error::RankDeficient { .. }) => DVector::zeros(data.n_coef()),
        Err(e) => return Err(e),
    };
    let mut r = data.residuals(&beta);
    let mut trajectory = cfg.record_trajectory.then(|| vec![mean_loss(&r, tau)]);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        let next = weighted_step(data, &r, tau)?;
        let step = (&next - &beta).norm();
        beta = next;
        r = data.residuals(&beta);
        iterations += 1;
        if let Some(t) = trajectory.as_mut() {
            t.push(mean_loss(&r, tau));
        }
        if step <= cfg.tol {
            converged = true;
            break;
        }
    }
    let gradient_norm = gradient_from_residuals(data, &r, tau).norm();
    Ok(FitResult {
        objective: mean_loss(&r, tau),
        beta,
        iterations,
        converged,
        trajectory,
        gradient_norm,
        max_inner: 0,
    })
}
