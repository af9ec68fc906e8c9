//! Huber loss kernel: loss, score, IRLS weights, empirical objective and
//! gradient, soft-thresholding and covariate truncation.
//!
//! The checked entry points reject non-finite input and non-positive `tau`.
//! Solvers use the unchecked `pub(crate)` variants in their inner loops after
//! validating once.

use nalgebra::{DMatrix, DVector};

use crate::data::{Dataset, HuberParams};
use crate::error::{invalid, Result};

fn check_tau(tau: f64) -> Result<()> {
    if tau.is_finite() && tau > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("tau must be positive and finite, got {tau}")))
    }
}

fn check_finite(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("non-finite argument {x}")))
    }
}

#[inline]
pub(crate) fn loss(x: f64, tau: f64) -> f64 {
    let a = x.abs();
    if a <= tau {
        0.5 * x * x
    } else {
        tau * a - 0.5 * tau * tau
    }
}

#[inline]
pub(crate) fn score(x: f64, tau: f64) -> f64 {
    x.clamp(-tau, tau)
}

#[inline]
pub(crate) fn weight(r: f64, tau: f64) -> f64 {
    let a = r.abs();
    if a <= tau {
        1.0
    } else {
        tau / a
    }
}

/// Huber loss: `x^2/2` on `|x| <= tau`, `tau|x| - tau^2/2` beyond.
pub fn huber_loss(x: f64, tau: f64) -> Result<f64> {
    check_finite(x)?;
    check_tau(tau)?;
    Ok(loss(x, tau))
}

/// Derivative of the Huber loss, `sign(x) min(|x|, tau)`.
pub fn huber_score(x: f64, tau: f64) -> Result<f64> {
    check_finite(x)?;
    check_tau(tau)?;
    Ok(score(x, tau))
}

/// IRLS weight `psi_tau(r) / r`, taken as 1 on the quadratic region (including `r = 0`).
pub fn irls_weight(r: f64, tau: f64) -> Result<f64> {
    check_finite(r)?;
    check_tau(tau)?;
    Ok(weight(r, tau))
}

/// Mean Huber loss of a residual vector.
pub(crate) fn mean_loss(residuals: &DVector<f64>, tau: f64) -> f64 {
    residuals.iter().map(|&r| loss(r, tau)).sum::<f64>() / residuals.len() as f64
}

/// l1 norm over the penalized coordinates.
pub(crate) fn penalty_norm(beta: &DVector<f64>, data: &Dataset) -> f64 {
    beta.iter().take(data.d()).map(|b| b.abs()).sum()
}

/// `-n^-1 X^T psi_tau(r)` for precomputed residuals.
pub(crate) fn gradient_from_residuals(
    data: &Dataset,
    residuals: &DVector<f64>,
    tau: f64,
) -> DVector<f64> {
    let psi = residuals.map(|r| score(r, tau));
    let mut g = data.design().tr_mul(&psi);
    g *= -1.0 / data.n() as f64;
    g
}

/// Penalized empirical objective `L_tau(beta) + lambda ||beta||_1`.
///
/// The intercept coefficient, when present, is excluded from the penalty.
pub fn objective(beta: &DVector<f64>, data: &Dataset, params: &HuberParams) -> Result<f64> {
    params.validate()?;
    data.check_coef(beta)?;
    let r = data.residuals(beta);
    Ok(mean_loss(&r, params.tau) + params.lambda * penalty_norm(beta, data))
}

/// Gradient of the unpenalized empirical loss, `-n^-1 sum psi_tau(y_i - <x_i, beta>) x_i`.
pub fn gradient(beta: &DVector<f64>, data: &Dataset, tau: f64) -> Result<DVector<f64>> {
    check_tau(tau)?;
    data.check_coef(beta)?;
    let r = data.residuals(beta);
    Ok(gradient_from_residuals(data, &r, tau))
}

/// Elementwise soft-thresholding `sign(v_j) max(|v_j| - kappa, 0)`.
pub fn soft_threshold(v: &DVector<f64>, kappa: f64) -> DVector<f64> {
    assert!(kappa >= 0.0, "soft-threshold level must be nonnegative");
    v.map(|x| shrink(x, kappa))
}

#[inline]
pub(crate) fn shrink(x: f64, kappa: f64) -> f64 {
    let a = x.abs() - kappa;
    if a > 0.0 {
        a.copysign(x)
    } else {
        0.0
    }
}

/// Elementwise clamp of a covariate matrix to `[-varpi, varpi]`.
///
/// Operates on raw covariates; the intercept column is added by [`Dataset`]
/// afterwards and so is never truncated.
pub fn truncate_matrix(x: &DMatrix<f64>, varpi: f64) -> DMatrix<f64> {
    assert!(varpi > 0.0, "truncation level must be positive");
    x.map(|v| v.clamp(-varpi, varpi))
}
