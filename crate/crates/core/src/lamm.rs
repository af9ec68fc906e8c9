//! l1-regularized adaptive Huber regression by local adaptive
//! majorize-minimization (LAMM).
//!
//! At iterate `beta_k` the loss is majorized by the isotropic quadratic
//! `L(beta_k) + <grad, beta - beta_k> + phi/2 ||beta - beta_k||^2`, whose
//! penalized minimizer is a soft-thresholded gradient step. `phi` starts at
//! `max(phi0, phi_prev / gamma_u)` and is multiplied by `gamma_u` until the
//! quadratic dominates the loss at the proposal.

use nalgebra::DVector;

use crate::data::{Dataset, HuberParams};
use crate::error::{invalid, Error, Result};
use crate::fit::{FitResult, SolverConfig};
use crate::huber::{gradient_from_residuals, loss, mean_loss, penalty_norm, score, shrink};

/// Absolute slack on the majorization test, absorbing rounding near fixed points.
pub const MAJORIZATION_SLACK: f64 = 1e-12;

const PHI_CEILING: f64 = 1e300;

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

/// `S(beta - grad / phi, lambda / phi)`, leaving the intercept unthresholded.
fn proximal_step(
    data: &Dataset,
    beta: &DVector<f64>,
    grad: &DVector<f64>,
    lambda: f64,
    phi: f64,
) -> DVector<f64> {
    let kappa = lambda / phi;
    DVector::from_fn(beta.len(), |j, _| {
        let v = beta[j] - grad[j] / phi;
        if data.is_penalized(j) {
            shrink(v, kappa)
        } else {
            v
        }
    })
}

/// One LAMM update `T_{lambda,phi}(beta)`.
pub fn lamm_step(
    beta: &DVector<f64>,
    data: &Dataset,
    tau: f64,
    lambda: f64,
    phi: f64,
) -> Result<DVector<f64>> {
    HuberParams::new(tau, lambda, None)?;
    check_positive("phi", phi)?;
    data.check_coef(beta)?;
    let grad = gradient_from_residuals(data, &data.residuals(beta), tau);
    Ok(proximal_step(data, beta, &grad, lambda, phi))
}

#[inline]
fn surrogate_dominates(
    loss_old: f64,
    grad_old: &DVector<f64>,
    step: &DVector<f64>,
    phi: f64,
    loss_new: f64,
) -> bool {
    loss_old + grad_old.dot(step) + 0.5 * phi * step.norm_squared() >= loss_new - MAJORIZATION_SLACK
}

/// `l(b - u) - l(b) + psi(b) u`, evaluated branchwise so that small moves
/// do not drown in the rounding of the loss values.
#[inline]
fn remainder_term(b: f64, u: f64, tau: f64) -> f64 {
    let a = b - u;
    if a.abs() <= tau && b.abs() <= tau {
        0.5 * u * u
    } else if (a >= tau && b >= tau) || (a <= -tau && b <= -tau) {
        0.0
    } else {
        (loss(a, tau) - loss(b, tau) + score(b, tau) * u).max(0.0)
    }
}

/// Mean remainder of the first-order expansion of the loss at residuals `r`
/// for the fitted-value change `u`. The solver accepts a curvature when this
/// is at most `phi / 2 ||step||^2`, which is the majorization condition
/// without the absolute slack: near a fixed point that slack would accept
/// curvatures far below the local Lipschitz constant and stall the iterates.
fn mean_remainder(r: &DVector<f64>, u: &DVector<f64>, tau: f64) -> f64 {
    r.iter().zip(u.iter()).map(|(&b, &v)| remainder_term(b, v, tau)).sum::<f64>() / r.len() as f64
}

/// Whether the isotropic quadratic with curvature `phi` built at `beta_old`
/// majorizes the Huber loss at `beta_new`.
pub fn majorization_holds(
    beta_new: &DVector<f64>,
    beta_old: &DVector<f64>,
    data: &Dataset,
    tau: f64,
    phi: f64,
) -> Result<bool> {
    check_positive("tau", tau)?;
    check_positive("phi", phi)?;
    data.check_coef(beta_new)?;
    data.check_coef(beta_old)?;
    let r_old = data.residuals(beta_old);
    let grad = gradient_from_residuals(data, &r_old, tau);
    let loss_new = mean_loss(&data.residuals(beta_new), tau);
    Ok(surrogate_dominates(
        mean_loss(&r_old, tau),
        &grad,
        &(beta_new - beta_old),
        phi,
        loss_new,
    ))
}

/// Norm of the minimum-norm subgradient of `L_tau + lambda ||.||_1` at `beta`.
pub(crate) fn kkt_residual(data: &Dataset, beta: &DVector<f64>, grad: &DVector<f64>, lambda: f64) -> f64 {
    let mut acc = 0.0;
    for j in 0..beta.len() {
        let v = if !data.is_penalized(j) {
            grad[j]
        } else if beta[j] != 0.0 {
            grad[j] + lambda * beta[j].signum()
        } else {
            (grad[j].abs() - lambda).max(0.0)
        };
        acc += v * v;
    }
    acc.sqrt()
}

/// Coordinatewise l1 optimality check at absolute tolerance `tol`:
/// `|g_j| <= lambda + tol` where `beta_j = 0`, and
/// `|g_j + lambda sign(beta_j)| <= tol (1 + lambda)` elsewhere.
/// Unpenalized coordinates need `|g_j| <= tol (1 + lambda)`.
pub fn kkt_satisfied(data: &Dataset, beta: &DVector<f64>, tau: f64, lambda: f64, tol: f64) -> Result<bool> {
    let grad = crate::huber::gradient(beta, data, tau)?;
    Ok((0..beta.len()).all(|j| {
        if !data.is_penalized(j) {
            grad[j].abs() <= tol * (1.0 + lambda)
        } else if beta[j] == 0.0 {
            grad[j].abs() <= lambda + tol
        } else {
            (grad[j] + lambda * beta[j].signum()).abs() <= tol * (1.0 + lambda)
        }
    }))
}

/// Solves `argmin_beta L_tau(beta) + lambda ||beta||_1` from `beta = 0`.
pub fn fit_l1_huber(data: &Dataset, params: &HuberParams, cfg: &SolverConfig) -> Result<FitResult> {
    fit_l1_huber_from(data, params, cfg, DVector::zeros(data.n_coef()))
}

/// As [`fit_l1_huber`], starting from `beta0`.
pub fn fit_l1_huber_from(
    data: &Dataset,
    params: &HuberParams,
    cfg: &SolverConfig,
    beta0: DVector<f64>,
) -> Result<FitResult> {
    params.validate()?;
    cfg.validate()?;
    data.check_coef(&beta0)?;
    let (tau, lambda) = (params.tau, params.lambda);

    let mut beta = beta0;
    let mut r = data.residuals(&beta);
    let mut loss = mean_loss(&r, tau);
    let mut grad = gradient_from_residuals(data, &r, tau);
    let mut trajectory = cfg
        .record_trajectory
        .then(|| vec![loss + lambda * penalty_norm(&beta, data)]);

    let mut phi_prev = cfg.phi0;
    let mut iterations = 0;
    let mut converged = false;
    let mut max_inner = 0;

    while iterations < cfg.max_iter {
        let mut phi = cfg.phi0.max(phi_prev / cfg.gamma_u);
        let mut inner = 0;
        let (next, r_next, loss_next) = loop {
            inner += 1;
            let cand = proximal_step(data, &beta, &grad, lambda, phi);
            let step = &cand - &beta;
            let u = data.design() * &step;
            if mean_remainder(&r, &u, tau) <= 0.5 * phi * step.norm_squared() {
                let r_cand = data.residuals(&cand);
                let loss_cand = mean_loss(&r_cand, tau);
                break (cand, r_cand, loss_cand);
            }
            phi *= cfg.gamma_u;
            if !(phi <= PHI_CEILING) {
                return Err(Error::NumericalFailure(format!(
                    "LAMM curvature exceeded {PHI_CEILING:e} at iteration {iterations}"
                )));
            }
        };
        max_inner = max_inner.max(inner);
        phi_prev = phi;
        iterations += 1;

        let step = (&next - &beta).norm();
        beta = next;
        r = r_next;
        loss = loss_next;
        grad = gradient_from_residuals(data, &r, tau);
        if let Some(t) = trajectory.as_mut() {
            t.push(loss + lambda * penalty_norm(&beta, data));
        }
        if step <= cfg.tol {
            converged = true;
            break;
        }
    }

    Ok(FitResult {
        objective: loss + lambda * penalty_norm(&beta, data),
        gradient_norm: kkt_residual(data, &beta, &grad, lambda),
        beta,
        iterations,
        converged,
        trajectory,
        max_inner,
    })
}
