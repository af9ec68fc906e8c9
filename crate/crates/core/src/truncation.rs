//! Adaptive Huber regression with elementwise-truncated covariates, for
//! designs with heavy-tailed entries.

use nalgebra::{DMatrix, DVector};

use crate::data::{Dataset, HuberParams};
use crate::error::{invalid, Result};
use crate::fit::{FitResult, SolverConfig};
use crate::huber::truncate_matrix;
use crate::lamm::fit_l1_huber;

/// The sample with every covariate clamped to `[-varpi, varpi]`; the response
/// and the intercept column are left as they are.
pub fn truncated_dataset(data: &Dataset, varpi: f64) -> Result<Dataset> {
    if !(varpi.is_finite() && varpi > 0.0) {
        return Err(invalid(format!("varpi must be positive and finite, got {varpi}")));
    }
    data.with_design(truncate_matrix(&data.x().clone_owned(), varpi))
}

/// l1-penalized Huber fit on the truncated design. Coefficients refer to the
/// truncated covariates; use [`predict_truncated`] for new rows.
pub fn fit_truncated(data: &Dataset, params: &HuberParams, cfg: &SolverConfig) -> Result<FitResult> {
    let varpi = params
        .varpi
        .ok_or_else(|| invalid("truncated fit requires a truncation level varpi"))?;
    params.validate()?;
    fit_l1_huber(&truncated_dataset(data, varpi)?, params, cfg)
}

/// Predictions for new covariate rows, truncated at the same level as the fit.
pub fn predict_truncated(
    data: &Dataset,
    x_new: &DMatrix<f64>,
    beta: &DVector<f64>,
    varpi: f64,
) -> Result<DVector<f64>> {
    if !(varpi.is_finite() && varpi > 0.0) {
        return Err(invalid(format!("varpi must be positive and finite, got {varpi}")));
    }
    data.predict(&truncate_matrix(x_new, varpi), beta)
}

/// Default sparsity guess `max(1, ceil(sqrt d))`.
pub fn default_sparsity_guess(d: usize) -> usize {
    ((d as f64).sqrt().ceil() as usize).max(1)
}

/// Rate-matched levels for heavy-tailed designs:
/// `tau = c_tau s^(1/2) (n / log d)^(1/4)`, `varpi = c_varpi (n / log d)^(1/4)`,
/// `lambda = c_lambda (s log d / n)^(1/2)`.
pub fn default_truncation_params(
    n: usize,
    d: usize,
    s_guess: usize,
    c_tau: f64,
    c_varpi: f64,
    c_lambda: f64,
) -> Result<HuberParams> {
    if n < 2 || d < 2 {
        return Err(invalid(format!("need n >= 2 and d >= 2, got n = {n}, d = {d}")));
    }
    if s_guess == 0 {
        return Err(invalid("sparsity guess must be positive"));
    }
    for (name, c) in [("c_tau", c_tau), ("c_varpi", c_varpi), ("c_lambda", c_lambda)] {
        if !(c.is_finite() && c > 0.0) {
            return Err(invalid(format!("{name} must be positive, got {c}")));
        }
    }
    let ratio = n as f64 / (d as f64).ln();
    truncation_params_for_ratio(ratio, s_guess, c_tau, c_varpi, c_lambda)
}

/// The same scalings expressed through the effective sample size
/// `n / log d`, on which all three levels depend exclusively.
pub fn truncation_params_for_ratio(
    n_over_log_d: f64,
    s_guess: usize,
    c_tau: f64,
    c_varpi: f64,
    c_lambda: f64,
) -> Result<HuberParams> {
    if !(n_over_log_d.is_finite() && n_over_log_d > 0.0) {
        return Err(invalid(format!("n / log d must be positive, got {n_over_log_d}")));
    }
    let s = s_guess as f64;
    let root4 = n_over_log_d.powf(0.25);
    HuberParams::new(
        c_tau * s.sqrt() * root4,
        c_lambda * (s / n_over_log_d).sqrt(),
        Some(c_varpi * root4),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::huber::gradient;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn instance(seed: u64) -> (Dataset, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(100, 20, |_, _| StandardNormal.sample(&mut rng));
        let mut beta = DVector::zeros(20);
        beta[0] = 5.0;
        beta[1] = -2.0;
        beta[4] = 3.0;
        let e = DVector::from_fn(100, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        });
        let y = &x * &beta + e;
        (Dataset::new(x, y, false).unwrap(), beta)
    }

    #[test]
    fn identity_when_varpi_covers_design() {
        let (data, _) = instance(1);
        let big = data.x().amax() + 1.0;
        let p = HuberParams::new(2.0, 0.1, Some(big)).unwrap();
        let cfg = SolverConfig::lamm();
        let a = fit_truncated(&data, &p, &cfg).unwrap();
        let b = fit_l1_huber(&data, &p, &cfg).unwrap();
        let bits = |v: &DVector<f64>| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.beta), bits(&b.beta));
    }

    #[test]
    fn composition_law_is_exact() {
        for seed in 0..5 {
            let (data, _) = instance(seed);
            let p = HuberParams::new(1.5, 0.2, Some(1.0)).unwrap();
            let cfg = SolverConfig::lamm();
            let a = fit_truncated(&data, &p, &cfg).unwrap();
            let t = truncated_dataset(&data, 1.0).unwrap();
            assert!(t.x().iter().all(|v| v.abs() <= 1.0));
            let b = fit_l1_huber(&t, &p, &cfg).unwrap();
            assert_eq!(a.beta, b.beta);
            assert_eq!(a.iterations, b.iterations);
        }
    }

    #[test]
    fn contaminated_cell_hurts_untruncated_more() {
        let (data, beta) = instance(42);
        let mut x = data.x().clone_owned();
        x[(7, 0)] = 1e6;
        let dirty = Dataset::new(x, data.y().clone(), false).unwrap();
        let p = HuberParams::new(2.0, 0.1, Some(5.0)).unwrap();
        let cfg = SolverConfig::lamm();
        let trunc = fit_truncated(&dirty, &p, &cfg).unwrap();
        let plain = fit_l1_huber(&dirty, &p, &cfg).unwrap();
        assert!((&trunc.beta - &beta).norm() < (&plain.beta - &beta).norm());
    }

    #[test]
    fn large_lambda_gives_zero() {
        let (data, _) = instance(3);
        let t = truncated_dataset(&data, 2.0).unwrap();
        let lmax = gradient(&DVector::zeros(20), &t, 2.0).unwrap().amax();
        let p = HuberParams::new(2.0, lmax, Some(2.0)).unwrap();
        let fit = fit_truncated(&data, &p, &SolverConfig::lamm()).unwrap();
        assert!(fit.beta.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn requires_varpi() {
        let (data, _) = instance(4);
        let p = HuberParams::new(2.0, 0.1, None).unwrap();
        assert!(fit_truncated(&data, &p, &SolverConfig::lamm()).is_err());
    }

    #[test]
    fn intercept_is_not_truncated() {
        let x = DMatrix::from_row_slice(3, 1, &[10.0, -10.0, 0.5]);
        let data = Dataset::new(x, DVector::from_vec(vec![1.0, 2.0, 3.0]), true).unwrap();
        let t = truncated_dataset(&data, 0.25).unwrap();
        assert_eq!(t.design().column(0).as_slice(), &[0.25, -0.25, 0.25]);
        assert_eq!(t.design().column(1).as_slice(), &[1.0, 1.0, 1.0]);
        let pred = predict_truncated(
            &data,
            &DMatrix::from_row_slice(1, 1, &[4.0]),
            &DVector::from_vec(vec![2.0, 1.0]),
            0.25,
        )
        .unwrap();
        assert_eq!(pred[0], 1.5);
    }

    #[test]
    fn default_scalings() {
        let p = truncation_params_for_ratio(16.0, 4, 1.0, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(p.tau, 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.varpi.unwrap(), 2.0, epsilon = 1e-12);
        let p = truncation_params_for_ratio(16.0, 1, 1.0, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(p.lambda, 0.25, epsilon = 1e-12);

        let (n, d) = (400usize, 50usize);
        let log_d = (d as f64).ln();
        let p = default_truncation_params(n, d, 3, 0.5, 2.0, 1.5).unwrap();
        assert_abs_diff_eq!(p.tau, 0.5 * 3f64.sqrt() * (n as f64 / log_d).powf(0.25), epsilon = 1e-12);
        assert_abs_diff_eq!(p.varpi.unwrap(), 2.0 * (n as f64 / log_d).powf(0.25), epsilon = 1e-12);
        assert_abs_diff_eq!(p.lambda, 1.5 * (3.0 * log_d / n as f64).sqrt(), epsilon = 1e-12);
        assert!(default_truncation_params(10, 1, 1, 1.0, 1.0, 1.0).is_err());
        assert_eq!(default_sparsity_guess(20), 5);
        assert_eq!(default_sparsity_guess(1), 1);
    }
}
