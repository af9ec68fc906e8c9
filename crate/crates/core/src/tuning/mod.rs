//! Data-driven choice of the robustification and penalty levels.

mod cv;
mod lepski;

pub use cv::{cross_validate, cross_validate_with, fold_assignment, CvCell, CvOutcome, TuningGrid};
pub use lepski::{lepski_index, lepski_select, lepski_select_with, LepskiGrid, LepskiOutcome};

use serde::{Deserialize, Serialize};

use crate::data::HuberParams;
use crate::error::{invalid, Error, Result};

/// Default constant grid for `c_tau` and `c_lambda`.
pub const DEFAULT_CONSTANTS: [f64; 3] = [0.5, 1.0, 1.5];

/// Low dimensions use `n_eff = n`; high dimensions `n_eff = n / log d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Low,
    High,
}

impl Regime {
    /// Effective sample size. In the high-dimensional regime `log d` is floored
    /// at 1 so that `d < 3` does not inflate `n_eff` beyond `n`.
    pub fn effective_sample_size(self, n: usize, d: usize) -> f64 {
        match self {
            Regime::Low => n as f64,
            Regime::High => n as f64 / (d as f64).ln().max(1.0),
        }
    }
}

/// Crude scale estimate `sqrt(n^-1 sum (y_i - ybar)^2)`.
pub fn estimate_sigma_crude(y: &[f64]) -> Result<f64> {
    if y.len() < 2 {
        return Err(invalid("need at least two observations to estimate a scale"));
    }
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if !(var > 0.0) {
        return Err(Error::DegenerateSample("response has zero variance".into()));
    }
    Ok(var.sqrt())
}

/// Plug-in levels `tau = c_tau sigma (n_eff / t)^(1/2)` and
/// `lambda = c_lambda sigma (t / n_eff)^(1/2)`.
pub fn default_params(sigma_hat: f64, n_eff: f64, t: f64, c_tau: f64, c_lambda: f64) -> Result<HuberParams> {
    for (name, v) in [
        ("sigma_hat", sigma_hat),
        ("n_eff", n_eff),
        ("t", t),
        ("c_tau", c_tau),
        ("c_lambda", c_lambda),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(invalid(format!("{name} must be positive, got {v}")));
        }
    }
    HuberParams::new(
        c_tau * sigma_hat * (n_eff / t).sqrt(),
        c_lambda * sigma_hat * (t / n_eff).sqrt(),
        None,
    )
}

/// `(1+delta)`-th absolute central sample moment `n^-1 sum |r_i - rbar|^(1+delta)`.
pub fn moment_estimate(residuals: &[f64], delta: f64) -> Result<f64> {
    if residuals.len() < 2 {
        return Err(invalid("need at least two residuals"));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(invalid(format!("delta must lie in (0, 1], got {delta}")));
    }
    let n = residuals.len() as f64;
    let mean = residuals.iter().sum::<f64>() / n;
    let p = 1.0 + delta;
    Ok(residuals.iter().map(|r| (r - mean).abs().powf(p)).sum::<f64>() / n)
}

/// Default confidence level `t = log n`.
pub fn default_t(n: usize) -> f64 {
    (n as f64).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn sigma_examples() {
        assert!(matches!(
            estimate_sigma_crude(&[1.0, 1.0, 1.0, 1.0]),
            Err(Error::DegenerateSample(_))
        ));
        assert_abs_diff_eq!(estimate_sigma_crude(&[-1.0, 1.0]).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(estimate_sigma_crude(&[0.0, 0.0, 3.0, 3.0]).unwrap(), 1.5, epsilon = 1e-15);
        assert!(estimate_sigma_crude(&[2.0]).is_err());
    }

    #[test]
    fn plug_in_examples() {
        let p = default_params(1.0, 100.0, 4.0, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(p.tau, 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.lambda, 0.2, epsilon = 1e-12);
        let p = default_params(2.0, 400.0, 4.0, 0.5, 1.0).unwrap();
        assert_abs_diff_eq!(p.tau, 10.0, epsilon = 1e-12);
        assert!(default_params(0.0, 1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn effective_sample_size() {
        assert_eq!(Regime::Low.effective_sample_size(100, 5), 100.0);
        let d = 500usize;
        assert_abs_diff_eq!(
            Regime::High.effective_sample_size(1000, d),
            1000.0 / (d as f64).ln(),
            epsilon = 1e-12
        );
        assert_eq!(Regime::High.effective_sample_size(100, 1), 100.0);
    }

    #[test]
    fn moment_examples() {
        assert_abs_diff_eq!(moment_estimate(&[-1.0, 1.0], 1.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(moment_estimate(&[0.0, 0.0, 0.0, 4.0], 1.0).unwrap(), 3.0, epsilon = 1e-15);
        assert!(moment_estimate(&[1.0], 0.5).is_err());
    }

    proptest! {
        #[test]
        fn plug_in_is_homogeneous_in_sigma(
            sigma in 0.01f64..100.0, c in 0.01f64..100.0,
            n_eff in 1.0f64..1e5, t in 0.1f64..20.0,
        ) {
            let a = default_params(sigma, n_eff, t, 0.7, 1.3).unwrap();
            let b = default_params(c * sigma, n_eff, t, 0.7, 1.3).unwrap();
            prop_assert!((b.tau - c * a.tau).abs() <= 1e-12 * b.tau);
            prop_assert!((b.lambda - c * a.lambda).abs() <= 1e-12 * b.lambda);
        }

        #[test]
        fn second_moment_is_biased_variance(v in proptest::collection::vec(-100.0f64..100.0, 2..50)) {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            let m = moment_estimate(&v, 1.0).unwrap();
            prop_assert!((m - var).abs() <= 1e-9 * var.max(1.0));
        }
    }
}
