use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{benchmark_beta, rng_from_seed, NoiseSpec};
use crate::data::Dataset;
use crate::error::{invalid, Result};
use crate::fit::SolverConfig;
use crate::huber::score;
use crate::irls::{fit_huber, solve_spd};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasConfig {
    pub noise: NoiseSpec,
    pub tau_grid: Vec<f64>,
    pub n: usize,
    /// Number of standard-normal covariates besides the intercept.
    pub d: usize,
    pub seed: u64,
}

impl BiasConfig {
    pub fn new(noise: NoiseSpec, tau_grid: Vec<f64>, seed: u64) -> Self {
        Self {
            noise,
            tau_grid,
            n: 100_000,
            d: 2,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasRow {
    pub tau: f64,
    /// `||beta_hat_tau - beta*||_2` at large `n`, an estimate of the population bias.
    pub bias: f64,
    /// Sandwich standard error of `bias`.
    pub std_error: f64,
    pub converged: bool,
}

/// Bias of the Huber regression coefficient as a function of `tau`.
///
/// One large sample with an intercept is drawn and refitted at every `tau`,
/// so the curve is free of between-`tau` sampling noise. Under errors whose
/// Huber location is not zero the whole bias sits in the intercept.
pub fn check_bias_decay(cfg: &BiasConfig) -> Result<Vec<BiasRow>> {
    cfg.noise.validate()?;
    if cfg.tau_grid.is_empty() || cfg.tau_grid.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(invalid("tau grid must be nonempty and positive"));
    }
    if cfg.n <= cfg.d + 1 {
        return Err(invalid("need n > d + 1"));
    }
    let mut rng = rng_from_seed(cfg.seed);
    let noise = cfg.noise.sampler()?;
    let mut x = DMatrix::zeros(cfg.n, cfg.d);
    for i in 0..cfg.n {
        for j in 0..cfg.d {
            x[(i, j)] = StandardNormal.sample(&mut rng);
        }
    }
    let slopes = benchmark_beta(cfg.d);
    let eps = DVector::from_fn(cfg.n, |_, _| noise.sample(&mut rng) - cfg.noise.mean());
    let y = &x * &slopes + eps;
    let data = Dataset::new(x, y, true)?;
    let truth = slopes.push(0.0);
    let irls = SolverConfig::irls().with_tol(1e-10);

    let mut rows = Vec::with_capacity(cfg.tau_grid.len());
    for &tau in &cfg.tau_grid {
        let fit = fit_huber(&data, tau, &irls)?;
        let diff = &fit.beta - &truth;
        let cov = sandwich(&data, &fit.beta, tau)?;
        let bias = diff.norm();
        let var = if bias > 0.0 {
            let g = &diff / bias;
            (g.transpose() * &cov * &g)[(0, 0)]
        } else {
            cov.trace()
        };
        rows.push(BiasRow {
            tau,
            bias,
            std_error: var.max(0.0).sqrt(),
            converged: fit.converged,
        });
    }
    Ok(rows)
}

/// `H^-1 J H^-1 / n` with `H = n^-1 sum 1{|r_i| <= tau} x_i x_i'` and
/// `J = n^-1 sum psi(r_i)^2 x_i x_i'`.
fn sandwich(data: &Dataset, beta: &DVector<f64>, tau: f64) -> Result<DMatrix<f64>> {
    let x = data.design();
    let r = data.residuals(beta);
    let n = data.n() as f64;
    let inside = DVector::from_iterator(r.len(), r.iter().map(|v| if v.abs() <= tau { 1.0 } else { 0.0 }));
    let psi2 = r.map(|v| score(v, tau).powi(2));
    let h = x.tr_mul(&DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] * inside[i])) / n;
    let j = x.tr_mul(&DMatrix::from_fn(x.nrows(), x.ncols(), |i, k| x[(i, k)] * psi2[i])) / n;
    let p = x.ncols();
    let mut h_inv = DMatrix::zeros(p, p);
    for c in 0..p {
        let mut e = DVector::zeros(p);
        e[c] = 1.0;
        h_inv.set_column(c, &solve_spd(h.clone(), &e, "Huber Hessian")?);
    }
    Ok(&h_inv * j * &h_inv / n)
}

/// Monte Carlo estimates of the truncated-score moments of a noise law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedMoments {
    pub tau: f64,
    pub kappa: f64,
    pub draws: usize,
    /// `E psi_tau(eps)` and its standard error.
    pub mean_score: f64,
    pub mean_score_se: f64,
    /// `E psi_tau(eps)^2` and its standard error.
    pub mean_sq_score: f64,
    pub mean_sq_score_se: f64,
    /// `E eps^2`.
    pub second_moment: f64,
    /// `E |eps|^(2 + kappa)`.
    pub abs_moment: f64,
    /// `|E psi| <= min(E eps^2 / tau, tau^(-1-kappa) E|eps|^(2+kappa))` within 3 standard errors.
    pub score_bound_holds: bool,
    /// `E eps^2 - 2 kappa^-1 tau^-kappa E|eps|^(2+kappa) <= E psi^2 <= E eps^2` within 3 standard errors.
    pub second_moment_bounds_hold: bool,
}

fn paired_ok(values: impl Iterator<Item = f64>, n: f64) -> bool {
    // mean <= 3 * se for a sample of paired differences
    let v: Vec<f64> = values.collect();
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
    mean <= 3.0 * (var / n).sqrt()
}

/// Monte Carlo check of the bias and second-moment bounds for the truncated
/// score under centered noise. Each inequality is tested on the per-draw
/// differences of its two sides, so the standard error accounts for their
/// correlation.
pub fn check_truncated_moments(noise: &NoiseSpec, tau: f64, kappa: f64, n_mc: usize, seed: u64) -> Result<TruncatedMoments> {
    noise.validate()?;
    if !(tau.is_finite() && tau > 0.0) {
        return Err(invalid(format!("tau must be positive, got {tau}")));
    }
    if !(kappa.is_finite() && kappa >= 0.0) {
        return Err(invalid(format!("kappa must be nonnegative, got {kappa}")));
    }
    if let NoiseSpec::StudentT { df } = noise {
        if *df <= 2.0 + kappa {
            return Err(invalid(format!(
                "student-t({df}) has no finite moment of order {}",
                2.0 + kappa
            )));
        }
    }
    if n_mc < 2 {
        return Err(invalid("need at least two Monte Carlo draws"));
    }
    let sampler = noise.sampler()?;
    let shift = noise.mean();
    let mut rng = rng_from_seed(seed);
    let eps: Vec<f64> = (0..n_mc).map(|_| sampler.sample(&mut rng) - shift).collect();
    let n = n_mc as f64;
    let psi: Vec<f64> = eps.iter().map(|&e| score(e, tau)).collect();
    let power = 2.0 + kappa;
    let abs: Vec<f64> = eps.iter().map(|e| e.abs().powf(power)).collect();

    let mean_se = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (m, (var / n).sqrt())
    };
    let (mean_score, mean_score_se) = mean_se(&psi);
    let psi2: Vec<f64> = psi.iter().map(|p| p * p).collect();
    let (mean_sq_score, mean_sq_score_se) = mean_se(&psi2);
    let second_moment = eps.iter().map(|e| e * e).sum::<f64>() / n;
    let abs_moment = abs.iter().sum::<f64>() / n;

    let sign = if mean_score >= 0.0 { 1.0 } else { -1.0 };
    let by_variance = paired_ok(eps.iter().zip(&psi).map(|(e, p)| sign * p - e * e / tau), n);
    let by_moment = paired_ok(
        psi.iter().zip(&abs).map(|(p, a)| sign * p - a * tau.powf(-1.0 - kappa)),
        n,
    );
    let upper = paired_ok(eps.iter().zip(&psi2).map(|(e, q)| q - e * e), n);
    let lower = kappa == 0.0
        || paired_ok(
            eps.iter()
                .zip(&psi2)
                .zip(&abs)
                .map(|((e, q), a)| e * e - 2.0 / kappa * tau.powf(-kappa) * a - q),
            n,
        );

    Ok(TruncatedMoments {
        tau,
        kappa,
        draws: n_mc,
        mean_score,
        mean_score_se,
        mean_sq_score,
        mean_sq_score_se,
        second_moment,
        abs_moment,
        score_bound_holds: by_variance && by_moment,
        second_moment_bounds_hold: upper && lower,
    })
}
