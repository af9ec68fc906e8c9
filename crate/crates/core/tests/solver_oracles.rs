mod support;

use adahuber::simlab::{derive_seed, rng_from_seed};
use adahuber::{fit_huber, fit_l1_huber, fit_ols, kkt_satisfied, Dataset, HuberParams, SolverConfig};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use support::oracles;

fn gaussian_design(n: usize, d: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(rng))
}

fn sparse_instance(n: usize, d: usize, s: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
    let mut rng = rng_from_seed(seed);
    let x = gaussian_design(n, d, &mut rng);
    let beta = DVector::from_fn(d, |j, _| if j < s { [2.0, -1.5, 1.0][j % 3] } else { 0.0 });
    let t = StudentT::new(3.0).unwrap();
    let y = &x * beta + DVector::from_fn(n, |_, _| t.sample(&mut rng));
    (x, y)
}

#[test]
fn irls_matches_one_dimensional_grid_oracle() {
    for k in 0..25u64 {
        let mut rng = rng_from_seed(derive_seed(1, 0, k));
        let n = rng.random_range(10..200);
        let tau = rng.random_range(0.2..5.0);
        let t = StudentT::new(1.8).unwrap();
        let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let y: Vec<f64> = x.iter().map(|xi| 1.7 * xi + t.sample(&mut rng)).collect();
        let data = Dataset::new(DMatrix::from_column_slice(n, 1, &x), DVector::from_vec(y.clone()), false).unwrap();
        let fit = fit_huber(&data, tau, &SolverConfig::irls()).unwrap();
        let oracle = oracles::huber_1d_oracle(&x, &y, tau);
        assert!(fit.converged);
        assert!((fit.beta[0] - oracle).abs() <= 1e-4, "instance {k}: {} vs {oracle}", fit.beta[0]);
    }
}

#[test]
fn ols_matches_normal_equations() {
    let (x, y) = sparse_instance(60, 6, 3, 2);
    let data = Dataset::new(x.clone(), y.clone(), false).unwrap();
    let fit = fit_ols(&data).unwrap();
    assert!((fit.beta - oracles::ols_oracle(&x, &y)).amax() <= 1e-10);
}

#[test]
fn unpenalized_lamm_matches_irls() {
    for k in 0..25u64 {
        let mut rng = rng_from_seed(derive_seed(2, 0, k));
        let n = rng.random_range(30..150);
        let d = rng.random_range(1..8);
        let (x, y) = sparse_instance(n, d, d.min(3), derive_seed(2, 1, k));
        let data = Dataset::new(x, y, k % 2 == 0).unwrap();
        let tau = rng.random_range(0.5..4.0);
        let irls = fit_huber(&data, tau, &SolverConfig::irls()).unwrap();
        let cfg = SolverConfig::lamm().with_tol(1e-10).with_max_iter(200_000);
        let lamm = fit_l1_huber(&data, &HuberParams::unpenalized(tau).unwrap(), &cfg).unwrap();
        assert!(lamm.converged, "instance {k}");
        assert!((&lamm.beta - &irls.beta).amax() <= 1e-4, "instance {k}");
    }
}

#[test]
fn lamm_matches_fixed_step_proximal_gradient() {
    for k in 0..10u64 {
        let (x, y) = sparse_instance(80, 10, 3, derive_seed(3, 0, k));
        let (tau, lambda) = (2.0, 0.05 + 0.02 * k as f64);
        let data = Dataset::new(x.clone(), y.clone(), false).unwrap();
        let cfg = SolverConfig::lamm().with_tol(1e-10).with_max_iter(200_000);
        let fit = fit_l1_huber(&data, &HuberParams::new(tau, lambda, None).unwrap(), &cfg).unwrap();
        let oracle = oracles::prox_grad_oracle(&x, &y, tau, lambda, 100_000);
        assert!((&fit.beta - &oracle).amax() <= 1e-4, "instance {k}");
        let f_fit = oracles::penalized_objective(&x, &y, tau, lambda, &fit.beta, 0);
        let f_oracle = oracles::penalized_objective(&x, &y, tau, lambda, &oracle, 0);
        assert!(f_fit <= f_oracle + 1e-9);
        assert!(kkt_satisfied(&data, &fit.beta, tau, lambda, 1e-4).unwrap());
    }
}

#[test]
fn lamm_descends_and_meets_kkt_on_random_instances() {
    for k in 0..20u64 {
        let mut rng = rng_from_seed(derive_seed(4, 0, k));
        let n = rng.random_range(20..120);
        let d = rng.random_range(5..150);
        let (x, y) = sparse_instance(n, d, 3, derive_seed(4, 1, k));
        let data = Dataset::new(x, y, false).unwrap();
        let tau = rng.random_range(0.5..5.0);
        let lambda_max = adahuber::gradient(&DVector::zeros(d), &data, tau).unwrap().amax();
        let lambda = lambda_max * 10f64.powf(-rng.random_range(0.0..3.0));
        let cfg = SolverConfig::lamm()
            .with_tol(1e-10)
            .with_max_iter(1_000_000)
            .with_trajectory();
        let fit = fit_l1_huber(&data, &HuberParams::new(tau, lambda, None).unwrap(), &cfg).unwrap();
        for w in fit.trajectory.as_ref().unwrap().windows(2) {
            assert!(w[1] <= w[0] + 1e-10, "instance {k}");
        }
        assert!(kkt_satisfied(&data, &fit.beta, tau, lambda, 1e-4).unwrap(), "instance {k}");
    }
}
