//! Reference solvers written from the definitions alone, sharing no code with
//! the library.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

pub fn huber(x: f64, tau: f64) -> f64 {
    if x.abs() <= tau {
        x * x / 2.0
    } else {
        tau * x.abs() - tau * tau / 2.0
    }
}

pub fn psi(x: f64, tau: f64) -> f64 {
    if x > tau {
        tau
    } else if x < -tau {
        -tau
    } else {
        x
    }
}

/// Mean Huber loss of `y - x b` for a single covariate.
pub fn loss_1d(x: &[f64], y: &[f64], tau: f64, b: f64) -> f64 {
    x.iter().zip(y).map(|(xi, yi)| huber(yi - xi * b, tau)).sum::<f64>() / x.len() as f64
}

/// Minimizer of a convex function on `[lo, hi]` by repeated grid refinement:
/// 201 points per pass, each pass zooming onto the two cells around the best point.
pub fn grid_argmin(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, passes: usize) -> f64 {
    let k = 200;
    let mut best = lo;
    for _ in 0..passes {
        let h = (hi - lo) / k as f64;
        let mut best_v = f64::INFINITY;
        for i in 0..=k {
            let b = lo + h * i as f64;
            let v = f(b);
            if v < best_v {
                best_v = v;
                best = b;
            }
        }
        lo = best - h;
        hi = best + h;
    }
    best
}

/// One-dimensional Huber regression through the origin by grid refinement.
pub fn huber_1d_oracle(x: &[f64], y: &[f64], tau: f64) -> f64 {
    let bound = y.iter().map(|v| v.abs()).fold(0.0, f64::max)
        / x.iter().map(|v| v.abs()).filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min);
    grid_argmin(|b| loss_1d(x, y, tau, b), -bound - 1.0, bound + 1.0, 40)
}

/// Largest eigenvalue of `x' x / n` by power iteration.
pub fn gram_norm(x: &DMatrix<f64>) -> f64 {
    let n = x.nrows() as f64;
    let mut v = DVector::from_element(x.ncols(), 1.0);
    let mut lam = 0.0;
    for _ in 0..5000 {
        let w = x.transpose() * (x * &v) / n;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        if (norm - lam).abs() <= 1e-14 * norm {
            lam = norm;
            break;
        }
        lam = norm;
    }
    lam
}

/// Penalized Huber objective; the last `unpenalized` columns carry no penalty.
pub fn penalized_objective(x: &DMatrix<f64>, y: &DVector<f64>, tau: f64, lambda: f64, b: &DVector<f64>, unpenalized: usize) -> f64 {
    let r = y - x * b;
    let loss = r.iter().map(|v| huber(*v, tau)).sum::<f64>() / y.len() as f64;
    let p = b.len() - unpenalized;
    loss + lambda * b.rows(0, p).iter().map(|v| v.abs()).sum::<f64>()
}

/// Proximal gradient with the fixed step `1 / ||x'x/n||`, started at zero.
pub fn prox_grad_oracle(x: &DMatrix<f64>, y: &DVector<f64>, tau: f64, lambda: f64, iters: usize) -> DVector<f64> {
    let n = x.nrows() as f64;
    let step = 1.0 / gram_norm(x);
    let mut b = DVector::zeros(x.ncols());
    for _ in 0..iters {
        let r = y - x * &b;
        let g = -(x.transpose() * r.map(|v| psi(v, tau))) / n;
        let v = &b - step * g;
        b = v.map(|z| {
            let k = lambda * step;
            if z > k {
                z - k
            } else if z < -k {
                z + k
            } else {
                0.0
            }
        });
    }
    b
}

/// Ordinary least squares via the normal equations and an LU solve.
pub fn ols_oracle(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let g = x.transpose() * x;
    g.lu().solve(&(x.transpose() * y)).expect("nonsingular")
}
