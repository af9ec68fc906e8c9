use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Iteration controls shared by the IRLS and LAMM solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Stop once `||beta^(k+1) - beta^(k)||_2 <= tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// LAMM starting curvature.
    pub phi0: f64,
    /// LAMM curvature inflation factor.
    pub gamma_u: f64,
    /// Keep the per-iteration objective values in [`FitResult::trajectory`].
    pub record_trajectory: bool,
}

impl SolverConfig {
    pub fn irls() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 500,
            ..Self::lamm()
        }
    }

    pub fn lamm() -> Self {
        Self {
            tol: 1e-4,
            max_iter: 5000,
            phi0: 1e-4,
            gamma_u: 2.0,
            record_trajectory: false,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_trajectory(mut self) -> Self {
        self.record_trajectory = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(invalid(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter must be at least 1"));
        }
        if !(self.phi0.is_finite() && self.phi0 > 0.0) {
            return Err(invalid(format!("phi0 must be positive, got {}", self.phi0)));
        }
        if !(self.gamma_u.is_finite() && self.gamma_u > 1.0) {
            return Err(invalid(format!("gamma_u must exceed 1, got {}", self.gamma_u)));
        }
        Ok(())
    }
}

/// Outcome of a single fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub beta: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Final (penalized) objective value.
    pub objective: f64,
    /// Objective value at the starting point followed by one entry per accepted iteration.
    pub trajectory: Option<Vec<f64>>,
    /// Euclidean norm of the loss gradient (IRLS) or of the minimum-norm
    /// subgradient of the penalized objective (LAMM) at `beta`.
    pub gradient_norm: f64,
    /// Largest number of proposals tried within one LAMM iteration (0 for IRLS/OLS).
    pub max_inner: usize,
}
