//! Regression samples and estimator parameters.

use nalgebra::{DMatrix, DMatrixView, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A regression sample `(x_i, y_i)`, `i = 1..n`.
///
/// When `intercept` is set, a constant-one column is appended to the working
/// design. That column is never penalized and never truncated; its coefficient
/// is stored last.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    design: DMatrix<f64>,
    y: DVector<f64>,
    d: usize,
    intercept: bool,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, intercept: bool) -> Result<Self> {
        let (n, d) = x.shape();
        if n == 0 || d == 0 {
            return Err(invalid(format!("design must be non-empty, got {n}x{d}")));
        }
        if y.len() != n {
            return Err(invalid(format!(
                "response has length {} but design has {n} rows",
                y.len()
            )));
        }
        if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!(
                "non-finite design entry at row {}, column {}",
                pos % n,
                pos / n
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite response at row {i}")));
        }
        let design = if intercept {
            x.insert_column(d, 1.0)
        } else {
            x
        };
        Ok(Self {
            design,
            y,
            d,
            intercept,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Number of covariates, excluding the intercept.
    pub fn d(&self) -> usize {
        self.d
    }

    /// Length of the coefficient vector (`d`, plus one with an intercept).
    pub fn n_coef(&self) -> usize {
        self.design.ncols()
    }

    pub fn intercept(&self) -> bool {
        self.intercept
    }

    /// The covariates as supplied, without the intercept column.
    pub fn x(&self) -> DMatrixView<'_, f64> {
        self.design.columns(0, self.d)
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    /// Working design: covariates plus the intercept column when enabled.
    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    /// Whether coefficient `j` is subject to the l1 penalty.
    pub fn is_penalized(&self, j: usize) -> bool {
        j < self.d
    }

    pub fn residuals(&self, beta: &DVector<f64>) -> DVector<f64> {
        &self.y - &self.design * beta
    }

    /// Same sample with every covariate row and response value kept at `rows`.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let design = self.design.select_rows(rows);
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.y[i]));
        Self {
            design,
            y,
            d: self.d,
            intercept: self.intercept,
        }
    }

    pub fn with_response(&self, y: DVector<f64>) -> Result<Self> {
        if y.len() != self.n() {
            return Err(invalid("response length does not match the design"));
        }
        Ok(Self {
            design: self.design.clone(),
            y,
            d: self.d,
            intercept: self.intercept,
        })
    }

    /// Predictions `<x_i, beta>` for new covariate rows (without intercept column).
    pub fn predict(&self, x_new: &DMatrix<f64>, beta: &DVector<f64>) -> Result<DVector<f64>> {
        if x_new.ncols() != self.d || beta.len() != self.n_coef() {
            return Err(invalid("prediction dimensions do not match the fitted design"));
        }
        let mut pred = x_new * beta.rows(0, self.d);
        if self.intercept {
            pred.add_scalar_mut(beta[self.d]);
        }
        Ok(pred)
    }

    pub(crate) fn check_coef(&self, beta: &DVector<f64>) -> Result<()> {
        if beta.len() != self.n_coef() {
            return Err(invalid(format!(
                "coefficient vector has length {} but the design has {} columns",
                beta.len(),
                self.n_coef()
            )));
        }
        if beta.iter().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite coefficient"));
        }
        Ok(())
    }

    pub(crate) fn with_design(&self, x: DMatrix<f64>) -> Result<Self> {
        Self::new(x, self.y.clone(), self.intercept)
    }
}

/// Robustification level `tau`, l1 penalty `lambda` and optional covariate
/// truncation level `varpi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HuberParams {
    pub tau: f64,
    pub lambda: f64,
    pub varpi: Option<f64>,
}

impl HuberParams {
    pub fn new(tau: f64, lambda: f64, varpi: Option<f64>) -> Result<Self> {
        let p = Self { tau, lambda, varpi };
        p.validate()?;
        Ok(p)
    }

    pub fn unpenalized(tau: f64) -> Result<Self> {
        Self::new(tau, 0.0, None)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(invalid(format!("tau must be positive and finite, got {}", self.tau)));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(invalid(format!(
                "lambda must be nonnegative and finite, got {}",
                self.lambda
            )));
        }
        if let Some(w) = self.varpi {
            if !(w.is_finite() && w > 0.0) {
                return Err(invalid(format!("varpi must be positive and finite, got {w}")));
            }
        }
        Ok(())
    }
}
