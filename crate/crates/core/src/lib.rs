//! Adaptive Huber regression: Huber-loss M-estimation whose robustification
//! level grows with the sample size, in low dimensions (IRLS) and with an l1
//! penalty in high dimensions (local adaptive majorize-minimization), plus
//! tuning rules, covariate truncation and a Monte Carlo harness.

pub mod data;
pub mod error;
pub mod fit;
pub mod huber;
pub mod irls;
pub mod lamm;
pub mod simlab;
pub mod truncation;
pub mod tuning;

pub use data::{Dataset, HuberParams};
pub use error::{Error, Result};
pub use fit::{FitResult, SolverConfig};
pub use huber::{gradient, huber_loss, huber_score, irls_weight, objective, soft_threshold};
pub use irls::{fit_huber, fit_ols};
pub use lamm::{fit_l1_huber, fit_l1_huber_from, kkt_satisfied};
pub use truncation::{default_truncation_params, fit_truncated, predict_truncated};
pub use tuning::{cross_validate, default_params, estimate_sigma_crude, lepski_select, Regime, TuningGrid};
