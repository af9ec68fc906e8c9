use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Regression error distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum NoiseSpec {
    Normal { variance: f64 },
    /// Student's t; `df > 1` so that the mean exists.
    StudentT { df: f64 },
    /// `exp(Z)` with `Z ~ N(0, log_variance)`, optionally shifted by its mean
    /// `exp(log_variance / 2)` so that the errors are centered.
    LogNormal { log_variance: f64, centered: bool },
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseSpec::Normal { variance } if !(variance.is_finite() && variance > 0.0) => {
                Err(invalid(format!("normal variance must be positive, got {variance}")))
            }
            NoiseSpec::StudentT { df } if !(df.is_finite() && df > 1.0) => {
                Err(invalid(format!("student-t degrees of freedom must exceed 1, got {df}")))
            }
            NoiseSpec::LogNormal { log_variance, .. } if !(log_variance.is_finite() && log_variance > 0.0) => {
                Err(invalid(format!("log-normal log-variance must be positive, got {log_variance}")))
            }
            _ => Ok(()),
        }
    }

    pub fn sampler(&self) -> Result<NoiseSampler> {
        self.validate()?;
        Ok(match *self {
            NoiseSpec::Normal { variance } => NoiseSampler::Normal(Normal::new(0.0, variance.sqrt()).expect("validated")),
            NoiseSpec::StudentT { df } => NoiseSampler::StudentT(StudentT::new(df).expect("validated")),
            NoiseSpec::LogNormal { log_variance, centered } => NoiseSampler::LogNormal {
                dist: LogNormal::new(0.0, log_variance.sqrt()).expect("validated"),
                shift: if centered { (log_variance / 2.0).exp() } else { 0.0 },
            },
        })
    }

    /// Mean of the error distribution.
    pub fn mean(&self) -> f64 {
        match *self {
            NoiseSpec::LogNormal { log_variance, centered: false } => (log_variance / 2.0).exp(),
            _ => 0.0,
        }
    }

    /// Variance, `None` when infinite.
    pub fn variance(&self) -> Option<f64> {
        match *self {
            NoiseSpec::Normal { variance } => Some(variance),
            NoiseSpec::StudentT { df } => (df > 2.0).then(|| df / (df - 2.0)),
            NoiseSpec::LogNormal { log_variance, .. } => {
                Some((log_variance.exp() - 1.0) * log_variance.exp())
            }
        }
    }

    pub fn is_symmetric(&self) -> bool {
        !matches!(self, NoiseSpec::LogNormal { .. })
    }
}

impl fmt::Display for NoiseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            NoiseSpec::Normal { variance } => write!(f, "normal({variance})"),
            NoiseSpec::StudentT { df } => write!(f, "student_t({df})"),
            NoiseSpec::LogNormal { log_variance, centered: true } => write!(f, "lognormal({log_variance})"),
            NoiseSpec::LogNormal { log_variance, centered: false } => write!(f, "lognormal_raw({log_variance})"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum NoiseSampler {
    Normal(Normal<f64>),
    StudentT(StudentT<f64>),
    LogNormal { dist: LogNormal<f64>, shift: f64 },
}

impl Distribution<f64> for NoiseSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            NoiseSampler::Normal(d) => d.sample(rng),
            NoiseSampler::StudentT(d) => d.sample(rng),
            NoiseSampler::LogNormal { dist, shift } => dist.sample(rng) - shift,
        }
    }
}
