//! Synthetic data and Monte Carlo experiments.

mod checks;
mod experiments;
mod noise;
mod report;
mod stats;

pub use checks::{check_bias_decay, check_truncated_moments, BiasConfig, BiasRow, TruncatedMoments};
pub use experiments::{
    run_contamination, run_neff_experiment, run_phase_transition, run_table1, ContaminationConfig, NeffConfig,
    NeffSizes, PhaseConfig, Table1Config,
};
pub use noise::{NoiseSampler, NoiseSpec};
pub use report::{ExperimentReport, Field, RunMetadata, Table};
pub use stats::{kurtosis, least_squares_slope, mae, mean_std};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{invalid, Error, Result};

/// Identifies the random stream so that reports can be audited.
pub const GENERATOR: &str = "ChaCha8 (rand_chacha 0.9) + rand_distr 0.5";

/// Coefficients `(5, -2, 0, 0, 3, 0, ..., 0)` truncated or zero-padded to length `d`.
pub fn benchmark_beta(d: usize) -> DVector<f64> {
    let head = [5.0, -2.0, 0.0, 0.0, 3.0];
    DVector::from_fn(d, |j, _| head.get(j).copied().unwrap_or(0.0))
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stateless seed for replication `index` of stream `stream` under `master`.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    mix(mix(mix(master) ^ stream) ^ index)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub n: usize,
    pub d: usize,
    pub beta_star: Vec<f64>,
    pub noise: NoiseSpec,
    pub replications: usize,
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn benchmark(n: usize, d: usize, noise: NoiseSpec, replications: usize, seed: u64) -> Self {
        Self {
            n,
            d,
            beta_star: benchmark_beta(d).iter().copied().collect(),
            noise,
            replications,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        if self.n == 0 || self.d == 0 {
            return Err(invalid(format!("need n, d >= 1, got n = {}, d = {}", self.n, self.d)));
        }
        if self.beta_star.len() != self.d {
            return Err(invalid(format!(
                "beta_star has length {}, expected d = {}",
                self.beta_star.len(),
                self.d
            )));
        }
        if self.replications == 0 {
            return Err(invalid("replications must be at least 1"));
        }
        Ok(())
    }
}

/// `y = X beta* + eps` with standard-normal rows, no intercept column.
/// Covariates are drawn row by row, then the errors.
pub fn gen_linear_data(spec: &ExperimentSpec) -> Result<(Dataset, DVector<f64>)> {
    spec.validate()?;
    let mut rng = rng_from_seed(spec.seed);
    let noise = spec.noise.sampler()?;
    let mut x = DMatrix::zeros(spec.n, spec.d);
    for i in 0..spec.n {
        for j in 0..spec.d {
            x[(i, j)] = StandardNormal.sample(&mut rng);
        }
    }
    let eps = DVector::from_fn(spec.n, |_, _| noise.sample(&mut rng));
    let beta = DVector::from_column_slice(&spec.beta_star);
    let y = &x * &beta + eps;
    Ok((Dataset::new(x, y, false)?, beta))
}

/// Runs `f` on a dedicated pool with `threads` workers, or on the global pool.
pub fn with_threads<T, F>(threads: Option<usize>, f: F) -> Result<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    match threads {
        None => Ok(f()),
        Some(0) => Err(invalid("thread count must be at least 1")),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}
