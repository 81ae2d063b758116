//! Moving-block bootstrap percentile intervals.

use std::fmt::Display;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapSpec {
    pub n_boot: usize,
    pub block_length: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for BootstrapSpec {
    fn default() -> Self {
        Self {
            n_boot: 200,
            block_length: 20,
            level: 0.95,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapCi {
    pub lo: f64,
    pub hi: f64,
    /// Successful replicate statistics, in replicate order.
    pub estimates: Vec<f64>,
    pub n_failed: usize,
}

/// Row indices for one moving-block resample of length `n`.
pub fn block_resample_indices<R: Rng + ?Sized>(n: usize, block_length: usize, rng: &mut R) -> Vec<usize> {
    let b = block_length.clamp(1, n);
    let mut idx = Vec::with_capacity(n + b);
    while idx.len() < n {
        let start = rng.random_range(0..=n - b);
        idx.extend(start..start + b);
    }
    idx.truncate(n);
    idx
}

/// Percentile CI of `statistic` over block-resampled copies of `data`.
///
/// `data` holds aligned columns; the same row indices are applied to every
/// column. Replicate `r` draws from a generator seeded by `(seed, r)`, so the
/// result does not depend on thread count. Replicates whose statistic fails
/// or is non-finite are excluded and counted in `n_failed`.
pub fn block_bootstrap_ci<F, E>(data: &[Vec<f64>], statistic: F, spec: &BootstrapSpec) -> Result<BootstrapCi>
where
    F: Fn(&[Vec<f64>]) -> std::result::Result<f64, E> + Sync,
    E: Display,
{
    if spec.n_boot < 100 {
        return Err(Error::domain("n_boot must be at least 100"));
    }
    if !(spec.level > 0.0 && spec.level < 1.0) {
        return Err(Error::domain("level must lie in (0, 1)"));
    }
    let n = data.first().map(Vec::len).unwrap_or(0);
    if n == 0 || data.iter().any(|c| c.len() != n) {
        return Err(Error::domain("bootstrap data must be non-empty aligned columns"));
    }
    let outcomes: Vec<Option<f64>> = (0..spec.n_boot)
        .into_par_iter()
        .map(|r| {
            let mut rng = util::rng(util::indexed_seed(spec.seed, r as u64));
            let idx = block_resample_indices(n, spec.block_length, &mut rng);
            let resampled: Vec<Vec<f64>> = data
                .iter()
                .map(|col| idx.iter().map(|&i| col[i]).collect())
                .collect();
            match statistic(&resampled) {
                Ok(v) if v.is_finite() => Some(v),
                Ok(_) => None,
                Err(e) => {
                    log::debug!("bootstrap replicate {r} failed: {e}");
                    None
                }
            }
        })
        .collect();
    let estimates: Vec<f64> = outcomes.iter().flatten().copied().collect();
    let n_failed = outcomes.len() - estimates.len();
    if estimates.is_empty() {
        return Err(Error::Degenerate(format!(
            "all {} bootstrap replicates failed",
            spec.n_boot
        )));
    }
    let mut sorted = estimates.clone();
    sorted.sort_by(f64::total_cmp);
    let tail = (1.0 - spec.level) / 2.0;
    Ok(BootstrapCi {
        lo: util::quantile_sorted(&sorted, tail),
        hi: util::quantile_sorted(&sorted, 1.0 - tail),
        estimates,
        n_failed,
    })
}

/// Two-sided bootstrap p-value at zero: `min(1, 2 · min(P*(θ ≤ 0), P*(θ ≥ 0)))`.
pub fn bootstrap_p_at_zero(estimates: &[f64]) -> f64 {
    if estimates.is_empty() {
        return f64::NAN;
    }
    let n = estimates.len() as f64;
    let le = estimates.iter().filter(|&&v| v <= 0.0).count() as f64 / n;
    let ge = estimates.iter().filter(|&&v| v >= 0.0).count() as f64 / n;
    (2.0 * le.min(ge)).min(1.0)
}
