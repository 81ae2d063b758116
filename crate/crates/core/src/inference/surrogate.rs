//! Block-permutation surrogates and the per-pair significance test.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{SymbolAccess, TeConfig, TePlan};
use crate::panel::SymbolSeries;
use crate::util;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateSpec {
    pub n_surrogates: usize,
    pub block_length: usize,
    /// Percentile (0–100) of the surrogate distribution the observed TE must exceed.
    pub percentile: f64,
    pub seed: u64,
}

impl Default for SurrogateSpec {
    fn default() -> Self {
        Self {
            n_surrogates: 200,
            block_length: 20,
            percentile: 95.0,
            seed: 0,
        }
    }
}

impl SurrogateSpec {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self, len: usize) -> Result<()> {
        if self.n_surrogates < 1 {
            return Err(Error::domain("n_surrogates must be at least 1"));
        }
        if self.block_length < 1 || self.block_length > len {
            return Err(Error::domain(format!(
                "block_length {} outside 1..={len}",
                self.block_length
            )));
        }
        if !(0.0..=100.0).contains(&self.percentile) {
            return Err(Error::domain("percentile must lie in [0, 100]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairTestResult {
    pub observed_te: f64,
    /// Surrogate TE at the configured percentile.
    pub surrogate_quantile: f64,
    /// `(1 + #{surrogate >= observed}) / (n_surrogates + 1)`.
    pub p_value: f64,
    pub surrogate_mean: f64,
    pub surrogate_sd: f64,
    /// Upper tail of a Gamma law moment-matched to the surrogate TE values.
    pub tail_p_value: f64,
}

impl PairTestResult {
    pub fn exceeds_quantile(&self) -> bool {
        self.observed_te > self.surrogate_quantile
    }
}

/// Shuffle the order of consecutive blocks (the last one may be short).
pub fn block_permute_slice<T: Clone, R: Rng + ?Sized>(data: &[T], block_length: usize, rng: &mut R) -> Vec<T> {
    assert!(block_length >= 1);
    let mut blocks: Vec<&[T]> = data.chunks(block_length).collect();
    blocks.shuffle(rng);
    blocks.concat()
}

pub fn block_permute(series: &SymbolSeries, block_length: usize, seed: u64) -> Result<SymbolSeries> {
    if block_length < 1 || block_length > series.len() {
        return Err(Error::domain(format!(
            "block_length {block_length} outside 1..={}",
            series.len()
        )));
    }
    let mut rng = util::rng(seed);
    Ok(SymbolSeries {
        symbols: block_permute_slice(&series.symbols, block_length, &mut rng),
        n_symbols: series.n_symbols,
        source_id: series.source_id.clone(),
    })
}

/// Moment-matched Gamma upper tail `P(G >= observed)`.
pub fn gamma_tail_p(observed: f64, mean: f64, var: f64) -> Option<f64> {
    if !(mean > 0.0) || !(var > 0.0) {
        return None;
    }
    let shape = mean * mean / var;
    let scale = var / mean;
    if observed <= 0.0 {
        return Some(1.0);
    }
    let p = statrs::function::gamma::gamma_ur(shape, observed / scale);
    Some(p.clamp(f64::MIN_POSITIVE, 1.0))
}

/// Observed TE against TE of block-permuted sources; the target is left intact.
pub fn surrogate_test_with_plan<T>(source: &[T], plan: &TePlan, spec: &SurrogateSpec) -> Result<PairTestResult>
where
    T: Clone,
    [T]: SymbolAccess,
{
    spec.validate(source.len())?;
    let observed = plan.estimate(source)?;
    let mut rng = util::rng(spec.seed);
    let mut surrogates = Vec::with_capacity(spec.n_surrogates);
    for _ in 0..spec.n_surrogates {
        let perm = block_permute_slice(source, spec.block_length, &mut rng);
        surrogates.push(plan.estimate(perm.as_slice())?);
    }
    let exceed = surrogates.iter().filter(|&&s| s >= observed).count();
    let p_value = (1 + exceed) as f64 / (spec.n_surrogates + 1) as f64;
    let mean = util::mean(&surrogates);
    let sd = if surrogates.len() > 1 { util::sample_sd(&surrogates) } else { 0.0 };
    let tail_p_value = gamma_tail_p(observed, mean, sd * sd).unwrap_or(p_value);
    surrogates.sort_by(f64::total_cmp);
    Ok(PairTestResult {
        observed_te: observed,
        surrogate_quantile: util::quantile_sorted(&surrogates, spec.percentile / 100.0),
        p_value,
        surrogate_mean: mean,
        surrogate_sd: sd,
        tail_p_value,
    })
}

pub fn surrogate_test(
    source: &SymbolSeries,
    target: &SymbolSeries,
    te_cfg: &TeConfig,
    spec: &SurrogateSpec,
) -> Result<PairTestResult> {
    if source.n_symbols > te_cfg.n_symbols || target.n_symbols > te_cfg.n_symbols {
        return Err(Error::domain("series alphabet exceeds TE config alphabet"));
    }
    let plan = TePlan::new(target, te_cfg)?;
    surrogate_test_with_plan(source.symbols.as_slice(), &plan, spec)
}

pub fn surrogate_test_sparse(
    source: &[Option<u32>],
    target: &[Option<u32>],
    te_cfg: &TeConfig,
    spec: &SurrogateSpec,
) -> Result<PairTestResult> {
    let plan = TePlan::new(target, te_cfg)?;
    surrogate_test_with_plan(source, &plan, spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iid(n: usize, k: u32, seed: u64) -> Vec<u32> {
        let mut r = util::rng(seed);
        (0..n).map(|_| r.random_range(0..k)).collect()
    }

    #[test]
    fn single_block_is_identity() {
        let s = SymbolSeries::new(iid(30, 5, 1), 5).unwrap();
        assert_eq!(block_permute(&s, 30, 9).unwrap(), s);
    }

    #[test]
    fn six_by_two_is_a_block_order() {
        let s = SymbolSeries::new(vec![0, 1, 2, 3, 4, 0], 5).unwrap();
        let a = block_permute(&s, 2, 42).unwrap();
        let b = block_permute(&s, 2, 42).unwrap();
        assert_eq!(a, b);
        let blocks: Vec<&[u32]> = a.symbols.chunks(2).collect();
        let mut sorted = blocks.clone();
        sorted.sort();
        assert_eq!(sorted, vec![&[0u32, 1][..], &[2, 3], &[4, 0]]);
    }

    #[test]
    fn short_last_block_is_kept_whole() {
        let data: Vec<u32> = (0..7).collect();
        let mut rng = util::rng(3);
        let out = block_permute_slice(&data, 3, &mut rng);
        let pos = out.iter().position(|&v| v == 6).unwrap();
        assert!(pos == 0 || out[pos - 1] == 5 || pos % 3 == 0);
        let mut sorted = out.clone();
        sorted.sort();
        assert_eq!(sorted, data);
    }

    #[test]
    fn one_surrogate_tie_gives_p_one() {
        // a constant source makes observed and surrogate TE both exactly 0
        let src = SymbolSeries::new(vec![1; 200], 5).unwrap();
        let tgt = SymbolSeries::new(iid(200, 5, 2), 5).unwrap();
        let spec = SurrogateSpec {
            n_surrogates: 1,
            ..SurrogateSpec::default()
        };
        let r = surrogate_test(&src, &tgt, &TeConfig::default(), &spec).unwrap();
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn copy_chain_attains_minimum_p() {
        let y = iid(5000, 5, 4);
        let mut x = iid(5000, 5, 5);
        x[1..].copy_from_slice(&y[..4999]);
        let r = surrogate_test(
            &SymbolSeries::new(y, 5).unwrap(),
            &SymbolSeries::new(x, 5).unwrap(),
            &TeConfig::default(),
            &SurrogateSpec::default().with_seed(11),
        )
        .unwrap();
        assert_eq!(r.p_value, 1.0 / 201.0);
        assert!(r.exceeds_quantile());
        assert!(r.tail_p_value < 1e-12);
    }

    #[test]
    fn invalid_spec_is_rejected() {
        let s = SymbolSeries::new(iid(100, 5, 6), 5).unwrap();
        let bad = SurrogateSpec {
            block_length: 101,
            ..SurrogateSpec::default()
        };
        assert!(surrogate_test(&s, &s, &TeConfig::default(), &bad).is_err());
        assert!(block_permute(&s, 0, 1).is_err());
    }

    #[test]
    fn gamma_tail_degenerate_inputs() {
        assert_eq!(gamma_tail_p(1.0, 0.0, 1.0), None);
        assert_eq!(gamma_tail_p(1.0, 1.0, 0.0), None);
        let p = gamma_tail_p(1.0, 1.0, 1.0).unwrap(); // Exp(1) tail at 1
        assert!((p - (-1.0f64).exp()).abs() < 1e-12);
    }
}
