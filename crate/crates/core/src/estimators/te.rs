//! Symbolic transfer entropy from joint symbol counts.
//!
//! For target `X`, source `Y`, target history length `k`, source history
//! length `l` and lag `L`, each sample is the triple
//! `(x[t+1], (x[t], .., x[t-k+1]), (y[t+1-L], .., y[t+2-L-l]))` and
//!
//! ```text
//! TE(Y -> X) = Σ p(f, xh, yh) · log[ p(f | xh, yh) / p(f | xh) ]
//! ```
//!
//! which is the conditional mutual information `I(f ; yh | xh)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::SymbolSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TeConfig {
    /// Target history length.
    pub k: usize,
    /// Source history length.
    pub l: usize,
    pub n_symbols: u32,
    pub log_base: f64,
    /// Steps between the last source-history symbol and the target future.
    pub lag: usize,
    /// Upper bound on `n_symbols^(k+l+1)`.
    pub state_cap: u64,
    /// Minimum number of complete samples after lag trimming.
    pub min_samples: usize,
}

impl Default for TeConfig {
    fn default() -> Self {
        Self {
            k: 1,
            l: 1,
            n_symbols: 5,
            log_base: 2.0,
            lag: 1,
            state_cap: 1_000_000,
            min_samples: 30,
        }
    }
}

impl TeConfig {
    pub fn with_lag(mut self, lag: usize) -> Self {
        self.lag = lag;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 || self.l < 1 || self.lag < 1 {
            return Err(Error::domain("k, l and lag must all be at least 1"));
        }
        if self.n_symbols < 2 {
            return Err(Error::domain("n_symbols must be at least 2"));
        }
        if !(self.log_base > 0.0) || self.log_base == 1.0 {
            return Err(Error::domain(format!("invalid log base {}", self.log_base)));
        }
        let states = (self.n_symbols as u64)
            .checked_pow((self.k + self.l + 1) as u32)
            .unwrap_or(u64::MAX);
        if states > self.state_cap {
            return Err(Error::domain(format!(
                "joint state space {}^{} exceeds cap {}",
                self.n_symbols,
                self.k + self.l + 1,
                self.state_cap
            )));
        }
        Ok(())
    }

    /// First usable time index `t` (the target future is `t + 1`).
    fn first_t(&self) -> usize {
        (self.k - 1).max((self.lag + self.l).saturating_sub(2))
    }
}

/// Indexed access to possibly-gappy symbol data.
pub trait SymbolAccess {
    fn len(&self) -> usize;
    fn at(&self, i: usize) -> Option<u32>;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl SymbolAccess for [u32] {
    fn len(&self) -> usize {
        <[u32]>::len(self)
    }
    fn at(&self, i: usize) -> Option<u32> {
        Some(self[i])
    }
}

impl SymbolAccess for [Option<u32>] {
    fn len(&self) -> usize {
        <[Option<u32>]>::len(self)
    }
    fn at(&self, i: usize) -> Option<u32> {
        self[i]
    }
}

impl SymbolAccess for SymbolSeries {
    fn len(&self) -> usize {
        self.symbols.len()
    }
    fn at(&self, i: usize) -> Option<u32> {
        Some(self.symbols[i])
    }
}

fn history_code<S: SymbolAccess + ?Sized>(s: &S, last: usize, len: usize, base: u32) -> Result<Option<u32>> {
    let mut code = 0u32;
    for j in 0..len {
        match s.at(last - j) {
            None => return Ok(None),
            Some(v) if v >= base => {
                return Err(Error::domain(format!(
                    "symbol {v} outside alphabet of size {base}"
                )))
            }
            Some(v) => code = code * base + v,
        }
    }
    Ok(Some(code))
}

/// Precomputed target-side state for repeated TE evaluation against many
/// sources (the surrogate workload).
#[derive(Debug, Clone)]
pub struct TePlan {
    cfg: TeConfig,
    n_xh: usize,
    n_yh: usize,
    first_t: usize,
    /// `(future, target history)` per `t`, offset by `first_t`.
    target: Vec<Option<(u32, u32)>>,
    len: usize,
}

impl TePlan {
    pub fn new<T: SymbolAccess + ?Sized>(target: &T, cfg: &TeConfig) -> Result<Self> {
        cfg.validate()?;
        let n = target.len();
        let first_t = cfg.first_t();
        let required = first_t + 1 + cfg.min_samples.max(1);
        if n < required {
            return Err(Error::SampleSize {
                required,
                actual: n,
            });
        }
        let base = cfg.n_symbols;
        let mut states = Vec::with_capacity(n - 1 - first_t);
        for t in first_t..n - 1 {
            let fut = match target.at(t + 1) {
                None => None,
                Some(v) if v >= base => {
                    return Err(Error::domain(format!(
                        "symbol {v} outside alphabet of size {base}"
                    )))
                }
                Some(v) => Some(v),
            };
            let xh = history_code(target, t, cfg.k, base)?;
            states.push(fut.zip(xh));
        }
        Ok(Self {
            cfg: *cfg,
            n_xh: (base as usize).pow(cfg.k as u32),
            n_yh: (base as usize).pow(cfg.l as u32),
            first_t,
            target: states,
            len: n,
        })
    }

    pub fn config(&self) -> &TeConfig {
        &self.cfg
    }

    /// Dense joint counts indexed `(future * n_xh + xh) * n_yh + yh`, and the sample count.
    pub fn joint_counts<S: SymbolAccess + ?Sized>(&self, source: &S) -> Result<(Vec<u32>, u64)> {
        if source.len() != self.len {
            return Err(Error::domain(format!(
                "length mismatch: source {} vs target {}",
                source.len(),
                self.len
            )));
        }
        let base = self.cfg.n_symbols;
        let mut counts = vec![0u32; base as usize * self.n_xh * self.n_yh];
        let mut n = 0u64;
        for (off, st) in self.target.iter().enumerate() {
            let Some((f, xh)) = *st else { continue };
            let t = self.first_t + off;
            let last = t + 1 - self.cfg.lag;
            let Some(yh) = history_code(source, last, self.cfg.l, base)? else {
                continue;
            };
            counts[(f as usize * self.n_xh + xh as usize) * self.n_yh + yh as usize] += 1;
            n += 1;
        }
        Ok((counts, n))
    }

    /// Transfer entropy from `source` into the planned target.
    pub fn estimate<S: SymbolAccess + ?Sized>(&self, source: &S) -> Result<f64> {
        let (counts, n) = self.joint_counts(source)?;
        if (n as usize) < self.cfg.min_samples.max(1) {
            return Err(Error::SampleSize {
                required: self.cfg.min_samples.max(1),
                actual: n as usize,
            });
        }
        Ok(te_from_counts(
            &counts,
            self.cfg.n_symbols as usize,
            self.n_xh,
            self.n_yh,
            n,
        ) / self.cfg.log_base.ln())
    }
}

/// Conditional MI `I(f; yh | xh)` in nats from dense counts.
fn te_from_counts(counts: &[u32], n_f: usize, n_xh: usize, n_yh: usize, n: u64) -> f64 {
    let mut c_fx = vec![0u64; n_f * n_xh];
    let mut c_xy = vec![0u64; n_xh * n_yh];
    let mut c_x = vec![0u64; n_xh];
    for f in 0..n_f {
        for xh in 0..n_xh {
            for yh in 0..n_yh {
                let c = counts[(f * n_xh + xh) * n_yh + yh] as u64;
                c_fx[f * n_xh + xh] += c;
                c_xy[xh * n_yh + yh] += c;
                c_x[xh] += c;
            }
        }
    }
    let mut acc = 0.0;
    for f in 0..n_f {
        for xh in 0..n_xh {
            for yh in 0..n_yh {
                let c = counts[(f * n_xh + xh) * n_yh + yh] as f64;
                if c > 0.0 {
                    let num = c * c_x[xh] as f64;
                    let den = c_xy[xh * n_yh + yh] as f64 * c_fx[f * n_xh + xh] as f64;
                    acc += c * (num / den).ln();
                }
            }
        }
    }
    (acc / n as f64).max(0.0)
}

fn check_alphabet(s: &SymbolSeries, cfg: &TeConfig) -> Result<()> {
    if s.n_symbols > cfg.n_symbols {
        return Err(Error::domain(format!(
            "series `{}` uses alphabet {} but the TE config allows {}",
            s.source_id, s.n_symbols, cfg.n_symbols
        )));
    }
    Ok(())
}

/// Symbolic TE from `source` into `target`.
pub fn symbolic_te(source: &SymbolSeries, target: &SymbolSeries, cfg: &TeConfig) -> Result<f64> {
    check_alphabet(source, cfg)?;
    check_alphabet(target, cfg)?;
    TePlan::new(target, cfg)?.estimate(source)
}

/// Symbolic TE with the source history shifted by `lag` steps.
pub fn te_at_lag(source: &SymbolSeries, target: &SymbolSeries, cfg: &TeConfig, lag: usize) -> Result<f64> {
    symbolic_te(source, target, &cfg.with_lag(lag))
}

/// Symbolic TE on gappy series; only samples whose every component is present count.
pub fn symbolic_te_sparse(source: &[Option<u32>], target: &[Option<u32>], cfg: &TeConfig) -> Result<f64> {
    TePlan::new(target, cfg)?.estimate(source)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn ser(v: Vec<u32>, n: u32) -> SymbolSeries {
        SymbolSeries::new(v, n).unwrap()
    }

    fn iid(n: usize, k: u32, seed: u64) -> Vec<u32> {
        let mut r = crate::util::rng(seed);
        (0..n).map(|_| r.random_range(0..k)).collect()
    }

    #[test]
    fn constant_source_gives_exact_zero() {
        let target = ser(iid(500, 5, 1), 5);
        let source = ser(vec![3; 500], 5);
        assert_eq!(symbolic_te(&source, &target, &TeConfig::default()).unwrap(), 0.0);
    }

    #[test]
    fn copy_chain_reaches_log_alphabet() {
        let y = iid(50_000, 5, 2);
        let mut x = vec![0u32; y.len()];
        x[0] = 1;
        x[1..].copy_from_slice(&y[..y.len() - 1]);
        let te = symbolic_te(&ser(y, 5), &ser(x, 5), &TeConfig::default()).unwrap();
        assert!((te - 5f64.log2()).abs() < 0.05, "te = {te}");
    }

    #[test]
    fn lagged_copy_is_found_only_at_its_lag() {
        let y = iid(20_000, 5, 3);
        let mut x = iid(20_000, 5, 4);
        for t in 5..x.len() {
            x[t] = y[t - 5];
        }
        let (ys, xs) = (ser(y, 5), ser(x, 5));
        let cfg = TeConfig::default();
        let at5 = te_at_lag(&ys, &xs, &cfg, 5).unwrap();
        let at1 = te_at_lag(&ys, &xs, &cfg, 1).unwrap();
        assert!((at5 - 5f64.log2()).abs() < 0.05);
        assert!(at1 < 0.01);
        assert_eq!(te_at_lag(&ys, &xs, &cfg, 1).unwrap(), symbolic_te(&ys, &xs, &cfg).unwrap());
    }

    #[test]
    fn errors() {
        let a = ser(iid(20, 5, 5), 5);
        assert!(matches!(
            symbolic_te(&a, &a, &TeConfig::default()),
            Err(Error::SampleSize { .. })
        ));
        let cfg = TeConfig {
            k: 5,
            l: 5,
            ..TeConfig::default()
        };
        assert!(cfg.validate().is_err());
        let b = ser(iid(100, 5, 6), 5);
        let c = ser(iid(99, 5, 7), 5);
        assert!(symbolic_te(&b, &c, &TeConfig::default()).is_err());
        let wide = ser(iid(100, 7, 8), 7);
        assert!(symbolic_te(&wide, &b, &TeConfig::default()).is_err());
    }

    #[test]
    fn sparse_matches_dense_without_gaps() {
        let y = iid(400, 5, 9);
        let x = iid(400, 5, 10);
        let dense = symbolic_te(&ser(y.clone(), 5), &ser(x.clone(), 5), &TeConfig::default()).unwrap();
        let ys: Vec<Option<u32>> = y.into_iter().map(Some).collect();
        let xs: Vec<Option<u32>> = x.into_iter().map(Some).collect();
        let sparse = symbolic_te_sparse(&ys, &xs, &TeConfig::default()).unwrap();
        assert_eq!(dense, sparse);
    }

    #[test]
    fn sparse_skips_incomplete_samples() {
        let y = iid(400, 5, 11);
        let x = iid(400, 5, 12);
        let mut ys: Vec<Option<u32>> = y.iter().copied().map(Some).collect();
        ys[10] = None;
        let xs: Vec<Option<u32>> = x.iter().copied().map(Some).collect();
        let plan = TePlan::new(xs.as_slice(), &TeConfig::default()).unwrap();
        let (_, n) = plan.joint_counts(ys.as_slice()).unwrap();
        assert_eq!(n, 399 - 1);
    }
}
