//! Information-theoretic bounds on signal value: plug-in signal/return MI,
//! the Kelly growth rate, bit yield and the Fano accuracy ceiling.

use std::f64::consts::LN_2;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{plugin_entropy, plugin_joint_entropy};
use crate::panel::{symbolize, DiscretizationSpec, SymbolSeries};
use crate::util;

pub const MIN_MI_OBS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RiskFreeSpec {
    /// Annualized risk-free rate.
    pub r_f: f64,
}

impl Default for RiskFreeSpec {
    fn default() -> Self {
        Self { r_f: 0.035 }
    }
}

/// Conversion of per-period bits into the growth-rate unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KellyUnits {
    pub periods_per_year: f64,
    pub unit_factor: f64,
}

impl Default for KellyUnits {
    fn default() -> Self {
        Self {
            periods_per_year: 252.0,
            unit_factor: 1.0,
        }
    }
}

/// How next-day returns are discretized for the MI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "n_symbols")]
pub enum ReturnBinning {
    /// Up (`r > 0`) versus not up.
    #[default]
    Sign,
    Quantile(u32),
}

impl ReturnBinning {
    pub fn n_classes(self) -> u32 {
        match self {
            ReturnBinning::Sign => 2,
            ReturnBinning::Quantile(k) => k,
        }
    }

    fn apply(self, r: &[f64]) -> Result<SymbolSeries> {
        match self {
            ReturnBinning::Sign => SymbolSeries::new(r.iter().map(|&v| u32::from(v > 0.0)).collect(), 2),
            ReturnBinning::Quantile(k) => symbolize(r, &DiscretizationSpec { n_symbols: k }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignalMi {
    pub mi_bits: f64,
    pub h_r_bits: f64,
    pub cond_entropy_bits: f64,
    pub cond_entropy_nats: f64,
    pub n_obs: usize,
}

/// Plug-in MI between the symbolized signal at `t` and the discretized
/// return over `t → t+1` (`r_next[t]`), plus `H(R | X) = H(R) − I`.
pub fn signal_return_mi(
    signal: &[f64],
    r_next: &[f64],
    disc: &DiscretizationSpec,
    binning: ReturnBinning,
) -> Result<SignalMi> {
    if signal.len() != r_next.len() {
        return Err(Error::domain(format!(
            "length mismatch: signal {}, returns {}",
            signal.len(),
            r_next.len()
        )));
    }
    if signal.len() < MIN_MI_OBS {
        return Err(Error::SampleSize {
            required: MIN_MI_OBS,
            actual: signal.len(),
        });
    }
    let x = symbolize(signal, disc)?;
    let r = binning.apply(r_next)?;
    let h_r = plugin_entropy(&r, 2.0)?;
    let h_r_given_x = plugin_joint_entropy(&x, &r, 2.0)? - plugin_entropy(&x, 2.0)?;
    let mi = (h_r - h_r_given_x).max(0.0);
    Ok(SignalMi {
        mi_bits: mi,
        h_r_bits: h_r,
        cond_entropy_bits: h_r - mi,
        cond_entropy_nats: util::bits_to_nats(h_r - mi),
        n_obs: signal.len(),
    })
}

/// `G* = r_f + mi · periods_per_year · unit_factor` for `mi` in bits per period.
pub fn kelly_rate(mi_bits: f64, rf: &RiskFreeSpec, units: &KellyUnits) -> Result<f64> {
    if !(mi_bits >= 0.0) {
        return Err(Error::domain(format!("MI must be non-negative (got {mi_bits})")));
    }
    if !(rf.r_f >= -1.0) {
        return Err(Error::domain(format!("r_f must be >= -1 (got {})", rf.r_f)));
    }
    if mi_bits == 0.0 {
        return Ok(rf.r_f);
    }
    Ok(rf.r_f + mi_bits * units.periods_per_year * units.unit_factor)
}

/// Annual return per bit of MI; 0 when `mi_bits` is 0.
pub fn bit_yield(ann_return: f64, mi_bits: f64) -> f64 {
    if mi_bits > 0.0 { ann_return / mi_bits } else { 0.0 }
}

/// Binary entropy in nats.
pub fn binary_entropy(p: f64) -> f64 {
    let h = |q: f64| if q > 0.0 { -q * q.ln() } else { 0.0 };
    h(p) + h(1.0 - p)
}

/// Highest accuracy compatible with Fano's inequality for a conditional
/// entropy of `cond_entropy` nats over `n_classes` outcomes.
///
/// Binary outcomes invert `H_b(P_e) = H` on `[0, 1/2]` by bisection; larger
/// alphabets use `P_e ≥ (H − 1 bit) / log2(n − 1)`.
pub fn fano_accuracy(cond_entropy: f64, n_classes: u32) -> Result<f64> {
    if n_classes < 2 {
        return Err(Error::domain("n_classes must be at least 2"));
    }
    let h_max = (n_classes as f64).ln();
    if !(cond_entropy >= 0.0 && cond_entropy <= h_max + 1e-12) {
        return Err(Error::domain(format!(
            "conditional entropy {cond_entropy} outside [0, ln {n_classes}]"
        )));
    }
    let h = cond_entropy.min(h_max);
    if n_classes == 2 {
        if h == 0.0 {
            return Ok(1.0);
        }
        let (mut lo, mut hi) = (0.0f64, 0.5f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if binary_entropy(mid) >= h {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        return Ok(1.0 - hi);
    }
    let h_bits = h / LN_2;
    let pe = ((h_bits - 1.0) / ((n_classes - 1) as f64).log2()).clamp(0.0, 1.0);
    Ok((1.0 - pe).max(1.0 / n_classes as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsRow {
    pub investor: String,
    pub signal: String,
    pub mi_bits: f64,
    pub kelly_rate: f64,
    pub r_f: f64,
    pub ann_return: f64,
    pub bit_yield: f64,
    pub fano_accuracy: f64,
    pub cond_entropy_nats: f64,
    pub cond_entropy_bits: f64,
    pub n_obs: usize,
}

impl BoundsRow {
    pub fn compute(
        investor: &str,
        signal: &str,
        mi: &SignalMi,
        ann_return: f64,
        n_classes: u32,
        rf: &RiskFreeSpec,
        units: &KellyUnits,
    ) -> Result<Self> {
        Ok(Self {
            investor: investor.into(),
            signal: signal.into(),
            mi_bits: mi.mi_bits,
            kelly_rate: kelly_rate(mi.mi_bits, rf, units)?,
            r_f: rf.r_f,
            ann_return,
            bit_yield: bit_yield(ann_return, mi.mi_bits),
            fano_accuracy: fano_accuracy(mi.cond_entropy_nats, n_classes)?,
            cond_entropy_nats: mi.cond_entropy_nats,
            cond_entropy_bits: mi.cond_entropy_bits,
            n_obs: mi.n_obs,
        })
    }
}

pub fn write_bounds_csv(rows: &[BoundsRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record([
            "investor",
            "signal",
            "mi_bits",
            "kelly_rate",
            "r_f",
            "ann_return",
            "bit_yield",
            "fano_accuracy",
            "cond_entropy_nats",
            "cond_entropy_bits",
            "n_obs",
        ])?;
    }
    w.flush()?;
    Ok(())
}
