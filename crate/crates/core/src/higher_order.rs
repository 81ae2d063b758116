//! Interaction information between two signals and returns, conditional
//! transfer entropy toward returns, and the directionality index.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{combine, ksg_cmi, plugin_mi, KsgConfig};
use crate::inference::{block_bootstrap_ci, bootstrap_p_at_zero, one_sample_ttest, BootstrapSpec};
use crate::panel::{symbolize, DiscretizationSpec, SymbolSeries};
use crate::util;

/// Minimum aligned observations for a per-stock II estimate.
pub const MIN_II_OBS: usize = 250;

/// `I(A,B; R) − I(A; R) − I(B; R)` in bits. Positive values indicate synergy,
/// negative values redundancy.
pub fn interaction_information(a: &SymbolSeries, b: &SymbolSeries, r: &SymbolSeries) -> Result<f64> {
    if a.len() != b.len() || a.len() != r.len() {
        return Err(Error::domain(format!(
            "length mismatch: a {}, b {}, r {}",
            a.len(),
            b.len(),
            r.len()
        )));
    }
    let ab = combine(a, b)?;
    Ok(plugin_mi_raw(&ab, r)? - plugin_mi_raw(a, r)? - plugin_mi_raw(b, r)?)
}

/// Plug-in MI without the zero clamp, so the II identity holds exactly.
fn plugin_mi_raw(x: &SymbolSeries, y: &SymbolSeries) -> Result<f64> {
    use crate::estimators::{plugin_entropy, plugin_joint_entropy};
    Ok(plugin_entropy(x, 2.0)? + plugin_entropy(y, 2.0)? - plugin_joint_entropy(x, y, 2.0)?)
}

/// One stock's inputs on a common date grid: two signals at `t` and the
/// return realized over `t → t+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct IiInput {
    pub ticker: String,
    pub a: Vec<Option<f64>>,
    pub b: Vec<Option<f64>>,
    pub r_next: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StockIi {
    pub ticker: String,
    pub ii_bits: f64,
    pub mi_a_r: f64,
    pub mi_b_r: f64,
    pub n_obs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IiResult {
    pub per_stock: Vec<StockIi>,
    pub mean_ii: f64,
    pub median_ii: f64,
    /// Fraction of stocks with II > 0.
    pub pct_synergy: f64,
    /// Cross-stock mean of `I(A; R)` in bits.
    pub mi_a_r: f64,
    pub mi_b_r: f64,
    /// One-sample t statistic of per-stock II against 0 (`None` with fewer than two stocks).
    pub t_stat: Option<f64>,
    pub t_p_value: Option<f64>,
    /// Stocks excluded for short history or degenerate series.
    pub skipped: Vec<String>,
}

fn stock_ii(input: &IiInput, disc: &DiscretizationSpec) -> Result<StockIi> {
    let n = input.a.len();
    if input.b.len() != n || input.r_next.len() != n {
        return Err(Error::domain(format!("{}: series lengths differ", input.ticker)));
    }
    let rows: Vec<(f64, f64, f64)> = (0..n)
        .filter_map(|t| Some((input.a[t]?, input.b[t]?, input.r_next[t]?)))
        .collect();
    if rows.len() < MIN_II_OBS {
        return Err(Error::SampleSize {
            required: MIN_II_OBS,
            actual: rows.len(),
        });
    }
    let col = |f: fn(&(f64, f64, f64)) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let a = symbolize(&col(|r| r.0), disc)?;
    let b = symbolize(&col(|r| r.1), disc)?;
    let r = symbolize(&col(|r| r.2), disc)?;
    Ok(StockIi {
        ticker: input.ticker.clone(),
        ii_bits: interaction_information(&a, &b, &r)?,
        mi_a_r: plugin_mi(&a, &r, 2.0)?,
        mi_b_r: plugin_mi(&b, &r, 2.0)?,
        n_obs: rows.len(),
    })
}

/// Per-stock II on 5-bin symbolized series, aggregated across stocks.
pub fn ii_cross_section(stocks: &[IiInput], disc: &DiscretizationSpec) -> Result<IiResult> {
    use rayon::prelude::*;
    let outcomes: Vec<Result<StockIi>> = stocks.par_iter().map(|s| stock_ii(s, disc)).collect();
    let mut per_stock = Vec::new();
    let mut skipped = Vec::new();
    for (s, o) in stocks.iter().zip(outcomes) {
        match o {
            Ok(v) => per_stock.push(v),
            Err(e @ (Error::SampleSize { .. } | Error::Degenerate(_))) => {
                log::info!("II: skipping {}: {e}", s.ticker);
                skipped.push(s.ticker.clone());
            }
            Err(e) => return Err(e),
        }
    }
    if per_stock.is_empty() {
        return Err(Error::SampleSize {
            required: 1,
            actual: 0,
        });
    }
    let ii: Vec<f64> = per_stock.iter().map(|s| s.ii_bits).collect();
    let t = one_sample_ttest(&ii).ok();
    Ok(IiResult {
        mean_ii: util::mean(&ii),
        median_ii: util::median(&ii),
        pct_synergy: ii.iter().filter(|&&v| v > 0.0).count() as f64 / ii.len() as f64,
        mi_a_r: util::mean(&per_stock.iter().map(|s| s.mi_a_r).collect::<Vec<_>>()),
        mi_b_r: util::mean(&per_stock.iter().map(|s| s.mi_b_r).collect::<Vec<_>>()),
        t_stat: t.map(|t| t.t),
        t_p_value: t.map(|t| t.p_value),
        per_stock,
        skipped,
    })
}

/// Conditional TE of a source toward returns, in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CteResult {
    /// `I(r[t+1]; a[t] | r[t])`.
    pub te_a_r: f64,
    /// `I(r[t+1]; a[t] | r[t], b[t])`.
    pub te_a_r_given_b: f64,
    /// Information in `a` about the next return not available from `b`; equals `te_a_r_given_b`.
    pub unique: f64,
    /// `te_a_r − te_a_r_given_b`.
    pub shared: f64,
}

fn lagged_rows(a: &[f64], r: &[f64], b: &[f64]) -> Result<[Vec<f64>; 4]> {
    let n = a.len();
    if r.len() != n || b.len() != n {
        return Err(Error::domain(format!(
            "length mismatch: a {n}, r {}, b {}",
            r.len(),
            b.len()
        )));
    }
    if n < 2 {
        return Err(Error::SampleSize { required: 2, actual: n });
    }
    Ok([r[1..].to_vec(), a[..n - 1].to_vec(), r[..n - 1].to_vec(), b[..n - 1].to_vec()])
}

fn cte_rows(rows: &[Vec<f64>], cfg: &KsgConfig) -> Result<CteResult> {
    let [r_next, a, r, b] = rows else {
        return Err(Error::domain("expected four aligned columns"));
    };
    let te_a_r = ksg_cmi(r_next, a, &[r], cfg)?;
    let te_a_r_given_b = ksg_cmi(r_next, a, &[r, b], cfg)?;
    Ok(CteResult {
        te_a_r,
        te_a_r_given_b,
        unique: te_a_r_given_b,
        shared: te_a_r - te_a_r_given_b,
    })
}

/// KSG conditional TE from `a` to returns `r`, with and without conditioning
/// on `b`. All three series share one time grid; `r[t]` is the return
/// realized at `t`.
pub fn conditional_te(a: &[f64], r: &[f64], b: &[f64], cfg: &KsgConfig) -> Result<CteResult> {
    cte_rows(&lagged_rows(a, r, b)?, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionalityResult {
    /// `I(r[t+1]; a[t] | r[t], b[t])` in nats.
    pub cte_a_given_b: f64,
    pub cte_b_given_a: f64,
    /// `cte_a_given_b − cte_b_given_a`.
    pub d_index: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub p_value: f64,
    pub n_boot_failed: usize,
}

fn d_stat(rows: &[Vec<f64>], cfg: &KsgConfig) -> Result<(f64, f64)> {
    let [r_next, a, r, b] = rows else {
        return Err(Error::domain("expected four aligned columns"));
    };
    let ab = ksg_cmi(r_next, a, &[r, b], cfg)?;
    let ba = ksg_cmi(r_next, b, &[r, a], cfg)?;
    Ok((ab, ba))
}

/// `D = CTE(a→R | b) − CTE(b→R | a)` with a moving-block bootstrap CI over
/// the aligned rows `(r[t+1], a[t], r[t], b[t])`.
pub fn directionality_index(
    a: &[f64],
    b: &[f64],
    r: &[f64],
    cfg: &KsgConfig,
    boot: &BootstrapSpec,
) -> Result<DirectionalityResult> {
    let rows = lagged_rows(a, r, b)?;
    let (ab, ba) = d_stat(&rows, cfg)?;
    let ci = block_bootstrap_ci(
        &rows,
        |d| d_stat(d, cfg).map(|(x, y)| x - y),
        boot,
    )?;
    Ok(DirectionalityResult {
        cte_a_given_b: ab,
        cte_b_given_a: ba,
        d_index: ab - ba,
        ci_lo: ci.lo,
        ci_hi: ci.hi,
        p_value: bootstrap_p_at_zero(&ci.estimates),
        n_boot_failed: ci.n_failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{plugin_entropy, plugin_joint_entropy};
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn bits(n: usize, seed: u64) -> Vec<u32> {
        let mut r = util::rng(seed);
        (0..n).map(|_| r.random_range(0..2)).collect()
    }

    fn ser(v: Vec<u32>, k: u32) -> SymbolSeries {
        SymbolSeries::new(v, k).unwrap()
    }

    #[test]
    fn duplication_is_redundant() {
        let a = ser(bits(20_000, 1), 2);
        let ii = interaction_information(&a, &a, &a).unwrap();
        assert!((ii + 1.0).abs() < 0.02, "{ii}");
    }

    #[test]
    fn xor_is_synergistic() {
        let a = bits(20_000, 2);
        let b = bits(20_000, 3);
        let r: Vec<u32> = a.iter().zip(&b).map(|(x, y)| x ^ y).collect();
        let ii = interaction_information(&ser(a, 2), &ser(b, 2), &ser(r, 2)).unwrap();
        assert!((ii - 1.0).abs() < 0.02, "{ii}");
    }

    #[test]
    fn matches_entropy_expansion() {
        let mut rng = util::rng(4);
        let a: Vec<u32> = (0..3000).map(|_| rng.random_range(0..5)).collect();
        let b: Vec<u32> = a.iter().map(|&x| if rng.random::<f64>() < 0.5 { x } else { rng.random_range(0..5) }).collect();
        let r: Vec<u32> = (0..3000).map(|i| (a[i] + b[i]) % 5).collect();
        let (a, b, r) = (ser(a, 5), ser(b, 5), ser(r, 5));
        let h = |x: &SymbolSeries| plugin_entropy(x, 2.0).unwrap();
        let hj = |x: &SymbolSeries, y: &SymbolSeries| plugin_joint_entropy(x, y, 2.0).unwrap();
        let ab = combine(&a, &b).unwrap();
        let expansion = hj(&a, &r) + hj(&b, &r) + hj(&a, &b) - h(&a) - h(&b) - h(&r) - hj(&ab, &r);
        let ii = interaction_information(&a, &b, &r).unwrap();
        assert!((ii - expansion).abs() < 1e-12);
    }

    #[test]
    fn length_mismatch() {
        let a = ser(bits(10, 1), 2);
        let b = ser(bits(9, 1), 2);
        assert!(interaction_information(&a, &b, &a).is_err());
    }

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut r = util::rng(seed);
        (0..n).map(|_| StandardNormal.sample(&mut r)).collect()
    }

    #[test]
    fn cross_section_aggregates_and_skips() {
        let mk = |t: &str, n: usize, seed: u64| IiInput {
            ticker: t.into(),
            a: normals(n, seed).into_iter().map(Some).collect(),
            b: normals(n, seed + 100).into_iter().map(Some).collect(),
            r_next: normals(n, seed + 200).into_iter().map(Some).collect(),
        };
        let stocks = vec![mk("A", 400, 1), mk("B", 400, 2), mk("C", 100, 3), mk("D", 400, 4)];
        let res = ii_cross_section(&stocks, &DiscretizationSpec::default()).unwrap();
        assert_eq!(res.skipped, vec!["C".to_string()]);
        assert_eq!(res.per_stock.len(), 3);
        let ii: Vec<f64> = res.per_stock.iter().map(|s| s.ii_bits).collect();
        assert!((res.mean_ii - ii.iter().sum::<f64>() / 3.0).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&res.pct_synergy));
        assert!(res.t_p_value.is_some());
    }

    #[test]
    fn duplicate_conditioning_absorbs_source() {
        let a = normals(3000, 5);
        let r: Vec<f64> = normals(3000, 6);
        let mut rr = r.clone();
        for t in 1..3000 {
            rr[t] = 0.6 * a[t - 1] + 0.8 * r[t];
        }
        let c = conditional_te(&a, &rr, &a, &KsgConfig::default()).unwrap();
        assert!(c.te_a_r > 0.15);
        assert!(c.te_a_r_given_b.abs() < 0.03, "{c:?}");
        assert_eq!(c.unique, c.te_a_r_given_b);
        assert_eq!(c.shared, c.te_a_r - c.te_a_r_given_b);
    }

    #[test]
    fn directionality_is_antisymmetric() {
        let a = normals(400, 7);
        let b = normals(400, 8);
        let mut r = normals(400, 9);
        for t in 1..400 {
            r[t] += 0.8 * a[t - 1];
        }
        let boot = BootstrapSpec {
            n_boot: 100,
            seed: 3,
            ..BootstrapSpec::default()
        };
        let cfg = KsgConfig::default();
        let ab = directionality_index(&a, &b, &r, &cfg, &boot).unwrap();
        let ba = directionality_index(&b, &a, &r, &cfg, &boot).unwrap();
        assert_eq!(ab.d_index, -ba.d_index);
        assert_eq!(ab.d_index, ab.cte_a_given_b - ab.cte_b_given_a);
        assert!(ab.ci_lo <= ab.ci_hi);
        assert!(ab.d_index > 0.0 && ab.ci_lo > 0.0);
    }
}
