//! Fama–MacBeth regressions of next-period returns on a signal, a
//! centrality and their interaction; quintile sorts; and signal-only versus
//! centrality-weighted long-short portfolios.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::one_sample_ttest;
use crate::util;

pub const N_COEF: usize = 4;
pub const COEF_NAMES: [&str; N_COEF] = ["a", "b1", "b2", "b3"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FmSpec {
    pub min_stocks_per_period: usize,
    /// Bartlett-kernel Newey–West lags for the time-series t statistic.
    pub nw_lags: usize,
    /// Largest accepted ratio of extreme singular values of the design.
    pub max_condition: f64,
}

impl Default for FmSpec {
    fn default() -> Self {
        Self {
            min_stocks_per_period: 10,
            nw_lags: 0,
            max_condition: 1e12,
        }
    }
}

/// One stock in one period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FmRow {
    pub signal: f64,
    pub centrality: f64,
    /// Return over the following period.
    pub ret_next: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FmResult {
    /// Index (into the input periods) of every retained period.
    pub periods: Vec<usize>,
    /// `[a, b1, b2, b3]` per retained period.
    pub coefficients: Vec<[f64; N_COEF]>,
    pub mean: [f64; N_COEF],
    /// `None` when the coefficient series has zero variance or a single period.
    pub t_stats: [Option<f64>; N_COEF],
    pub n_periods: usize,
    pub n_small: usize,
    pub n_singular: usize,
}

/// Least squares via SVD; `None` when the condition number exceeds `max_condition`.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>, max_condition: f64) -> Option<DVector<f64>> {
    if x.nrows() < x.ncols() {
        return None;
    }
    let svd = x.clone().svd(true, true);
    let sv = &svd.singular_values;
    let smax = sv.max();
    let smin = sv.min();
    if !(smin > 0.0) || smax / smin > max_condition {
        return None;
    }
    svd.solve(y, 0.0).ok()
}

fn design(rows: &[FmRow]) -> (DMatrix<f64>, DVector<f64>) {
    let x = DMatrix::from_fn(rows.len(), N_COEF, |i, j| match j {
        0 => 1.0,
        1 => rows[i].signal,
        2 => rows[i].centrality,
        _ => rows[i].signal * rows[i].centrality,
    });
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.ret_next));
    (x, y)
}

/// `mean / (sd / √T)`, or the Newey–West analogue with `lags > 0`.
pub fn fm_t_stat(series: &[f64], lags: usize) -> Option<f64> {
    let t = series.len();
    if t < 2 {
        return None;
    }
    let m = util::mean(series);
    let se = if lags == 0 {
        util::sample_sd(series) / (t as f64).sqrt()
    } else {
        let d: Vec<f64> = series.iter().map(|v| v - m).collect();
        let gamma = |j: usize| d[j..].iter().zip(&d).map(|(a, b)| a * b).sum::<f64>() / t as f64;
        let mut lrv = gamma(0);
        for j in 1..=lags.min(t - 1) {
            lrv += 2.0 * (1.0 - j as f64 / (lags + 1) as f64) * gamma(j);
        }
        (lrv.max(0.0) / t as f64).sqrt()
    };
    if se > 0.0 && se.is_finite() { Some(m / se) } else { None }
}

/// Per-period OLS of `ret_next` on `[1, signal, centrality, signal·centrality]`,
/// averaged over periods.
pub fn fama_macbeth(periods: &[Vec<FmRow>], spec: &FmSpec) -> Result<FmResult> {
    if spec.min_stocks_per_period < N_COEF + 1 {
        return Err(Error::domain(format!(
            "min_stocks_per_period must be at least {}",
            N_COEF + 1
        )));
    }
    enum Outcome {
        Small,
        Singular,
        Fit([f64; N_COEF]),
    }
    let outcomes: Vec<Outcome> = periods
        .par_iter()
        .map(|rows| {
            if rows.len() < spec.min_stocks_per_period {
                return Outcome::Small;
            }
            let (x, y) = design(rows);
            match ols(&x, &y, spec.max_condition) {
                Some(b) => Outcome::Fit([b[0], b[1], b[2], b[3]]),
                None => Outcome::Singular,
            }
        })
        .collect();
    let mut res = FmResult {
        periods: Vec::new(),
        coefficients: Vec::new(),
        mean: [0.0; N_COEF],
        t_stats: [None; N_COEF],
        n_periods: 0,
        n_small: 0,
        n_singular: 0,
    };
    for (i, o) in outcomes.into_iter().enumerate() {
        match o {
            Outcome::Small => res.n_small += 1,
            Outcome::Singular => res.n_singular += 1,
            Outcome::Fit(b) => {
                res.periods.push(i);
                res.coefficients.push(b);
            }
        }
    }
    res.n_periods = res.coefficients.len();
    if res.n_periods == 0 {
        return Err(Error::Degenerate(format!(
            "no usable periods ({} too small, {} singular)",
            res.n_small, res.n_singular
        )));
    }
    for k in 0..N_COEF {
        let series: Vec<f64> = res.coefficients.iter().map(|b| b[k]).collect();
        res.mean[k] = util::mean(&series);
        res.t_stats[k] = fm_t_stat(&series, spec.nw_lags);
    }
    Ok(res)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FmRecord {
    pub investor: String,
    pub signal: String,
    pub b1: Option<f64>,
    pub t1: Option<f64>,
    pub b2: Option<f64>,
    pub t2: Option<f64>,
    pub b3: Option<f64>,
    pub t3: Option<f64>,
    pub n_periods: usize,
}

impl FmRecord {
    pub fn new(investor: &str, signal: &str, r: &FmResult) -> Self {
        Self {
            investor: investor.into(),
            signal: signal.into(),
            b1: Some(r.mean[1]),
            t1: r.t_stats[1],
            b2: Some(r.mean[2]),
            t2: r.t_stats[2],
            b3: Some(r.mean[3]),
            t3: r.t_stats[3],
            n_periods: r.n_periods,
        }
    }

    /// A row for a regression that could not be estimated.
    pub fn unavailable(investor: &str, signal: &str) -> Self {
        Self {
            investor: investor.into(),
            signal: signal.into(),
            b1: None,
            t1: None,
            b2: None,
            t2: None,
            b3: None,
            t3: None,
            n_periods: 0,
        }
    }
}

pub fn write_fm_csv(rows: &[FmRecord], path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(["investor", "signal", "b1", "t1", "b2", "t2", "b3", "t3", "n_periods"])?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Quintile (0..5) of each score by minimal rank: `floor(5·rank/n)`.
pub fn quintile_assign(scores: &[f64]) -> Vec<usize> {
    let n = scores.len();
    util::min_ranks(scores).into_iter().map(|r| r * 5 / n).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuintileReport {
    /// Time-averaged equal-weighted return per quintile (Q1 lowest score).
    pub mean_return: [f64; 5],
    /// `mean / sd · √252` of each quintile's period-return series.
    pub sharpe: [f64; 5],
    pub spread_mean: f64,
    /// One-sample t statistic of the Q5 − Q1 series.
    pub spread_t: Option<f64>,
    pub n_periods: usize,
    pub n_skipped: usize,
}

/// Sort each period's `(score, ret_next)` pairs into quintiles. Periods
/// with fewer than five stocks are skipped.
pub fn quintile_sort(periods: &[Vec<(f64, f64)>]) -> Result<QuintileReport> {
    let mut series: [Vec<f64>; 5] = Default::default();
    let mut n_skipped = 0;
    for rows in periods {
        if rows.len() < 5 {
            n_skipped += 1;
            continue;
        }
        let scores: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let q = quintile_assign(&scores);
        let mut sum = [0.0; 5];
        let mut cnt = [0usize; 5];
        for (r, &k) in rows.iter().zip(&q) {
            sum[k] += r.1;
            cnt[k] += 1;
        }
        if cnt.contains(&0) {
            n_skipped += 1;
            continue;
        }
        for k in 0..5 {
            series[k].push(sum[k] / cnt[k] as f64);
        }
    }
    let n_periods = series[0].len();
    if n_periods == 0 {
        return Err(Error::Degenerate("no period has five populated quintiles".into()));
    }
    let ann = 252f64.sqrt();
    let mean_return = std::array::from_fn(|k| util::mean(&series[k]));
    let sharpe = std::array::from_fn(|k| {
        let sd = util::sample_sd(&series[k]);
        if sd > 0.0 { util::mean(&series[k]) / sd * ann } else { f64::NAN }
    });
    let spread: Vec<f64> = series[4].iter().zip(&series[0]).map(|(h, l)| h - l).collect();
    Ok(QuintileReport {
        mean_return,
        sharpe,
        spread_mean: util::mean(&spread),
        spread_t: one_sample_ttest(&spread).ok().map(|t| t.t).filter(|t| t.is_finite()),
        n_periods,
        n_skipped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PortfolioReport {
    /// Annualized compounded returns, in percent.
    pub ann_return_signal_only: f64,
    pub ann_return_network_enhanced: f64,
    /// `ann_return_network_enhanced − ann_return_signal_only`, in percentage points.
    pub improvement_pp: f64,
    pub signal_only_returns: Vec<f64>,
    pub enhanced_returns: Vec<f64>,
    pub n_periods: usize,
    pub n_skipped: usize,
}

/// Long-short weights `∝ (s − mean s)`, scaled to unit gross exposure.
/// `None` if every weight is zero.
pub fn signal_weights(signal: &[f64], centrality: Option<&[f64]>) -> Option<Vec<f64>> {
    let m = util::mean(signal);
    let cmax = centrality.map(|c| c.iter().copied().fold(0.0, f64::max)).unwrap_or(0.0);
    let mut w: Vec<f64> = signal.iter().map(|s| s - m).collect();
    if let Some(c) = centrality {
        if cmax > 0.0 {
            for (wi, ci) in w.iter_mut().zip(c) {
                *wi *= 1.0 + ci / cmax;
            }
        }
    }
    let gross: f64 = w.iter().map(|v| v.abs()).sum();
    if !(gross > 0.0) {
        return None;
    }
    Some(w.into_iter().map(|v| v / gross).collect())
}

fn annualize_pct(returns: &[f64], periods_per_year: f64) -> f64 {
    let log_growth: f64 = returns.iter().map(|r| (1.0 + r).ln()).sum();
    ((log_growth * periods_per_year / returns.len() as f64).exp() - 1.0) * 100.0
}

/// Compare signal-only weights with weights scaled by `1 + c / max c`.
pub fn portfolio_compare(periods: &[Vec<FmRow>], periods_per_year: f64) -> Result<PortfolioReport> {
    let mut so = Vec::new();
    let mut ne = Vec::new();
    let mut n_skipped = 0;
    for rows in periods {
        let s: Vec<f64> = rows.iter().map(|r| r.signal).collect();
        let c: Vec<f64> = rows.iter().map(|r| r.centrality).collect();
        match (signal_weights(&s, None), signal_weights(&s, Some(&c))) {
            (Some(w0), Some(w1)) => {
                so.push(w0.iter().zip(rows).map(|(w, r)| w * r.ret_next).sum());
                ne.push(w1.iter().zip(rows).map(|(w, r)| w * r.ret_next).sum());
            }
            _ => n_skipped += 1,
        }
    }
    if so.is_empty() {
        return Err(Error::Degenerate("every period has zero gross weight".into()));
    }
    let a0 = annualize_pct(&so, periods_per_year);
    let a1 = annualize_pct(&ne, periods_per_year);
    Ok(PortfolioReport {
        ann_return_signal_only: a0,
        ann_return_network_enhanced: a1,
        improvement_pp: a1 - a0,
        n_periods: so.len(),
        signal_only_returns: so,
        enhanced_returns: ne,
        n_skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn normal(r: &mut impl rand::Rng) -> f64 {
        StandardNormal.sample(r)
    }

    fn planted(n: usize, t: usize, b1: f64, b3: f64, seed: u64) -> Vec<Vec<FmRow>> {
        let mut r = util::rng(seed);
        let cent: Vec<f64> = (0..n).map(|i| (i % 7) as f64 / 6.0).collect();
        (0..t)
            .map(|_| {
                (0..n)
                    .map(|i| {
                        let s = normal(&mut r);
                        let c = cent[i];
                        FmRow {
                            signal: s,
                            centrality: c,
                            ret_next: b1 * s + b3 * s * c + normal(&mut r),
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Normal-equation OLS via Gaussian elimination, independent of the SVD path.
    fn normal_eq(rows: &[FmRow]) -> [f64; 4] {
        let mut a = [[0.0; 5]; 4];
        for r in rows {
            let x = [1.0, r.signal, r.centrality, r.signal * r.centrality];
            for i in 0..4 {
                for j in 0..4 {
                    a[i][j] += x[i] * x[j];
                }
                a[i][4] += x[i] * r.ret_next;
            }
        }
        for c in 0..4 {
            let p = (c..4).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
            a.swap(c, p);
            for i in 0..4 {
                if i != c {
                    let f = a[i][c] / a[c][c];
                    for j in c..5 {
                        a[i][j] -= f * a[c][j];
                    }
                }
            }
        }
        std::array::from_fn(|i| a[i][4] / a[i][i])
    }

    #[test]
    fn single_period_equals_ols() {
        let p = planted(50, 1, 0.5, 0.2, 1);
        let r = fama_macbeth(&p, &FmSpec::default()).unwrap();
        let direct = normal_eq(&p[0]);
        for k in 0..4 {
            assert!((r.mean[k] - direct[k]).abs() < 1e-10);
        }
        assert_eq!(r.t_stats, [None; 4]);
    }

    #[test]
    fn recovers_interaction() {
        let p = planted(100, 300, 0.0, 0.3, 2);
        let r = fama_macbeth(&p, &FmSpec::default()).unwrap();
        assert!((r.mean[3] - 0.3).abs() < 0.05);
        assert!(r.t_stats[3].unwrap() > 5.0);
    }

    #[test]
    fn t_stat_identity() {
        let p = planted(30, 40, 0.5, 0.0, 3);
        let r = fama_macbeth(&p, &FmSpec::default()).unwrap();
        let b1: Vec<f64> = r.coefficients.iter().map(|b| b[1]).collect();
        let t = util::mean(&b1) / (util::sample_sd(&b1) / (b1.len() as f64).sqrt());
        assert_eq!(r.t_stats[1], Some(t));
        let nw = fama_macbeth(&p, &FmSpec { nw_lags: 3, ..FmSpec::default() }).unwrap();
        assert!(nw.t_stats[1].unwrap().is_finite());
    }

    #[test]
    fn identical_periods_have_undefined_t() {
        let p = planted(20, 1, 0.5, 0.0, 4);
        let rep = vec![p[0].clone(); 5];
        let r = fama_macbeth(&rep, &FmSpec::default()).unwrap();
        assert_eq!(r.t_stats, [None; 4]);
        assert_eq!(r.n_periods, 5);
    }

    #[test]
    fn singular_and_small_periods_are_counted() {
        let mut p = planted(20, 3, 0.5, 0.0, 5);
        for row in &mut p[1] {
            row.centrality = 0.0;
        }
        p[2].truncate(5);
        let r = fama_macbeth(&p, &FmSpec::default()).unwrap();
        assert_eq!((r.n_periods, r.n_singular, r.n_small), (1, 1, 1));
        assert!(fama_macbeth(&p[1..2], &FmSpec::default()).is_err());
    }

    #[test]
    fn quintiles_of_ten() {
        let scores = [3.0, 9.0, 1.0, 7.0, 5.0, 0.0, 8.0, 2.0, 6.0, 4.0];
        assert_eq!(quintile_assign(&scores), vec![1, 4, 0, 3, 2, 0, 4, 1, 3, 2]);
        let tied = [1.0, 1.0, 1.0, 2.0, 3.0];
        assert_eq!(quintile_assign(&tied), vec![0, 0, 0, 3, 4]);
    }

    #[test]
    fn perfect_sort_is_monotone() {
        let mut r = util::rng(6);
        let periods: Vec<Vec<(f64, f64)>> = (0..50)
            .map(|_| {
                (0..23)
                    .map(|_| {
                        let s: f64 = normal(&mut r);
                        (s, s)
                    })
                    .collect()
            })
            .collect();
        let q = quintile_sort(&periods).unwrap();
        assert!(q.mean_return.windows(2).all(|w| w[0] < w[1]));
        assert!(q.spread_t.unwrap() > 10.0);
        assert!(quintile_sort(&[vec![(1.0, 1.0); 4]]).is_err());
    }

    #[test]
    fn zero_centrality_gives_zero_improvement() {
        let mut p = planted(30, 100, 0.1, 0.0, 7);
        for rows in &mut p {
            for row in rows.iter_mut() {
                row.centrality = 0.0;
                row.ret_next *= 0.01;
            }
        }
        let rep = portfolio_compare(&p, 252.0).unwrap();
        assert_eq!(rep.improvement_pp, 0.0);
        assert_eq!(rep.improvement_pp, rep.ann_return_network_enhanced - rep.ann_return_signal_only);
    }

    #[test]
    fn weights_have_unit_gross() {
        let s = [0.3, -1.0, 2.0, 0.1];
        let c = [0.0, 0.5, 1.0, 0.25];
        for w in [signal_weights(&s, None).unwrap(), signal_weights(&s, Some(&c)).unwrap()] {
            assert!((w.iter().map(|v| v.abs()).sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(signal_weights(&[1.0, 1.0], None).is_none());
    }
}
