use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::graph::{build_network, DirectedWeightedGraph, SquareMatrix};
use crate::error::{Error, Result};
use crate::estimators::{TeConfig, TePlan};
use crate::inference::{bh_fdr, surrogate_test_with_plan, PValueMethod, PairTestResult, SurrogateSpec};
use crate::panel::{symbolize_sparse, DiscretizationSpec, FlowPanel, InvestorType, SignalField};
use crate::util;

/// Per-node continuous series on a shared date grid; gaps are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalMatrix {
    pub labels: Vec<String>,
    pub dates: Vec<NaiveDate>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl SignalMatrix {
    pub fn from_panel(panel: &FlowPanel, inv: InvestorType, field: SignalField) -> Self {
        Self {
            labels: panel.tickers().to_vec(),
            dates: panel.dates().to_vec(),
            values: (0..panel.n_tickers())
                .map(|t| panel.signal_series(t, inv, field))
                .collect(),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    /// Date positions `start..end`.
    pub fn window(&self, start: usize, end: usize) -> Self {
        Self {
            labels: self.labels.clone(),
            dates: self.dates[start..end].to_vec(),
            values: self.values.iter().map(|v| v[start..end].to_vec()).collect(),
        }
    }

    /// Symbolize each node over its own present values. A node whose series
    /// cannot be symbolized (constant or too short) becomes all-missing.
    pub fn symbolize(&self, spec: &DiscretizationSpec) -> Vec<Vec<Option<u32>>> {
        self.values
            .iter()
            .zip(&self.labels)
            .map(|(v, label)| match symbolize_sparse(v, spec) {
                Ok(s) => s,
                Err(e) => {
                    log::warn!("node {label} not symbolized: {e}");
                    vec![None; v.len()]
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkSpec {
    pub te: TeConfig,
    pub surrogate: SurrogateSpec,
    /// BH false-discovery level.
    pub alpha: f64,
    pub p_method: PValueMethod,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        Self {
            te: TeConfig::default(),
            surrogate: SurrogateSpec::default(),
            alpha: 0.05,
            p_method: PValueMethod::default(),
        }
    }
}

/// Pairwise surrogate tests and the resulting significant-edge network.
#[derive(Debug, Clone)]
pub struct TeNetwork {
    pub labels: Vec<String>,
    /// `None` where the pair had too few complete samples to test.
    pub tests: SquareMatrix<Option<PairTestResult>>,
    pub significant: SquareMatrix<bool>,
    pub graph: DirectedWeightedGraph,
    pub p_method: PValueMethod,
    pub alpha: f64,
}

impl TeNetwork {
    pub fn n_tested(&self) -> usize {
        self.tests.off_diagonal().filter(|(_, _, t)| t.is_some()).count()
    }

    pub fn te_matrix(&self) -> SquareMatrix<f64> {
        let n = self.labels.len();
        let mut m = SquareMatrix::filled(n, 0.0);
        for (i, j, t) in self.tests.off_diagonal() {
            if let Some(t) = t {
                m.set(i, j, t.observed_te);
            }
        }
        m
    }

    /// Re-apply BH at another level without rerunning surrogates.
    pub fn edges_at_alpha(&self, alpha: f64) -> Result<usize> {
        Ok(significance_mask(&self.tests, alpha, self.p_method)?
            .off_diagonal()
            .filter(|(_, _, &m)| m)
            .count())
    }

    /// Full per-pair test details, one row per tested ordered pair.
    pub fn write_tests_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "source",
            "target",
            "observed_te",
            "surrogate_quantile",
            "p_permutation",
            "p_gamma_tail",
            "surrogate_mean",
            "surrogate_sd",
            "significant",
        ])?;
        for (i, j, t) in self.tests.off_diagonal() {
            let Some(t) = t else { continue };
            w.write_record([
                self.labels[i].clone(),
                self.labels[j].clone(),
                util::fmt_f64(t.observed_te),
                util::fmt_f64(t.surrogate_quantile),
                util::fmt_f64(t.p_value),
                util::fmt_f64(t.tail_p_value),
                util::fmt_f64(t.surrogate_mean),
                util::fmt_f64(t.surrogate_sd),
                self.significant.get(i, j).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// One row per ordered pair: `source,target,te_bits,p_value,significant`.
    /// `p_value` is the one that entered the FDR step; untested pairs are left blank.
    pub fn write_edges_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["source", "target", "te_bits", "p_value", "significant"])?;
        for (i, j, t) in self.tests.off_diagonal() {
            let (te, p) = match t {
                Some(t) => (util::fmt_f64(t.observed_te), util::fmt_f64(t.p_for(self.p_method))),
                None => (String::new(), String::new()),
            };
            w.write_record([
                self.labels[i].as_str(),
                self.labels[j].as_str(),
                &te,
                &p,
                if *self.significant.get(i, j) { "true" } else { "false" },
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Number of results that beat their surrogate percentile and survive BH at `alpha`.
pub fn count_significant(results: &[PairTestResult], alpha: f64, method: PValueMethod) -> Result<usize> {
    if results.is_empty() {
        return Ok(0);
    }
    let p: Vec<f64> = results.iter().map(|t| t.p_for(method)).collect();
    Ok(bh_fdr(&p, alpha)?
        .into_iter()
        .zip(results)
        .filter(|(r, t)| *r && t.exceeds_quantile())
        .count())
}

fn significance_mask(
    tests: &SquareMatrix<Option<PairTestResult>>,
    alpha: f64,
    method: PValueMethod,
) -> Result<SquareMatrix<bool>> {
    let tested: Vec<(usize, usize, PairTestResult)> = tests
        .off_diagonal()
        .filter_map(|(i, j, t)| t.map(|t| (i, j, t)))
        .collect();
    let p: Vec<f64> = tested.iter().map(|(_, _, t)| t.p_for(method)).collect();
    let reject = if p.is_empty() { Vec::new() } else { bh_fdr(&p, alpha)? };
    let mut mask = SquareMatrix::filled(tests.n(), false);
    for ((i, j, t), r) in tested.iter().zip(reject) {
        mask.set(*i, *j, r && t.exceeds_quantile());
    }
    Ok(mask)
}

/// Surrogate-test every ordered pair of `symbols` and keep edges that beat the
/// surrogate percentile and survive BH at `spec.alpha`.
///
/// Pair `(i, j)` uses the seed `pair_seed(spec.surrogate.seed, label_i, label_j)`,
/// so results do not depend on the thread count.
pub fn estimate_te_network(symbols: &[Vec<Option<u32>>], labels: &[String], spec: &NetworkSpec) -> Result<TeNetwork> {
    let n = symbols.len();
    if labels.len() != n {
        return Err(Error::domain("one label per series required"));
    }
    if !(spec.alpha > 0.0 && spec.alpha < 1.0) {
        return Err(Error::domain("alpha must lie in (0, 1)"));
    }
    spec.te.validate()?;
    let plans: Vec<Option<TePlan>> = symbols
        .iter()
        .map(|s| TePlan::new(s.as_slice(), &spec.te).ok())
        .collect();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let results: Vec<Result<Option<PairTestResult>>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let Some(plan) = &plans[j] else { return Ok(None) };
            let sur = spec
                .surrogate
                .with_seed(util::pair_seed(spec.surrogate.seed, &labels[i], &labels[j]));
            match surrogate_test_with_plan(symbols[i].as_slice(), plan, &sur) {
                Ok(r) => Ok(Some(r)),
                Err(Error::SampleSize { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut tests = SquareMatrix::filled(n, None);
    for (&(i, j), r) in pairs.iter().zip(results) {
        tests.set(i, j, r?);
    }
    let skipped = pairs.len() - tests.off_diagonal().filter(|(_, _, t)| t.is_some()).count();
    if skipped > 0 {
        log::warn!("{skipped} of {} pairs skipped for insufficient overlap", pairs.len());
    }
    let significant = significance_mask(&tests, spec.alpha, spec.p_method)?;
    let mut te = SquareMatrix::filled(n, 0.0);
    for (i, j, t) in tests.off_diagonal() {
        if let Some(t) = t {
            te.set(i, j, t.observed_te);
        }
    }
    let graph = build_network(&te, &significant, labels)?;
    Ok(TeNetwork {
        labels: labels.to_vec(),
        tests,
        significant,
        graph,
        p_method: spec.p_method,
        alpha: spec.alpha,
    })
}

/// Pre-significance TE for every ordered pair (`None` where untestable).
pub fn raw_te_matrix(symbols: &[Vec<Option<u32>>], cfg: &TeConfig) -> Result<SquareMatrix<Option<f64>>> {
    cfg.validate()?;
    let n = symbols.len();
    let plans: Vec<Option<TePlan>> = symbols.iter().map(|s| TePlan::new(s.as_slice(), cfg).ok()).collect();
    let rows: Vec<Vec<Option<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| match &plans[j] {
                    Some(plan) if i != j => plan.estimate(symbols[i].as_slice()).ok(),
                    _ => None,
                })
                .collect()
        })
        .collect();
    SquareMatrix::from_rows(rows)
}

/// Fraction of testable ordered pairs with strictly positive TE; `None` if no pair is testable.
pub fn raw_density(te: &SquareMatrix<Option<f64>>) -> Option<f64> {
    let vals: Vec<f64> = te.off_diagonal().filter_map(|(_, _, v)| *v).collect();
    if vals.is_empty() {
        return None;
    }
    Some(vals.iter().filter(|&&v| v > 0.0).count() as f64 / vals.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityPoint {
    pub end_date: NaiveDate,
    pub n_edges: usize,
    pub density: f64,
}

/// Significant-edge density over sliding windows of `window` dates moved by
/// `step`, each re-symbolized and re-tested independently. Windows too
/// short for the TE sample minimum are skipped with a warning.
pub fn rolling_density(
    signals: &SignalMatrix,
    disc: &DiscretizationSpec,
    spec: &NetworkSpec,
    window: usize,
    step: usize,
) -> Result<Vec<DensityPoint>> {
    let t = signals.n_dates();
    if window == 0 || window > t {
        return Err(Error::domain(format!("window {window} outside 1..={t}")));
    }
    if step == 0 {
        return Err(Error::domain("step must be at least 1"));
    }
    let needed = spec.te.min_samples + spec.te.lag.max(spec.te.k) + spec.te.l;
    if window < needed {
        log::warn!("window {window} shorter than TE minimum {needed}; all windows skipped");
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut end = window;
    while end <= t {
        let w = signals.window(end - window, end);
        let syms = w.symbolize(disc);
        let mut s = *spec;
        s.surrogate.seed = util::indexed_seed(spec.surrogate.seed, end as u64);
        let net = estimate_te_network(&syms, &w.labels, &s)?;
        if net.n_tested() == 0 {
            log::warn!("window ending {} has no testable pairs; skipped", w.dates[window - 1]);
        } else {
            out.push(DensityPoint {
                end_date: w.dates[window - 1],
                n_edges: net.graph.edges().len(),
                density: net.graph.density(),
            });
        }
        end += step;
    }
    Ok(out)
}
