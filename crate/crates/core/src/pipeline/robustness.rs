use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::Serialize;

use super::{num, opt, Ctx};
use crate::config::{RunConfig, Subperiod, TeMethod};
use crate::cross_section::quintile_assign;
use crate::error::{Error, Result};
use crate::estimators::ksg_cmi;
use crate::inference::PairTestResult;
use crate::network::{count_significant, raw_density, raw_te_matrix, SignalMatrix};
use crate::panel::{FlowPanel, InvestorType, MarketField};
use crate::util;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubperiodCell {
    pub investor: InvestorType,
    pub label: String,
    pub start: NaiveDate,
    pub end: NaiveDate,
    /// `None` when no pair in the subperiod is testable.
    pub raw_density: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeCell {
    pub investor: InvestorType,
    /// 1 = smallest mean market cap.
    pub quintile: usize,
    pub n_stocks: usize,
    pub raw_density: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodCell {
    pub investor: InvestorType,
    pub method: TeMethod,
    /// Mean pairwise TE in bits; KSG estimates are floored at zero.
    pub mean_te_bits: Option<f64>,
    pub n_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdCell {
    pub investor: InvestorType,
    pub alpha: f64,
    pub n_edges: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct RobustnessReport {
    pub subperiods: Vec<SubperiodCell>,
    pub size: Vec<SizeCell>,
    pub methods: Vec<MethodCell>,
    pub thresholds: Vec<ThresholdCell>,
}

/// Configured subperiods, or three equal thirds of the date grid.
fn subperiods(cfg: &RunConfig, dates: &[NaiveDate]) -> Vec<Subperiod> {
    if !cfg.subperiods.is_empty() || dates.is_empty() {
        return cfg.subperiods.clone();
    }
    let t = dates.len();
    (0..3)
        .filter_map(|k| {
            let (s, e) = (k * t / 3, (k + 1) * t / 3);
            (e > s).then(|| Subperiod {
                label: format!("P{}", k + 1),
                start: dates[s],
                end: dates[e - 1],
            })
        })
        .collect()
}

fn density_of(signals: &SignalMatrix, cfg: &RunConfig) -> Result<Option<f64>> {
    let syms = signals.symbolize(&cfg.discretization());
    Ok(raw_density(&raw_te_matrix(&syms, &cfg.te_config())?))
}

fn select_nodes(signals: &SignalMatrix, idx: &[usize]) -> SignalMatrix {
    SignalMatrix {
        labels: idx.iter().map(|&i| signals.labels[i].clone()).collect(),
        dates: signals.dates.clone(),
        values: idx.iter().map(|&i| signals.values[i].clone()).collect(),
    }
}

/// KSG TE `I(x[t+1]; y[t+1−lag] | x[t])` in bits for every ordered pair.
fn ksg_pairs(signals: &SignalMatrix, cfg: &RunConfig) -> Vec<f64> {
    let n = signals.n_nodes();
    let lag = cfg.te_lag;
    let ksg = cfg.ksg_config();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).collect();
    pairs
        .par_iter()
        .filter_map(|&(src, tgt)| {
            let x = &signals.values[tgt];
            let y = &signals.values[src];
            let (mut xn, mut yl, mut xc) = (Vec::new(), Vec::new(), Vec::new());
            for t in lag.max(1) - 1..x.len().saturating_sub(1) {
                if let (Some(a), Some(b), Some(c)) = (x[t + 1], y[t + 1 - lag], x[t]) {
                    xn.push(a);
                    yl.push(b);
                    xc.push(c);
                }
            }
            if xn.len() < cfg.te_min_samples {
                return None;
            }
            ksg_cmi(&xn, &yl, &[&xc], &ksg).ok().map(|v| util::nats_to_bits(v).max(0.0))
        })
        .collect()
}

fn read_tests(path: &Path) -> Result<Vec<PairTestResult>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::domain(format!("{}: missing column {name}", path.display())))
    };
    let idx = [
        col("observed_te")?,
        col("surrogate_quantile")?,
        col("p_permutation")?,
        col("surrogate_mean")?,
        col("surrogate_sd")?,
        col("p_gamma_tail")?,
    ];
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let mut v = [0.0; 6];
        for (slot, &i) in v.iter_mut().zip(&idx) {
            *slot = rec[i]
                .parse()
                .map_err(|_| Error::domain(format!("{}: bad number `{}`", path.display(), &rec[i])))?;
        }
        out.push(PairTestResult {
            observed_te: v[0],
            surrogate_quantile: v[1],
            p_value: v[2],
            surrogate_mean: v[3],
            surrogate_sd: v[4],
            tail_p_value: v[5],
        });
    }
    Ok(out)
}

/// Subperiod, size-quintile and estimator-method panels plus the
/// significance-threshold panel. The threshold panel re-applies BH to the
/// stored surrogate tests under `networks_dir/<investor>/tests.csv`.
pub fn robustness_suite(panel: &FlowPanel, cfg: &RunConfig, networks_dir: &Path) -> Result<RobustnessReport> {
    let mut rep = RobustnessReport::default();
    let periods = subperiods(cfg, panel.dates());
    let caps: Vec<f64> = (0..panel.n_tickers())
        .map(|t| {
            let v: Vec<f64> = panel.market_series(t, MarketField::MarketCap).into_iter().flatten().collect();
            if v.is_empty() { 0.0 } else { util::mean(&v) }
        })
        .collect();
    let size_q = quintile_assign(&caps);

    for &inv in &cfg.investors {
        let signals = SignalMatrix::from_panel(panel, inv, cfg.target_field.resolve(inv));

        for sp in &periods {
            let s = signals.dates.partition_point(|d| *d < sp.start);
            let e = signals.dates.partition_point(|d| *d <= sp.end);
            let raw = if e > s { density_of(&signals.window(s, e), cfg)? } else { None };
            rep.subperiods.push(SubperiodCell {
                investor: inv,
                label: sp.label.clone(),
                start: sp.start,
                end: sp.end,
                raw_density: raw,
            });
        }

        if cfg.size_quintiles {
            for q in 0..5 {
                let idx: Vec<usize> = (0..size_q.len()).filter(|&i| size_q[i] == q).collect();
                let raw = if idx.len() >= 2 { density_of(&select_nodes(&signals, &idx), cfg)? } else { None };
                rep.size.push(SizeCell {
                    investor: inv,
                    quintile: q + 1,
                    n_stocks: idx.len(),
                    raw_density: raw,
                });
            }
        }

        for &method in &cfg.methods {
            let vals = match method {
                TeMethod::Symbolic => {
                    let syms = signals.symbolize(&cfg.discretization());
                    raw_te_matrix(&syms, &cfg.te_config())?
                        .off_diagonal()
                        .filter_map(|(_, _, v)| *v)
                        .collect()
                }
                TeMethod::Ksg => ksg_pairs(&signals, cfg),
            };
            rep.methods.push(MethodCell {
                investor: inv,
                method,
                mean_te_bits: (!vals.is_empty()).then(|| util::mean(&vals)),
                n_pairs: vals.len(),
            });
        }

        let tests_path = networks_dir.join(inv.as_str()).join("tests.csv");
        if !tests_path.is_file() {
            return Err(Error::MissingUpstream(tests_path));
        }
        let tests = read_tests(&tests_path)?;
        for &alpha in &cfg.alpha_grid {
            rep.thresholds.push(ThresholdCell {
                investor: inv,
                alpha,
                n_edges: count_significant(&tests, alpha, cfg.p_method)?,
            });
        }
    }
    Ok(rep)
}

pub(super) fn stage(ctx: &Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let panel = ctx.panel()?;
    let rep = robustness_suite(panel, cfg, &ctx.path("networks"))?;
    let dir = ctx.dir("robustness")?;

    let mut w = csv::Writer::from_path(dir.join("subperiod.csv"))?;
    w.write_record(["investor", "subperiod", "start", "end", "raw_density"])?;
    for c in &rep.subperiods {
        w.write_record([
            c.investor.as_str().to_string(),
            c.label.clone(),
            c.start.to_string(),
            c.end.to_string(),
            opt(c.raw_density),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("size.csv"))?;
    w.write_record(["investor", "size_quintile", "n_stocks", "raw_density"])?;
    for c in &rep.size {
        w.write_record([
            c.investor.as_str().to_string(),
            c.quintile.to_string(),
            c.n_stocks.to_string(),
            opt(c.raw_density),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("method.csv"))?;
    w.write_record(["investor", "method", "mean_te_bits", "n_pairs"])?;
    for c in &rep.methods {
        let m = match c.method {
            TeMethod::Symbolic => "symbolic",
            TeMethod::Ksg => "ksg",
        };
        w.write_record([
            c.investor.as_str().to_string(),
            m.to_string(),
            opt(c.mean_te_bits),
            c.n_pairs.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("threshold.csv"))?;
    w.write_record(["investor", "alpha", "n_edges"])?;
    for c in &rep.thresholds {
        w.write_record([c.investor.as_str().to_string(), num(c.alpha), c.n_edges.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
