use std::collections::HashMap;
use std::path::Path;

use serde::Serialize;

use super::{num, opt, write_json, Ctx};
use crate::bounds::{signal_return_mi, write_bounds_csv, BoundsRow};
use crate::config::CentralityColumn;
use crate::cross_section::{fama_macbeth, portfolio_compare, quintile_sort, write_fm_csv, FmRecord, FmRow};
use crate::error::{Error, Result};
use crate::higher_order::{directionality_index, ii_cross_section, DirectionalityResult, IiInput};
use crate::network::{
    bellwether_ranking, centralities, edge_weight_comparison, estimate_te_network, network_stats,
    raw_te_matrix, rolling_density, NetworkStats, SignalMatrix, TeNetwork,
};
use crate::panel::{compute_returns, load_panel, ColumnMapping, FlowPanel, InvestorType, ReturnPanel, SignalField};
use crate::synth::gen_planted_panel;
use crate::util;

pub(super) fn synth(ctx: &Ctx) -> Result<()> {
    let spec = ctx
        .cfg
        .synthetic
        .as_ref()
        .ok_or_else(|| Error::Config("no `synthetic` section".into()))?;
    let planted = gen_planted_panel(spec)?;
    let dir = ctx.dir("synth")?;
    planted.panel.write_csv(&dir.join("panel.csv"), &ColumnMapping::default())?;
    planted.truth.write_json(&dir.join("ground_truth.json"))
}

#[derive(Serialize)]
struct IngestSummary<'a> {
    config_hash: &'a str,
    n_records: usize,
    n_tickers: usize,
    n_dates: usize,
    first_date: Option<String>,
    last_date: Option<String>,
    n_missing_cells: usize,
    return_flagged: Vec<String>,
    signals_derived: bool,
    signals_zscored: bool,
}

pub(super) fn ingest(ctx: &Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let mut panel = if cfg.synthetic.is_some() {
        load_panel(&ctx.upstream("synth/panel.csv")?, &ColumnMapping::default())?
    } else {
        let input = cfg.input.as_ref().ok_or_else(|| Error::Config("no `input` panel".into()))?;
        load_panel(input, &cfg.columns)?
    };
    if cfg.derive_signals {
        panel = panel.derive_signals_fallback();
    }
    if cfg.zscore_signals {
        panel = panel.zscore_signals();
    }
    let dir = ctx.dir("ingest")?;
    panel.write_csv(&dir.join("panel.csv"), &ColumnMapping::default())?;
    let align = panel.alignment_report();
    let returns = compute_returns(&panel);
    write_json(
        &dir.join("summary.json"),
        &IngestSummary {
            config_hash: &ctx.hash,
            n_records: align.n_records,
            n_tickers: panel.n_tickers(),
            n_dates: panel.n_dates(),
            first_date: panel.dates().first().map(|d| d.to_string()),
            last_date: panel.dates().last().map(|d| d.to_string()),
            n_missing_cells: align.missing.len(),
            return_flagged: returns.flagged,
            signals_derived: cfg.derive_signals,
            signals_zscored: cfg.zscore_signals,
        },
    )?;
    ctx.set_panel(panel);
    Ok(())
}

#[derive(Serialize)]
struct NetworkReport<'a> {
    config_hash: &'a str,
    investor: &'a str,
    signal: &'a str,
    n_tested: usize,
    alpha: f64,
    #[serde(flatten)]
    stats: NetworkStats,
}

pub(super) fn te_network(ctx: &Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let panel = ctx.panel()?;
    let disc = cfg.discretization();
    let root = ctx.dir("networks")?;
    let mut nets: Vec<(InvestorType, TeNetwork)> = Vec::new();

    let mut table = csv::Writer::from_path(root.join("network_stats.csv"))?;
    table.write_record([
        "investor",
        "signal",
        "n_nodes",
        "n_tested",
        "n_edges",
        "density",
        "mean_te",
        "max_te",
        "median_te",
        "mean_clustering",
    ])?;
    let mut lag_w = csv::Writer::from_path(root.join("lag_profile.csv"))?;
    lag_w.write_record(["investor", "lag", "mean_te", "sd_te", "n_pairs"])?;
    let mut roll_w = csv::Writer::from_path(root.join("rolling_density.csv"))?;
    roll_w.write_record(["investor", "end_date", "n_edges", "density"])?;

    for &inv in &cfg.investors {
        let field = cfg.target_field.resolve(inv);
        let signals = SignalMatrix::from_panel(panel, inv, field);
        let symbols = signals.symbolize(&disc);
        let mut spec = cfg.network_spec();
        spec.surrogate.seed = util::derive_seed(cfg.seed, &["te-network", inv.as_str()]);
        let net = estimate_te_network(&symbols, &signals.labels, &spec)?;

        let dir = ctx.dir(&format!("networks/{}", inv.as_str()))?;
        net.write_edges_csv(&dir.join("edges.csv"))?;
        net.write_tests_csv(&dir.join("tests.csv"))?;
        let cent = centralities(&net.graph);
        cent.write_csv(&dir.join("centrality.csv"))?;
        let top = bellwether_ranking(&cent, cfg.top_k.min(cent.len()))?;
        let mut bw = csv::Writer::from_path(dir.join("bellwethers.csv"))?;
        for b in &top {
            bw.serialize(b)?;
        }
        if top.is_empty() {
            bw.write_record(["rank", "ticker", "out_degree", "weighted_out_degree", "pagerank", "betweenness"])?;
        }
        bw.flush()?;

        let stats = network_stats(&net.graph);
        write_json(
            &dir.join("network_stats.json"),
            &NetworkReport {
                config_hash: &ctx.hash,
                investor: inv.as_str(),
                signal: field.as_str(),
                n_tested: net.n_tested(),
                alpha: net.alpha,
                stats,
            },
        )?;
        table.write_record([
            inv.as_str().to_string(),
            field.as_str().to_string(),
            stats.n_nodes.to_string(),
            net.n_tested().to_string(),
            stats.n_edges.to_string(),
            num(stats.density),
            num(stats.mean_te),
            num(stats.max_te),
            num(stats.median_te),
            num(stats.mean_clustering),
        ])?;

        for &lag in &cfg.lag_grid {
            let m = raw_te_matrix(&symbols, &spec.te.with_lag(lag))?;
            let vals: Vec<f64> = m.off_diagonal().filter_map(|(_, _, v)| *v).collect();
            let (mean, sd) = if vals.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                (util::mean(&vals), util::sample_sd(&vals))
            };
            lag_w.write_record([
                inv.as_str().to_string(),
                lag.to_string(),
                num(mean),
                num(sd),
                vals.len().to_string(),
            ])?;
        }

        if cfg.rolling_window <= signals.n_dates() {
            for p in rolling_density(&signals, &disc, &spec, cfg.rolling_window, cfg.rolling_step)? {
                roll_w.write_record([
                    inv.as_str().to_string(),
                    p.end_date.to_string(),
                    p.n_edges.to_string(),
                    num(p.density),
                ])?;
            }
        } else {
            log::warn!(
                "rolling window {} exceeds the {} available dates; no rolling density for {}",
                cfg.rolling_window,
                signals.n_dates(),
                inv.as_str()
            );
        }
        nets.push((inv, net));
    }
    table.flush()?;
    lag_w.flush()?;
    roll_w.flush()?;

    let mut cmp = csv::Writer::from_path(root.join("comparison.csv"))?;
    cmp.write_record(["investor_a", "investor_b", "u", "p_value", "exact"])?;
    for (i, (a, ga)) in nets.iter().enumerate() {
        for (b, gb) in &nets[i + 1..] {
            let (u, p, exact) = match edge_weight_comparison(&ga.graph, &gb.graph) {
                Ok(mw) => (num(mw.u), num(mw.p_value), mw.exact.to_string()),
                Err(e) => {
                    log::warn!("edge-weight comparison {} vs {}: {e}", a.as_str(), b.as_str());
                    (String::new(), String::new(), String::new())
                }
            };
            cmp.write_record([a.as_str().to_string(), b.as_str().to_string(), u, p, exact])?;
        }
    }
    cmp.flush()?;
    Ok(())
}

fn investor_pairs(investors: &[InvestorType]) -> Vec<(InvestorType, InvestorType)> {
    let mut out = Vec::new();
    for (i, &a) in investors.iter().enumerate() {
        for &b in &investors[i + 1..] {
            out.push((a, b));
        }
    }
    out
}

/// Equal-weighted cross-sectional mean of a signal per date.
fn mean_signal(panel: &FlowPanel, inv: InvestorType, field: SignalField) -> Vec<Option<f64>> {
    let series: Vec<Vec<Option<f64>>> = (0..panel.n_tickers()).map(|t| panel.signal_series(t, inv, field)).collect();
    (0..panel.n_dates())
        .map(|d| {
            let v: Vec<f64> = series.iter().filter_map(|s| s[d]).collect();
            (!v.is_empty()).then(|| util::mean(&v))
        })
        .collect()
}

#[derive(Serialize)]
struct DirectionalityEntry {
    investor_a: String,
    investor_b: String,
    n_obs: usize,
    result: Option<DirectionalityResult>,
    error: Option<String>,
}

#[derive(Serialize)]
struct DirectionalityReport<'a> {
    config_hash: &'a str,
    units: &'static str,
    pairs: Vec<DirectionalityEntry>,
}

pub(super) fn higher_order(ctx: &Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let panel = ctx.panel()?;
    let returns = compute_returns(panel);
    let disc = cfg.discretization();
    let dir = ctx.dir("higher_order")?;
    let market = returns.market_return();

    let mut summary = csv::Writer::from_path(dir.join("ii_summary.csv"))?;
    summary.write_record([
        "investor_a",
        "investor_b",
        "mean_ii",
        "median_ii",
        "pct_synergy",
        "mi_a_r",
        "mi_b_r",
        "t_stat",
        "p_value",
        "n_stocks",
        "n_skipped",
    ])?;
    let mut entries = Vec::new();
    for (a, b) in investor_pairs(&cfg.investors) {
        let inputs: Vec<IiInput> = (0..panel.n_tickers())
            .map(|t| IiInput {
                ticker: panel.tickers()[t].clone(),
                a: panel.signal_series(t, a, a.matched_signal()),
                b: panel.signal_series(t, b, b.matched_signal()),
                r_next: returns.next_return[t].clone(),
            })
            .collect();
        let pair = [a.as_str(), b.as_str()];
        match ii_cross_section(&inputs, &disc) {
            Ok(res) => {
                let mut w = csv::Writer::from_path(dir.join(format!("ii_{}_{}.csv", pair[0], pair[1])))?;
                w.write_record(["ticker", "ii_bits", "mi_a_r", "mi_b_r", "n_obs"])?;
                for s in &res.per_stock {
                    w.write_record([
                        s.ticker.clone(),
                        num(s.ii_bits),
                        num(s.mi_a_r),
                        num(s.mi_b_r),
                        s.n_obs.to_string(),
                    ])?;
                }
                w.flush()?;
                summary.write_record([
                    pair[0].to_string(),
                    pair[1].to_string(),
                    num(res.mean_ii),
                    num(res.median_ii),
                    num(res.pct_synergy),
                    num(res.mi_a_r),
                    num(res.mi_b_r),
                    opt(res.t_stat),
                    opt(res.t_p_value),
                    res.per_stock.len().to_string(),
                    res.skipped.len().to_string(),
                ])?;
            }
            Err(e) => {
                log::warn!("interaction information {} / {}: {e}", pair[0], pair[1]);
                let mut row = vec![pair[0].to_string(), pair[1].to_string()];
                row.extend(std::iter::repeat_n(String::new(), 7));
                row.extend(["0".to_string(), panel.n_tickers().to_string()]);
                summary.write_record(row)?;
            }
        }

        let sa = mean_signal(panel, a, a.matched_signal());
        let sb = mean_signal(panel, b, b.matched_signal());
        let (mut xa, mut xb, mut xr) = (Vec::new(), Vec::new(), Vec::new());
        for d in 1..panel.n_dates() {
            if let (Some(va), Some(vb), Some(r)) = (sa[d], sb[d], market[d - 1]) {
                xa.push(va);
                xb.push(vb);
                xr.push(r);
            }
        }
        let boot = cfg.bootstrap_spec(util::derive_seed(cfg.seed, &["directionality", pair[0], pair[1]]));
        let (result, error) = match directionality_index(&xa, &xb, &xr, &cfg.ksg_config(), &boot) {
            Ok(r) => (Some(r), None),
            Err(e) => {
                log::warn!("directionality {} / {}: {e}", pair[0], pair[1]);
                (None, Some(e.to_string()))
            }
        };
        entries.push(DirectionalityEntry {
            investor_a: pair[0].into(),
            investor_b: pair[1].into(),
            n_obs: xa.len().saturating_sub(1),
            result,
            error,
        });
    }
    summary.flush()?;
    write_json(
        &dir.join("directionality.json"),
        &DirectionalityReport {
            config_hash: &ctx.hash,
            units: "nats",
            pairs: entries,
        },
    )
}

/// Per-date rows of `(signal[t], centrality, ret_next[t])` for stocks with
/// all three available.
fn fm_periods(
    panel: &FlowPanel,
    returns: &ReturnPanel,
    inv: InvestorType,
    field: SignalField,
    centrality: &[Option<f64>],
) -> Vec<Vec<FmRow>> {
    let series: Vec<Vec<Option<f64>>> = (0..panel.n_tickers()).map(|t| panel.signal_series(t, inv, field)).collect();
    (0..panel.n_dates())
        .map(|d| {
            (0..panel.n_tickers())
                .filter_map(|t| {
                    Some(FmRow {
                        signal: series[t][d]?,
                        centrality: centrality[t]?,
                        ret_next: returns.next_return[t][d]?,
                    })
                })
                .collect()
        })
        .collect()
}

/// `s · (1 + c / max c)` per stock, so zero-centrality stocks still sort by signal.
fn interaction_scores(rows: &[FmRow]) -> Vec<(f64, f64)> {
    let cmax = rows.iter().map(|r| r.centrality).fold(0.0, f64::max);
    rows.iter()
        .map(|r| {
            let boost = if cmax > 0.0 { 1.0 + r.centrality / cmax } else { 1.0 };
            (r.signal * boost, r.ret_next)
        })
        .collect()
}

const BOUNDS_SIGNALS: [SignalField; 2] = [SignalField::SMc, SignalField::STv];

pub(super) fn bounds(ctx: &Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let panel = ctx.panel()?;
    let returns = compute_returns(panel);
    let disc = cfg.discretization();
    let zeros = vec![Some(0.0); panel.n_tickers()];
    let mut rows = Vec::new();
    for &inv in &cfg.investors {
        for field in BOUNDS_SIGNALS {
            let periods = fm_periods(panel, &returns, inv, field, &zeros);
            let (x, r): (Vec<f64>, Vec<f64>) = periods.iter().flatten().map(|p| (p.signal, p.ret_next)).unzip();
            let mi = match signal_return_mi(&x, &r, &disc, cfg.return_binning) {
                Ok(mi) => mi,
                Err(e) => {
                    log::warn!("bounds {} {}: {e}", inv.as_str(), field.as_str());
                    continue;
                }
            };
            let ann = portfolio_compare(&periods, cfg.periods_per_year)
                .map(|p| p.ann_return_signal_only / 100.0)
                .unwrap_or(f64::NAN);
            rows.push(BoundsRow::compute(
                inv.as_str(),
                field.as_str(),
                &mi,
                ann,
                cfg.return_binning.n_classes(),
                &cfg.risk_free(),
                &cfg.kelly_units(),
            )?);
        }
    }
    write_bounds_csv(&rows, &ctx.dir("bounds")?.join("bounds.csv"))
}

/// One centrality column from a network stage `centrality.csv`, aligned to `tickers`.
pub(super) fn read_centrality(path: &Path, col: CentralityColumn, tickers: &[String]) -> Result<Vec<Option<f64>>> {
    let name = match col {
        CentralityColumn::OutDegree => "out_degree",
        CentralityColumn::InDegree => "in_degree",
        CentralityColumn::WeightedOutDegree => "weighted_out_degree",
        CentralityColumn::Betweenness => "betweenness",
        CentralityColumn::Closeness => "closeness",
        CentralityColumn::Pagerank => "pagerank",
    };
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let ti = headers.iter().position(|h| h == "ticker");
    let ci = headers.iter().position(|h| h == name);
    let (Some(ti), Some(ci)) = (ti, ci) else {
        return Err(Error::domain(format!("{}: missing ticker or {name} column", path.display())));
    };
    let mut map = HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let v: f64 = rec[ci]
            .parse()
            .map_err(|_| Error::domain(format!("{}: bad {name} value `{}`", path.display(), &rec[ci])))?;
        map.insert(rec[ti].to_string(), v);
    }
    Ok(tickers.iter().map(|t| map.get(t).copied()).collect())
}

pub(super) fn cross_section(ctx: &Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let panel = ctx.panel()?;
    let returns = compute_returns(panel);
    let dir = ctx.dir("cross_section")?;
    let fm_spec = cfg.fm_spec();
    let mut fm_rows = Vec::new();
    let mut quint = csv::Writer::from_path(dir.join("quintiles.csv"))?;
    quint.write_record(["investor", "signal", "quintile", "mean_return", "sharpe", "t_stat", "n_periods"])?;
    let mut port = csv::Writer::from_path(dir.join("portfolio.csv"))?;
    port.write_record([
        "investor",
        "signal",
        "ann_return_signal_only",
        "ann_return_network_enhanced",
        "improvement_pp",
        "n_periods",
    ])?;

    for &inv in &cfg.investors {
        let cpath = ctx.upstream(&format!("networks/{}/centrality.csv", inv.as_str()))?;
        let cent = read_centrality(&cpath, cfg.fm_centrality, panel.tickers())?;
        for field in BOUNDS_SIGNALS {
            let periods = fm_periods(panel, &returns, inv, field, &cent);
            let rec = match fama_macbeth(&periods, &fm_spec) {
                Ok(r) => FmRecord::new(inv.as_str(), field.as_str(), &r),
                Err(e) => {
                    log::warn!("Fama-MacBeth {} {}: {e}", inv.as_str(), field.as_str());
                    FmRecord::unavailable(inv.as_str(), field.as_str())
                }
            };
            fm_rows.push(rec);
        }

        let field = inv.matched_signal();
        let periods = fm_periods(panel, &returns, inv, field, &cent);
        let scored: Vec<Vec<(f64, f64)>> = periods.iter().map(|rows| interaction_scores(rows)).collect();
        match quintile_sort(&scored) {
            Ok(q) => {
                for k in 0..5 {
                    quint.write_record([
                        inv.as_str().to_string(),
                        field.as_str().to_string(),
                        format!("Q{}", k + 1),
                        num(q.mean_return[k]),
                        num(q.sharpe[k]),
                        String::new(),
                        q.n_periods.to_string(),
                    ])?;
                }
                quint.write_record([
                    inv.as_str().to_string(),
                    field.as_str().to_string(),
                    "Q5-Q1".to_string(),
                    num(q.spread_mean),
                    String::new(),
                    opt(q.spread_t),
                    q.n_periods.to_string(),
                ])?;
            }
            Err(e) => log::warn!("quintile sort {}: {e}", inv.as_str()),
        }
        match portfolio_compare(&periods, cfg.periods_per_year) {
            Ok(p) => port.write_record([
                inv.as_str().to_string(),
                field.as_str().to_string(),
                num(p.ann_return_signal_only),
                num(p.ann_return_network_enhanced),
                num(p.improvement_pp),
                p.n_periods.to_string(),
            ])?,
            Err(e) => log::warn!("portfolio comparison {}: {e}", inv.as_str()),
        }
    }
    quint.flush()?;
    port.flush()?;
    write_fm_csv(&fm_rows, &dir.join("fama_macbeth.csv"))
}
