use std::path::{Path, PathBuf};

use csv::StringRecord;
use serde::Serialize;

use super::{opt, Ctx};
use crate::error::Result;

pub const FIGURE_FILES: [&str; 9] = [
    "fig1_network_edges.csv",
    "fig2_centrality_distribution.csv",
    "fig3_te_distribution.csv",
    "fig4_interaction_information.csv",
    "fig5_directionality.csv",
    "fig6_kelly_quintiles.csv",
    "fig7_lag_profile.csv",
    "fig8_rolling_density.csv",
    "fig9_robustness.csv",
];

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct PlotDataReport {
    /// Figure files written, relative to the run directory.
    pub written: Vec<String>,
    /// Upstream reports that were absent; their figures are skipped.
    pub missing_upstream: Vec<String>,
}

struct Table {
    headers: StringRecord,
    rows: Vec<StringRecord>,
}

impl Table {
    fn read(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let headers = rdr.headers()?.clone();
        let rows = rdr.records().collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Self { headers, rows })
    }

    fn col(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }
}

struct Sources<'a> {
    run: &'a Path,
    missing: Vec<String>,
}

impl Sources<'_> {
    /// All of `rels` if present; otherwise record the absent ones and return `None`.
    fn require(&mut self, rels: &[String]) -> Option<Vec<PathBuf>> {
        let paths: Vec<PathBuf> = rels.iter().map(|r| self.run.join(r)).collect();
        let absent: Vec<String> = rels
            .iter()
            .zip(&paths)
            .filter(|(_, p)| !p.is_file())
            .map(|(r, _)| r.clone())
            .collect();
        if absent.is_empty() {
            Some(paths)
        } else {
            for a in absent {
                if !self.missing.contains(&a) {
                    self.missing.push(a);
                }
            }
            None
        }
    }
}

fn investors(run: &Path) -> Vec<String> {
    let mut out: Vec<String> = std::fs::read_dir(run.join("networks"))
        .map(|rd| {
            rd.filter_map(|e| e.ok())
                .filter(|e| e.path().is_dir())
                .map(|e| e.file_name().to_string_lossy().into_owned())
                .collect()
        })
        .unwrap_or_default();
    out.sort();
    out
}

fn ii_files(run: &Path) -> Vec<String> {
    let mut out: Vec<String> = std::fs::read_dir(run.join("higher_order"))
        .map(|rd| {
            rd.filter_map(|e| e.ok())
                .map(|e| e.file_name().to_string_lossy().into_owned())
                .filter(|n| n.starts_with("ii_") && n.ends_with(".csv") && n != "ii_summary.csv")
                .collect()
        })
        .unwrap_or_default();
    out.sort();
    out
}

fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn emit(fig_dir: &Path, written: &mut Vec<String>, idx: usize, header: &[&str], rows: Option<Vec<Vec<String>>>) -> Result<()> {
    if let Some(rows) = rows {
        write_rows(&fig_dir.join(FIGURE_FILES[idx]), header, &rows)?;
        written.push(format!("figures/{}", FIGURE_FILES[idx]));
    }
    Ok(())
}

fn fig_edges(src: &mut Sources, invs: &[String], significant_only: bool) -> Result<Option<Vec<Vec<String>>>> {
    let rels: Vec<String> = invs.iter().map(|i| format!("networks/{i}/edges.csv")).collect();
    if rels.is_empty() {
        src.require(&["networks/".to_string()]);
        return Ok(None);
    }
    let Some(paths) = src.require(&rels) else { return Ok(None) };
    let mut rows = Vec::new();
    for (inv, p) in invs.iter().zip(paths) {
        let t = Table::read(&p)?;
        let (Some(s), Some(g), Some(w), Some(f)) = (t.col("source"), t.col("target"), t.col("te_bits"), t.col("significant"))
        else {
            continue;
        };
        for r in &t.rows {
            if r[w].is_empty() || (significant_only && &r[f] != "true") {
                continue;
            }
            let mut row = vec![inv.clone(), r[s].to_string(), r[g].to_string(), r[w].to_string()];
            if !significant_only {
                row.push(r[f].to_string());
            }
            rows.push(row);
        }
    }
    Ok(Some(rows))
}

/// Write one CSV per figure under `run_dir/figures`, built only from the
/// reports already in `run_dir`. Figures whose inputs are absent are skipped
/// and their inputs listed in the result.
pub fn emit_plot_data(run_dir: &Path) -> Result<PlotDataReport> {
    let fig_dir = run_dir.join("figures");
    std::fs::create_dir_all(&fig_dir)?;
    let invs = investors(run_dir);
    let mut src = Sources {
        run: run_dir,
        missing: Vec::new(),
    };
    let mut written = Vec::new();

    emit(&fig_dir, &mut written, 0, &["investor", "source", "target", "te_bits"], fig_edges(&mut src, &invs, true)?)?;

    let rows = if invs.is_empty() {
        src.require(&["networks/".to_string()]);
        None
    } else {
        let rels: Vec<String> = invs.iter().map(|i| format!("networks/{i}/centrality.csv")).collect();
        match src.require(&rels) {
            Some(paths) => {
                let mut rows = Vec::new();
                for (inv, p) in invs.iter().zip(paths) {
                    for r in &Table::read(&p)?.rows {
                        rows.push(std::iter::once(inv.clone()).chain(r.iter().map(String::from)).collect());
                    }
                }
                Some(rows)
            }
            None => None,
        }
    };
    emit(&fig_dir, &mut written, 
        1,
        &[
            "investor",
            "ticker",
            "out_degree",
            "in_degree",
            "weighted_out_degree",
            "betweenness",
            "closeness",
            "pagerank",
        ],
        rows,
    )?;

    emit(&fig_dir, &mut written, 
        2,
        &["investor", "source", "target", "te_bits", "significant"],
        fig_edges(&mut src, &invs, false)?,
    )?;

    let rows = match src.require(&["higher_order/ii_summary.csv".to_string()]) {
        Some(_) => {
            let mut rows = Vec::new();
            for name in ii_files(run_dir) {
                let pair = name.trim_start_matches("ii_").trim_end_matches(".csv");
                let t = Table::read(&run_dir.join("higher_order").join(&name))?;
                let (Some(tk), Some(ii)) = (t.col("ticker"), t.col("ii_bits")) else { continue };
                for r in &t.rows {
                    rows.push(vec![pair.to_string(), r[tk].to_string(), r[ii].to_string()]);
                }
            }
            Some(rows)
        }
        None => None,
    };
    emit(&fig_dir, &mut written, 3, &["pair", "ticker", "ii_bits"], rows)?;

    let rows = match src.require(&["higher_order/directionality.json".to_string()]) {
        Some(p) => {
            let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&p[0])?)?;
            let mut rows = Vec::new();
            for e in v["pairs"].as_array().into_iter().flatten() {
                let r = &e["result"];
                let f = |k: &str| opt(r[k].as_f64());
                rows.push(vec![
                    e["investor_a"].as_str().unwrap_or_default().to_string(),
                    e["investor_b"].as_str().unwrap_or_default().to_string(),
                    f("cte_a_given_b"),
                    f("cte_b_given_a"),
                    f("d_index"),
                    f("ci_lo"),
                    f("ci_hi"),
                    f("p_value"),
                ]);
            }
            Some(rows)
        }
        None => None,
    };
    emit(&fig_dir, &mut written, 
        4,
        &["investor_a", "investor_b", "cte_a_given_b", "cte_b_given_a", "d_index", "ci_lo", "ci_hi", "p_value"],
        rows,
    )?;

    let rows = match src.require(&["bounds/bounds.csv".to_string(), "cross_section/quintiles.csv".to_string()]) {
        Some(p) => {
            let mut rows = Vec::new();
            let b = Table::read(&p[0])?;
            if let (Some(i), Some(s)) = (b.col("investor"), b.col("signal")) {
                for r in &b.rows {
                    for key in ["mi_bits", "kelly_rate", "ann_return", "bit_yield"] {
                        if let Some(k) = b.col(key) {
                            rows.push(vec!["kelly".into(), r[i].into(), r[s].into(), key.into(), r[k].into()]);
                        }
                    }
                }
            }
            let q = Table::read(&p[1])?;
            if let (Some(i), Some(s), Some(k), Some(m)) = (q.col("investor"), q.col("signal"), q.col("quintile"), q.col("mean_return")) {
                for r in &q.rows {
                    rows.push(vec!["quintile".into(), r[i].into(), r[s].into(), r[k].into(), r[m].into()]);
                }
            }
            Some(rows)
        }
        None => None,
    };
    emit(&fig_dir, &mut written, 5, &["panel", "investor", "signal", "key", "value"], rows)?;

    for (idx, rel) in [(6, "networks/lag_profile.csv"), (7, "networks/rolling_density.csv")] {
        if let Some(p) = src.require(&[rel.to_string()]) {
            std::fs::copy(&p[0], fig_dir.join(FIGURE_FILES[idx]))?;
            written.push(format!("figures/{}", FIGURE_FILES[idx]));
        }
    }

    let parts = [
        ("subperiod", "robustness/subperiod.csv", "subperiod", "raw_density"),
        ("size", "robustness/size.csv", "size_quintile", "raw_density"),
        ("method", "robustness/method.csv", "method", "mean_te_bits"),
        ("threshold", "robustness/threshold.csv", "alpha", "n_edges"),
    ];
    let rels: Vec<String> = parts.iter().map(|p| p.1.to_string()).collect();
    let rows = match src.require(&rels) {
        Some(paths) => {
            let mut rows = Vec::new();
            for ((panel, _, label, value), p) in parts.iter().zip(paths) {
                let t = Table::read(&p)?;
                let (Some(i), Some(l), Some(v)) = (t.col("investor"), t.col(label), t.col(value)) else { continue };
                for r in &t.rows {
                    rows.push(vec![panel.to_string(), r[i].into(), r[l].into(), r[v].into()]);
                }
            }
            Some(rows)
        }
        None => None,
    };
    emit(&fig_dir, &mut written, 8, &["panel", "investor", "label", "value"], rows)?;

    for m in &src.missing {
        log::warn!("plot data: upstream report {m} missing");
    }
    Ok(PlotDataReport {
        written,
        missing_upstream: src.missing,
    })
}

pub(super) fn stage(ctx: &Ctx) -> Result<()> {
    let rep = emit_plot_data(&ctx.out)?;
    if let Ok(mut m) = ctx.missing.lock() {
        m.extend(rep.missing_upstream);
    }
    Ok(())
}
