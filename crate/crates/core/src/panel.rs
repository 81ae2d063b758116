//! Stock × date investor-flow panels: CSV ingestion, validation, alignment,
//! next-day returns and quantile symbolization.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, RowIssue};
use crate::util;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InvestorType {
    Foreign,
    Institutional,
    Individual,
}

impl InvestorType {
    pub const ALL: [InvestorType; 3] = [
        InvestorType::Foreign,
        InvestorType::Institutional,
        InvestorType::Individual,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InvestorType::Foreign => "foreign",
            InvestorType::Institutional => "institutional",
            InvestorType::Individual => "individual",
        }
    }

    fn index(self) -> usize {
        self as usize
    }

    /// The signal each investor type is matched with: S_TV for foreign,
    /// S_MC for institutional and individual investors.
    pub fn matched_signal(self) -> SignalField {
        match self {
            InvestorType::Foreign => SignalField::STv,
            InvestorType::Institutional | InvestorType::Individual => SignalField::SMc,
        }
    }
}

impl fmt::Display for InvestorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InvestorType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "foreign" => Ok(InvestorType::Foreign),
            "institutional" => Ok(InvestorType::Institutional),
            "individual" => Ok(InvestorType::Individual),
            other => Err(Error::domain(format!("unknown investor type `{other}`"))),
        }
    }
}

/// Per-investor numeric columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalField {
    NetFlow,
    SMc,
    STv,
}

impl SignalField {
    pub fn as_str(self) -> &'static str {
        match self {
            SignalField::NetFlow => "net_flow",
            SignalField::SMc => "s_mc",
            SignalField::STv => "s_tv",
        }
    }
}

impl FromStr for SignalField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "net_flow" | "net_buy_volume" => Ok(SignalField::NetFlow),
            "s_mc" => Ok(SignalField::SMc),
            "s_tv" => Ok(SignalField::STv),
            other => Err(Error::domain(format!("unknown signal field `{other}`"))),
        }
    }
}

/// Per-stock market columns (shared by all investor types on a date).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarketField {
    Close,
    MarketCap,
    Volume,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowRecord {
    pub date: NaiveDate,
    pub ticker: String,
    pub investor_type: InvestorType,
    pub net_buy_volume: f64,
    pub close: f64,
    pub market_cap: f64,
    pub trading_volume: f64,
    pub s_mc: f64,
    pub s_tv: f64,
}

impl FlowRecord {
    pub fn signal(&self, field: SignalField) -> f64 {
        match field {
            SignalField::NetFlow => self.net_buy_volume,
            SignalField::SMc => self.s_mc,
            SignalField::STv => self.s_tv,
        }
    }

    pub fn market(&self, field: MarketField) -> f64 {
        match field {
            MarketField::Close => self.close,
            MarketField::MarketCap => self.market_cap,
            MarketField::Volume => self.trading_volume,
        }
    }

    fn check(&self) -> std::result::Result<(), String> {
        let mut problems = Vec::new();
        if !(self.close > 0.0) {
            problems.push(format!("close must be > 0 (got {})", self.close));
        }
        if !(self.market_cap > 0.0) {
            problems.push(format!("market_cap must be > 0 (got {})", self.market_cap));
        }
        if !(self.trading_volume >= 0.0) {
            problems.push(format!(
                "trading_volume must be >= 0 (got {})",
                self.trading_volume
            ));
        }
        for (name, v) in [
            ("net_buy_volume", self.net_buy_volume),
            ("s_mc", self.s_mc),
            ("s_tv", self.s_tv),
        ] {
            if !v.is_finite() {
                problems.push(format!("{name} must be finite (got {v})"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(problems.join("; "))
        }
    }
}

/// Maps logical fields onto CSV header names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMapping {
    pub date: String,
    pub ticker: String,
    pub investor_type: String,
    pub net_buy_volume: String,
    pub close: String,
    pub market_cap: String,
    pub trading_volume: String,
    pub s_mc: String,
    pub s_tv: String,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            date: "date".into(),
            ticker: "ticker".into(),
            investor_type: "investor_type".into(),
            net_buy_volume: "net_buy_volume".into(),
            close: "close".into(),
            market_cap: "market_cap".into(),
            trading_volume: "trading_volume".into(),
            s_mc: "s_mc".into(),
            s_tv: "s_tv".into(),
        }
    }
}

impl ColumnMapping {
    fn columns(&self) -> [&str; 9] {
        [
            &self.date,
            &self.ticker,
            &self.investor_type,
            &self.net_buy_volume,
            &self.close,
            &self.market_cap,
            &self.trading_volume,
            &self.s_mc,
            &self.s_tv,
        ]
    }
}

/// A validated, date-sorted panel. Cells are addressed as
/// (investor type, ticker, date) on the rectangular grid spanned by
/// `dates × tickers × InvestorType::ALL`; absent cells are explicitly missing.
#[derive(Debug, Clone)]
pub struct FlowPanel {
    records: Vec<FlowRecord>,
    dates: Vec<NaiveDate>,
    tickers: Vec<String>,
    cells: Vec<Option<usize>>,
}

impl FlowPanel {
    /// Validate and index a record set. Rows violating record invariants are
    /// all reported (by position) rather than dropped.
    pub fn from_records(records: Vec<FlowRecord>) -> Result<Self> {
        let issues: Vec<RowIssue> = records
            .iter()
            .enumerate()
            .filter_map(|(i, r)| {
                r.check().err().map(|message| RowIssue {
                    line: i as u64 + 1,
                    message,
                })
            })
            .collect();
        if !issues.is_empty() {
            return Err(Error::InvalidRows(issues));
        }
        Self::index(records)
    }

    fn index(mut records: Vec<FlowRecord>) -> Result<Self> {
        records.sort_by(|a, b| {
            (a.date, &a.ticker, a.investor_type).cmp(&(b.date, &b.ticker, b.investor_type))
        });
        for w in records.windows(2) {
            if (w[0].date, &w[0].ticker, w[0].investor_type)
                == (w[1].date, &w[1].ticker, w[1].investor_type)
            {
                return Err(Error::Integrity {
                    key: format!("({}, {}, {})", w[0].date, w[0].ticker, w[0].investor_type),
                });
            }
        }
        let dates: Vec<NaiveDate> = records
            .iter()
            .map(|r| r.date)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let tickers: Vec<String> = records
            .iter()
            .map(|r| r.ticker.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let date_pos: HashMap<NaiveDate, usize> =
            dates.iter().enumerate().map(|(i, d)| (*d, i)).collect();
        let ticker_pos: HashMap<&str, usize> = tickers
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i))
            .collect();
        let nd = dates.len();
        let nt = tickers.len();
        let mut cells = vec![None; 3 * nt * nd];
        for (ri, r) in records.iter().enumerate() {
            let ti = ticker_pos[r.ticker.as_str()];
            let di = date_pos[&r.date];
            cells[(r.investor_type.index() * nt + ti) * nd + di] = Some(ri);
        }
        let panel = FlowPanel {
            records,
            dates,
            tickers,
            cells,
        };
        panel.check_market_consistency()?;
        Ok(panel)
    }

    // Close, market cap and volume are stock-date attributes; all investor
    // rows for a (date, ticker) must agree on them.
    fn check_market_consistency(&self) -> Result<()> {
        for ti in 0..self.n_tickers() {
            for di in 0..self.n_dates() {
                let mut first: Option<&FlowRecord> = None;
                for inv in InvestorType::ALL {
                    if let Some(r) = self.record(inv, ti, di) {
                        match first {
                            None => first = Some(r),
                            Some(f) => {
                                if f.close != r.close
                                    || f.market_cap != r.market_cap
                                    || f.trading_volume != r.trading_volume
                                {
                                    return Err(Error::Integrity {
                                        key: format!(
                                            "({}, {}) has conflicting close/market_cap/trading_volume across investor types",
                                            r.date, r.ticker
                                        ),
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn records(&self) -> &[FlowRecord] {
        &self.records
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn n_tickers(&self) -> usize {
        self.tickers.len()
    }

    pub fn ticker_index(&self, ticker: &str) -> Option<usize> {
        self.tickers.binary_search_by(|t| t.as_str().cmp(ticker)).ok()
    }

    pub fn record(&self, inv: InvestorType, ticker: usize, date: usize) -> Option<&FlowRecord> {
        let nt = self.n_tickers();
        let nd = self.n_dates();
        self.cells[(inv.index() * nt + ticker) * nd + date].map(|i| &self.records[i])
    }

    /// Per-date values of an investor signal for one ticker; `None` where the cell is missing.
    pub fn signal_series(&self, ticker: usize, inv: InvestorType, field: SignalField) -> Vec<Option<f64>> {
        (0..self.n_dates())
            .map(|d| self.record(inv, ticker, d).map(|r| r.signal(field)))
            .collect()
    }

    /// Per-date market attribute for one ticker, read from any investor row present.
    pub fn market_series(&self, ticker: usize, field: MarketField) -> Vec<Option<f64>> {
        (0..self.n_dates())
            .map(|d| {
                InvestorType::ALL
                    .iter()
                    .find_map(|&inv| self.record(inv, ticker, d))
                    .map(|r| r.market(field))
            })
            .collect()
    }

    /// Enumerates the grid cells with no record.
    pub fn alignment_report(&self) -> AlignmentReport {
        let mut missing = Vec::new();
        for inv in InvestorType::ALL {
            for ti in 0..self.n_tickers() {
                for di in 0..self.n_dates() {
                    if self.record(inv, ti, di).is_none() {
                        missing.push(MissingCell {
                            date: self.dates[di],
                            ticker: self.tickers[ti].clone(),
                            investor_type: inv,
                        });
                    }
                }
            }
        }
        AlignmentReport {
            n_records: self.records.len(),
            n_cells: self.cells.len(),
            missing,
        }
    }

    /// Sub-panel restricted to dates in `[start, end]` (inclusive).
    pub fn slice_dates(&self, start: NaiveDate, end: NaiveDate) -> Result<FlowPanel> {
        let records: Vec<FlowRecord> = self
            .records
            .iter()
            .filter(|r| r.date >= start && r.date <= end)
            .cloned()
            .collect();
        Self::index(records)
    }

    /// Sub-panel restricted to the given tickers.
    pub fn select_tickers(&self, tickers: &[String]) -> Result<FlowPanel> {
        let keep: BTreeSet<&str> = tickers.iter().map(String::as_str).collect();
        let records = self
            .records
            .iter()
            .filter(|r| keep.contains(r.ticker.as_str()))
            .cloned()
            .collect();
        Self::index(records)
    }

    /// Per-date cross-sectional z-score of `s_mc` and `s_tv` within each investor type.
    pub fn zscore_signals(&self) -> FlowPanel {
        let mut out = self.clone();
        for inv in InvestorType::ALL {
            for di in 0..self.n_dates() {
                for field in [SignalField::SMc, SignalField::STv] {
                    let idx: Vec<usize> = (0..self.n_tickers())
                        .filter_map(|ti| self.cells[(inv.index() * self.n_tickers() + ti) * self.n_dates() + di])
                        .collect();
                    let vals: Vec<f64> = idx.iter().map(|&i| self.records[i].signal(field)).collect();
                    let m = util::mean(&vals);
                    let sd = util::sample_sd(&vals);
                    for &i in &idx {
                        let v = self.records[i].signal(field);
                        let z = if sd.is_finite() && sd > 0.0 { (v - m) / sd } else { 0.0 };
                        match field {
                            SignalField::SMc => out.records[i].s_mc = z,
                            SignalField::STv => out.records[i].s_tv = z,
                            SignalField::NetFlow => unreachable!(),
                        }
                    }
                }
            }
        }
        out
    }

    /// Non-canonical fallback for panels lacking signal columns: per date and
    /// investor type, the fitted value of a cross-sectional OLS of net flow on
    /// rank(market_cap) becomes `s_mc`, and on rank(trading_volume) becomes `s_tv`.
    pub fn derive_signals_fallback(&self) -> FlowPanel {
        let mut out = self.clone();
        let nt = self.n_tickers();
        let nd = self.n_dates();
        for inv in InvestorType::ALL {
            for di in 0..nd {
                let idx: Vec<usize> = (0..nt)
                    .filter_map(|ti| self.cells[(inv.index() * nt + ti) * nd + di])
                    .collect();
                if idx.is_empty() {
                    continue;
                }
                let flow: Vec<f64> = idx.iter().map(|&i| self.records[i].net_buy_volume).collect();
                for (field, market) in [
                    (SignalField::SMc, MarketField::MarketCap),
                    (SignalField::STv, MarketField::Volume),
                ] {
                    let reg: Vec<f64> = idx.iter().map(|&i| self.records[i].market(market)).collect();
                    let rank: Vec<f64> = util::midranks(&reg);
                    let fitted = simple_ols_fit(&rank, &flow);
                    for (k, &i) in idx.iter().enumerate() {
                        match field {
                            SignalField::SMc => out.records[i].s_mc = fitted[k],
                            SignalField::STv => out.records[i].s_tv = fitted[k],
                            SignalField::NetFlow => unreachable!(),
                        }
                    }
                }
            }
        }
        out
    }

    /// Write the panel in the canonical input schema.
    pub fn write_csv(&self, path: &Path, schema: &ColumnMapping) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(schema.columns())?;
        for r in &self.records {
            w.write_record([
                r.date.format("%Y-%m-%d").to_string(),
                r.ticker.clone(),
                r.investor_type.to_string(),
                format_num(r.net_buy_volume),
                format_num(r.close),
                format_num(r.market_cap),
                format_num(r.trading_volume),
                format_num(r.s_mc),
                format_num(r.s_tv),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn format_num(v: f64) -> String {
    // Shortest round-trip representation.
    format!("{v:?}")
}

fn simple_ols_fit(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mx = util::mean(x);
    let my = util::mean(y);
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    x.iter().map(|v| my + slope * (v - mx)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MissingCell {
    pub date: NaiveDate,
    pub ticker: String,
    pub investor_type: InvestorType,
}

#[derive(Debug, Clone, Serialize)]
pub struct AlignmentReport {
    pub n_records: usize,
    pub n_cells: usize,
    pub missing: Vec<MissingCell>,
}

/// Load and validate a panel CSV.
pub fn load_panel(path: &Path, schema: &ColumnMapping) -> Result<FlowPanel> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = rdr.headers()?.clone();
    let mut pos = [0usize; 9];
    for (slot, name) in pos.iter_mut().zip(schema.columns()) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn {
                column: name.to_string(),
            })?;
    }
    let cols = schema.columns();
    let mut records = Vec::new();
    let mut issues = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let cell = |k: usize| row.get(pos[k]).unwrap_or("");
        let num = |k: usize| -> Result<f64> {
            cell(k).parse::<f64>().map_err(|e| Error::Row {
                line,
                column: cols[k].to_string(),
                message: format!("cannot parse `{}` as a number: {e}", cell(k)),
            })
        };
        let date = NaiveDate::parse_from_str(cell(0), "%Y-%m-%d").map_err(|e| Error::Row {
            line,
            column: cols[0].to_string(),
            message: format!("cannot parse `{}` as an ISO-8601 date: {e}", cell(0)),
        })?;
        let ticker = cell(1).to_string();
        if ticker.is_empty() {
            return Err(Error::Row {
                line,
                column: cols[1].to_string(),
                message: "empty ticker".into(),
            });
        }
        let investor_type = cell(2).parse::<InvestorType>().map_err(|e| Error::Row {
            line,
            column: cols[2].to_string(),
            message: e.to_string(),
        })?;
        let rec = FlowRecord {
            date,
            ticker,
            investor_type,
            net_buy_volume: num(3)?,
            close: num(4)?,
            market_cap: num(5)?,
            trading_volume: num(6)?,
            s_mc: num(7)?,
            s_tv: num(8)?,
        };
        if let Err(message) = rec.check() {
            issues.push(RowIssue { line, message });
        }
        records.push(rec);
    }
    if !issues.is_empty() {
        return Err(Error::InvalidRows(issues));
    }
    FlowPanel::index(records)
}

/// Simple next-day returns on the panel's date grid.
#[derive(Debug, Clone)]
pub struct ReturnPanel {
    pub tickers: Vec<String>,
    pub dates: Vec<NaiveDate>,
    /// `next_return[ticker][t] = close[t+1] / close[t] - 1`.
    pub next_return: Vec<Vec<Option<f64>>>,
    /// Tickers for which no return could be formed (fewer than two prices).
    pub flagged: Vec<String>,
}

impl ReturnPanel {
    /// Equal-weighted cross-sectional mean of next-day returns per date.
    pub fn market_return(&self) -> Vec<Option<f64>> {
        (0..self.dates.len())
            .map(|d| {
                let v: Vec<f64> = self.next_return.iter().filter_map(|s| s[d]).collect();
                if v.is_empty() { None } else { Some(util::mean(&v)) }
            })
            .collect()
    }
}

pub fn compute_returns(panel: &FlowPanel) -> ReturnPanel {
    let mut next_return = Vec::with_capacity(panel.n_tickers());
    let mut flagged = Vec::new();
    for ti in 0..panel.n_tickers() {
        let close = panel.market_series(ti, MarketField::Close);
        let series = returns_from_prices(&close);
        if series.iter().all(Option::is_none) {
            flagged.push(panel.tickers()[ti].clone());
        }
        next_return.push(series);
    }
    ReturnPanel {
        tickers: panel.tickers().to_vec(),
        dates: panel.dates().to_vec(),
        next_return,
        flagged,
    }
}

/// `r[t] = p[t+1]/p[t] - 1` where both prices are present; the last entry is always missing.
pub fn returns_from_prices(prices: &[Option<f64>]) -> Vec<Option<f64>> {
    let n = prices.len();
    (0..n)
        .map(|t| match (prices[t], prices.get(t + 1).copied().flatten()) {
            (Some(p0), Some(p1)) => Some(p1 / p0 - 1.0),
            _ => None,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscretizationSpec {
    pub n_symbols: u32,
}

impl Default for DiscretizationSpec {
    fn default() -> Self {
        Self { n_symbols: 5 }
    }
}

/// A series over the alphabet `0..n_symbols`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolSeries {
    pub symbols: Vec<u32>,
    pub n_symbols: u32,
    pub source_id: String,
}

impl SymbolSeries {
    pub fn new(symbols: Vec<u32>, n_symbols: u32) -> Result<Self> {
        if n_symbols < 1 {
            return Err(Error::domain("alphabet must be non-empty"));
        }
        if let Some(&s) = symbols.iter().find(|&&s| s >= n_symbols) {
            return Err(Error::domain(format!(
                "symbol {s} outside alphabet of size {n_symbols}"
            )));
        }
        Ok(Self {
            symbols,
            n_symbols,
            source_id: String::new(),
        })
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.source_id = id.into();
        self
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// Rank-based quantile binning: value with (tie-minimal) rank `r` out of `n`
/// maps to bin `floor(r * n_symbols / n)`. Bins are left-closed and ties go
/// to the lower bin.
pub fn symbolize(series: &[f64], spec: &DiscretizationSpec) -> Result<SymbolSeries> {
    if spec.n_symbols < 2 {
        return Err(Error::domain("n_symbols must be at least 2"));
    }
    if series.len() < spec.n_symbols as usize {
        return Err(Error::SampleSize {
            required: spec.n_symbols as usize,
            actual: series.len(),
        });
    }
    if let Some(v) = series.iter().find(|v| !v.is_finite()) {
        return Err(Error::domain(format!("non-finite value {v} in series")));
    }
    let first = series[0];
    if series.iter().all(|&v| v == first) {
        return Err(Error::Degenerate(
            "all values identical; cannot symbolize a zero-entropy series".into(),
        ));
    }
    let n = series.len() as u64;
    let k = spec.n_symbols as u64;
    let symbols = util::min_ranks(series)
        .into_iter()
        .map(|r| ((r as u64 * k) / n) as u32)
        .collect();
    Ok(SymbolSeries {
        symbols,
        n_symbols: spec.n_symbols,
        source_id: String::new(),
    })
}

/// Symbolize the present entries of a gappy series, leaving gaps as `None`.
pub fn symbolize_sparse(series: &[Option<f64>], spec: &DiscretizationSpec) -> Result<Vec<Option<u32>>> {
    let present: Vec<f64> = series.iter().filter_map(|v| *v).collect();
    let sym = symbolize(&present, spec)?;
    let mut it = sym.symbols.into_iter();
    Ok(series
        .iter()
        .map(|v| v.map(|_| it.next().expect("one symbol per present value")))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    const HEADER: &str = "date,ticker,investor_type,net_buy_volume,close,market_cap,trading_volume,s_mc,s_tv\n";

    fn grid_csv(n_tickers: usize, n_days: usize) -> String {
        let mut s = HEADER.to_string();
        for d in 0..n_days {
            for t in 0..n_tickers {
                for inv in ["foreign", "institutional", "individual"] {
                    s.push_str(&format!(
                        "2024-01-{:02},T{t},{inv},{},{},{},{},{},{}\n",
                        d + 1,
                        (d * 7 + t) as f64 - 3.0,
                        100.0 + d as f64,
                        1e6,
                        1000.0,
                        0.1 * d as f64,
                        -0.2 * t as f64
                    ));
                }
            }
        }
        s
    }

    #[test]
    fn well_formed_csv_loads_all_records() {
        let f = write_tmp(&grid_csv(3, 5));
        let p = load_panel(f.path(), &ColumnMapping::default()).unwrap();
        assert_eq!(p.records().len(), 45);
        assert_eq!(p.n_tickers(), 3);
        assert_eq!(p.n_dates(), 5);
        assert!(p.dates().windows(2).all(|w| w[0] < w[1]));
        assert!(p.alignment_report().missing.is_empty());
    }

    #[test]
    fn duplicate_key_is_an_integrity_error() {
        let mut s = grid_csv(1, 2);
        s.push_str("2024-01-01,T0,foreign,1,100,1000000,1000,0,0\n");
        let f = write_tmp(&s);
        match load_panel(f.path(), &ColumnMapping::default()) {
            Err(Error::Integrity { key }) => {
                assert!(key.contains("2024-01-01") && key.contains("T0") && key.contains("foreign"))
            }
            other => panic!("expected integrity error, got {other:?}"),
        }
    }

    #[test]
    fn missing_column_is_a_schema_error() {
        let f = write_tmp("date,ticker\n2024-01-01,A\n");
        assert!(matches!(
            load_panel(f.path(), &ColumnMapping::default()),
            Err(Error::MissingColumn { .. })
        ));
    }

    #[test]
    fn unparseable_cell_reports_location() {
        let s = format!("{HEADER}2024-01-01,A,foreign,abc,1,1,1,0,0\n");
        let f = write_tmp(&s);
        match load_panel(f.path(), &ColumnMapping::default()) {
            Err(Error::Row { line, column, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(column, "net_buy_volume");
            }
            other => panic!("expected row error, got {other:?}"),
        }
    }

    #[test]
    fn invariant_violations_are_listed_with_lines() {
        let s = format!(
            "{HEADER}2024-01-01,A,foreign,1,-1,1,1,0,0\n2024-01-01,B,foreign,1,1,1,-5,0,0\n"
        );
        let f = write_tmp(&s);
        match load_panel(f.path(), &ColumnMapping::default()) {
            Err(Error::InvalidRows(issues)) => {
                assert_eq!(issues.iter().map(|i| i.line).collect::<Vec<_>>(), vec![2, 3]);
            }
            other => panic!("expected invalid rows, got {other:?}"),
        }
    }

    #[test]
    fn remapped_columns_load() {
        let s = "d,tk,inv,nf,px,mc,vol,smc,stv\n2024-01-02,A,foreign,1,10,5,1,0.5,0.1\n";
        let f = write_tmp(s);
        let schema = ColumnMapping {
            date: "d".into(),
            ticker: "tk".into(),
            investor_type: "inv".into(),
            net_buy_volume: "nf".into(),
            close: "px".into(),
            market_cap: "mc".into(),
            trading_volume: "vol".into(),
            s_mc: "smc".into(),
            s_tv: "stv".into(),
        };
        let p = load_panel(f.path(), &schema).unwrap();
        assert_eq!(p.records()[0].s_mc, 0.5);
        // 1 ticker × 1 date × 3 types, two of which are missing
        assert_eq!(p.alignment_report().missing.len(), 2);
    }

    #[test]
    fn returns_basic_cases() {
        let r = returns_from_prices(&[Some(100.0), Some(110.0)]);
        assert!((r[0].unwrap() - 0.10).abs() < 1e-12);
        assert_eq!(r[1], None);
        let flat = returns_from_prices(&[Some(5.0); 6]);
        assert!(flat[..5].iter().all(|v| *v == Some(0.0)));
        let gap = returns_from_prices(&[Some(1.0), None, Some(2.0), Some(3.0)]);
        assert_eq!(gap[0], None);
        assert_eq!(gap[1], None);
        assert!((gap[2].unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn single_date_ticker_is_flagged() {
        let s = format!("{HEADER}2024-01-01,A,foreign,1,1,1,1,0,0\n2024-01-01,B,foreign,1,1,1,1,0,0\n2024-01-02,B,foreign,1,2,1,1,0,0\n");
        let f = write_tmp(&s);
        let p = load_panel(f.path(), &ColumnMapping::default()).unwrap();
        let r = compute_returns(&p);
        assert_eq!(r.flagged, vec!["A".to_string()]);
    }

    #[test]
    fn symbolize_quintile_cut() {
        let v: Vec<f64> = (1..=10).map(|x| x as f64).collect();
        let s = symbolize(&v, &DiscretizationSpec::default()).unwrap();
        assert_eq!(s.symbols, vec![0, 0, 1, 1, 2, 2, 3, 3, 4, 4]);
        let rev: Vec<f64> = v.iter().rev().copied().collect();
        let sr = symbolize(&rev, &DiscretizationSpec::default()).unwrap();
        let mut expect = s.symbols.clone();
        expect.reverse();
        assert_eq!(sr.symbols, expect);
    }

    #[test]
    fn symbolize_ties_go_low() {
        let v = [1.0, 2.0, 2.0, 2.0, 3.0];
        let s = symbolize(&v, &DiscretizationSpec { n_symbols: 5 }).unwrap();
        assert_eq!(s.symbols, vec![0, 1, 1, 1, 4]);
    }

    #[test]
    fn symbolize_rejects_constant_and_short() {
        assert!(matches!(
            symbolize(&[3.0; 10], &DiscretizationSpec::default()),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            symbolize(&[1.0, 2.0], &DiscretizationSpec::default()),
            Err(Error::SampleSize { .. })
        ));
        assert!(symbolize(&[1.0, 2.0, 3.0], &DiscretizationSpec { n_symbols: 1 }).is_err());
        assert!(symbolize(&[1.0, f64::NAN, 2.0, 3.0, 4.0], &DiscretizationSpec::default()).is_err());
    }

    #[test]
    fn sparse_symbolize_keeps_gaps() {
        let v = [Some(1.0), None, Some(3.0), Some(2.0)];
        let s = symbolize_sparse(&v, &DiscretizationSpec { n_symbols: 3 }).unwrap();
        assert_eq!(s, vec![Some(0), None, Some(2), Some(1)]);
    }

    #[test]
    fn zscore_and_fallback_signals() {
        let f = write_tmp(&grid_csv(4, 3));
        let p = load_panel(f.path(), &ColumnMapping::default()).unwrap();
        let z = p.zscore_signals();
        for d in 0..z.n_dates() {
            let v: Vec<f64> = (0..4)
                .map(|t| z.record(InvestorType::Foreign, t, d).unwrap().s_tv)
                .collect();
            assert!(util::mean(&v).abs() < 1e-12);
        }
        let fb = p.derive_signals_fallback();
        assert_eq!(fb.records().len(), p.records().len());
        // market cap is constant across tickers here, so the fitted value is the mean flow
        let rec = fb.record(InvestorType::Foreign, 0, 0).unwrap();
        let flows: Vec<f64> = (0..4)
            .map(|t| p.record(InvestorType::Foreign, t, 0).unwrap().net_buy_volume)
            .collect();
        assert!((rec.s_mc - util::mean(&flows)).abs() < 1e-12);
    }

    #[test]
    fn write_then_load_round_trip() {
        let f = write_tmp(&grid_csv(2, 3));
        let p = load_panel(f.path(), &ColumnMapping::default()).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        p.write_csv(out.path(), &ColumnMapping::default()).unwrap();
        let q = load_panel(out.path(), &ColumnMapping::default()).unwrap();
        assert_eq!(p.records(), q.records());
    }
}
