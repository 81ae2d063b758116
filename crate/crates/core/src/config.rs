//! Run configuration: a flat TOML document with defaults for every key.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::{KellyUnits, ReturnBinning, RiskFreeSpec};
use crate::cross_section::FmSpec;
use crate::error::{Error, Result};
use crate::estimators::{KsgConfig, TeConfig};
use crate::inference::{BootstrapSpec, PValueMethod, SurrogateSpec};
use crate::network::NetworkSpec;
use crate::panel::{ColumnMapping, DiscretizationSpec, InvestorType, SignalField};
use crate::synth::PlantedPanelSpec;

/// Which signal column feeds each investor's TE network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetField {
    /// S_TV for foreign investors, S_MC otherwise.
    #[default]
    Matched,
    NetFlow,
    SMc,
    STv,
}

impl TargetField {
    pub fn resolve(self, inv: InvestorType) -> SignalField {
        match self {
            TargetField::Matched => inv.matched_signal(),
            TargetField::NetFlow => SignalField::NetFlow,
            TargetField::SMc => SignalField::SMc,
            TargetField::STv => SignalField::STv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TeMethod {
    Symbolic,
    Ksg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CentralityColumn {
    #[default]
    OutDegree,
    InDegree,
    WeightedOutDegree,
    Betweenness,
    Closeness,
    Pagerank,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subperiod {
    pub label: String,
    pub start: NaiveDate,
    pub end: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Input panel CSV; ignored when `synthetic` is set.
    pub input: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub columns: ColumnMapping,
    pub investors: Vec<InvestorType>,
    pub target_field: TargetField,
    /// Per-date cross-sectional z-scoring of the signal columns.
    pub zscore_signals: bool,
    /// Replace the signal columns with the rank-regression fallback.
    pub derive_signals: bool,

    pub n_symbols: u32,
    pub te_k: usize,
    pub te_l: usize,
    pub te_lag: usize,
    pub te_min_samples: usize,
    pub lag_grid: Vec<usize>,

    pub n_surrogates: usize,
    pub block_length: usize,
    pub surrogate_percentile: f64,
    pub alpha: f64,
    pub p_method: PValueMethod,
    pub top_k: usize,

    pub ksg_k: usize,
    pub n_boot: usize,
    pub boot_block_length: usize,
    pub ci_level: f64,

    pub r_f: f64,
    pub periods_per_year: f64,
    pub kelly_unit_factor: f64,
    pub return_binning: ReturnBinning,

    pub fm_min_stocks: usize,
    pub fm_nw_lags: usize,
    pub fm_centrality: CentralityColumn,

    pub rolling_window: usize,
    pub rolling_step: usize,

    pub subperiods: Vec<Subperiod>,
    pub size_quintiles: bool,
    pub methods: Vec<TeMethod>,
    pub alpha_grid: Vec<f64>,

    pub synthetic: Option<PlantedPanelSpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            output_dir: PathBuf::from("run"),
            seed: 0,
            columns: ColumnMapping::default(),
            investors: InvestorType::ALL.to_vec(),
            target_field: TargetField::default(),
            zscore_signals: false,
            derive_signals: false,
            n_symbols: 5,
            te_k: 1,
            te_l: 1,
            te_lag: 1,
            te_min_samples: 30,
            lag_grid: vec![1, 5, 10, 20],
            n_surrogates: 200,
            block_length: 20,
            surrogate_percentile: 95.0,
            alpha: 0.05,
            p_method: PValueMethod::default(),
            top_k: 10,
            ksg_k: 5,
            n_boot: 200,
            boot_block_length: 20,
            ci_level: 0.95,
            r_f: 0.035,
            periods_per_year: 252.0,
            kelly_unit_factor: 1.0,
            return_binning: ReturnBinning::default(),
            fm_min_stocks: 10,
            fm_nw_lags: 0,
            fm_centrality: CentralityColumn::default(),
            rolling_window: 60,
            rolling_step: 20,
            subperiods: Vec::new(),
            size_quintiles: true,
            methods: vec![TeMethod::Symbolic, TeMethod::Ksg],
            alpha_grid: vec![0.01, 0.05, 0.1],
            synthetic: None,
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read a config file; a relative `input` is resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let (Some(input), Some(dir)) = (&cfg.input, path.parent()) {
            if input.is_relative() {
                cfg.input = Some(dir.join(input));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_err(e.to_string()))
    }

    /// SHA-256 (hex) of the canonical TOML serialization, excluding `output_dir`.
    pub fn hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let digest = Sha256::digest(c.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.input.is_none() && self.synthetic.is_none() {
            return Err(config_err("either `input` or `synthetic` must be set"));
        }
        if self.investors.is_empty() {
            return Err(config_err("`investors` must not be empty"));
        }
        for &a in self.alpha_grid.iter().chain(std::iter::once(&self.alpha)) {
            if !(a > 0.0 && a < 1.0) {
                return Err(config_err(format!("alpha value {a} outside (0, 1)")));
            }
        }
        if self.lag_grid.is_empty() || self.lag_grid.contains(&0) {
            return Err(config_err("`lag_grid` must be non-empty with lags >= 1"));
        }
        if self.rolling_window == 0 || self.rolling_step == 0 {
            return Err(config_err("rolling window and step must be positive"));
        }
        if self.top_k == 0 {
            return Err(config_err("`top_k` must be positive"));
        }
        for s in &self.subperiods {
            if s.start > s.end {
                return Err(config_err(format!("subperiod `{}` ends before it starts", s.label)));
            }
        }
        let cols = [
            &self.columns.date,
            &self.columns.ticker,
            &self.columns.investor_type,
            &self.columns.net_buy_volume,
            &self.columns.close,
            &self.columns.market_cap,
            &self.columns.trading_volume,
            &self.columns.s_mc,
            &self.columns.s_tv,
        ];
        if cols.iter().any(|c| c.trim().is_empty()) {
            return Err(config_err("column names must be non-empty"));
        }
        self.te_config().validate().map_err(|e| config_err(e.to_string()))?;
        if !(self.n_boot >= 100) {
            return Err(config_err("`n_boot` must be at least 100"));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(config_err("`ci_level` must lie in (0, 1)"));
        }
        if !(self.r_f >= -1.0) {
            return Err(config_err("`r_f` must be >= -1"));
        }
        if self.fm_min_stocks < 5 {
            return Err(config_err("`fm_min_stocks` must be at least 5"));
        }
        Ok(())
    }

    pub fn discretization(&self) -> DiscretizationSpec {
        DiscretizationSpec {
            n_symbols: self.n_symbols,
        }
    }

    pub fn te_config(&self) -> TeConfig {
        TeConfig {
            k: self.te_k,
            l: self.te_l,
            n_symbols: self.n_symbols,
            lag: self.te_lag,
            min_samples: self.te_min_samples,
            ..TeConfig::default()
        }
    }

    pub fn network_spec(&self) -> NetworkSpec {
        NetworkSpec {
            te: self.te_config(),
            surrogate: SurrogateSpec {
                n_surrogates: self.n_surrogates,
                block_length: self.block_length,
                percentile: self.surrogate_percentile,
                seed: self.seed,
            },
            alpha: self.alpha,
            p_method: self.p_method,
        }
    }

    pub fn ksg_config(&self) -> KsgConfig {
        KsgConfig {
            k_neighbors: self.ksg_k,
            ..KsgConfig::default()
        }
    }

    pub fn bootstrap_spec(&self, seed: u64) -> BootstrapSpec {
        BootstrapSpec {
            n_boot: self.n_boot,
            block_length: self.boot_block_length,
            level: self.ci_level,
            seed,
        }
    }

    pub fn risk_free(&self) -> RiskFreeSpec {
        RiskFreeSpec { r_f: self.r_f }
    }

    pub fn kelly_units(&self) -> KellyUnits {
        KellyUnits {
            periods_per_year: self.periods_per_year,
            unit_factor: self.kelly_unit_factor,
        }
    }

    pub fn fm_spec(&self) -> FmSpec {
        FmSpec {
            min_stocks_per_period: self.fm_min_stocks,
            nw_lags: self.fm_nw_lags,
            ..FmSpec::default()
        }
    }
}
