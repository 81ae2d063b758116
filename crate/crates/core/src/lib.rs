//! Directed information-flow networks from multivariate panel time series.
//!
//! Symbolic transfer entropy with block-permutation surrogate testing builds
//! per-investor-type networks; higher-order information measures, Kelly and
//! Fano bounds and Fama–MacBeth regressions evaluate their economic content.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod config;
pub mod cross_section;
pub mod error;
pub mod estimators;
pub mod higher_order;
pub mod inference;
pub mod network;
pub mod panel;
pub mod pipeline;
pub mod synth;
pub mod util;

pub use bounds::{BoundsRow, KellyUnits, ReturnBinning, RiskFreeSpec};
pub use config::RunConfig;
pub use cross_section::{FmResult, FmRow, FmSpec};
pub use error::{Error, Result};
pub use estimators::{KsgConfig, TeConfig};
pub use inference::{BootstrapSpec, PValueMethod, PairTestResult, SurrogateSpec};
pub use network::{CentralityTable, DirectedWeightedGraph, NetworkSpec, NetworkStats, TeNetwork};
pub use pipeline::{emit_plot_data, run_pipeline, RunOptions, RunSummary, Stage};
pub use synth::{GroundTruth, PlantedEdge, PlantedPanel, PlantedPanelSpec};

pub use panel::{
    compute_returns, load_panel, symbolize, ColumnMapping, DiscretizationSpec, FlowPanel,
    FlowRecord, InvestorType, ReturnPanel, SignalField, SymbolSeries,
};
