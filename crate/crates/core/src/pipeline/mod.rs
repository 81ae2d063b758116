//! End-to-end run: stages read the outputs of earlier stages from the run
//! directory, so any single stage can be re-run against an existing run.

mod report;
mod robustness;
mod stages;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Mutex, OnceLock};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::panel::{load_panel, ColumnMapping, FlowPanel};
use crate::util;

pub use report::{emit_plot_data, PlotDataReport, FIGURE_FILES};
pub use robustness::{robustness_suite, MethodCell, RobustnessReport, SizeCell, SubperiodCell, ThresholdCell};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Synth,
    Ingest,
    TeNetwork,
    HigherOrder,
    Bounds,
    CrossSection,
    Robustness,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Synth,
        Stage::Ingest,
        Stage::TeNetwork,
        Stage::HigherOrder,
        Stage::Bounds,
        Stage::CrossSection,
        Stage::Robustness,
        Stage::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Ingest => "ingest",
            Stage::TeNetwork => "te-network",
            Stage::HigherOrder => "higher-order",
            Stage::Bounds => "bounds",
            Stage::CrossSection => "cross-section",
            Stage::Robustness => "robustness",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s.trim().to_ascii_lowercase().replace('_', "-"))
            .ok_or_else(|| Error::Config(format!("unknown stage `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; results do not depend on this.
    pub jobs: usize,
    /// Run only this stage against an existing run directory.
    pub stage: Option<Stage>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { jobs: 1, stage: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FailedStage {
    pub stage: String,
    pub cause: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub crate_version: String,
    pub rng: String,
    pub stages_completed: Vec<String>,
    pub failed: Option<FailedStage>,
    /// Upstream reports that the report stage could not find.
    pub missing_upstream: Vec<String>,
    pub files: Vec<FileDigest>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub manifest: Manifest,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const FAILED_FILE: &str = "FAILED";
pub const CONFIG_FILE: &str = "config.toml";

pub(crate) struct Ctx<'a> {
    pub cfg: &'a RunConfig,
    pub out: PathBuf,
    pub hash: String,
    panel: OnceLock<FlowPanel>,
    pub missing: Mutex<Vec<String>>,
}

impl Ctx<'_> {
    pub fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    pub fn dir(&self, rel: &str) -> Result<PathBuf> {
        let p = self.out.join(rel);
        std::fs::create_dir_all(&p)?;
        Ok(p)
    }

    /// Existing upstream file, or `MissingUpstream`.
    pub fn upstream(&self, rel: &str) -> Result<PathBuf> {
        let p = self.out.join(rel);
        if p.is_file() {
            Ok(p)
        } else {
            Err(Error::MissingUpstream(p))
        }
    }

    pub fn set_panel(&self, panel: FlowPanel) {
        let _ = self.panel.set(panel);
    }

    /// The ingested panel, read from `ingest/panel.csv` on first use.
    pub fn panel(&self) -> Result<&FlowPanel> {
        if let Some(p) = self.panel.get() {
            return Ok(p);
        }
        let path = self.upstream("ingest/panel.csv")?;
        let p = load_panel(&path, &ColumnMapping::default())?;
        Ok(self.panel.get_or_init(|| p))
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

/// Finite values as shortest round-trip decimals; anything else as an empty cell.
pub(crate) fn num(x: f64) -> String {
    if x.is_finite() {
        util::fmt_f64(x)
    } else {
        String::new()
    }
}

pub(crate) fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn stages_for(cfg: &RunConfig, opts: &RunOptions) -> Result<Vec<Stage>> {
    match opts.stage {
        Some(Stage::Synth) if cfg.synthetic.is_none() => {
            Err(Error::Config("stage `synth` needs a `synthetic` section".into()))
        }
        Some(s) => Ok(vec![s]),
        None => Ok(Stage::ALL
            .into_iter()
            .filter(|&s| s != Stage::Synth || cfg.synthetic.is_some())
            .collect()),
    }
}

fn run_stage(ctx: &Ctx, stage: Stage) -> Result<()> {
    log::info!("stage {stage}: start");
    match stage {
        Stage::Synth => stages::synth(ctx),
        Stage::Ingest => stages::ingest(ctx),
        Stage::TeNetwork => stages::te_network(ctx),
        Stage::HigherOrder => stages::higher_order(ctx),
        Stage::Bounds => stages::bounds(ctx),
        Stage::CrossSection => stages::cross_section(ctx),
        Stage::Robustness => robustness::stage(ctx),
        Stage::Report => report::stage(ctx),
    }?;
    log::info!("stage {stage}: done");
    Ok(())
}

/// Run every stage (or `opts.stage` alone) into `cfg.output_dir`.
///
/// A failing stage stops the run, leaves a `FAILED` marker naming the stage
/// and cause, and is returned as [`Error::Stage`]. `manifest.json` is
/// written in every case once the configuration has been accepted.
pub fn run_pipeline(cfg: &RunConfig, opts: &RunOptions) -> Result<RunSummary> {
    cfg.validate()?;
    let stages = stages_for(cfg, opts)?;
    let hash = cfg.hash()?;
    let out = cfg.output_dir.clone();
    std::fs::create_dir_all(&out)?;
    let failed_marker = out.join(FAILED_FILE);
    if failed_marker.exists() {
        std::fs::remove_file(&failed_marker)?;
    }
    let mut canonical = cfg.clone();
    canonical.output_dir = PathBuf::new();
    std::fs::write(out.join(CONFIG_FILE), canonical.to_toml()?)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let ctx = Ctx {
        cfg,
        out: out.clone(),
        hash,
        panel: OnceLock::new(),
        missing: Mutex::new(Vec::new()),
    };

    let mut completed = Vec::new();
    let mut failure = None;
    pool.install(|| {
        for &stage in &stages {
            match run_stage(&ctx, stage) {
                Ok(()) => completed.push(stage.as_str().to_string()),
                Err(e) => {
                    log::error!("stage {stage} failed: {e}");
                    failure = Some(Error::Stage {
                        stage: stage.as_str().into(),
                        cause: Box::new(e),
                    });
                    break;
                }
            }
        }
    });

    let failed = match &failure {
        Some(Error::Stage { stage, cause }) => {
            std::fs::write(&failed_marker, format!("{stage}: {cause}\n"))?;
            Some(FailedStage {
                stage: stage.clone(),
                cause: cause.to_string(),
            })
        }
        _ => None,
    };
    let manifest = Manifest {
        config_hash: ctx.hash.clone(),
        seed: cfg.seed,
        crate_version: env!("CARGO_PKG_VERSION").into(),
        rng: util::RNG_ALGORITHM.into(),
        stages_completed: completed,
        failed,
        missing_upstream: ctx.missing.lock().map(|m| m.clone()).unwrap_or_default(),
        files: digest_tree(&out)?,
    };
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(RunSummary {
            output_dir: out,
            manifest,
        }),
    }
}

/// SHA-256 of every file under `root` except the manifest, sorted by relative path.
pub fn digest_tree(root: &Path) -> Result<Vec<FileDigest>> {
    fn walk(dir: &Path, root: &Path, out: &mut Vec<FileDigest>) -> Result<()> {
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.is_dir() {
                walk(&path, root, out)?;
                continue;
            }
            let rel = path
                .strip_prefix(root)
                .expect("path under root")
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/");
            if rel == MANIFEST_FILE {
                continue;
            }
            let bytes = std::fs::read(&path)?;
            out.push(FileDigest {
                path: rel,
                sha256: Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect(),
            });
        }
        Ok(())
    }
    let mut files = Vec::new();
    walk(root, root, &mut files)?;
    files.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(files)
}
