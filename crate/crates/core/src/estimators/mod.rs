//! Information estimators: plug-in entropy and MI on symbols, symbolic
//! transfer entropy, and KSG estimators for continuous data.

mod ksg;
mod plugin;
mod te;

pub use ksg::{ksg_cmi, ksg_mi, KsgConfig, TiePolicy};
pub use plugin::{
    combine, plugin_conditional_entropy, plugin_entropy, plugin_joint_entropy, plugin_mi,
};
pub use te::{symbolic_te, symbolic_te_sparse, te_at_lag, SymbolAccess, TeConfig, TePlan};

/// Continuous-data transfer entropy `I(x[t+1]; y[t] | x[t])` via KSG, in nats.
pub fn ksg_te(source: &[f64], target: &[f64], cfg: &KsgConfig) -> crate::Result<f64> {
    if source.len() != target.len() || source.len() < 2 {
        return Err(crate::Error::Domain(
            "KSG TE needs equal-length series of at least two points".into(),
        ));
    }
    let n = target.len();
    ksg_cmi(&target[1..], &source[..n - 1], &[&target[..n - 1]], cfg)
}
