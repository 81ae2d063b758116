//! Statistical machinery: block-permutation surrogates, permutation and tail
//! p-values, BH-FDR, Mann–Whitney U, one-sample t and block bootstrap.

mod bootstrap;
mod classical;
mod surrogate;

pub use bootstrap::{
    block_bootstrap_ci, block_resample_indices, bootstrap_p_at_zero, BootstrapCi, BootstrapSpec,
};
pub use classical::{
    bh_fdr, mann_whitney_u, one_sample_ttest, student_two_sided_p, MannWhitney, TTest,
    MW_EXACT_MAX,
};
pub use surrogate::{
    block_permute, block_permute_slice, gamma_tail_p, surrogate_test, surrogate_test_sparse,
    surrogate_test_with_plan, PairTestResult, SurrogateSpec,
};

use serde::{Deserialize, Serialize};

/// Which per-pair p-value feeds the FDR step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    /// Rank of the observed TE among the surrogates (+1 corrected).
    Permutation,
    /// Gamma law moment-matched to the surrogate TE values.
    #[default]
    GammaTail,
}

impl PairTestResult {
    pub fn p_for(&self, method: PValueMethod) -> f64 {
        match method {
            PValueMethod::Permutation => self.p_value,
            PValueMethod::GammaTail => self.tail_p_value,
        }
    }
}
