//! Membership metrics, score-spread statistics and the spread-ratio
//! proposition.

mod ks;
mod metrics;
mod proposition;

pub use ks::{kolmogorov_survival, ks_normality_test, ks_statistic, ks_statistic_against_normal, KsResult};
pub use metrics::{
    auc, compute_asr, compute_roc, failed_sample_hf_analysis, membership_advantage, sigma_ratio, tpr_at_fpr,
    write_roc_csv, FailedHf, RocCurve, RocPoint, ScoreColumn, ScoreSet, SigmaStats,
};
pub use proposition::{
    proposition_constraint, proposition_mc_verify, ConstraintCheck, McConfig, McMode, McReport, McStatus,
    PropositionInputs,
};

use serde::{Deserialize, Serialize};

use crate::attacks::ScoreRecord;
use crate::error::Result;

/// Summary metrics for one score column.
///
/// Spread statistics are `None` when a class has fewer than two (σ) or three
/// (KS) samples, or when member scores are constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub asr: f64,
    pub best_tau: f64,
    pub auc: f64,
    pub tpr_at_1pct_fpr: f64,
    pub sigma_member: Option<f64>,
    pub sigma_holdout: Option<f64>,
    pub sigma_ratio: Option<f64>,
    pub ks_member: Option<KsResult>,
    pub ks_holdout: Option<KsResult>,
    /// Advantage at `best_tau`.
    pub advantage: f64,
    pub n_member: usize,
    pub n_holdout: usize,
}

impl MetricsReport {
    pub fn from_set(set: &ScoreSet) -> Result<Self> {
        let (asr, best_tau) = compute_asr(set)?;
        let roc = compute_roc(set)?;
        let sigma = sigma_ratio(set).ok();
        Ok(Self {
            asr,
            best_tau,
            auc: auc(&roc),
            tpr_at_1pct_fpr: tpr_at_fpr(&roc, 0.01),
            sigma_member: sigma.map(|s| s.sigma_member),
            sigma_holdout: sigma.map(|s| s.sigma_holdout),
            sigma_ratio: sigma.map(|s| s.ratio),
            ks_member: ks_normality_test(&set.member).ok(),
            ks_holdout: ks_normality_test(&set.holdout).ok(),
            advantage: membership_advantage(set, best_tau)?,
            n_member: set.member.len(),
            n_holdout: set.holdout.len(),
        })
    }

    pub fn from_records(records: &[ScoreRecord], column: ScoreColumn) -> Result<Self> {
        Self::from_set(&ScoreSet::from_records(records, column)?)
    }
}
