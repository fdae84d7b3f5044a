//! Meta-evaluation measures: PA, SPA and acc_eq with tie calibration.

mod system;
mod ties;

pub use system::{
    pa, pvalue_matrix_smoothed, spa, system_pvalue_matrix, system_scores, ConfidenceMatrix,
    SignFlips, DEFAULT_SMOOTHING,
};
pub(crate) use system::{pa_dense, spa_dense};
pub use ties::{acc_eq, pairwise_counts, tie_calibrate, GoldPairs, PairwiseCounts, TieThreshold};
