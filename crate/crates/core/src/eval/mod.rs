//! Ranking metrics, calibration, enrichment curves and histograms.

mod calibration;
mod curves;
mod metrics;

pub use calibration::{reliability, topk_histogram, CalibrationReport, Histogram, ProbSource, DEFAULT_BINS};
pub use curves::{
    fdr_curve, variance_learning_curve, write_fdr_curve, write_variance_curve, ProbGroup, VarianceRow,
    HIGH_GROUP_MIN, LOW_GROUP_MAX,
};
pub use metrics::{
    aupr, auroc, pr_curve, roc_curve, taskwise_eval, write_xy, TaskwiseReport, TaskwiseRow, DEFAULT_MIN_NEG,
    DEFAULT_MIN_POS,
};
