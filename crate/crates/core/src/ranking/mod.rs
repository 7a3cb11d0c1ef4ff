//! Predictive sampling, precedence matrices and top-K selection.

mod posterior;
mod precedence;
mod sampling;
mod select;

pub use posterior::{
    class_prob_moments, fdr_posterior, reject, write_fdr_samples, write_selection, FdrSummary, ItemIds,
    DEFAULT_REJECT_TAU,
};
pub use precedence::{precedence_analytic, precedence_from_samples, PrecedenceMatrix, DEGENERATE_VARIANCE};
pub use sampling::{sample_predictive, PredictiveSamples, SAMPLING_JITTER};
pub use select::{eigen_select, mean_select, score_select, top_k, SelectionMethod, SelectionResult};
