//! Interaction records, entity features, fold assignment and synthetic data.

mod features;
mod records;
mod synthetic;

pub use features::{load_compound_features, load_protein_features, FeatureStore, SparseBits};
pub use records::{
    assign_folds, binarize, load_interactions, read_interactions, write_interactions, ColumnSchema, Dataset,
    DatasetSummary, InteractionRecord, Reduction, ThresholdDirection, DEFAULT_N_FOLDS,
};
pub use synthetic::{
    separable_2d, synthetic_generate, EmbeddingSample, GroundTruth, ProbitGpTask, SyntheticConfig, SyntheticData,
};

/// Interaction count of the KIBA benchmark after compound standardization.
pub const KIBA_INTERACTIONS: usize = 235_625;
pub const KIBA_ACTIVE: usize = 72_944;
pub const KIBA_INACTIVE: usize = 162_681;
