//! Two-view datasets: in-memory model, CSV directories, normalization,
//! minibatch sampling and synthetic generators.

mod csvio;
mod dataset;
mod normalize;
mod sampling;
mod synthetic;

pub use csvio::{
    load_csv, load_dir, observations_to_csv, overlapping_splits, read_observations, read_view_csv,
    view_to_csv, write_synthetic_dir, LoadedData, Manifest, Observation, Splits, DATA_FILE,
    GROUND_TRUTH_FILE, MANIFEST_FILE,
};
pub use dataset::{Direction, EvalSet, GroundTruth, MultiViewDataset, PairSet, RowSet, ViewInfo};
pub use normalize::{FeatureScaler, NormStats};
pub use sampling::{sample_batches, sample_indices, BatchSizes, Batches, UnpairedPool};
pub use synthetic::{generate, random_orthogonal, SyntheticData, SyntheticKind, SyntheticSpec};
