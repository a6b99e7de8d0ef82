//! Training, cross-validation, metrics, significance testing and context sweeps.

pub mod config;
pub mod cv;
pub mod data;
pub mod metrics;
pub mod report;
pub mod significance;
pub mod sweep;
pub mod train;

pub use config::{DataPaths, ExperimentConfig, Resources, TrainingConfig};
pub use cv::{cross_validate, CvOutcome, FoldOutcome};
pub use data::{AccessObserver, FeatureState, NoObserver, Observe, Partition, Phase};
pub use metrics::{cohen_kappa, prf, ConfusionMatrix, FoldMetrics, MetricsReport};
pub use report::render_report;
pub use significance::significance;
pub use sweep::{sweep, ResultRow, SweepGrid};
pub use train::{train, EpochRecord, TrainedModel};
