//! Experiment orchestration: configuration, training, census, sweeps,
//! feature export and metrics files.

pub mod census;
pub mod config;
pub mod features;
pub mod metrics;
pub mod objective;
pub mod presets;
pub mod sweep;
pub mod train;

pub use census::{census_overconfident, evaluate, evaluate_with_census, nontarget_logit_spread, EvalSummary};
pub use config::{AugmentConfig, BaseLoss, DataConfig, DatasetRecipe, Mixing, Regularizer, RunConfig};
pub use features::{export_features_2d, extract_features_2d, FeatureDump};
pub use metrics::{read_metrics, read_summary, write_metrics, EpochMetrics, MetricsSummary};
pub use objective::{batch_objective, build_targets, BatchLoss};
pub use sweep::{config_for, sweep, write_sweep, SweepAxis, SweepRow};
pub use train::{prepare_data, train_on, train_run, PreparedData, TrainFailure, TrainOutcome};
