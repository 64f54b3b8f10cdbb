//! Optimisation, early stopping, evaluation metrics and experiments.

mod adam;
mod config;
mod experiment;
mod export;
mod metrics;
mod stats;
mod trainer;

pub use adam::{adam_step, Adam, AdamHyper};
pub use config::{lr_at, TrainConfig};
pub use experiment::{multi_seed_experiment, run_seed, ExperimentReport, RunRow};
pub use export::export_features;
pub use metrics::{roc_auc, ClassMetrics, MetricsReport, RocPoint};
pub use stats::{paired_ttest, TTest};
pub use trainer::{
    evaluate, predict_split, train, train_with, EarlyStopping, EpochRecord, Predictions,
    RunHistory, StopReason, TrainOutcome,
};
