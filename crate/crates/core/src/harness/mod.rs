//! Experiment orchestration: fold training, the baseline and ablations,
//! metric persistence, feature dumps and the self-check suites.

mod config;
mod dump;
mod metrics;
mod runner;
mod verify;

pub use config::{AblationMode, DataSource, ExperimentConfig, Method, ModelTemplate};
pub use dump::{dump_features, DEFAULT_DUMP_ROWS};
pub use metrics::{
    mean_std, read_metrics_csv, summarize, write_metrics_csv, FoldSummary, MetricsRecord,
    RecordStatus, RunMeta, RunSummary, SeedSummary,
};
pub use runner::{
    checkpoint_name, fold_seeds, load_domains, prepare_tasks, run_ablation,
    run_baseline_source_combine, run_experiment, run_experiment_on, train_fold, ExperimentOutcome,
    FoldResult,
};
pub use verify::{
    kernel_cases, verify, Suite, VerifyItem, VerifyOptions, VerifyReport, ALPHA_AT_END,
    MMD_ORACLE_CASES,
};
