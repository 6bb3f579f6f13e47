//! Configuration-driven experiments: presets, per-seed runs with metrics,
//! traces, checkpoints and manifests, oracle training and aggregation.

mod config;
mod metrics;
mod presets;
mod run;

pub use config::{load_config, load_env, ExperimentConfig, OracleTraining};
pub use metrics::{
    aggregate_curves, moving_average, read_metrics, write_aggregate, AggregateRow, MetricsRow, MovingAverage,
    MOVING_WINDOW,
};
pub use presets::{preset_names, preset_source, PRESETS};
pub use run::{
    aggregate_manifests, output_root, run_dir, run_seed, train_oracle, LoadedManifest, OracleOutcome, RunManifest,
    MANIFEST_VERSION, OUTPUT_ENV,
};

#[cfg(test)]
mod tests;
