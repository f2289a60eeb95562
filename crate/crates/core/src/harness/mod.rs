//! Run configuration and the experiment pipeline behind the `mekd` binary.

pub mod config;
pub mod pipeline;

pub use config::{ArchConfig, DataConfig, DataSource, GanRunConfig, RunConfig};
pub use pipeline::{
    generator_checkpoints, load_data, run_ablation_fid, run_distill, run_pipeline, run_train_gan, run_train_teacher,
    Method, ResultRow, ResultsTable, Splits,
};
