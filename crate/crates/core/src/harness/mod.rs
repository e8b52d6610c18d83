//! Experiment plumbing: configuration, dataset files and the runners behind
//! the command-line tool.

mod bench;
mod config;
mod dataset;
mod eval;
mod sweep;
mod train;

pub use bench::{bench, bench_to_csv, ml_flops, net_flops, somp_flops, BenchRow, BENCH_HEADER};
pub use config::{fmt_f64, ChannelMode, DetectorKind, ExperimentConfig, TacPreset};
pub use dataset::{
    dataset_path, frame_seed, generate, generate_all, load_split, static_channel, Dataset, DatasetHeader, Split,
};
pub use eval::{
    checkpoint_paths, evaluate, evaluate_records, load_net, row, rows_to_csv, rows_to_json, run_detector, sort_rows,
    EvalRow, EVAL_HEADER, EVAL_SCHEMA,
};
pub use sweep::{sigma_c_variance, sweep, sweep_records, sweep_to_csv, SweepRow, SWEEP_HEADER, SWEEP_SCHEMA};
pub use train::{train_all, train_records, TRAIN_LOG};
