//! Experiment runner: replications, α-sweeps, method comparisons, summaries
//! and region export for plotting.

mod config;
mod export;
mod run;
mod summary;

pub use config::{ModelConfig, RunConfig, SamplerKind, Truncation, DEFAULT_ALPHA_GRID};
pub use export::{
    export_regions, read_thames, read_union, variance_sweep, write_proxy_csv, ExportPaths, ProxyRow, ThamesFile,
    THAMES_FORMAT,
};
pub use run::{
    draw_sample, run_method, run_replications, sampler_seed, sweep_alpha, write_results_csv, write_timing_csv,
    ResultRow, COVERING_SEED_OFFSET, PROXY_SEED_OFFSET, RESULT_COLUMNS, SAMPLER_SEED_OFFSET, VOLUME_SEED_OFFSET,
};
pub use summary::{summarize, write_summary_csv, SummaryRow, SUMMARY_COLUMNS};
