//! Monte Carlo experiments and their output files.

pub mod experiment;
pub mod output;

pub use experiment::{
    build_drop, cluster_of, drop_seed, run_cdf_experiment, run_sum_rate_sweep, solve_drop, CdfSeries,
    DropInstance, DropResult, ExperimentSpec, Mode, ResultRow,
};
pub use output::{emit_cdf, emit_results, read_results_json, write_cdf_csv, write_rows_csv, Format};
