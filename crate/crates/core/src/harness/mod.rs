//! Config-driven Monte Carlo sweeps, CSV outputs and the validation suite.

mod config;
mod records;
mod seeds;
mod sweep;
mod validate;

pub use config::{parse_element_range, parse_protocol_list, Rates, ScenarioKind, SweepConfig};
pub use records::{
    aggregate, emit_plot_data, fmt9, plot_file_name, read_aggregates, write_aggregates, write_plot,
    write_timings, write_trials, AggregateRecord, TrialRecord,
};
pub use seeds::{channel_seed, derive_seed, search_seed, splitmix64};
pub use sweep::{
    plot_from_dir, run_sweep, run_sweep_with_threads, run_trial, threads_from_env, write_outputs,
    SweepOutput, THREADS_ENV,
};
pub use validate::{nesting_violations, validate, Check, Fault, ValidateOptions, ValidationReport};
