//! Threshold searches, optimization, sweeps, configuration and the command-line front end.

pub mod checks;
pub mod cli;
pub mod config;
pub mod scenario;
pub mod search;
pub mod table;

pub use checks::{mc_validate, oracle_checks, CheckResult, McComparison};
pub use config::{linspace, parse_float_list, parse_int_list, RunConfig};
pub use scenario::{Evaluation, Protocol, Scenario, PARAMETER_NAMES};
pub use search::{
    bisect_threshold, optimize, sweep, AxisScale, ContinuousAxis, DiscreteAxis, OptimizeSpec, Optimum, SweepRow, SweepSpec,
    Threshold, ThresholdQuery, ThresholdTarget,
};
pub use table::{Cell, Format, Table};
