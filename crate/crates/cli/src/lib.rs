//! Scenario files, solver dispatch and CSV output for the `esgame` binary.

pub mod error;
pub mod scenario_file;
pub mod solve;

pub use error::{CliError, CliResult};
pub use scenario_file::{load_scenario, parse_scenario};
pub use solve::{
    parse_sweep, read_rows, solve_point, sweep, write_rows, write_trace, Mechanism, SolveOptions,
    SweepRow,
};
