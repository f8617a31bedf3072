//! Simulation laboratory: synthetic designs, Monte Carlo replication of the
//! published tables, CSV helpers and the command-line front end.

pub mod cli;
pub mod generate;
pub mod io;
pub mod mc;
pub mod shift;

pub use cli::cli_main;
pub use generate::{gen_lof, gen_sig, Deviation, DeviationKind, LofScenario, SigModel, SigScenario};
pub use mc::{run_lof_mc, run_mc, run_sig_mc, run_table, McConfig, McReport, Scenario, TableGrid, TableOptions};
pub use shift::{theoretical_shift_lof, theoretical_shift_sig};
