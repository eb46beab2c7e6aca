//! Library side of the `relirate` command-line tool.

pub mod commands;
pub mod error;
pub mod geojson;
pub mod io;
pub mod manifest;

pub use commands::{chain_seed, run_fit, FitOptions, ModelKind};
pub use error::{CliError, CliResult};
pub use io::{read_counts, Dataset, SummaryRow};
