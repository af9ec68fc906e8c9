//! Command-line front end for the adaptive Huber regression toolkit.

pub mod commands;
pub mod io;

pub use commands::{run, Cli, EXIT_ERROR, EXIT_NOT_CONVERGED, EXIT_OK};
pub use io::{load_csv, load_numeric, write_dataset_csv, Format, IoError};
