//! Configuration, orchestration and persistence behind the `shockld` binary.

pub mod config;
pub mod output;
pub mod run;

pub use config::{parse_config, RunConfig};
pub use output::{read_path_csv, read_path_file, PathTable};
pub use run::{run, RunSummary, Subcommand};
