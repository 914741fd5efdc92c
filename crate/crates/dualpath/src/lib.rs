//! File formats, checkpoints, run configuration, reports and the command
//! line for the pipeline in [`dualpath_core`].

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod report;
pub mod runner;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use io::{load_dataset, DataPaths, Dataset};
