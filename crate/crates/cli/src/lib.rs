//! File formats and the `una` command-line tool on top of [`una_core`].

pub mod cli;
pub mod coco;
pub mod config;
pub mod diff;
pub mod error;
pub mod log_file;
pub mod report;
pub mod stats;

pub use error::{Error, Result};
