//! File formats, problem bundles and the `thermoloss` command-line tool.

pub mod bundle;
pub mod cli;
pub mod error;
pub mod formats;
pub mod pgm;
