//! Command-line front end for the `lcic` estimator: CSV/JSON plumbing, the
//! `fit`, `eval`, `sample`, `hellinger` and `cluster` commands, and seeded
//! experiment grids.

pub mod commands;
pub mod experiments;
pub mod io;
pub mod model;
pub mod wdbc;

pub use commands::{main_with_args, Cli, EXIT_FAILURE, EXIT_USAGE};
