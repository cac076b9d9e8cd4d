//! File formats, experiment reports, invariant suites and the command-line
//! front end for `sqlab-core`.

pub mod cli;
pub mod io;
pub mod report;
pub mod verify;
