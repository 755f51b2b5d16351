//! File formats, benchmark experiments and the command-line driver built on
//! `modbe-core`.

pub mod cli;
pub mod eval;
pub mod io;
