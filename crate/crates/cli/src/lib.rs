//! Library side of the `levsketch` command-line tool.

pub mod cli;
pub mod io;
pub mod run;
