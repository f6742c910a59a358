//! Command implementations behind the `knotfit` binary.

pub mod commands;
pub mod io;
pub mod model_file;
