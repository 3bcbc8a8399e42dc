//! File formats, threaded execution and the `icred` command line on top of
//! [`icred_core`].

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod executor;
pub mod io;
pub mod pipeline;

pub use error::{IcredError, Result};
