//! File formats, evaluation harness and command-line front end for
//! [`fwda_core`].

pub mod cli;
pub mod data_io;
pub mod error;
pub mod eval;
pub mod persist;

pub use error::{Error, Result};
pub use fwda_core;
