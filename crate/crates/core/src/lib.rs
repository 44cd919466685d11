pub mod active_set;
pub mod bench;
pub mod cli;
pub mod consistency;
pub mod error;
pub mod partition;
pub mod prox;
pub mod solvers;

pub use error::{Error, Result};
