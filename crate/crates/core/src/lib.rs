pub mod adjoint;
pub mod cli;
pub mod architecture;
pub mod config;
pub mod data_io;
pub mod dynamics;
pub mod diagnostics;
pub mod error;
pub mod trainer;

#[cfg(test)]
pub(crate) mod test_util;

pub use error::{Error, Result};
