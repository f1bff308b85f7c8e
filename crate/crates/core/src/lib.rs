pub mod config;
pub mod cutoffs;
pub mod duhamel;
pub mod error;
pub mod kernels;
pub mod oscint;
pub mod potentials;
pub mod quad;
pub mod report;
pub mod specfun;
pub mod suites;
pub mod verify;

pub use error::{Error, Result};
