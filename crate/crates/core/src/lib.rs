pub mod anneal;
pub mod bounds;
pub mod cli;
pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod explorers;
pub mod gcb;
pub mod laplace;
pub mod models;
pub mod walks;

pub use error::{Error, Result};
