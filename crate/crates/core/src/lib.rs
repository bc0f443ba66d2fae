pub mod bench;
pub mod cli;
pub mod dsl;
pub mod error;
pub mod heuristic;
pub mod model;
pub mod oracle;
pub mod planner;
pub mod simulate;

pub use error::{Error, Result};
