pub mod admissibility;
pub mod cli;
pub mod error;
pub mod format;
pub mod numeric;
pub mod oracle;
pub mod solver;
pub mod spline;

pub use error::{Error, Result};
