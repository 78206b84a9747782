pub mod cli;
pub mod complexity;
pub mod error;
pub mod grid;
pub mod kernels;
pub mod linalg;
pub mod oracle;
pub mod simulate;
pub mod special;
pub mod spectral;

pub use error::{Error, Result};
