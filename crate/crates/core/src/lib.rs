pub mod cli;
pub mod criteria;
pub mod em;
pub mod error;
pub mod harness;
pub mod inference;
pub mod io;
pub mod model;
pub mod rng;
pub mod simulate;

pub use error::{Error, Result};
