pub mod coordination;
pub mod error;
pub mod harness;
pub mod learners;
pub mod oracle;
pub mod rng;
pub mod submodular;
pub mod tracksim;

pub use error::{Error, Result};
