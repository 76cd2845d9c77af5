pub mod algorithms;
pub mod channel;
pub mod complexity;
pub mod error;
pub mod experiments;
pub mod lmi;
pub mod model;

pub use error::{Error, Result};
