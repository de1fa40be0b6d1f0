pub mod catalog;
pub mod congruence;
pub mod constants;
pub mod derive;
pub mod discover;
pub mod error;
pub mod numerics;
pub mod sequences;
pub mod series;
pub mod telescope;

pub use error::{Error, Result};
