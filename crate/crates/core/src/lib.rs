pub mod bddc;
pub mod error;
pub mod fem;
pub mod harness;
pub mod interface;
pub mod krylov;
pub mod partition;
pub mod sparse;
pub mod substructuring;

pub use error::{Error, Result};
