//! Plus-space cusp forms of half-integral weight, their Shimura lifts,
//! quadratic-twist central L-values and resonance experiments over
//! fundamental discriminants.

pub mod arith;
pub mod dseries;
pub mod error;
pub mod halfint;
pub mod lfun;
pub mod modforms;
pub mod qseries;
pub mod resonance;

pub use error::{Error, Result};
