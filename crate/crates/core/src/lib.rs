//! Exact cover certificates and simulation checks for large-supremum events of
//! positive selector, infinitely divisible and empirical processes.

pub mod certificate;
pub mod empirical;
pub mod error;
pub mod format;
pub mod levy;
pub mod mc;
pub mod rational;
pub mod selector;
pub mod sets;
pub mod witness;

pub use error::{Error, Result};
pub use rational::Q;
pub use sets::{CoverCertificate, SearchLimits, SetFamily, Subset};
