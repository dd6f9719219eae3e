//! Parameter-dependent pseudodifferential symbols with a point singularity
//! in the covariable: symbol classes, expansions at infinity, calculus,
//! parametrices and resolvent trace expansions.

pub mod calculus;
pub mod corpus;
pub mod ellipticity;
pub mod error;
pub mod infinity;
pub mod numeric;
pub mod oracle;
pub mod semisphere;
pub mod symbol;
pub mod trace;

pub use error::{Error, Result};
