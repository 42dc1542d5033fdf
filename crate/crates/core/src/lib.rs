//! Transaction-fee mechanism laboratory: burn-aware posted prices,
//! collusion-free price sets, finite-grid mechanism audits and
//! side-contract analysis.

pub mod audits;
pub mod collusion;
pub mod collusion_free;
pub mod constructions;
pub mod distribution;
pub mod error;
pub mod files;
pub mod mechanism;
pub mod numeric;
pub mod pricing;
pub mod report;

pub use error::{Error, Result};
