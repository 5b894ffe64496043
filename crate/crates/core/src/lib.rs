//! Markov chain quasi-Monte Carlo: chains driven by deterministic point
//! sets, discrepancy of the resulting samples and the matching bounds.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ballwalk;
pub mod bounds;
pub mod chain;
pub mod discrepancy;
pub mod error;
pub mod measure;
pub mod quadrature;
pub mod rng;
pub mod search;
pub mod sequences;
pub mod types;

pub use error::{Error, Result};
pub use chain::{make_direct_kernel, make_lazy_direct_kernel, run_chain, ChainPath, ChainSystem};
pub use discrepancy::{DiscrepancyReport, Method};
pub use measure::{Density, Domain, TargetMeasure};
pub use quadrature::Estimate;
pub use rng::Rng;
pub use types::{AnchoredBox, DriverSequence, Point, Provenance, UnitCubePoint};
