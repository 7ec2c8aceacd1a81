//! Poisson and compound Poisson approximation error bounds for sums of
//! dependent Bernoulli indicators.
//!
//! The crate has three layers:
//!
//! * distribution kernels ([`dist`]) and Stein-equation solvers ([`stein`])
//!   that everything else is built on,
//! * approximation bounds ([`bounds`]) together with exact brute-force
//!   oracles ([`oracle`]) that they are checked against on small systems,
//! * two worked applications: runs and arithmetic progressions in coin
//!   tossing ([`seq`]) and bootstrap percolation on a torus ([`bootstrap`]).

pub mod bootstrap;
pub mod bounds;
pub mod dist;
pub mod error;
pub mod oracle;
pub mod seq;
pub mod stein;

pub use error::{Error, Result};
