//! Closed-form approximation bounds computed from system descriptions:
//! classical independent-case bounds, neighbourhood (local-dependence)
//! bounds, monotone- and size-bias-coupling bounds, compound Poisson bounds
//! with extracted cluster rates, and multivariate category bounds.
//!
//! Everything here is a cheap formula over moments; the exact small-system
//! oracles in [`crate::oracle`] provide the ground truth these bounds are
//! tested to dominate.

mod classical;
mod compound;
mod local;
mod multivariate;
mod system;

pub use classical::{barbour_hall_lower, classical_bounds, ClassicalBounds};
pub use compound::{
    compound_local_bounds, compound_perturbation_bound, perturbation_factor,
    CompoundLocalBounds, CompoundPerturbationBound,
};
pub use local::{
    local_bounds, monotone_coupling_bound, size_bias_bound, sum_of_squares, LocalBounds,
    MonotoneRelation,
};
pub use multivariate::{multivariate_bounds, MultivariateBounds, MultivariateSpec};
pub use system::{IndicatorSystem, MomentSource, OutcomeSampler};
