//! Applications to binary sequences: longest success runs and arithmetic
//! progressions of successes inside `{1, …, n}`.
//!
//! Both applications share one pattern. A count `W` of anchored rare events
//! has a closed-form mean `lambda`, the event of interest is `{W = 0}`, and
//! `P[W = 0]` is compared against `e^{-lambda}`: exactly for small
//! instances, by an explicit error bound, and by Monte Carlo for instances
//! far beyond enumeration. The anchoring (each event requires a failure
//! immediately before it) is what makes `W` count distinct occurrences
//! instead of every window a long occurrence covers.

mod ap;
mod headrun;

pub use ap::{
    ap_gumbel_approx, ap_index_count, ap_index_count_brute, ap_mc_estimate, ap_overlap_profile,
    ap_threshold_from_offset, ap_w_count, ApModel, OverlapProfile,
};
pub use headrun::{
    headrun_asymptotic_check, headrun_bound, headrun_enumerate, headrun_exact,
    headrun_exact_tail, headrun_mc_estimate, HeadRunAsymptotic, HeadRunBound, HeadRunModel,
};

/// A Monte Carlo probability estimate with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    /// Fraction of replicates on which the event occurred.
    pub estimate: f64,
    /// `sqrt(estimate·(1 − estimate)/reps)`.
    pub std_error: f64,
    /// Number of replicates.
    pub reps: u64,
}

impl McEstimate {
    pub(crate) fn from_successes(successes: u64, reps: u64) -> Self {
        let estimate = successes as f64 / reps as f64;
        let std_error = (estimate * (1.0 - estimate) / reps as f64).sqrt();
        McEstimate {
            estimate,
            std_error,
            reps,
        }
    }
}
