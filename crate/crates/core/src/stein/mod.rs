//! Stein-equation solvers and solution-bound verification.
//!
//! For a target set `A` and a Poisson or compound Poisson law, the Stein
//! equation ties a bounded function `f_A` to the indicator of `A`; the
//! magnitude of `f_A` and of its increments is what every approximation
//! bound in this crate ultimately rests on. This module computes the
//! solutions, checks them back against their defining equation, and sweeps
//! target-set families to confirm the advertised suprema.

mod solve;
mod verify;

pub use solve::{solve_stein_cp, solve_stein_poisson};
pub use verify::{
    stein_identity_residual, verify_cp_solution_bounds, verify_poisson_solution_bounds,
    CpSolutionBoundsCheck, SolutionBoundsCheck, RATIO_TOL,
};

use crate::dist::{CompoundSpec, Kahan, LnFactorial, Pmf};

/// A set of non-negative integers: explicit membership on `0..=bound` plus
/// a flag stating whether everything beyond `bound` belongs to the set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetSet {
    in_set: Vec<bool>,
    includes_tail: bool,
}

impl TargetSet {
    /// Set with the given members below `bound` (exclusive of the tail).
    pub fn from_members(members: &[usize], includes_tail: bool) -> Self {
        let bound = members.iter().copied().max().unwrap_or(0);
        let mut in_set = vec![false; bound + 1];
        for &k in members {
            in_set[k] = true;
        }
        TargetSet {
            in_set,
            includes_tail,
        }
    }

    /// Membership of `0..width` from the low bits of `mask`.
    pub fn from_mask(mask: u64, width: usize, includes_tail: bool) -> Self {
        assert!(width >= 1 && width <= 64, "mask width out of range");
        TargetSet {
            in_set: (0..width).map(|k| mask >> k & 1 == 1).collect(),
            includes_tail,
        }
    }

    pub fn empty() -> Self {
        TargetSet {
            in_set: vec![false],
            includes_tail: false,
        }
    }

    pub fn singleton(k: usize) -> Self {
        Self::from_members(&[k], false)
    }

    /// Last explicitly stored point.
    pub fn bound(&self) -> usize {
        self.in_set.len() - 1
    }

    pub fn includes_tail(&self) -> bool {
        self.includes_tail
    }

    pub fn contains(&self, k: usize) -> bool {
        if k < self.in_set.len() {
            self.in_set[k]
        } else {
            self.includes_tail
        }
    }

    pub fn complement(&self) -> Self {
        TargetSet {
            in_set: self.in_set.iter().map(|b| !b).collect(),
            includes_tail: !self.includes_tail,
        }
    }

    /// Probability of the set under a truncated pmf. The tail flag claims
    /// the pmf's own `tail_mass` exactly, so the only error is the pmf's.
    pub fn prob_under(&self, pmf: &Pmf) -> f64 {
        let mut acc = Kahan::default();
        for k in pmf.offset()..=pmf.max_support() {
            if self.contains(k) {
                acc.add(pmf.prob(k));
            }
        }
        let mut p = acc.total();
        if self.includes_tail {
            p += pmf.tail_mass();
        }
        p.clamp(0.0, 1.0)
    }

    /// Compact description for reports, e.g. `{0,2}+tail`.
    pub fn describe(&self) -> String {
        let members: Vec<String> = self
            .in_set
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(k, _)| k.to_string())
            .collect();
        let mut s = format!("{{{}}}", members.join(","));
        if self.includes_tail {
            s.push_str(&format!("+tail>{}", self.bound()));
        }
        s
    }
}

/// Exact Poisson probability of a target set, summing the log-space kernel
/// directly over `0..=bound` and assigning the complement of that partial
/// sum to the tail.
pub(crate) fn poisson_target_prob(lambda: f64, target: &TargetSet) -> f64 {
    let ln_lambda = lambda.ln();
    let mut lnfact = LnFactorial::default();
    let mut in_a = Kahan::default();
    let mut cdf = Kahan::default();
    for k in 0..=target.bound() {
        let p = (-lambda + k as f64 * ln_lambda - lnfact.value()).exp();
        if target.contains(k) {
            in_a.add(p);
        }
        cdf.add(p);
        lnfact.push();
    }
    let mut p = in_a.total();
    if target.includes_tail() {
        p += (1.0 - cdf.total()).max(0.0);
    }
    p.clamp(0.0, 1.0)
}

/// Which Stein operator a table solves.
#[derive(Debug, Clone)]
pub enum SteinKind {
    Poisson(f64),
    Compound(CompoundSpec),
}

impl SteinKind {
    /// Mean of the target law.
    pub fn mean(&self) -> f64 {
        match self {
            SteinKind::Poisson(lambda) => *lambda,
            SteinKind::Compound(spec) => spec.mean(),
        }
    }
}

/// A solved Stein equation: `f` tabulated on `0..=k_max` with `f(0) = 0`,
/// plus the residual of the defining equation on the checked range.
#[derive(Debug, Clone)]
pub struct SteinTable {
    kind: SteinKind,
    target: TargetSet,
    target_prob: f64,
    f: Vec<f64>,
    /// Value used for arguments beyond `k_max`: the next solved value for
    /// the Poisson recursion, the constant closure for the compound system.
    f_beyond: f64,
    residual: f64,
    checked_from: usize,
    checked_to: usize,
}

impl SteinTable {
    pub fn kind(&self) -> &SteinKind {
        &self.kind
    }

    pub fn target(&self) -> &TargetSet {
        &self.target
    }

    /// Probability of the target set under the reference law.
    pub fn target_prob(&self) -> f64 {
        self.target_prob
    }

    /// Solution values on `0..=k_max`.
    pub fn f(&self) -> &[f64] {
        &self.f
    }

    pub fn k_max(&self) -> usize {
        self.f.len() - 1
    }

    /// Solution value with out-of-range closure applied.
    pub fn f_at(&self, w: usize) -> f64 {
        if w < self.f.len() {
            self.f[w]
        } else {
            self.f_beyond
        }
    }

    /// Max equation violation on the range checked at solve time.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Range `(from, to)` the stored residual covers.
    pub fn checked_range(&self) -> (usize, usize) {
        (self.checked_from, self.checked_to)
    }

    /// `sup |f(w)|` over the stored table.
    pub fn sup_f(&self) -> f64 {
        self.f.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `sup |f(w+1) - f(w)|` over the stored table.
    pub fn sup_delta_f(&self) -> f64 {
        self.sup_delta_f_from(0)
    }

    /// `sup |f(w+1) - f(w)|` over `w >= first_w` within the stored table.
    ///
    /// `f(0)` is a convention (the equation never reads it), so the
    /// difference at `w = 0` is convention-dependent; smoothness checks that
    /// should not hinge on it start at `first_w = 1`.
    pub fn sup_delta_f_from(&self, first_w: usize) -> f64 {
        if first_w >= self.f.len() {
            return 0.0;
        }
        self.f[first_w..]
            .windows(2)
            .fold(0.0, |m, w| m.max((w[1] - w[0]).abs()))
    }

    /// Recomputes the max equation violation on `from..=to`, applying the
    /// out-of-range closure where the operator looks past the table.
    pub fn residual_on(&self, from: usize, to: usize) -> f64 {
        let mut worst = 0.0f64;
        for w in from..=to.min(self.k_max()) {
            let h = (self.target.contains(w) as u8 as f64) - self.target_prob;
            let lhs = match &self.kind {
                SteinKind::Poisson(lambda) => {
                    lambda * self.f_at(w + 1) - w as f64 * self.f_at(w)
                }
                SteinKind::Compound(spec) => {
                    let mut s = -(w as f64) * self.f_at(w);
                    for i in 1..=spec.max_cluster() {
                        s += i as f64 * spec.rate(i) * self.f_at(w + i);
                    }
                    s
                }
            };
            worst = worst.max((lhs - h).abs());
        }
        worst
    }

    pub(crate) fn new(
        kind: SteinKind,
        target: TargetSet,
        target_prob: f64,
        f: Vec<f64>,
        f_beyond: f64,
        checked_from: usize,
        checked_to: usize,
    ) -> Self {
        let mut table = SteinTable {
            kind,
            target,
            target_prob,
            f,
            f_beyond,
            residual: 0.0,
            checked_from,
            checked_to,
        };
        table.residual = table.residual_on(checked_from, checked_to);
        table
    }
}
