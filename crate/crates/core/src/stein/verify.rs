//! Sweeps that verify the published sup-norm bounds on Stein-equation
//! solutions across large families of target sets, and a randomized check of
//! the characterizing identity itself.

use super::solve::CpSteinSystem;
use super::{solve_stein_poisson, SteinKind, TargetSet};
use crate::dist::{poisson_tail_cutoff, CompoundSpec, Kahan, Pmf};
use crate::error::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Verified ratios may exceed 1 by at most this much; anything larger is a
/// genuine bound violation rather than rounding.
pub const RATIO_TOL: f64 = 1e-9;

/// Above this prefix width, subset families are sampled instead of
/// enumerated (2^12 = 4096 enumerated sets is the exhaustive cap).
const EXHAUSTIVE_PREFIX_CAP: usize = 12;
/// Number of subsets drawn when sampling.
const SAMPLED_SET_COUNT: usize = 10_000;
/// Extra wider sets appended to an exhaustive sweep so coverage is not
/// limited to the enumerated prefix.
const WIDE_SET_COUNT: usize = 200;
const MAX_PREFIX_BITS: usize = 48;

/// Builds the family of target sets examined by a verification sweep: every
/// subset of `{0..prefix-1}` (paired with its complement, which carries the
/// whole tail) when the prefix is small enough, otherwise a seeded sample.
fn target_family(prefix: usize, seed: u64) -> Result<Vec<TargetSet>> {
    if prefix == 0 || prefix > MAX_PREFIX_BITS {
        return Err(Error::Domain(format!(
            "subset prefix width must be in 1..={MAX_PREFIX_BITS}, got {prefix}"
        )));
    }
    let mut family = Vec::new();
    let mut push_pair = |mask: u64, width: usize| {
        let a = TargetSet::from_mask(mask, width, false);
        family.push(a.complement());
        family.push(a);
    };
    if prefix <= EXHAUSTIVE_PREFIX_CAP {
        for mask in 0..(1u64 << prefix) {
            push_pair(mask, prefix);
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let keep = (1u64 << prefix) - 1;
        for _ in 0..SAMPLED_SET_COUNT {
            push_pair(rng.random::<u64>() & keep, prefix);
        }
    }
    Ok(family)
}

/// Appends `WIDE_SET_COUNT` sampled sets over a window wider than the
/// exhausted prefix, bounded by the table size.
fn widen_family(
    family: &mut Vec<TargetSet>,
    prefix: usize,
    table_cap: usize,
    seed: u64,
) {
    let wide = (prefix + 8).min(24).min(table_cap);
    if wide <= prefix {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let keep = (1u64 << wide) - 1;
    for _ in 0..WIDE_SET_COUNT {
        let a = TargetSet::from_mask(rng.random::<u64>() & keep, wide, false);
        family.push(a.complement());
        family.push(a);
    }
}

struct SetOutcome {
    f_ratio: f64,
    delta_ratio: f64,
    residual: f64,
    describe: String,
}

/// Result of sweeping the Poisson solution bounds
/// `sup|f_A| <= 1 min 1.4/sqrt(lambda)` and
/// `sup|f_A(w+1)-f_A(w)| <= (1-e^{-lambda})/lambda`
/// over a family of target sets.
#[derive(Debug, Clone)]
pub struct SolutionBoundsCheck {
    pub lambda: f64,
    pub n_sets_tested: usize,
    /// The sup-norm cap on `f` itself.
    pub f_bound: f64,
    /// The sup-norm cap on first differences of `f`.
    pub delta_f_bound: f64,
    pub worst_f_ratio: f64,
    pub worst_f_set: String,
    pub worst_delta_ratio: f64,
    pub worst_delta_set: String,
    /// Largest Stein-equation violation among all solved tables.
    pub worst_residual: f64,
    /// One line per bound violation (ratio above `1 + RATIO_TOL`); empty
    /// means every tested set respected both bounds.
    pub violations: Vec<String>,
}

impl SolutionBoundsCheck {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Solves the Poisson Stein equation for a family of target sets and checks
/// each solution against the two published sup-norm caps.
///
/// All subsets of `{0..prefix-1}`, each paired with its (tail-inclusive)
/// complement, are tested when `prefix <= 12`; wider prefixes switch to
/// 10^4 seeded samples. Solving is embarrassingly parallel; the reductions
/// are pure maxima, so results do not depend on scheduling.
pub fn verify_poisson_solution_bounds(
    lambda: f64,
    prefix: usize,
    seed: u64,
) -> Result<SolutionBoundsCheck> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!(
            "lambda must be positive and finite, got {lambda}"
        )));
    }
    let family = target_family(prefix, seed)?;
    let k_table = poisson_tail_cutoff(lambda, 1e-13)? + prefix + 16;
    let f_bound = 1.0f64.min(1.4 / lambda.sqrt());
    let delta_f_bound = -(-lambda).exp_m1() / lambda;

    let outcomes: Vec<SetOutcome> = family
        .par_iter()
        .map(|target| {
            let table = solve_stein_poisson(lambda, target, k_table)?;
            Ok(SetOutcome {
                f_ratio: table.sup_f() / f_bound,
                delta_ratio: table.sup_delta_f() / delta_f_bound,
                residual: table.residual(),
                describe: target.describe(),
            })
        })
        .collect::<Result<_>>()?;

    let mut report = SolutionBoundsCheck {
        lambda,
        n_sets_tested: outcomes.len(),
        f_bound,
        delta_f_bound,
        worst_f_ratio: 0.0,
        worst_f_set: String::new(),
        worst_delta_ratio: 0.0,
        worst_delta_set: String::new(),
        worst_residual: 0.0,
        violations: Vec::new(),
    };
    for o in &outcomes {
        if o.f_ratio > report.worst_f_ratio {
            report.worst_f_ratio = o.f_ratio;
            report.worst_f_set = o.describe.clone();
        }
        if o.delta_ratio > report.worst_delta_ratio {
            report.worst_delta_ratio = o.delta_ratio;
            report.worst_delta_set = o.describe.clone();
        }
        report.worst_residual = report.worst_residual.max(o.residual);
        if o.f_ratio > 1.0 + RATIO_TOL {
            report.violations.push(format!(
                "set {}: sup|f| ratio {:.12} exceeds 1",
                o.describe, o.f_ratio
            ));
        }
        if o.delta_ratio > 1.0 + RATIO_TOL {
            report.violations.push(format!(
                "set {}: sup|df| ratio {:.12} exceeds 1",
                o.describe, o.delta_ratio
            ));
        }
    }
    Ok(report)
}

/// Result of sweeping the compound Poisson solution bounds over a family of
/// target sets.
///
/// Two bound families are checked: the always-valid exponential cap
/// `(1 min 1/rate_1) e^{nu}` on both `sup|f|` and `sup|df|`, and — when the
/// second-moment ratio `theta < 1/2` — the perturbation caps
/// `1/((1-2 theta) sqrt(lambda))` and `1/((1-2 theta) lambda)`.
/// First differences are taken over `w >= 1`; the difference at `w = 0`
/// depends only on the `f(0) = 0` convention.
#[derive(Debug, Clone)]
pub struct CpSolutionBoundsCheck {
    pub nu: f64,
    /// Mean of the compound law, the `lambda` in the perturbation caps.
    pub lambda: f64,
    pub theta: f64,
    pub n_sets_tested: usize,
    /// `(1 min 1/rate_1) e^{nu}`, capping both sup-norms.
    pub exp_bound: f64,
    pub worst_exp_f_ratio: f64,
    pub worst_exp_delta_ratio: f64,
    /// `(sup|f| cap, sup|df| cap)` when `theta < 1/2`, else `None`.
    pub perturbation_bounds: Option<(f64, f64)>,
    pub worst_perturbation_f_ratio: f64,
    pub worst_perturbation_delta_ratio: f64,
    /// Target set attaining the worst applicable ratio.
    pub worst_set: String,
    pub worst_residual: f64,
    pub violations: Vec<String>,
}

impl CpSolutionBoundsCheck {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// Worst `sup|f|` ratio against any applicable bound.
    pub fn worst_f_ratio(&self) -> f64 {
        self.worst_exp_f_ratio.max(self.worst_perturbation_f_ratio)
    }

    /// Worst `sup|df|` ratio against any applicable bound.
    pub fn worst_delta_ratio(&self) -> f64 {
        self.worst_exp_delta_ratio
            .max(self.worst_perturbation_delta_ratio)
    }
}

/// Solves the compound Poisson Stein equation for a family of target sets
/// (the law of `W` is computed once and shared) and checks each solution
/// against every cap the given cluster rates admit.
///
/// The family exhausts subsets of `{0..prefix-1}` (with tail-inclusive
/// complements) for `prefix <= 12`, appends a sample of wider sets, and
/// switches to pure sampling for wider prefixes. `k_max` is the truncation
/// point of the linear system; targets must sit well inside it for the
/// constant-extrapolation closure error to stay below `RATIO_TOL`.
pub fn verify_cp_solution_bounds(
    spec: &CompoundSpec,
    k_max: usize,
    prefix: usize,
    seed: u64,
) -> Result<CpSolutionBoundsCheck> {
    let mut family = target_family(prefix, seed)?;
    if prefix <= EXHAUSTIVE_PREFIX_CAP {
        widen_family(&mut family, prefix, k_max.saturating_sub(2), seed);
    }
    if family.iter().any(|t| t.bound() + 2 > k_max) {
        return Err(Error::Domain(format!(
            "k_max = {k_max} leaves no room beyond the widest target set"
        )));
    }

    let lambda = spec.mean();
    let theta = spec.theta();
    let exp_bound = 1.0f64.min(1.0 / spec.rate(1)) * spec.nu().exp();
    let perturbation_bounds = (theta < 0.5).then(|| {
        let scale = 1.0 - 2.0 * theta;
        (1.0 / (scale * lambda.sqrt()), 1.0 / (scale * lambda))
    });

    let system = CpSteinSystem::build(spec, k_max)?;
    struct CpOutcome {
        sup_f: f64,
        sup_delta: f64,
        residual: f64,
        describe: String,
    }
    let outcomes: Vec<CpOutcome> = family
        .par_iter()
        .map(|target| {
            let table = system.solve(spec, target)?;
            Ok(CpOutcome {
                sup_f: table.sup_f(),
                sup_delta: table.sup_delta_f_from(1),
                residual: table.residual(),
                describe: target.describe(),
            })
        })
        .collect::<Result<_>>()?;

    let mut report = CpSolutionBoundsCheck {
        nu: spec.nu(),
        lambda,
        theta,
        n_sets_tested: outcomes.len(),
        exp_bound,
        worst_exp_f_ratio: 0.0,
        worst_exp_delta_ratio: 0.0,
        perturbation_bounds,
        worst_perturbation_f_ratio: 0.0,
        worst_perturbation_delta_ratio: 0.0,
        worst_set: String::new(),
        worst_residual: 0.0,
        violations: Vec::new(),
    };
    let mut worst_overall = 0.0f64;
    for o in &outcomes {
        let mut here = o.sup_f / exp_bound;
        report.worst_exp_f_ratio = report.worst_exp_f_ratio.max(o.sup_f / exp_bound);
        report.worst_exp_delta_ratio =
            report.worst_exp_delta_ratio.max(o.sup_delta / exp_bound);
        here = here.max(o.sup_delta / exp_bound);
        if let Some((fb, db)) = perturbation_bounds {
            report.worst_perturbation_f_ratio =
                report.worst_perturbation_f_ratio.max(o.sup_f / fb);
            report.worst_perturbation_delta_ratio =
                report.worst_perturbation_delta_ratio.max(o.sup_delta / db);
            here = here.max(o.sup_f / fb).max(o.sup_delta / db);
        }
        if here > worst_overall {
            worst_overall = here;
            report.worst_set = o.describe.clone();
        }
        report.worst_residual = report.worst_residual.max(o.residual);
        if here > 1.0 + RATIO_TOL {
            report
                .violations
                .push(format!("set {}: ratio {:.12} exceeds 1", o.describe, here));
        }
    }
    Ok(report)
}

/// Randomized check of the characterizing identity
/// `E[sum_i i rate_i f(W+i) - W f(W)] = 0` (Poisson: `E[lambda f(W+1) -
/// W f(W)] = 0`) against a truncated law of `W`.
///
/// Draws `trials` bounded test functions (`|f| <= 1`, `f(0) = 0`; one
/// deterministic stream per trial) and returns the largest absolute
/// expectation over the explicit support. The truncation contributes at
/// most roughly the tail mass times the largest retained `w`, so a law with
/// negligible tail must produce a near-zero result.
pub fn stein_identity_residual(pmf: &Pmf, kind: &SteinKind, trials: usize, seed: u64) -> f64 {
    let reach = match kind {
        SteinKind::Poisson(_) => 1,
        SteinKind::Compound(spec) => spec.max_cluster(),
    };
    let top = pmf.max_support() + reach;
    let mut worst = 0.0f64;
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial as u64);
        let mut f = vec![0.0f64; top + 1];
        for v in f.iter_mut().skip(1) {
            *v = rng.random_range(-1.0..=1.0);
        }
        let mut acc = Kahan::default();
        for w in pmf.offset()..=pmf.max_support() {
            let lhs = match kind {
                SteinKind::Poisson(lambda) => lambda * f[w + 1] - w as f64 * f[w],
                SteinKind::Compound(spec) => {
                    let mut s = -(w as f64) * f[w];
                    for i in 1..=spec.max_cluster() {
                        s += i as f64 * spec.rate(i) * f[w + i];
                    }
                    s
                }
            };
            acc.add(pmf.prob(w) * lhs);
        }
        worst = worst.max(acc.total().abs());
    }
    worst
}
