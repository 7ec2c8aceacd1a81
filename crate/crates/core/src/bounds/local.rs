//! Bounds driven by declared dependence neighbourhoods, monotone couplings,
//! and size-bias couplings.

use super::system::{IndicatorSystem, MomentSource};
use crate::dist::{kahan_sum, Kahan};
use crate::error::{Error, Result};
use crate::oracle::exact_b_terms;

/// The three neighbourhood moment sums and the bounds they produce.
#[derive(Debug, Clone)]
pub struct LocalBounds {
    pub lambda: f64,
    /// `sum_a sum_{b in hood(a)} p_a p_b`.
    pub b1: f64,
    /// `sum_a sum_{b in hood(a), b != a} E[X_a X_b]`.
    pub b2: f64,
    /// `sum_a E|E(X_a | indicators outside hood(a)) - p_a|`; zero when each
    /// indicator really is independent of everything outside its
    /// neighbourhood.
    pub b3: f64,
    /// `(1 min 1/lambda)(b1 + b2) + (1 min 1.4/sqrt(lambda)) b3`.
    pub tv_bound: f64,
    /// Bound for the void event `{W = 0}` alone:
    /// `(1 min 1/lambda)(b1 + b2 + b3)`.
    pub void_bound: f64,
}

/// Computes the neighbourhood sums `b1`, `b2`, `b3` and the total-variation
/// bound they imply.
///
/// With a full joint law all three terms are exact. With pair moments only,
/// `b3` is not computable: it is taken as zero when the caller asserts local
/// dependence (then it vanishes identically), and the call is rejected
/// otherwise, because silently returning zero would fabricate a bound.
pub fn local_bounds(sys: &IndicatorSystem) -> Result<LocalBounds> {
    let lambda = sys.lambda();
    let (b1, b2, b3) = match sys.source() {
        MomentSource::FullJoint(table) => {
            let t = exact_b_terms(table, sys.hoods())?;
            (t.b1, t.b2, t.b3)
        }
        MomentSource::Pairwise(m) => {
            if !sys.asserts_local_dependence() {
                return Err(Error::Unsupported(
                    "pair moments cannot determine the conditional term; \
                     assert local dependence or supply the full joint law"
                        .into(),
                ));
            }
            let p = sys.marginals();
            let mut b1 = Kahan::default();
            let mut b2 = Kahan::default();
            for a in 0..sys.n() {
                for &b in sys.hood(a) {
                    b1.add(p[a] * p[b]);
                    if b != a {
                        b2.add(m[a][b]);
                    }
                }
            }
            (b1.total(), b2.total(), 0.0)
        }
        MomentSource::Sampler(_) => {
            return Err(Error::Unsupported(
                "a sampler carries no exact moments; bounds need a joint \
                 table or a pair-moment matrix"
                    .into(),
            ));
        }
    };
    let unit = 1.0f64.min(1.0 / lambda);
    let smooth = 1.0f64.min(1.4 / lambda.sqrt());
    Ok(LocalBounds {
        lambda,
        b1,
        b2,
        b3,
        tv_bound: unit * (b1 + b2) + smooth * b3,
        void_bound: unit * (b1 + b2 + b3),
    })
}

/// Direction of the monotone-coupling hypothesis behind the variance-gap
/// bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonotoneRelation {
    /// Firing one indicator can only suppress the others.
    Negative,
    /// Firing one indicator can only encourage the others.
    Positive,
}

/// Variance-gap bound on `d_TV(law(W), Po(lambda))` under a monotone
/// relation among the indicators:
///
/// * negative: `(1 min lambda)(1 - Var(W)/lambda)`,
/// * positive: `(1 min lambda)(Var(W)/lambda - 1 + (2/lambda) sum p_a^2)`.
///
/// The coupling hypothesis cannot be checked from these numbers; validity is
/// the caller's claim. The value is returned even when negative — that is a
/// diagnostic that the claimed relation contradicts the inputs, not an
/// error. (The leading factor is `1 min lambda`, not `1 min 1/lambda`; the
/// exact-oracle dominance suite exercises it as stated.)
pub fn monotone_coupling_bound(
    lambda: f64,
    var_w: f64,
    sum_p_sq: f64,
    relation: MonotoneRelation,
) -> Result<f64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!(
            "lambda must be positive and finite, got {lambda}"
        )));
    }
    if var_w < 0.0 {
        return Err(Error::Domain(format!(
            "variance must be nonnegative, got {var_w}"
        )));
    }
    let unit = 1.0f64.min(lambda);
    Ok(match relation {
        MonotoneRelation::Negative => unit * (1.0 - var_w / lambda),
        MonotoneRelation::Positive => {
            unit * (var_w / lambda - 1.0 + 2.0 * sum_p_sq / lambda)
        }
    })
}

/// Size-bias coupling bound: `(1 - e^{-lambda}) * E|W + 1 - W^s|`, where
/// `W^s` is size-biased `W` coupled to `W` (gap supplied exactly by the
/// small-system oracle or estimated by Monte Carlo).
pub fn size_bias_bound(lambda: f64, mean_abs_gap: f64) -> Result<f64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!(
            "lambda must be positive and finite, got {lambda}"
        )));
    }
    if mean_abs_gap < 0.0 {
        return Err(Error::Domain(format!(
            "mean absolute coupling gap must be nonnegative, got {mean_abs_gap}"
        )));
    }
    Ok(-(-lambda).exp_m1() * mean_abs_gap)
}

/// `sum p_a^2` for a marginal list — the quantity the positive-relation
/// variance bound needs alongside the variance.
pub fn sum_of_squares(ps: &[f64]) -> f64 {
    kahan_sum(ps.iter().map(|p| p * p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::JointTable;

    fn independent_system(ps: &[f64]) -> IndicatorSystem {
        let table = JointTable::independent(ps).unwrap();
        let hoods = (0..ps.len()).map(|a| vec![a]).collect();
        IndicatorSystem::from_joint(table, hoods, None).unwrap()
    }

    #[test]
    fn independent_singleton_hoods_reduce_to_squares() {
        let ps = [0.1, 0.2, 0.15, 0.05];
        let sys = independent_system(&ps);
        let b = local_bounds(&sys).unwrap();
        let sq = sum_of_squares(&ps);
        assert!((b.b1 - sq).abs() < 1e-12, "b1 {} vs {sq}", b.b1);
        assert!(b.b2.abs() < 1e-14 && b.b3.abs() < 1e-12);
        let lambda = 0.5;
        assert!((b.tv_bound - 1.0f64.min(1.0 / lambda) * sq).abs() < 1e-12);
        assert!((b.void_bound - b.tv_bound).abs() < 1e-14);
    }

    #[test]
    fn declumped_two_indicator_run_system() {
        // Indicators with p = 1/4 and 1/8 that never fire together, each
        // neighbourhood covering both; nothing lies outside, so the
        // conditional term vanishes and the product term is (3/8)^2.
        let table = JointTable::from_sparse(
            2,
            vec![(0b01, 0.25), (0b10, 0.125), (0b00, 0.625)],
        )
        .unwrap();
        let sys =
            IndicatorSystem::from_joint(table, vec![vec![0, 1], vec![0, 1]], None).unwrap();
        let b = local_bounds(&sys).unwrap();
        assert!((b.b1 - 0.140625).abs() < 1e-15, "b1 {}", b.b1);
        assert_eq!(b.b2, 0.0, "the indicators are mutually exclusive");
        assert!(b.b3.abs() < 1e-15);
        assert!((b.tv_bound - 0.140625).abs() < 1e-15);
    }

    #[test]
    fn pair_moments_need_the_local_dependence_assertion() {
        let m = vec![vec![0.2, 0.04], vec![0.04, 0.2]];
        let unasserted = IndicatorSystem::new(
            vec![0.2, 0.2],
            vec![vec![0], vec![1]],
            None,
            MomentSource::Pairwise(m.clone()),
            false,
        )
        .unwrap();
        assert!(matches!(
            local_bounds(&unasserted),
            Err(Error::Unsupported(_))
        ));

        let asserted = IndicatorSystem::new(
            vec![0.2, 0.2],
            vec![vec![0], vec![1]],
            None,
            MomentSource::Pairwise(m),
            true,
        )
        .unwrap();
        let b = local_bounds(&asserted).unwrap();
        assert_eq!(b.b3, 0.0);
        assert!((b.b1 - 0.08).abs() < 1e-15);
    }

    #[test]
    fn variance_gap_bound_closed_forms() {
        let neg = monotone_coupling_bound(1.0, 0.9, 0.0, MonotoneRelation::Negative).unwrap();
        assert!((neg - 0.1).abs() < 1e-12, "negative case {neg}");
        let pos = monotone_coupling_bound(2.0, 2.0, 0.1, MonotoneRelation::Positive).unwrap();
        assert!((pos - 0.1).abs() < 1e-12, "positive case {pos}");
    }

    #[test]
    fn variance_gap_bound_agrees_between_relations_when_independent() {
        // Independent family: Var(W) = lambda - sum p^2, and both monotone
        // readings collapse to (1 min lambda) * sum p^2 / lambda.
        let ps = [0.25, 0.1, 0.3];
        let lambda: f64 = ps.iter().sum();
        let sq = sum_of_squares(&ps);
        let var = lambda - sq;
        let neg = monotone_coupling_bound(lambda, var, sq, MonotoneRelation::Negative).unwrap();
        let pos = monotone_coupling_bound(lambda, var, sq, MonotoneRelation::Positive).unwrap();
        let expected = 1.0f64.min(lambda) * sq / lambda;
        assert!((neg - expected).abs() < 1e-12);
        assert!((pos - expected).abs() < 1e-12);
    }

    #[test]
    fn negative_value_is_reported_not_clamped() {
        // Claimed negative relation but variance above lambda: the formula
        // goes negative, flagging the false hypothesis.
        let v = monotone_coupling_bound(1.0, 1.5, 0.0, MonotoneRelation::Negative).unwrap();
        assert!(v < 0.0);
    }

    #[test]
    fn size_bias_bound_values() {
        let v = size_bias_bound(1.0, 0.1).unwrap();
        assert!((v - 0.1 * (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!((v - 0.0632).abs() < 1e-4);
        assert_eq!(size_bias_bound(3.0, 0.0).unwrap(), 0.0);
    }
}
