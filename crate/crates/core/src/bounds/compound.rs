//! Compound Poisson bounds for locally dependent indicators: cluster-rate
//! extraction from neighbourhood sums, the exponential and monotone-rate
//! bounds, and the small-`theta` perturbation bound.

use super::system::IndicatorSystem;
use crate::dist::{CompoundSpec, Kahan};
use crate::error::{Error, Result};
use crate::oracle::{exact_b_terms, JointTable};

/// Extracts the cluster rates `rate_i = (1/i) sum_a E[X_a 1{Y_a = i}]`,
/// `Y_a = sum_{b in hood(a)} X_b`, that define the approximating compound
/// Poisson law.
fn cluster_rates(sys: &IndicatorSystem, table: &JointTable) -> Result<CompoundSpec> {
    let n = sys.n();
    let hood_mask: Vec<u32> = (0..n)
        .map(|a| sys.hood(a).iter().fold(0u32, |m, &b| m | (1 << b)))
        .collect();
    let mut acc: Vec<Kahan> = vec![Kahan::default(); n + 1];
    for (mask, q) in table.iter() {
        for a in 0..n {
            if mask & (1 << a) != 0 {
                let y = (mask & hood_mask[a]).count_ones() as usize;
                acc[y].add(q);
            }
        }
    }
    // An indicator counts itself in its neighbourhood sum, so Y_a >= 1
    // whenever X_a fires and the i = 0 bucket stays empty.
    debug_assert!(acc[0].total() == 0.0);
    let rates: Vec<f64> = (1..=n).map(|i| acc[i].total() / i as f64).collect();
    CompoundSpec::new(rates)
}

/// Verifies what the declared two-layer independence structure implies for
/// the joint law: each indicator independent of the field outside its
/// neighbourhood (exact conditional check), and every pair straddling an
/// inner/outside-outer divide uncorrelated (necessary condition for the
/// block-level layer).
fn structure_check(sys: &IndicatorSystem, table: &JointTable) -> Result<()> {
    let b3 = exact_b_terms(table, sys.hoods())?.b3;
    if b3 > 1e-9 {
        return Err(Error::InvalidStructure(format!(
            "indicators are not independent of the field outside their \
             neighbourhoods (conditional deviation {b3:.3e})"
        )));
    }
    let n = sys.n();
    // Second moments in one sweep of the table.
    let mut moment = vec![vec![0.0f64; n]; n];
    for (mask, q) in table.iter() {
        let mut bits = Vec::new();
        for a in 0..n {
            if mask & (1 << a) != 0 {
                bits.push(a);
            }
        }
        for &a in &bits {
            for &b in &bits {
                moment[a][b] += q;
            }
        }
    }
    let p = sys.marginals();
    for a in 0..n {
        let outer: Vec<bool> = {
            let mut inside = vec![false; n];
            for &c in sys.outer(a) {
                inside[c] = true;
            }
            inside
        };
        for &b in sys.hood(a) {
            for d in 0..n {
                if !outer[d] && (moment[b][d] - p[b] * p[d]).abs() > 1e-10 {
                    return Err(Error::InvalidStructure(format!(
                        "indicators {b} (inner of {a}) and {d} (outside the \
                         outer neighbourhood of {a}) are correlated"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Compound Poisson approximation bounds built from extracted cluster
/// rates.
#[derive(Debug, Clone)]
pub struct CompoundLocalBounds {
    /// Extracted cluster rates; the approximating law is the compound
    /// Poisson they define.
    pub rates: CompoundSpec,
    pub nu: f64,
    /// Cluster-size law `gamma_i = rate_i / nu`.
    pub gamma: Vec<f64>,
    /// `sum_a sum_{b in outer(a)} p_a p_b`.
    pub pair_sum: f64,
    /// `(1 min 1/rate_1) e^{nu} * pair_sum` — always valid.
    pub exp_bound: f64,
    /// `2 [1 min (1/(4 d^2) + log+(2d)/d)] * pair_sum` with
    /// `d = rate_1 - 2 rate_2`; only valid when `i * rate_i` is
    /// non-increasing, else absent.
    pub monotone_bound: Option<f64>,
}

/// Computes the compound Poisson bounds for a locally dependent system with
/// declared outer neighbourhoods.
///
/// Needs the full joint law: the cluster rates involve the joint law of an
/// indicator with its neighbourhood sum. The declared two-layer structure is
/// checked against the table before anything is returned.
pub fn compound_local_bounds(sys: &IndicatorSystem) -> Result<CompoundLocalBounds> {
    let table = sys.joint().ok_or_else(|| {
        Error::Unsupported("cluster-rate extraction needs the full joint law".into())
    })?;
    structure_check(sys, table)?;
    let rates = cluster_rates(sys, table)?;
    let nu = rates.nu();
    let gamma = rates.gamma();
    let pair_sum = sys.outer_pair_sum();
    let exp_bound = 1.0f64.min(1.0 / rates.rate(1)) * nu.exp() * pair_sum;

    let m = rates.max_cluster();
    let non_increasing = (1..m)
        .all(|i| i as f64 * rates.rate(i) + 1e-12 >= (i + 1) as f64 * rates.rate(i + 1));
    let monotone_bound = non_increasing.then(|| {
        let d = rates.rate(1) - 2.0 * rates.rate(2);
        let inner = if d > 0.0 {
            0.25 / (d * d) + (2.0 * d).ln().max(0.0) / d
        } else {
            f64::INFINITY
        };
        2.0 * 1.0f64.min(inner) * pair_sum
    });
    Ok(CompoundLocalBounds {
        rates,
        nu,
        gamma,
        pair_sum,
        exp_bound,
        monotone_bound,
    })
}

/// The perturbation-of-Poisson bound for the same setting.
#[derive(Debug, Clone)]
pub struct CompoundPerturbationBound {
    /// `theta = (1/lambda) sum i (i-1) rate_i`; the bound needs
    /// `theta < 1/2`.
    pub theta: f64,
    /// `lambda = sum i rate_i`, which equals the sum of marginals.
    pub lambda: f64,
    pub pair_sum: f64,
    /// `2 (1 min 1/((1-2 theta) lambda)) * pair_sum`; `None` when
    /// `theta >= 1/2` (inapplicable is data, not an error).
    pub bound: Option<f64>,
}

/// The scalar factor of the perturbation bound for given cluster rates:
/// `2 (1 min 1/((1-2 theta) lambda))` when `theta < 1/2`.
pub fn perturbation_factor(rates: &CompoundSpec) -> (f64, Option<f64>) {
    let theta = rates.theta();
    let factor = (theta < 0.5)
        .then(|| 2.0 * 1.0f64.min(1.0 / ((1.0 - 2.0 * theta) * rates.mean())));
    (theta, factor)
}

/// Computes the perturbation-of-Poisson compound bound; shares the
/// cluster-rate extraction and structure checks with
/// [`compound_local_bounds`].
pub fn compound_perturbation_bound(sys: &IndicatorSystem) -> Result<CompoundPerturbationBound> {
    let table = sys.joint().ok_or_else(|| {
        Error::Unsupported("cluster-rate extraction needs the full joint law".into())
    })?;
    structure_check(sys, table)?;
    let rates = cluster_rates(sys, table)?;
    let pair_sum = sys.outer_pair_sum();
    let (theta, factor) = perturbation_factor(&rates);
    Ok(CompoundPerturbationBound {
        theta,
        lambda: rates.mean(),
        pair_sum,
        bound: factor.map(|f| f * pair_sum),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::local_bounds;
    use crate::bounds::system::MomentSource;
    use crate::dist::kahan_sum;

    fn independent_system(ps: &[f64]) -> IndicatorSystem {
        let table = JointTable::independent(ps).unwrap();
        let hoods = (0..ps.len()).map(|a| vec![a]).collect();
        IndicatorSystem::from_joint(table, hoods, None).unwrap()
    }

    /// Two independent pairs; the indicators within a pair are identical.
    fn paired_system(p: f64) -> IndicatorSystem {
        let q = 1.0 - p;
        let table = JointTable::from_sparse(
            4,
            vec![
                (0b0000, q * q),
                (0b0011, p * q),
                (0b1100, q * p),
                (0b1111, p * p),
            ],
        )
        .unwrap();
        let hoods = vec![vec![0, 1], vec![0, 1], vec![2, 3], vec![2, 3]];
        IndicatorSystem::from_joint(table, hoods.clone(), Some(hoods)).unwrap()
    }

    #[test]
    fn independent_rates_collapse_to_pure_poisson() {
        let ps = [0.2, 0.1, 0.25];
        let sys = independent_system(&ps);
        let b = compound_local_bounds(&sys).unwrap();
        let lambda: f64 = kahan_sum(ps.iter().copied());
        assert_eq!(b.rates.max_cluster(), 1, "only singleton clusters");
        assert!((b.rates.rate(1) - lambda).abs() < 1e-12);
        assert!((b.nu - lambda).abs() < 1e-12);
        let sq = kahan_sum(ps.iter().map(|p| p * p));
        let expected = 1.0f64.min(1.0 / lambda) * lambda.exp() * sq;
        assert!((b.exp_bound - expected).abs() < 1e-12, "{} vs {expected}", b.exp_bound);
    }

    #[test]
    fn paired_identical_indicators_give_pure_two_clusters() {
        let sys = paired_system(0.3);
        let b = compound_local_bounds(&sys).unwrap();
        assert!((b.rates.rate(1) - 0.0).abs() < 1e-14, "rate1 {}", b.rates.rate(1));
        // Four indicators each firing with its partner: sum E X_a 1{Y=2}
        // = 4 * 0.3, halved for cluster size 2.
        assert!((b.rates.rate(2) - 0.6).abs() < 1e-12, "rate2 {}", b.rates.rate(2));
        assert!((b.nu - 0.6).abs() < 1e-12);
        // i * rate_i jumps 0 -> 1.2, so the monotone-rate bound must be
        // withheld.
        assert!(b.monotone_bound.is_none());
        // Mean of the compound law still matches the indicator mean.
        assert!((b.rates.mean() - sys.lambda()).abs() < 1e-12);
    }

    #[test]
    fn independent_monotone_bound_present_and_finite() {
        let sys = independent_system(&[0.3, 0.3, 0.2]);
        let b = compound_local_bounds(&sys).unwrap();
        let d = b.rates.rate(1);
        let inner = 0.25 / (d * d) + (2.0 * d).ln().max(0.0) / d;
        let expected = 2.0 * 1.0f64.min(inner) * b.pair_sum;
        assert!((b.monotone_bound.unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn perturbation_factor_spot_values() {
        let rates = CompoundSpec::new(vec![1.0, 0.05]).unwrap();
        let (theta, factor) = perturbation_factor(&rates);
        assert!((theta - 0.1 / 1.1).abs() < 1e-15);
        // 1/((1 - 2 theta) * 1.1) = 1/0.9 > 1, so the min clips to 1.
        assert!((factor.unwrap() - 2.0).abs() < 1e-15);

        let hot = CompoundSpec::new(vec![0.1, 0.4]).unwrap();
        let (theta, factor) = perturbation_factor(&hot);
        assert!(theta >= 0.5);
        assert!(factor.is_none());
    }

    #[test]
    fn perturbation_bound_doubles_the_local_bound_when_independent() {
        let ps = [0.15, 0.3, 0.2, 0.1];
        let sys = independent_system(&ps);
        let pert = compound_perturbation_bound(&sys).unwrap();
        assert_eq!(pert.theta, 0.0);
        let local = local_bounds(&sys).unwrap();
        // theta = 0 and singleton clusters: the factor is 2 (1 min 1/lambda)
        // against pair_sum = b1, exactly twice the local product bound.
        assert!(
            (pert.bound.unwrap() - 2.0 * local.tv_bound).abs() < 1e-12,
            "{} vs {}",
            pert.bound.unwrap(),
            2.0 * local.tv_bound
        );
    }

    #[test]
    fn paired_system_perturbation_is_inapplicable() {
        let pert = compound_perturbation_bound(&paired_system(0.3)).unwrap();
        // Pure 2-clusters: theta = 2 rate_2 / (2 rate_2) = 1.
        assert!((pert.theta - 1.0).abs() < 1e-12);
        assert!(pert.bound.is_none());
        assert!((pert.lambda - 1.2).abs() < 1e-12);
    }

    #[test]
    fn hidden_correlation_outside_hoods_is_caught() {
        // Perfectly correlated pair but with singleton neighbourhoods: the
        // declared structure is false and must be rejected.
        let table = JointTable::from_dense(vec![0.7, 0.0, 0.0, 0.3]).unwrap();
        let sys =
            IndicatorSystem::from_joint(table, vec![vec![0], vec![1]], None).unwrap();
        let err = compound_local_bounds(&sys).unwrap_err();
        assert!(matches!(err, Error::InvalidStructure(_)), "got {err}");
    }

    #[test]
    fn block_level_correlation_is_caught_even_when_each_indicator_passes() {
        // X0 independent coin; X1 and X2 perfectly correlated. Hoods
        // {0,1}, {0,1,2}, {1,2} make every single indicator independent of
        // its declared outside, but the block {X0, X1} is correlated with
        // X2, which sits outside the outer neighbourhood of 0.
        let mut probs = vec![0.0; 8];
        probs[0b000] = 0.45;
        probs[0b110] = 0.15;
        probs[0b001] = 0.30;
        probs[0b111] = 0.10;
        let table = JointTable::from_dense(probs).unwrap();
        let hoods = vec![vec![0, 1], vec![0, 1, 2], vec![1, 2]];
        let sys = IndicatorSystem::from_joint(table, hoods.clone(), Some(hoods)).unwrap();
        let err = compound_local_bounds(&sys).unwrap_err();
        assert!(matches!(err, Error::InvalidStructure(_)), "got {err}");
        assert!(err.to_string().contains("correlated"), "got {err}");
    }

    #[test]
    fn sampler_source_is_rejected() {
        use rand::Rng;
        let sampler = super::super::OutcomeSampler::new(|rng| rng.random_range(0..2));
        let sys = IndicatorSystem::new(
            vec![0.5],
            vec![vec![0]],
            None,
            MomentSource::Sampler(sampler),
            false,
        );
        // p = 0.5 strictly inside (0,1): system builds, bounds refuse.
        let sys = sys.unwrap();
        assert!(matches!(
            compound_local_bounds(&sys),
            Err(Error::Unsupported(_))
        ));
    }
}
