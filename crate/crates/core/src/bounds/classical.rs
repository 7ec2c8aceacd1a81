//! The classical bounds for sums of independent indicators, predating the
//! local-dependence machinery.

use crate::dist::kahan_sum;
use crate::error::{Error, Result};

/// Classical Poisson-approximation error bounds for an independent
/// Bernoulli family.
#[derive(Debug, Clone)]
pub struct ClassicalBounds {
    pub lambda: f64,
    /// `sum p_i^2` (Le Cam's unconditional bound).
    pub lecam1: f64,
    /// `(8/lambda) sum p_i^2`; only valid when `max p_i <= 1/4`.
    pub lecam2: Option<f64>,
    /// Smallest available valid upper bound.
    pub combined: f64,
    /// Leading term `p / sqrt(2 pi e)` of the identical-`p` limit; present
    /// only when all marginals coincide, and asymptotic only — it carries an
    /// unquantified remainder and must never be used as a finite-`n` bound.
    pub prohorov_asymptotic: Option<f64>,
}

fn check_probs(ps: &[f64]) -> Result<()> {
    if ps.is_empty() {
        return Err(Error::Size("need at least one success probability".into()));
    }
    for &p in ps {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!(
                "success probabilities must lie strictly in (0,1), got {p}"
            )));
        }
    }
    Ok(())
}

/// Le Cam's bounds on `d_TV(law(W), Po(sum p_i))` for independent
/// indicators, plus the identical-`p` asymptotic constant.
pub fn classical_bounds(ps: &[f64]) -> Result<ClassicalBounds> {
    check_probs(ps)?;
    let lambda = kahan_sum(ps.iter().copied());
    let lecam1 = kahan_sum(ps.iter().map(|p| p * p));
    let max_p = ps.iter().fold(0.0f64, |m, &p| m.max(p));
    let lecam2 = (max_p <= 0.25).then(|| 8.0 / lambda * lecam1);
    let combined = match lecam2 {
        Some(l2) => lecam1.min(l2),
        None => lecam1,
    };
    let all_equal = ps.iter().all(|&p| p == ps[0]);
    let prohorov_asymptotic =
        all_equal.then(|| ps[0] / (2.0 * std::f64::consts::PI * std::f64::consts::E).sqrt());
    Ok(ClassicalBounds {
        lambda,
        lecam1,
        lecam2,
        combined,
        prohorov_asymptotic,
    })
}

/// The matching lower bound for independent indicators:
/// `d_TV >= (1/32) (1 min 1/lambda) sum p_i^2`.
pub fn barbour_hall_lower(ps: &[f64]) -> Result<f64> {
    check_probs(ps)?;
    let lambda = kahan_sum(ps.iter().copied());
    let sq = kahan_sum(ps.iter().map(|p| p * p));
    Ok((1.0f64.min(1.0 / lambda)) * sq / 32.0)
}
