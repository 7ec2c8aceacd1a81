//! Bounds for sums of independent Bernoulli vectors, where each trial can
//! fire in one of `d` categories (or not at all).

use crate::dist::{kahan_sum, Kahan};
use crate::error::{Error, Result};

/// Success probabilities of `n` independent trials over `d` categories:
/// `p[j][i]` is the chance trial `j` lands in category `i`; each trial lands
/// in at most one.
#[derive(Debug, Clone)]
pub struct MultivariateSpec {
    p: Vec<Vec<f64>>,
}

impl MultivariateSpec {
    pub fn new(p: Vec<Vec<f64>>) -> Result<Self> {
        if p.is_empty() || p[0].is_empty() {
            return Err(Error::Size(
                "need at least one trial and one category".into(),
            ));
        }
        let d = p[0].len();
        for (j, row) in p.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Size(format!(
                    "trial {j} has {} categories, expected {d}",
                    row.len()
                )));
            }
            if row.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                return Err(Error::Domain(format!(
                    "trial {j} has a negative or non-finite category probability"
                )));
            }
            let sum = kahan_sum(row.iter().copied());
            if sum >= 1.0 {
                return Err(Error::Domain(format!(
                    "trial {j} fires with probability {sum} >= 1"
                )));
            }
        }
        let spec = MultivariateSpec { p };
        if !(spec.lambda() > 0.0) {
            return Err(Error::Domain("total intensity must be positive".into()));
        }
        Ok(spec)
    }

    pub fn n(&self) -> usize {
        self.p.len()
    }

    pub fn d(&self) -> usize {
        self.p[0].len()
    }

    /// `p_j`: probability trial `j` fires at all.
    pub fn row_sum(&self, j: usize) -> f64 {
        kahan_sum(self.p[j].iter().copied())
    }

    /// Total expected number of firings.
    pub fn lambda(&self) -> f64 {
        kahan_sum(self.p.iter().flat_map(|row| row.iter().copied()))
    }

    /// Category law `mu_i = (1/lambda) sum_j p[j][i]`.
    pub fn mu(&self) -> Vec<f64> {
        let lambda = self.lambda();
        (0..self.d())
            .map(|i| kahan_sum(self.p.iter().map(|row| row[i])) / lambda)
            .collect()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.p
    }
}

/// The two multivariate compound-Poisson approximation bounds. Raw formula
/// values are preserved (the second constant is 8.8 and routinely exceeds 1
/// on small systems), with clipped-at-1 companions for use as actual
/// total-variation bounds.
#[derive(Debug, Clone)]
pub struct MultivariateBounds {
    pub lambda: f64,
    /// `1/2 + log+(2 lambda)`, the logarithmic smoothing constant.
    pub c_lambda: f64,
    /// `sum_j min(p_j^2, (c_lambda/lambda) sum_i p[j][i]^2 / mu_i)`.
    pub barbour88: f64,
    /// `8.8 sum_j min(p_j^2, (1/lambda) sum_i p[j][i]^2 / mu_i)`.
    pub roos99: f64,
    pub barbour88_capped: f64,
    pub roos99_capped: f64,
}

/// Computes both multivariate bounds. Categories with no mass anywhere
/// contribute nothing (their `0/0` terms are dropped).
pub fn multivariate_bounds(spec: &MultivariateSpec) -> Result<MultivariateBounds> {
    let lambda = spec.lambda();
    let c_lambda = 0.5 + (2.0 * lambda).ln().max(0.0);
    let mu = spec.mu();
    let mut log_sum = Kahan::default();
    let mut flat_sum = Kahan::default();
    for j in 0..spec.n() {
        let pj = spec.row_sum(j);
        let mut inner = Kahan::default();
        for (i, &m) in mu.iter().enumerate() {
            let v = spec.rows()[j][i];
            if m > 0.0 {
                inner.add(v * v / m);
            }
        }
        let inner = inner.total();
        log_sum.add((pj * pj).min(c_lambda / lambda * inner));
        flat_sum.add((pj * pj).min(inner / lambda));
    }
    let barbour88 = log_sum.total();
    let roos99 = 8.8 * flat_sum.total();
    Ok(MultivariateBounds {
        lambda,
        c_lambda,
        barbour88,
        roos99,
        barbour88_capped: barbour88.min(1.0),
        roos99_capped: roos99.min(1.0),
    })
}
