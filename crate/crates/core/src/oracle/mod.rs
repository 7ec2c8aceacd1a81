//! Exact brute-force oracles for small indicator systems.
//!
//! A [`JointTable`] stores the full joint law of `n <= 25` Bernoulli
//! indicators. Everything here is exact enumeration; these values are the
//! ground truth the approximation bounds are verified against.

mod coupling;

pub use coupling::exact_size_bias_gap;

use crate::dist::{kahan_sum, poisson_pmf, tv_distance, Kahan, Pmf, TvDistance};
use crate::error::{Error, Result};

/// Hard cap on the number of indicators a joint table may carry.
pub const MAX_JOINT_INDICATORS: usize = 25;
/// Cap for operations that enumerate conditional structure (larger memory
/// and time footprint than plain scans).
pub const MAX_CONDITIONAL_INDICATORS: usize = 20;
/// A table with at most this many nonzero outcomes is kept sparse.
pub const SPARSE_ENTRY_LIMIT: usize = 1 << 16;

/// Joint law of `n` Bernoulli indicators, outcome = bitmask with bit `a`
/// set when indicator `a` fires.
///
/// Dense tables store all `2^n` outcome masses; sparse tables store only the
/// nonzero outcomes. Total mass must be 1 to within 1e-12.
#[derive(Debug, Clone)]
pub enum JointTable {
    Dense { n: usize, probs: Vec<f64> },
    Sparse { n: usize, entries: Vec<(u32, f64)> },
}

impl JointTable {
    pub fn from_dense(probs: Vec<f64>) -> Result<Self> {
        let len = probs.len();
        if !len.is_power_of_two() || len < 2 {
            return Err(Error::InvalidStructure(format!(
                "dense joint table length {len} is not a power of two"
            )));
        }
        let n = len.trailing_zeros() as usize;
        let table = JointTable::Dense { n, probs };
        table.validate()?;
        Ok(table)
    }

    pub fn from_sparse(n: usize, entries: Vec<(u32, f64)>) -> Result<Self> {
        if entries.len() > SPARSE_ENTRY_LIMIT {
            return Err(Error::Size(format!(
                "sparse joint table has {} entries, cap is {SPARSE_ENTRY_LIMIT}",
                entries.len()
            )));
        }
        let table = JointTable::Sparse { n, entries };
        table.validate()?;
        Ok(table)
    }

    /// Product law of independent indicators with the given marginals.
    pub fn independent(ps: &[f64]) -> Result<Self> {
        let n = ps.len();
        if n == 0 || n > MAX_JOINT_INDICATORS {
            return Err(Error::Size(format!(
                "independent table needs 1..={MAX_JOINT_INDICATORS} indicators, got {n}"
            )));
        }
        if ps.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Domain("marginals must lie in [0,1]".into()));
        }
        let mut probs = vec![1.0f64];
        for &p in ps {
            // Doubling keeps bit a of the outcome mask bound to indicator a.
            let mut next = vec![0.0; probs.len() * 2];
            for (mask, &w) in probs.iter().enumerate() {
                next[mask] = w * (1.0 - p);
                next[mask | probs.len()] = w * p;
            }
            probs = next;
        }
        JointTable::from_dense(probs)
    }

    fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 || n > MAX_JOINT_INDICATORS {
            return Err(Error::Size(format!(
                "joint table needs 1..={MAX_JOINT_INDICATORS} indicators, got {n}"
            )));
        }
        let mut total = Kahan::default();
        let mut check = |mask: u32, p: f64| -> Result<()> {
            if !(p >= 0.0) || !p.is_finite() {
                return Err(Error::InvalidStructure(format!(
                    "outcome {mask:#b} has invalid mass {p}"
                )));
            }
            if n < 32 && mask >= (1u32 << n) {
                return Err(Error::InvalidStructure(format!(
                    "outcome {mask:#b} exceeds {n} indicators"
                )));
            }
            total.add(p);
            Ok(())
        };
        match self {
            JointTable::Dense { probs, .. } => {
                for (mask, &p) in probs.iter().enumerate() {
                    check(mask as u32, p)?;
                }
            }
            JointTable::Sparse { entries, .. } => {
                let mut seen = std::collections::HashSet::new();
                for &(mask, p) in entries {
                    if !seen.insert(mask) {
                        return Err(Error::InvalidStructure(format!(
                            "outcome {mask:#b} listed twice"
                        )));
                    }
                    check(mask, p)?;
                }
            }
        }
        if (total.total() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidStructure(format!(
                "joint table mass {} deviates from 1",
                total.total()
            )));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        match self {
            JointTable::Dense { n, .. } | JointTable::Sparse { n, .. } => *n,
        }
    }

    /// Iterates nonzero outcomes as `(mask, mass)`.
    pub fn iter(&self) -> Box<dyn Iterator<Item = (u32, f64)> + '_> {
        match self {
            JointTable::Dense { probs, .. } => Box::new(
                probs
                    .iter()
                    .enumerate()
                    .filter(|(_, &p)| p != 0.0)
                    .map(|(mask, &p)| (mask as u32, p)),
            ),
            JointTable::Sparse { entries, .. } => Box::new(entries.iter().copied()),
        }
    }

    /// Materializes the dense outcome vector (used by conditional scans).
    pub fn dense_probs(&self) -> Vec<f64> {
        match self {
            JointTable::Dense { probs, .. } => probs.clone(),
            JointTable::Sparse { n, entries } => {
                let mut probs = vec![0.0; 1usize << n];
                for &(mask, p) in entries {
                    probs[mask as usize] += p;
                }
                probs
            }
        }
    }

    /// Exact marginal `P(X_a = 1)`.
    pub fn marginal(&self, a: usize) -> f64 {
        let mut acc = Kahan::default();
        for (mask, p) in self.iter() {
            if mask >> a & 1 == 1 {
                acc.add(p);
            }
        }
        acc.total()
    }

    pub fn marginals(&self) -> Vec<f64> {
        (0..self.n()).map(|a| self.marginal(a)).collect()
    }

    /// Exact joint moment `E[X_a X_b]` (equals the marginal when `a == b`).
    pub fn pair_moment(&self, a: usize, b: usize) -> f64 {
        let want = (1u32 << a) | (1u32 << b);
        let mut acc = Kahan::default();
        for (mask, p) in self.iter() {
            if mask & want == want {
                acc.add(p);
            }
        }
        acc.total()
    }
}

/// Exact law of `W = sum_a X_a` on `0..=n`.
pub fn law_of_w(table: &JointTable) -> Result<Pmf> {
    let n = table.n();
    let mut buckets = vec![Kahan::default(); n + 1];
    for (mask, p) in table.iter() {
        buckets[mask.count_ones() as usize].add(p);
    }
    let probs: Vec<f64> = buckets.iter().map(|b| b.total()).collect();
    let explicit = kahan_sum(probs.iter().copied());
    Pmf::new(0, probs, (1.0 - explicit).max(0.0))
}

/// Exact total variation distance between the law of W and the Poisson law
/// with the matching mean. The error bar reflects only the Poisson
/// truncation and is kept near 1e-14.
pub fn exact_tv_to_poisson(table: &JointTable) -> Result<TvDistance> {
    let law = law_of_w(table)?;
    let lambda = law.mean();
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!(
            "W has mean {lambda}; the Poisson target needs a positive mean"
        )));
    }
    let target = poisson_pmf(lambda, 1e-14)?;
    Ok(tv_distance(&law, &target))
}

/// The three local-dependence terms of the neighbourhood bound, computed
/// exactly.
#[derive(Debug, Clone, Copy)]
pub struct BTerms {
    /// `sum_a sum_{b in B_a} p_a p_b`
    pub b1: f64,
    /// `sum_a sum_{b in B_a, b != a} E[X_a X_b]`
    pub b2: f64,
    /// `sum_a E| E(X_a | X_b, b outside B_a) - p_a |`
    pub b3: f64,
}

/// Exact b-terms for the given neighbourhood choice.
///
/// `neighbourhoods[a]` must contain `a`. The b3 conditional scan groups
/// outcomes by the configuration outside `B_a`, so it is capped at
/// [`MAX_CONDITIONAL_INDICATORS`] indicators.
pub fn exact_b_terms(table: &JointTable, neighbourhoods: &[Vec<usize>]) -> Result<BTerms> {
    let n = table.n();
    if neighbourhoods.len() != n {
        return Err(Error::InvalidStructure(format!(
            "{} neighbourhoods for {n} indicators",
            neighbourhoods.len()
        )));
    }
    if n > MAX_CONDITIONAL_INDICATORS {
        return Err(Error::Size(format!(
            "b-term conditionals are capped at {MAX_CONDITIONAL_INDICATORS} indicators, got {n}"
        )));
    }
    let mut hood_bits = vec![0u32; n];
    for (a, hood) in neighbourhoods.iter().enumerate() {
        let mut bits = 0u32;
        for &b in hood {
            if b >= n {
                return Err(Error::InvalidStructure(format!(
                    "neighbourhood of {a} mentions indicator {b} out of range"
                )));
            }
            bits |= 1 << b;
        }
        if bits >> a & 1 == 0 {
            return Err(Error::InvalidStructure(format!(
                "neighbourhood of {a} must contain {a}"
            )));
        }
        hood_bits[a] = bits;
    }

    let ps = table.marginals();
    let mut b1 = Kahan::default();
    let mut b2 = Kahan::default();
    let mut b3 = Kahan::default();
    for a in 0..n {
        for b in 0..n {
            if hood_bits[a] >> b & 1 == 1 {
                b1.add(ps[a] * ps[b]);
                if b != a {
                    b2.add(table.pair_moment(a, b));
                }
            }
        }
        // Group outcomes by the configuration outside B_a; within each group
        // compare the conditional firing rate of X_a with its marginal.
        let outside = !hood_bits[a];
        let mut groups: std::collections::HashMap<u32, (Kahan, Kahan)> =
            std::collections::HashMap::new();
        for (mask, p) in table.iter() {
            let entry = groups.entry(mask & outside).or_default();
            entry.0.add(p);
            if mask >> a & 1 == 1 {
                entry.1.add(p);
            }
        }
        for (mass, fired) in groups.values() {
            let (m, f) = (mass.total(), fired.total());
            if m > 0.0 {
                b3.add((f - ps[a] * m).abs());
            }
        }
    }
    Ok(BTerms {
        b1: b1.total(),
        b2: b2.total(),
        b3: b3.total(),
    })
}

/// Exact variance of W.
pub fn exact_variance(table: &JointTable) -> Result<f64> {
    let law = law_of_w(table)?;
    let mean = law.mean();
    let second = kahan_sum(
        law.probs()
            .iter()
            .enumerate()
            .map(|(k, &p)| (k as f64) * (k as f64) * p),
    );
    Ok(second - mean * mean)
}
