//! Arithmetic progressions of successes in a random subset of `{1, …, n}`.
//!
//! Positions `1, …, n` hold successes independently with probability `p`.
//! For a stride `s ≥ 1` and an anchor `a` with `a + ts ≤ n`, the indicator
//! `X_{a,s}` asks for a failure at position `a` followed by successes at
//! `a + s, a + 2s, …, a + ts`. Anchors run over `a ≥ 1`; the boundary
//! reading `a = 0` (position `0` counts as an unconditional failure) is
//! also scanned, so a progression whose natural anchor falls just off the
//! left edge is still detected. Requiring the failure at the anchor counts
//! each maximal progression once instead of once per sub-progression.
//!
//! The mean count `lambda = |I|·q·p^t` uses the interior anchors `a ≥ 1`
//! only; the boundary terms number about `n/t` against `|I| ≈ n²/(2t)` and
//! are negligible at the sizes where the approximation is interesting.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::McEstimate;
use crate::error::{Error, Result};

/// Parameters of the maximal-progression problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApModel {
    n: usize,
    t: usize,
    p: f64,
}

impl ApModel {
    /// Requires `n ≥ 2`, `t ≥ 1`, `p ∈ (0, 1)`. Thresholds larger than `n`
    /// are allowed: no progression fits and the below-threshold probability
    /// is 1.
    pub fn new(n: usize, t: usize, p: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain(format!("range size n = {n} must be >= 2")));
        }
        if t < 1 {
            return Err(Error::Domain("length threshold t must be >= 1".into()));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!(
                "success probability p = {p} outside (0, 1)"
            )));
        }
        Ok(ApModel { n, t, p })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Number of interior anchor pairs `(a, s)` with `a ≥ 1`.
    pub fn index_count(&self) -> u64 {
        ap_index_count(self.n as u64, self.t as u64)
    }

    /// Mean progression count `|I|·q·p^t` over the interior anchor pairs.
    pub fn lambda(&self) -> f64 {
        self.index_count() as f64 * (1.0 - self.p) * self.p.powf(self.t as f64)
    }
}

/// Number of pairs `(a, s)` of positive integers with `a + ts ≤ n`, by the
/// closed form `Σ_{s=1}^{⌊(n−1)/t⌋} (n − ts)`.
pub fn ap_index_count(n: u64, t: u64) -> u64 {
    if n < 2 {
        return 0;
    }
    let s_max = (n - 1) / t;
    (1..=s_max).map(|s| n - t * s).sum()
}

/// Brute-force reference for [`ap_index_count`]: enumerates candidate pairs
/// one by one. Quadratic in `n`; meant for cross-checking only.
pub fn ap_index_count_brute(n: u64, t: u64) -> u64 {
    let mut count = 0;
    for a in 1..=n {
        for s in 1..=n {
            if a + t * s <= n {
                count += 1;
            }
        }
    }
    count
}

/// Counts anchored progressions of length at least `t` in a concrete
/// sequence (`bits[i]` is the outcome at position `i + 1`), scanning every
/// stride and, within a stride, every residue class in order. The class
/// whose first position equals the stride starts pre-anchored, which is
/// exactly the `a = 0` boundary reading.
pub fn ap_w_count(bits: &[bool], t: usize) -> u64 {
    let n = bits.len();
    if t == 0 || t > n {
        return 0;
    }
    let mut count = 0u64;
    for s in 1..=(n / t) {
        for class_start in 1..=s {
            let mut armed = class_start == s;
            let mut run = 0usize;
            let mut pos = class_start;
            while pos <= n {
                if bits[pos - 1] {
                    run += 1;
                    if armed && run == t {
                        count += 1;
                    }
                } else {
                    armed = true;
                    run = 0;
                }
                pos += s;
            }
        }
    }
    count
}

/// Monte Carlo estimate of the probability that no progression of length
/// `≥ t` occurs. Replicate `i` draws its sequence from stream `i` of one
/// seeded generator, so the result is independent of thread count.
pub fn ap_mc_estimate(m: &ApModel, reps: u64, seed: u64) -> Result<McEstimate> {
    if reps == 0 {
        return Err(Error::Domain("reps must be >= 1".into()));
    }
    let below: u64 = (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            let bits: Vec<bool> = (0..m.n).map(|_| rng.random::<f64>() < m.p).collect();
            u64::from(ap_w_count(&bits, m.t) == 0)
        })
        .sum();
    Ok(McEstimate::from_successes(below, reps))
}

/// Limiting below-threshold probability `exp((1 − p)·p^{x−delta}·ln(p)/4)`
/// for the real offset `x` and rounding remainder `delta ∈ [0, 1)`. Since
/// `ln p < 0` the value lies in `(0, 1)` and increases strictly in `x`.
pub fn ap_gumbel_approx(x: f64, p: f64, delta: f64) -> f64 {
    ((1.0 - p) * p.powf(x - delta) * p.ln() / 4.0).exp()
}

/// Splits a real offset `x` from the centering `(2·ln n − ln ln n)/ln(1/p)`
/// into an integer threshold and the rounding remainder:
/// `t + delta = x + centering` with `delta ∈ [0, 1)`. The pair feeds
/// [`ap_gumbel_approx`], whose value then approximates the probability that
/// the maximal progression length stays below `t`.
pub fn ap_threshold_from_offset(n: usize, p: f64, x: f64) -> Result<(usize, f64)> {
    if n < 3 {
        return Err(Error::Domain(format!(
            "centering needs ln(ln n) defined and positive, got n = {n}"
        )));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!(
            "success probability p = {p} outside (0, 1)"
        )));
    }
    let ln_n = (n as f64).ln();
    let centering = (2.0 * ln_n - ln_n.ln()) / (1.0 / p).ln();
    let y = x + centering;
    let t = y.floor();
    if t < 1.0 {
        return Err(Error::Domain(format!(
            "offset x = {x} gives threshold {t} below 1"
        )));
    }
    Ok((t as usize, y - t))
}

/// Observed overlap-pattern maxima from [`ap_overlap_profile`].
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapProfile {
    pub n: usize,
    pub t: usize,
    /// Number of anchor pairs whose overlap pattern was profiled.
    pub bases_checked: usize,
    /// `max_counts[k]` is the largest number of pairs `(a′, s′)` with
    /// `s′ ≠ s` sharing exactly `k` positions with a profiled pair, taken
    /// over all profiled pairs; index 0 is unused.
    pub max_counts: Vec<u64>,
    /// Number of `(pair, k)` combinations whose count exceeded the ceiling.
    pub violations: u64,
}

impl OverlapProfile {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    /// The published per-pair ceiling on the number of `s′ ≠ s` partners at
    /// overlap size `k`: `(t+1)²·n` for `k = 1`, `(t+1)²·t²` for
    /// `2 ≤ k ≤ t/2 + 1`, and none at all for `k > t/2 + 1`.
    pub fn ceiling(n: usize, t: usize, k: usize) -> u64 {
        let t1 = (t as u64 + 1) * (t as u64 + 1);
        if k == 1 {
            t1 * n as u64
        } else if 2 * k <= t + 2 {
            t1 * (t as u64) * (t as u64)
        } else {
            0
        }
    }
}

/// Profiles how often the position sets `{a, a+s, …, a+ts}` of different
/// strides intersect. For each of `samples` anchor pairs (all of them when
/// `samples` covers the index set), it counts, for every other stride, the
/// partners at each exact overlap size and checks the counts against
/// [`OverlapProfile::ceiling`]. Sampling is seed-deterministic.
pub fn ap_overlap_profile(
    n: usize,
    t: usize,
    samples: usize,
    seed: u64,
) -> Result<OverlapProfile> {
    if n < 2 || t < 1 {
        return Err(Error::Domain(format!(
            "overlap profile needs n >= 2 and t >= 1, got n = {n}, t = {t}"
        )));
    }
    if samples == 0 {
        return Err(Error::Domain("samples must be >= 1".into()));
    }
    let mut index: Vec<(u64, u64)> = Vec::new();
    for s in 1..=((n as u64 - 1) / t as u64) {
        for a in 1..=(n as u64 - t as u64 * s) {
            index.push((a, s));
        }
    }
    if index.len() > 2_000_000 {
        return Err(Error::Size(format!(
            "index set of {} pairs is too large for pairwise profiling",
            index.len()
        )));
    }
    let bases: Vec<(u64, u64)> = if samples >= index.len() {
        index.clone()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        index.choose_multiple(&mut rng, samples).copied().collect()
    };

    let profiles: Vec<(Vec<u64>, u64)> = bases
        .par_iter()
        .map(|&(a, s)| {
            let mut counts = vec![0u64; t + 2];
            for &(a2, s2) in &index {
                if s2 == s {
                    continue;
                }
                let k = overlap_size(a, s, a2, s2, t as u64);
                if k > 0 {
                    counts[k] += 1;
                }
            }
            let mut violations = 0u64;
            for (k, &c) in counts.iter().enumerate().skip(1) {
                if c > OverlapProfile::ceiling(n, t, k) {
                    violations += 1;
                }
            }
            (counts, violations)
        })
        .collect();

    let mut max_counts = vec![0u64; t + 2];
    let mut violations = 0u64;
    for (counts, v) in profiles {
        for (m, c) in max_counts.iter_mut().zip(counts) {
            *m = (*m).max(c);
        }
        violations += v;
    }
    Ok(OverlapProfile {
        n,
        t,
        bases_checked: bases.len(),
        max_counts,
        violations,
    })
}

/// Size of the intersection of `{a + js}` and `{a2 + j·s2}`, `j = 0..=t`,
/// by merging the two sorted sequences.
fn overlap_size(a: u64, s: u64, a2: u64, s2: u64, t: u64) -> usize {
    let (mut i, mut j, mut k) = (0u64, 0u64, 0usize);
    let (mut x, mut y) = (a, a2);
    while i <= t && j <= t {
        if x == y {
            k += 1;
            x += s;
            y += s2;
            i += 1;
            j += 1;
        } else if x < y {
            x += s;
            i += 1;
        } else {
            y += s2;
            j += 1;
        }
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::Kahan;

    #[test]
    fn index_count_matches_hand_values_and_brute_force() {
        assert_eq!(ap_index_count(10, 3), 12, "7 + 4 + 1 pairs at n=10, t=3");
        for t in 1..=6u64 {
            assert_eq!(
                ap_index_count(t + 1, t),
                1,
                "only (a, s) = (1, 1) fits when n = t + 1"
            );
        }
        for n in 2..=60u64 {
            for t in 1..=10u64 {
                assert_eq!(
                    ap_index_count(n, t),
                    ap_index_count_brute(n, t),
                    "formula vs enumeration at n={n} t={t}"
                );
            }
        }
    }

    #[test]
    fn model_mean_is_count_times_qpt() {
        let m = ApModel::new(10, 3, 0.5).unwrap();
        assert_eq!(m.index_count(), 12);
        assert!(
            (m.lambda() - 0.75).abs() < 1e-15,
            "12 · 0.5 · 0.125 = 0.75, got {}",
            m.lambda()
        );
    }

    #[test]
    fn w_count_finds_exactly_the_anchored_progressions() {
        // Successes at positions 4, 6, 8: one stride-2 progression anchored
        // at the failure in position 2, one stride-4 pair anchored at the
        // boundary, nothing else.
        let mut bits = vec![false; 10];
        for pos in [4, 6, 8] {
            bits[pos - 1] = true;
        }
        assert_eq!(ap_w_count(&bits, 3), 1, "only (a, s) = (2, 2) at t = 3");
        assert_eq!(
            ap_w_count(&bits, 2),
            2,
            "(2, 2) and the boundary pair (0, 4) at t = 2"
        );
        assert_eq!(ap_w_count(&bits, 4), 0);

        // Successes at 2, 4, 6 form a stride-2 progression whose anchor
        // falls on position 0: only the boundary reading detects it.
        let mut edge = vec![false; 10];
        for pos in [2, 4, 6] {
            edge[pos - 1] = true;
        }
        assert_eq!(ap_w_count(&edge, 3), 1, "boundary anchor (0, 2) at t = 3");
    }

    #[test]
    fn w_count_is_monotone_nonincreasing_in_the_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let bits: Vec<bool> = (0..300).map(|_| rng.random::<f64>() < 0.5).collect();
            for t in 1..12 {
                assert!(
                    ap_w_count(&bits, t + 1) <= ap_w_count(&bits, t),
                    "raising the threshold must not create progressions"
                );
            }
        }
    }

    #[test]
    fn monte_carlo_agrees_with_enumeration_on_a_small_instance() {
        let (n, t, p) = (14usize, 2usize, 0.35f64);
        let mut exact = Kahan::default();
        for mask in 0u32..(1 << n) {
            let bits: Vec<bool> = (0..n).map(|i| (mask >> i) & 1 == 1).collect();
            if ap_w_count(&bits, t) == 0 {
                let ones = mask.count_ones() as i32;
                exact.add(p.powi(ones) * (1.0 - p).powi(n as i32 - ones));
            }
        }
        let m = ApModel::new(n, t, p).unwrap();
        let mc = ap_mc_estimate(&m, 3000, 5).unwrap();
        assert!(mc.std_error > 0.0);
        assert!(
            (mc.estimate - exact.total()).abs() <= 4.0 * mc.std_error,
            "MC {} vs exact {} beyond 4 standard errors",
            mc.estimate,
            exact.total()
        );
    }

    #[test]
    fn degenerate_monte_carlo_cases_report_probability_one() {
        let no_fit = ApModel::new(10, 11, 0.5).unwrap();
        assert_eq!(ap_mc_estimate(&no_fit, 50, 1).unwrap().estimate, 1.0);
        let all_failures = ApModel::new(20, 2, 1e-9).unwrap();
        assert_eq!(ap_mc_estimate(&all_failures, 50, 1).unwrap().estimate, 1.0);
    }

    #[test]
    fn gumbel_form_matches_direct_substitution_and_is_monotone() {
        assert!(
            (ap_gumbel_approx(0.0, 0.5, 0.0) - 0.917004).abs() < 1e-4,
            "exp(0.5 · ln(1/2)/4) should be about 0.9170, got {}",
            ap_gumbel_approx(0.0, 0.5, 0.0)
        );
        let mut last = 0.0;
        for step in -30..=30 {
            let v = ap_gumbel_approx(step as f64 / 3.0, 0.5, 0.3);
            assert!(v > last, "value must increase strictly in x");
            last = v;
        }
        assert!(ap_gumbel_approx(60.0, 0.5, 0.0) > 1.0 - 1e-12);
        assert!(ap_gumbel_approx(-60.0, 0.5, 0.0) < 1e-100);
    }

    #[test]
    fn threshold_splits_offset_into_integer_and_remainder() {
        let (t, delta) = ap_threshold_from_offset(4096, 0.5, 0.0).unwrap();
        assert_eq!(t, 20, "centering at n = 4096, p = 1/2 is about 20.94");
        assert!((0.0..1.0).contains(&delta));
        let ln_n = 4096f64.ln();
        let centering = (2.0 * ln_n - ln_n.ln()) / 2f64.ln();
        assert!(
            (t as f64 + delta - centering).abs() < 1e-9,
            "t + delta must reproduce x + centering"
        );
        assert!(ap_threshold_from_offset(4096, 0.5, -25.0).is_err());
    }

    #[test]
    fn overlap_profile_respects_the_published_ceilings() {
        let profile = ap_overlap_profile(60, 4, usize::MAX, 0).unwrap();
        assert_eq!(profile.bases_checked, 420, "index set at n=60, t=4");
        assert!(profile.passed(), "no ceiling may be exceeded");
        assert!(profile.max_counts[1] > 0, "single-point overlaps exist");
        assert!(profile.max_counts[3] > 0, "three-point overlaps exist");
        for k in 4..profile.max_counts.len() {
            assert_eq!(
                profile.max_counts[k], 0,
                "overlap size {k} exceeds t/2 + 1 and must never occur"
            );
        }
    }

    #[test]
    fn disjoint_position_sets_give_independent_indicators() {
        // (a, s) = (1, 1) occupies {1, 2, 3, 4}; (5, 2) occupies {5, 7, 9, 11}.
        let (n, t, p) = (12usize, 3usize, 0.6f64);
        let q = 1.0 - p;
        let x_ind = |mask: u32, a: usize, s: usize| -> bool {
            (a == 0 || (mask >> (a - 1)) & 1 == 0)
                && (1..=t).all(|j| (mask >> (a + j * s - 1)) & 1 == 1)
        };
        let (mut both, mut first, mut second) = (Kahan::default(), Kahan::default(), Kahan::default());
        for mask in 0u32..(1 << n) {
            let ones = mask.count_ones() as i32;
            let w = p.powi(ones) * q.powi(n as i32 - ones);
            let (x1, x2) = (x_ind(mask, 1, 1), x_ind(mask, 5, 2));
            if x1 {
                first.add(w);
            }
            if x2 {
                second.add(w);
            }
            if x1 && x2 {
                both.add(w);
            }
        }
        let expected = q * p.powi(3);
        assert!((first.total() - expected).abs() < 1e-12);
        assert!((second.total() - expected).abs() < 1e-12);
        assert!(
            (both.total() - first.total() * second.total()).abs() < 1e-12,
            "joint mean {} should factor as {}",
            both.total(),
            first.total() * second.total()
        );
    }
}
