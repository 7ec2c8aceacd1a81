//! Longest run of successes in a Bernoulli sequence of fixed length.
//!
//! For an i.i.d. Bernoulli(`p`) sequence of length `n`, let `R` be the
//! length of the longest success run contained in the sequence. The event
//! `{R < t}` coincides with `{W = 0}`, where `W` counts run onsets: a
//! counted onset at position 1 needs the first `t` trials to succeed, and a
//! counted onset at position `i ≥ 2` needs trial `i − 1` to fail and trials
//! `i, …, i + t − 1` to succeed. Anchoring on the preceding failure means a
//! run of length `m ≥ t` contributes exactly one onset rather than
//! `m − t + 1` of them, which is what keeps `W` approximately Poisson.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::McEstimate;
use crate::dist::{kahan_sum, Kahan};
use crate::error::{Error, Result};

/// Parameters of a longest-success-run problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadRunModel {
    n: usize,
    t: usize,
    p: f64,
}

impl HeadRunModel {
    /// Requires `1 ≤ t ≤ n` and `p ∈ (0, 1)`.
    pub fn new(n: usize, t: usize, p: f64) -> Result<Self> {
        if t < 1 || t > n {
            return Err(Error::Domain(format!(
                "run threshold t = {t} must satisfy 1 <= t <= n = {n}"
            )));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!(
                "success probability p = {p} outside (0, 1)"
            )));
        }
        Ok(HeadRunModel { n, t, p })
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

    /// Mean onset count `p^t · (1 + (n − t)·q)`: the onset at position 1
    /// has mean `p^t`, and each of the `n − t` later start positions
    /// carries an extra factor `q` for the failure that precedes it.
    pub fn lambda(&self) -> f64 {
        let q = 1.0 - self.p;
        self.p.powi(self.t as i32) * (1.0 + (self.n - self.t) as f64 * q)
    }
}

/// Exact `P[R < t]` by dynamic programming over the length of the trailing
/// success run (states `0 ..= t − 1`; a run reaching `t` is dropped as a
/// failure of the event). Linear in `n·t`, so it works far beyond the reach
/// of enumeration.
pub fn headrun_exact(m: &HeadRunModel) -> f64 {
    let q = 1.0 - m.p;
    let mut state = vec![0.0f64; m.t];
    let mut next = vec![0.0f64; m.t];
    state[0] = 1.0;
    for _ in 0..m.n {
        for v in next.iter_mut() {
            *v = 0.0;
        }
        for (r, &mass) in state.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            next[0] += q * mass;
            if r + 1 < m.t {
                next[r + 1] += m.p * mass;
            }
        }
        std::mem::swap(&mut state, &mut next);
    }
    kahan_sum(state.iter().copied())
}

/// Exact `P[R ≥ t]`, accumulated as the mass absorbed when a success run
/// reaches `t`. Every absorbed term is a positive product, so the result
/// keeps full *relative* precision even when it is far below one ulp of 1 —
/// where `1 − P[R < t]` would lose every digit to cancellation. Comparisons
/// against quantities of the same magnitude (for example `1 − e^{−lambda}`)
/// should happen in this complementary form.
pub fn headrun_exact_tail(m: &HeadRunModel) -> f64 {
    let q = 1.0 - m.p;
    let mut state = vec![0.0f64; m.t];
    let mut next = vec![0.0f64; m.t];
    state[0] = 1.0;
    let mut absorbed = Kahan::default();
    for _ in 0..m.n {
        for v in next.iter_mut() {
            *v = 0.0;
        }
        for (r, &mass) in state.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            next[0] += q * mass;
            if r + 1 < m.t {
                next[r + 1] += m.p * mass;
            } else {
                absorbed.add(m.p * mass);
            }
        }
        std::mem::swap(&mut state, &mut next);
    }
    absorbed.total()
}

/// Exhaustive reference for [`headrun_exact`]: sums the likelihood of every
/// outcome whose longest success run stays below `t`. Only for `n ≤ 24`.
pub fn headrun_enumerate(m: &HeadRunModel) -> Result<f64> {
    if m.n > 24 {
        return Err(Error::Size(format!(
            "enumeration over 2^n outcomes needs n <= 24, got n = {}",
            m.n
        )));
    }
    let q = 1.0 - m.p;
    let weights: Vec<f64> = (0..=m.n)
        .map(|k| m.p.powi(k as i32) * q.powi((m.n - k) as i32))
        .collect();
    let mut total = Kahan::default();
    for mask in 0u32..(1u32 << m.n) {
        if longest_one_run(mask) < m.t {
            total.add(weights[mask.count_ones() as usize]);
        }
    }
    Ok(total.total())
}

fn longest_one_run(mut mask: u32) -> usize {
    let mut len = 0;
    while mask != 0 {
        mask &= mask << 1;
        len += 1;
    }
    len
}

/// The mean together with the closed-form error of approximating
/// `P[R < t]` by `e^{−lambda}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadRunBound {
    pub lambda: f64,
    /// `(1 ∧ 1/lambda) · (lambda²(2t+1)/n + lambda·p^t)`.
    pub bound: f64,
}

/// Error bound for the Poisson approximation of the onset count: onsets
/// more than `t` positions apart are independent, so only products of means
/// over the at most `2t + 1` nearby onsets enter, giving
/// `|P[R < t] − e^{−lambda}| ≤ (1 ∧ 1/lambda)(lambda²(2t+1)/n + lambda p^t)`.
pub fn headrun_bound(m: &HeadRunModel) -> HeadRunBound {
    let lambda = m.lambda();
    let raw = lambda * lambda * (2.0 * m.t as f64 + 1.0) / m.n as f64
        + lambda * m.p.powi(m.t as i32);
    HeadRunBound {
        lambda,
        bound: (1.0f64).min(1.0 / lambda) * raw,
    }
}

/// Exact probability versus its double-exponential limit at integer offset
/// `c` from the centering `log_{1/p}(n·q)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadRunAsymptotic {
    /// `⌊log_{1/p}(n·q)⌋ + c`; may fall outside `[1, n]`, in which case the
    /// exact probability is trivially 0 or 1.
    pub threshold: i64,
    /// `P[R < threshold]`, exact.
    pub exact: f64,
    /// `exp(−p^{c − r})` with `r` the fractional part of `log_{1/p}(n·q)`.
    pub limit: f64,
}

/// Evaluates both sides of the limiting law for the longest run: the exact
/// `P[R < ⌊log_{1/p}(n·q)⌋ + c]` and its limit `exp(−p^{c−r})`. The two
/// agree to within the matching [`headrun_bound`] plus a centering error
/// that vanishes as `n` grows.
pub fn headrun_asymptotic_check(n: usize, p: f64, c: i64) -> Result<HeadRunAsymptotic> {
    if n < 1 {
        return Err(Error::Domain("sequence length n must be >= 1".into()));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!(
            "success probability p = {p} outside (0, 1)"
        )));
    }
    let q = 1.0 - p;
    let base = (n as f64 * q).ln() / (1.0 / p).ln();
    let r = base - base.floor();
    let threshold = base.floor() as i64 + c;
    let exact = if threshold < 1 {
        0.0
    } else if threshold > n as i64 {
        1.0
    } else {
        headrun_exact(&HeadRunModel::new(n, threshold as usize, p)?)
    };
    let limit = (-p.powf(c as f64 - r)).exp();
    Ok(HeadRunAsymptotic {
        threshold,
        exact,
        limit,
    })
}

/// Monte Carlo estimate of `P[R < t]`. Replicate `i` draws its sequence
/// from stream `i` of one seeded generator, so the result is independent of
/// thread count and replicate order.
pub fn headrun_mc_estimate(m: &HeadRunModel, reps: u64, seed: u64) -> Result<McEstimate> {
    if reps == 0 {
        return Err(Error::Domain("reps must be >= 1".into()));
    }
    let below: u64 = (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            let mut run = 0usize;
            for _ in 0..m.n {
                if rng.random::<f64>() < m.p {
                    run += 1;
                    if run == m.t {
                        return 0u64;
                    }
                } else {
                    run = 0;
                }
            }
            1u64
        })
        .sum();
    Ok(McEstimate::from_successes(below, reps))
}
