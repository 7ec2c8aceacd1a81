//! Quantities attached to the percolation time: the combinatorial exponent
//! `m_t`, the concentration windows it defines for the seeding density, and
//! Monte Carlo estimators for the per-site survival probability and the law
//! of the percolation time.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{percolation_run, PercolationOutcome, UpdateEngine};
use crate::error::{Error, Result};
use crate::seq::McEstimate;

/// `m_t = Σ_{r=0}^{t} Σ_{j=0}^{r} C(d, j)`: the exponent governing the
/// small-`q` order `q^{m_t}` of the probability that a fixed site is still
/// uninfected `t` steps after Bernoulli seeding with uninfected density `q`.
pub fn m_t(d: usize, t: usize) -> Result<u64> {
    if d < 1 {
        return Err(Error::Domain("dimension d must be >= 1".into()));
    }
    let mut total: u128 = 0;
    let mut row: u128 = 1; // Σ_{j=0}^{r} C(d, j), starting at r = 0
    let mut binom: u128 = 1; // C(d, r)
    for r in 0..=t {
        if r > 0 && r <= d {
            binom = binom * (d - r + 1) as u128 / r as u128;
            row += binom;
        }
        total += row;
    }
    u64::try_from(total).map_err(|_| Error::Size(format!("m_t overflows u64 at d={d}, t={t}")))
}

/// Concentration regime of the percolation time at a given uninfected
/// density.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// The percolation time concentrates on the single value `t`.
    Fast(usize),
    /// The percolation time concentrates on `{t, t+1}`.
    TwoPoint(usize),
    /// The density lies in neither window at this `t`.
    Outside,
}

/// Classifies the uninfected density `q` against the concentration windows
/// at time `t`: single-point when
/// `(ω/n^d)^{1/m_{t−1}} ≤ q ≤ (1/(ω·n^d))^{1/m_t}`, two-point when
/// `(1/(ω·n^d))^{1/m_t} ≤ q ≤ (ω/n^d)^{1/m_t}`.
///
/// The single-point window is tested first, so where boundaries meet (at
/// `ω = 1` its upper end coincides with the entire two-point window) the
/// stronger classification wins. `omega` defaults to `ln n`; the theory
/// wants it growing slowly with `n`. At `t = 0` there is no previous
/// exponent, so only the upper single-point inequality is applied.
pub fn regime_classify(
    d: usize,
    n: usize,
    t: usize,
    q: f64,
    omega: Option<f64>,
) -> Result<Regime> {
    if n < 2 {
        return Err(Error::Domain(format!("side length n = {n} must be >= 2")));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!(
            "uninfected density q = {q} outside (0, 1)"
        )));
    }
    let omega = omega.unwrap_or((n as f64).ln());
    if !(omega > 0.0) {
        return Err(Error::Domain(format!("omega = {omega} must be positive")));
    }
    let nd = (n as f64).powi(d as i32);
    let exponent_now = m_t(d, t)? as f64;
    let upper_fast = (1.0 / (omega * nd)).powf(1.0 / exponent_now);
    let lower_fast = if t == 0 {
        0.0
    } else {
        (omega / nd).powf(1.0 / m_t(d, t - 1)? as f64)
    };
    if lower_fast <= q && q <= upper_fast {
        return Ok(Regime::Fast(t));
    }
    let upper_two = (omega / nd).powf(1.0 / exponent_now);
    if upper_fast <= q && q <= upper_two {
        return Ok(Regime::TwoPoint(t));
    }
    Ok(Regime::Outside)
}

/// Precomputed geometry of the ℓ₁ ball of radius `t` inside its bounding
/// cube of side `2t + 1`.
struct Ball {
    /// Cube indices of in-ball cells, sorted by distance from the centre.
    cells: Vec<u32>,
    /// `prefix[s]` = number of cells at distance ≤ `s`.
    prefix: Vec<usize>,
    /// `2d` cube-neighbour indices for each of the first
    /// `prefix[t − 1]` cells (none for `t = 0`).
    neighbours: Vec<u32>,
    cube: usize,
    centre: u32,
    d: usize,
}

impl Ball {
    fn build(d: usize, t: usize) -> Result<Ball> {
        let side = 2 * t + 1;
        let mut cube: u64 = 1;
        for _ in 0..d {
            cube = cube
                .checked_mul(side as u64)
                .filter(|&c| c <= 1 << 24)
                .ok_or_else(|| {
                    Error::Size(format!(
                        "dependence ball of radius {t} in dimension {d} is too large"
                    ))
                })?;
        }
        let cube = cube as usize;
        let distance = |idx: usize| -> usize {
            let mut rest = idx;
            let mut dist = 0;
            for _ in 0..d {
                let c = rest % side;
                rest /= side;
                dist += c.abs_diff(t);
            }
            dist
        };
        let mut cells: Vec<u32> = (0..cube).filter(|&i| distance(i) <= t).map(|i| i as u32).collect();
        cells.sort_by_key(|&i| (distance(i as usize), i));
        let mut prefix = vec![0usize; t + 1];
        for &c in &cells {
            prefix[distance(c as usize)..=t]
                .iter_mut()
                .for_each(|p| *p += 1);
        }
        let interior = if t == 0 { 0 } else { prefix[t - 1] };
        let mut neighbours = Vec::with_capacity(interior * 2 * d);
        for &cell in &cells[..interior] {
            let mut stride = 1u32;
            for _ in 0..d {
                neighbours.push(cell + stride);
                neighbours.push(cell - stride);
                stride *= side as u32;
            }
        }
        let centre = (0..d).fold(0u32, |acc, _| acc * side as u32 + t as u32);
        Ok(Ball {
            cells,
            prefix,
            neighbours,
            cube,
            centre,
            d,
        })
    }

    /// Runs one replicate: seeds the ball, advances `t` steps with the
    /// shrinking update radius, and reports whether the centre is still
    /// uninfected.
    fn centre_survives(&self, t: usize, p: f64, rng: &mut ChaCha8Rng) -> bool {
        let mut lattice = vec![false; self.cube];
        for &cell in &self.cells {
            lattice[cell as usize] = rng.random::<f64>() < p;
        }
        let mut flips: Vec<u32> = Vec::new();
        for s in 1..=t {
            flips.clear();
            for pos in 0..self.prefix[t - s] {
                let cell = self.cells[pos];
                if lattice[cell as usize] {
                    continue;
                }
                let nbrs = &self.neighbours[pos * 2 * self.d..(pos + 1) * 2 * self.d];
                let infected = nbrs.iter().filter(|&&n| lattice[n as usize]).count();
                if infected >= self.d {
                    flips.push(cell);
                }
            }
            for &cell in &flips {
                lattice[cell as usize] = true;
            }
        }
        !lattice[self.centre as usize]
    }
}

/// Monte Carlo estimate of the probability that a fixed site is still
/// uninfected `t` steps after Bernoulli(`p`) seeding.
///
/// Infections travel one ℓ₁ step per time step, so the state of a site at
/// time `t` is a function of the initial seeding on the ℓ₁ ball of radius
/// `t` around it alone. The simulation therefore runs on that ball,
/// updating at step `s` only cells within distance `t − s` — every value
/// such an update reads is exact by induction on `s` — and reads off the
/// centre. Any torus of side `n > 2t` gives the same law, because the ball
/// embeds isometrically.
pub fn estimate_rho(d: usize, t: usize, p: f64, reps: u64, seed: u64) -> Result<McEstimate> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!(
            "seeding probability p = {p} outside [0, 1]"
        )));
    }
    if reps == 0 {
        return Err(Error::Domain("reps must be >= 1".into()));
    }
    let ball = Ball::build(d, t)?;
    let survived: u64 = (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            u64::from(ball.centre_survives(t, p, &mut rng))
        })
        .sum();
    Ok(McEstimate::from_successes(survived, reps))
}

/// Empirical law of the percolation time over independent seedings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TDistribution {
    pub reps: u64,
    /// `(time, occurrences)`, sorted by time.
    pub counts: Vec<(u64, u64)>,
    /// Replicates that froze at a fixed point short of full infection.
    pub never: u64,
}

impl TDistribution {
    pub fn prob(&self, t: u64) -> f64 {
        match self.counts.binary_search_by_key(&t, |&(time, _)| time) {
            Ok(i) => self.counts[i].1 as f64 / self.reps as f64,
            Err(_) => 0.0,
        }
    }

    pub fn prob_le(&self, t: u64) -> f64 {
        let hits: u64 = self
            .counts
            .iter()
            .take_while(|&&(time, _)| time <= t)
            .map(|&(_, c)| c)
            .sum();
        hits as f64 / self.reps as f64
    }

    pub fn prob_never(&self) -> f64 {
        self.never as f64 / self.reps as f64
    }

    /// Binomial standard error of `prob(t)`.
    pub fn std_error(&self, t: u64) -> f64 {
        let p = self.prob(t);
        (p * (1.0 - p) / self.reps as f64).sqrt()
    }
}

/// Runs `reps` independently seeded percolations (replicate `i` on stream
/// `i`) and tabulates the observed times.
pub fn mc_t_distribution(
    d: usize,
    n: usize,
    p: f64,
    reps: u64,
    seed: u64,
) -> Result<TDistribution> {
    if reps == 0 {
        return Err(Error::Domain("reps must be >= 1".into()));
    }
    let outcomes: Vec<PercolationOutcome> = (0..reps)
        .into_par_iter()
        .map(|i| percolation_run(d, n, p, seed, i, UpdateEngine::FrontierQueue).map(|r| r.outcome))
        .collect::<Result<_>>()?;
    let mut never = 0u64;
    let mut map = std::collections::BTreeMap::new();
    for outcome in outcomes {
        match outcome {
            PercolationOutcome::Time(t) => *map.entry(t).or_insert(0u64) += 1,
            PercolationOutcome::Never => never += 1,
        }
    }
    Ok(TDistribution {
        reps,
        counts: map.into_iter().collect(),
        never,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_matches_hand_computed_values() {
        for d in 1..=5 {
            assert_eq!(m_t(d, 0).unwrap(), 1, "m_0 is the single empty term");
        }
        assert_eq!(m_t(2, 1).unwrap(), 4, "1 + (1 + 2)");
        for t in 0..=6 {
            assert_eq!(m_t(1, t).unwrap(), 1 + 2 * t as u64, "rows beyond r=0 sum to 2");
        }
    }

    #[test]
    fn exponent_is_monotone_in_both_arguments() {
        for d in 1..=4 {
            for t in 0..=6 {
                assert!(
                    m_t(d, t + 1).unwrap() > m_t(d, t).unwrap(),
                    "strictly increasing in t"
                );
                assert!(
                    m_t(d + 1, t).unwrap() >= m_t(d, t).unwrap(),
                    "non-decreasing in d"
                );
            }
        }
    }

    #[test]
    fn single_point_window_admits_its_geometric_midpoint() {
        let (d, n, t) = (2usize, 256usize, 2usize);
        let omega = (n as f64).ln();
        let nd = (n as f64).powi(2);
        let lower = (omega / nd).powf(1.0 / m_t(d, t - 1).unwrap() as f64);
        let upper = (1.0 / (omega * nd)).powf(1.0 / m_t(d, t).unwrap() as f64);
        assert!(lower < upper, "window must be non-empty at these sizes");
        let q = (lower * upper).sqrt();
        assert_eq!(
            regime_classify(d, n, t, q, None).unwrap(),
            Regime::Fast(2),
            "geometric midpoint of the single-point window"
        );
    }

    #[test]
    fn dense_uninfected_seeding_is_outside_small_t_windows() {
        for t in 0..=3 {
            assert_eq!(
                regime_classify(2, 256, t, 0.999, None).unwrap(),
                Regime::Outside,
                "q = 0.999 at t = {t}"
            );
        }
    }

    #[test]
    fn two_point_window_is_recognised() {
        // At d=2, n=256, t=1: the two-point window is roughly [0.041, 0.096].
        assert_eq!(
            regime_classify(2, 256, 1, 0.06, None).unwrap(),
            Regime::TwoPoint(1)
        );
    }

    #[test]
    fn unit_omega_degenerates_consistently() {
        let (d, n, t) = (2usize, 64usize, 1usize);
        let point = (1.0 / (64f64 * 64.0)).powf(0.25);
        assert!((point - 0.125).abs() < 1e-12);
        assert_eq!(
            regime_classify(d, n, t, point, Some(1.0)).unwrap(),
            Regime::Fast(1),
            "at omega = 1 the shared boundary classifies as single-point"
        );
        assert_eq!(
            regime_classify(d, n, t, point + 1e-9, Some(1.0)).unwrap(),
            Regime::Outside,
            "the two-point window shrinks to that same single point"
        );
        assert_eq!(
            regime_classify(d, n, t, 0.12, Some(1.0)).unwrap(),
            Regime::Fast(1)
        );
    }

    #[test]
    fn survival_at_time_zero_is_the_unseeded_frequency() {
        let est = estimate_rho(2, 0, 0.35, 40_000, 13).unwrap();
        assert!(
            (est.estimate - 0.65).abs() <= 4.0 * est.std_error,
            "rho(t=0) should estimate q = 0.65, got {}",
            est.estimate
        );
        assert_eq!(estimate_rho(2, 1, 1.0, 500, 13).unwrap().estimate, 0.0);
    }

    #[test]
    fn one_dimensional_survival_matches_q_cubed() {
        let (p, reps) = (0.7f64, 60_000u64);
        let est = estimate_rho(1, 1, p, reps, 17).unwrap();
        let exact = 0.3f64.powi(3);
        assert!(
            (est.estimate - exact).abs() <= 4.0 * est.std_error.max(1e-4),
            "rho(d=1, t=1) should be q^3 = {exact}, got {}",
            est.estimate
        );
    }

    #[test]
    fn two_dimensional_survival_matches_the_exact_one_step_formula() {
        // Uninfected after one step: unseeded and at most one seeded
        // neighbour, so rho = q^4(4 - 3q).
        let q = 0.3f64;
        let est = estimate_rho(2, 1, 1.0 - q, 60_000, 19).unwrap();
        let exact = q.powi(4) * (4.0 - 3.0 * q);
        assert!(
            (est.estimate - exact).abs() <= 4.0 * est.std_error.max(1e-4),
            "rho(d=2, t=1) should be {exact}, got {}",
            est.estimate
        );
    }

    #[test]
    fn survival_estimates_are_pathwise_monotone_in_p() {
        let sparse = estimate_rho(2, 1, 0.40, 20_000, 23).unwrap();
        let dense = estimate_rho(2, 1, 0.55, 20_000, 23).unwrap();
        assert!(
            dense.estimate <= sparse.estimate,
            "shared uniforms make the comparison exact, got {} > {}",
            dense.estimate,
            sparse.estimate
        );
    }

    #[test]
    fn certain_seeding_puts_all_time_mass_at_zero() {
        let dist = mc_t_distribution(2, 8, 1.0, 200, 3).unwrap();
        assert_eq!(dist.counts, vec![(0, 200)]);
        assert_eq!(dist.never, 0);
        assert_eq!(dist.prob(0), 1.0);
    }

    #[test]
    fn histogram_is_a_probability_distribution_and_reproducible() {
        let dist = mc_t_distribution(2, 10, 0.8, 300, 5).unwrap();
        let total: u64 = dist.counts.iter().map(|&(_, c)| c).sum::<u64>() + dist.never;
        assert_eq!(total, 300, "every replicate lands somewhere");
        let again = mc_t_distribution(2, 10, 0.8, 300, 5).unwrap();
        assert_eq!(dist, again, "same seed, same histogram");
    }

    #[test]
    fn site_survival_times_lattice_size_tracks_the_log_of_full_coverage() {
        // Moderate-lambda consistency of the two estimators: n^d * rho
        // against -ln P[T <= t], within Monte Carlo error.
        let (n, q) = (64usize, 0.07f64);
        let dist = mc_t_distribution(2, n, 1.0 - q, 1200, 21).unwrap();
        let p_le = dist.prob_le(1);
        assert!(p_le > 0.0, "some replicates must finish by time 1");
        let rho = estimate_rho(2, 1, 1.0 - q, 1_500_000, 22).unwrap();
        let lambda_hat = (n * n) as f64 * rho.estimate;
        let se_lambda = (n * n) as f64 * rho.std_error;
        let se_p = (p_le * (1.0 - p_le) / 1200.0).sqrt();
        let tolerance = 4.0 * (se_lambda + se_p / p_le) + 0.05;
        assert!(
            (lambda_hat - (-p_le.ln())).abs() <= tolerance,
            "lambda_hat {lambda_hat} vs -ln coverage {} beyond {tolerance}",
            -p_le.ln()
        );
    }
}
