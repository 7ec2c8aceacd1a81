//! `d`-neighbour bootstrap percolation on the `d`-dimensional torus.
//!
//! Sites of `(Z/nZ)^d` are infected or uninfected. At every time step each
//! uninfected site counts its `2d` axis neighbours (one per signed
//! direction, with wraparound, so for `n = 2` the two directions along an
//! axis reach the same site and its state counts twice) and becomes
//! infected when at least `d` of them are infected. The rule is applied to
//! all sites simultaneously and infection is permanent, so the infected set
//! grows monotonically and every run reaches either full infection or a
//! fixed point short of it.
//!
//! Randomness enters only through the initial seeding. Monte Carlo drivers
//! seed replicate `i` from stream `i` of one seeded generator, making every
//! reported quantity independent of thread count.

mod stats;

pub use stats::{estimate_rho, m_t, mc_t_distribution, regime_classify, Regime, TDistribution};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Largest permitted lattice, as a number of sites.
const MAX_SITES: u64 = 1 << 26;

fn checked_sites(d: usize, n: usize) -> Result<usize> {
    if d < 1 {
        return Err(Error::Domain("dimension d must be >= 1".into()));
    }
    if n < 2 {
        return Err(Error::Domain(format!("side length n = {n} must be >= 2")));
    }
    let mut sites: u64 = 1;
    for _ in 0..d {
        sites = sites
            .checked_mul(n as u64)
            .filter(|&s| s <= MAX_SITES)
            .ok_or_else(|| {
                Error::Size(format!("lattice n^d = {n}^{d} exceeds {MAX_SITES} sites"))
            })?;
    }
    Ok(sites as usize)
}

/// Infection state of the torus at a fixed time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TorusState {
    d: usize,
    n: usize,
    infected: Vec<bool>,
    time: u64,
    count: usize,
}

impl TorusState {
    /// Wraps an explicit seeding at time 0. `infected.len()` must be `n^d`;
    /// site `(c_0, …, c_{d−1})` lives at index `Σ c_k·n^k`.
    pub fn new(d: usize, n: usize, infected: Vec<bool>) -> Result<Self> {
        let sites = checked_sites(d, n)?;
        if infected.len() != sites {
            return Err(Error::Size(format!(
                "lattice vector has {} entries, expected n^d = {sites}",
                infected.len()
            )));
        }
        let count = infected.iter().filter(|&&b| b).count();
        Ok(TorusState {
            d,
            n,
            infected,
            time: 0,
            count,
        })
    }

    /// Seeds every site infected independently with probability `p`, drawing
    /// from stream `stream` of a generator seeded with `seed`.
    pub fn seeded(d: usize, n: usize, p: f64, seed: u64, stream: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!(
                "seeding probability p = {p} outside [0, 1]"
            )));
        }
        let sites = checked_sites(d, n)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let infected: Vec<bool> = (0..sites).map(|_| rng.random::<f64>() < p).collect();
        TorusState::new(d, n, infected)
    }

    /// Seeds two lattices from shared uniforms: site `i` is infected in the
    /// first iff `u_i < p_low` and in the second iff `u_i < p_high`, so the
    /// first seeding is a subset of the second whenever `p_low ≤ p_high`.
    pub fn seeded_coupled(
        d: usize,
        n: usize,
        p_low: f64,
        p_high: f64,
        seed: u64,
        stream: u64,
    ) -> Result<(Self, Self)> {
        if !(0.0..=1.0).contains(&p_low) || !(0.0..=1.0).contains(&p_high) {
            return Err(Error::Domain("seeding probabilities outside [0, 1]".into()));
        }
        let sites = checked_sites(d, n)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut low = Vec::with_capacity(sites);
        let mut high = Vec::with_capacity(sites);
        for _ in 0..sites {
            let u = rng.random::<f64>();
            low.push(u < p_low);
            high.push(u < p_high);
        }
        Ok((TorusState::new(d, n, low)?, TorusState::new(d, n, high)?))
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_sites(&self) -> usize {
        self.infected.len()
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn infected_count(&self) -> usize {
        self.count
    }

    pub fn is_full(&self) -> bool {
        self.count == self.infected.len()
    }

    pub fn infected(&self) -> &[bool] {
        &self.infected
    }

    /// Index of the site with the given coordinates (one per axis, each in
    /// `0..n`).
    pub fn site_index(&self, coords: &[usize]) -> usize {
        assert_eq!(coords.len(), self.d, "one coordinate per axis");
        coords
            .iter()
            .rev()
            .fold(0, |acc, &c| acc * self.n + (c % self.n))
    }

    fn count_infected_neighbours(&self, idx: usize) -> usize {
        let mut hits = 0;
        let mut stride = 1;
        for _ in 0..self.d {
            let c = (idx / stride) % self.n;
            let up = if c + 1 == self.n {
                idx - (self.n - 1) * stride
            } else {
                idx + stride
            };
            let down = if c == 0 {
                idx + (self.n - 1) * stride
            } else {
                idx - stride
            };
            hits += usize::from(self.infected[up]) + usize::from(self.infected[down]);
            stride *= self.n;
        }
        hits
    }

    fn push_uninfected_neighbours(&self, idx: usize, out: &mut Vec<usize>) {
        let mut stride = 1;
        for _ in 0..self.d {
            let c = (idx / stride) % self.n;
            let up = if c + 1 == self.n {
                idx - (self.n - 1) * stride
            } else {
                idx + stride
            };
            let down = if c == 0 {
                idx + (self.n - 1) * stride
            } else {
                idx - stride
            };
            if !self.infected[up] {
                out.push(up);
            }
            if !self.infected[down] {
                out.push(down);
            }
            stride *= self.n;
        }
    }

    /// One simultaneous update of the whole lattice: every uninfected site
    /// with at least `d` infected neighbours becomes infected, time advances
    /// by one.
    pub fn step(&self) -> TorusState {
        let mut next = self.infected.clone();
        let mut count = self.count;
        for idx in 0..self.infected.len() {
            if !self.infected[idx] && self.count_infected_neighbours(idx) >= self.d {
                next[idx] = true;
                count += 1;
            }
        }
        TorusState {
            d: self.d,
            n: self.n,
            infected: next,
            time: self.time + 1,
            count,
        }
    }
}

/// Whether a run infected the whole torus, and when.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PercolationOutcome {
    /// Full infection was first reached at this time.
    Time(u64),
    /// The dynamics froze at a fixed point short of full infection.
    Never,
}

impl PercolationOutcome {
    pub fn time(&self) -> Option<u64> {
        match self {
            PercolationOutcome::Time(t) => Some(*t),
            PercolationOutcome::Never => None,
        }
    }

    /// Comparison with `Never` treated as `+∞`.
    pub fn le(&self, other: &PercolationOutcome) -> bool {
        match (self.time(), other.time()) {
            (_, None) => true,
            (None, Some(_)) => false,
            (Some(a), Some(b)) => a <= b,
        }
    }
}

/// Which mechanism drives the dynamics to its end state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateEngine {
    /// Re-evaluate every site each step; transparent, good for small grids.
    FullSweep,
    /// Re-evaluate only uninfected neighbours of freshly infected sites;
    /// equivalent because a site's neighbour count changes only when a
    /// neighbour flips.
    FrontierQueue,
}

/// A completed run of the dynamics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PercolationRun {
    pub outcome: PercolationOutcome,
    /// Infected-site counts indexed by time, starting at the initial state;
    /// strictly increasing until the run ends.
    pub trajectory: Vec<usize>,
    /// The lattice at the end of the run.
    pub state: TorusState,
}

/// Iterates the dynamics from `state` until full infection or a fixed
/// point. Both engines produce identical runs; they differ only in cost.
pub fn drive(state: TorusState, engine: UpdateEngine) -> PercolationRun {
    match engine {
        UpdateEngine::FullSweep => drive_sweep(state),
        UpdateEngine::FrontierQueue => drive_frontier(state),
    }
}

fn drive_sweep(mut state: TorusState) -> PercolationRun {
    let mut trajectory = vec![state.count];
    loop {
        if state.is_full() {
            return PercolationRun {
                outcome: PercolationOutcome::Time(state.time),
                trajectory,
                state,
            };
        }
        let next = state.step();
        if next.count == state.count {
            return PercolationRun {
                outcome: PercolationOutcome::Never,
                trajectory,
                state,
            };
        }
        trajectory.push(next.count);
        state = next;
    }
}

fn drive_frontier(mut state: TorusState) -> PercolationRun {
    let mut trajectory = vec![state.count];
    let mut candidates: Vec<usize> = (0..state.infected.len())
        .filter(|&idx| !state.infected[idx] && state.count_infected_neighbours(idx) > 0)
        .collect();
    let mut enqueued: Vec<u64> = vec![u64::MAX; state.infected.len()];
    let mut flips: Vec<usize> = Vec::new();
    loop {
        if state.is_full() {
            return PercolationRun {
                outcome: PercolationOutcome::Time(state.time),
                trajectory,
                state,
            };
        }
        flips.clear();
        for &idx in &candidates {
            if !state.infected[idx] && state.count_infected_neighbours(idx) >= state.d {
                flips.push(idx);
            }
        }
        if flips.is_empty() {
            return PercolationRun {
                outcome: PercolationOutcome::Never,
                trajectory,
                state,
            };
        }
        for &idx in &flips {
            state.infected[idx] = true;
        }
        state.count += flips.len();
        state.time += 1;
        trajectory.push(state.count);
        candidates.clear();
        let stamp = state.time;
        let mut fresh: Vec<usize> = Vec::new();
        for &idx in &flips {
            state.push_uninfected_neighbours(idx, &mut fresh);
        }
        for idx in fresh {
            if enqueued[idx] != stamp {
                enqueued[idx] = stamp;
                candidates.push(idx);
            }
        }
    }
}

/// Seeds the torus with density `p` (stream `stream` of `seed`) and runs
/// the chosen engine to completion.
pub fn percolation_run(
    d: usize,
    n: usize,
    p: f64,
    seed: u64,
    stream: u64,
    engine: UpdateEngine,
) -> Result<PercolationRun> {
    Ok(drive(TorusState::seeded(d, n, p, seed, stream)?, engine))
}

/// Convenience wrapper: stream 0, frontier engine.
pub fn percolation_time(d: usize, n: usize, p: f64, seed: u64) -> Result<PercolationRun> {
    percolation_run(d, n, p, seed, 0, UpdateEngine::FrontierQueue)
}
