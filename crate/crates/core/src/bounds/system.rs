//! System descriptions that the bound calculators consume.

use crate::error::{Error, Result};
use crate::oracle::JointTable;
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::sync::Arc;

/// Where a system's joint moments come from.
///
/// Bounds that need conditional laws (the conditional-deviation term, the
/// cluster-rate extraction) require `FullJoint`; pair-moment bounds accept
/// `Pairwise`; `Sampler` supports Monte Carlo only and every moment-based
/// operation rejects it.
#[derive(Clone)]
pub enum MomentSource {
    /// Explicit law of the indicator vector (small systems only).
    FullJoint(JointTable),
    /// Symmetric matrix of `E[X_a X_b]` with `E[X_a]` on the diagonal.
    Pairwise(Vec<Vec<f64>>),
    /// Seedable generator of outcome bitmasks.
    Sampler(OutcomeSampler),
}

impl fmt::Debug for MomentSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MomentSource::FullJoint(t) => write!(f, "FullJoint({} indicators)", t.n()),
            MomentSource::Pairwise(m) => write!(f, "Pairwise({0}x{0})", m.len()),
            MomentSource::Sampler(_) => write!(f, "Sampler"),
        }
    }
}

/// A seedable source of joint indicator outcomes, encoded as bitmasks.
#[derive(Clone)]
pub struct OutcomeSampler {
    sample: Arc<dyn Fn(&mut ChaCha8Rng) -> u64 + Send + Sync>,
}

impl OutcomeSampler {
    pub fn new(sample: impl Fn(&mut ChaCha8Rng) -> u64 + Send + Sync + 'static) -> Self {
        OutcomeSampler {
            sample: Arc::new(sample),
        }
    }

    /// Draws one outcome mask; bit `a` is indicator `a` firing.
    pub fn draw(&self, rng: &mut ChaCha8Rng) -> u64 {
        (self.sample)(rng)
    }
}

/// A finite family of dependent Bernoulli indicators: marginals, declared
/// dependence neighbourhoods, optional outer (two-layer) neighbourhoods,
/// and a source of joint information.
///
/// Neighbourhood semantics: indicator `a` is claimed independent of every
/// indicator outside `hood(a)`, and (when outer neighbourhoods are given)
/// the block `hood(a)` is claimed independent of everything outside
/// `outer(a)`. The claims are the caller's; operations that rely on them
/// spot-check what the moment source allows.
#[derive(Debug, Clone)]
pub struct IndicatorSystem {
    marginals: Vec<f64>,
    hoods: Vec<Vec<usize>>,
    outer: Option<Vec<Vec<usize>>>,
    source: MomentSource,
    local_dependence: bool,
}

fn normalized_hoods(n: usize, hoods: &[Vec<usize>], label: &str) -> Result<Vec<Vec<usize>>> {
    if hoods.len() != n {
        return Err(Error::InvalidStructure(format!(
            "{label}: expected {n} neighbourhoods, got {}",
            hoods.len()
        )));
    }
    let mut out = Vec::with_capacity(n);
    for (a, hood) in hoods.iter().enumerate() {
        let mut h = hood.clone();
        h.sort_unstable();
        h.dedup();
        if h.iter().any(|&b| b >= n) {
            return Err(Error::InvalidStructure(format!(
                "{label}: neighbourhood of {a} references an index >= {n}"
            )));
        }
        if !h.contains(&a) {
            return Err(Error::InvalidStructure(format!(
                "{label}: neighbourhood of {a} must contain {a}"
            )));
        }
        out.push(h);
    }
    Ok(out)
}

impl IndicatorSystem {
    pub fn new(
        marginals: Vec<f64>,
        hoods: Vec<Vec<usize>>,
        outer: Option<Vec<Vec<usize>>>,
        source: MomentSource,
        local_dependence: bool,
    ) -> Result<Self> {
        let n = marginals.len();
        if n == 0 {
            return Err(Error::Size("system needs at least one indicator".into()));
        }
        for (a, &p) in marginals.iter().enumerate() {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Domain(format!(
                    "marginal of indicator {a} must lie strictly in (0,1), got {p}"
                )));
            }
        }
        let hoods = normalized_hoods(n, &hoods, "inner")?;
        let outer = match outer {
            None => None,
            Some(o) => {
                let o = normalized_hoods(n, &o, "outer")?;
                for a in 0..n {
                    if !hoods[a].iter().all(|b| o[a].contains(b)) {
                        return Err(Error::InvalidStructure(format!(
                            "outer neighbourhood of {a} must contain the inner one"
                        )));
                    }
                }
                Some(o)
            }
        };
        match &source {
            MomentSource::FullJoint(table) => {
                if table.n() != n {
                    return Err(Error::Size(format!(
                        "joint table covers {} indicators, system declares {n}",
                        table.n()
                    )));
                }
                for a in 0..n {
                    let implied = table.marginal(a);
                    if (implied - marginals[a]).abs() > 1e-10 {
                        return Err(Error::InvalidStructure(format!(
                            "declared marginal {} of indicator {a} contradicts the \
                             joint table's {implied}",
                            marginals[a]
                        )));
                    }
                }
            }
            MomentSource::Pairwise(m) => {
                if m.len() != n || m.iter().any(|row| row.len() != n) {
                    return Err(Error::Size(format!(
                        "pair-moment matrix must be {n}x{n}"
                    )));
                }
                for a in 0..n {
                    if (m[a][a] - marginals[a]).abs() > 1e-10 {
                        return Err(Error::InvalidStructure(format!(
                            "diagonal moment of indicator {a} must equal its marginal"
                        )));
                    }
                    for b in 0..n {
                        if (m[a][b] - m[b][a]).abs() > 1e-12 {
                            return Err(Error::InvalidStructure(
                                "pair-moment matrix must be symmetric".into(),
                            ));
                        }
                        let cap = marginals[a].min(marginals[b]) + 1e-12;
                        if !(m[a][b] >= -1e-15 && m[a][b] <= cap) {
                            return Err(Error::Domain(format!(
                                "pair moment ({a},{b}) = {} outside [0, min marginal]",
                                m[a][b]
                            )));
                        }
                    }
                }
            }
            MomentSource::Sampler(_) => {}
        }
        Ok(IndicatorSystem {
            marginals,
            hoods,
            outer,
            source,
            local_dependence,
        })
    }

    /// Builds a system directly from a joint table, deriving the marginals.
    pub fn from_joint(
        table: JointTable,
        hoods: Vec<Vec<usize>>,
        outer: Option<Vec<Vec<usize>>>,
    ) -> Result<Self> {
        let marginals = table.marginals();
        IndicatorSystem::new(marginals, hoods, outer, MomentSource::FullJoint(table), false)
    }

    pub fn n(&self) -> usize {
        self.marginals.len()
    }

    /// `lambda = sum of marginals`, the Poisson intensity to approximate by.
    pub fn lambda(&self) -> f64 {
        crate::dist::kahan_sum(self.marginals.iter().copied())
    }

    pub fn marginals(&self) -> &[f64] {
        &self.marginals
    }

    pub fn hood(&self, a: usize) -> &[usize] {
        &self.hoods[a]
    }

    pub fn hoods(&self) -> &[Vec<usize>] {
        &self.hoods
    }

    /// Outer neighbourhood of `a`; defaults to the inner one when no outer
    /// layer was declared.
    pub fn outer(&self, a: usize) -> &[usize] {
        match &self.outer {
            Some(o) => &o[a],
            None => &self.hoods[a],
        }
    }

    pub fn has_outer(&self) -> bool {
        self.outer.is_some()
    }

    pub fn source(&self) -> &MomentSource {
        &self.source
    }

    /// The joint table, when the source carries one.
    pub fn joint(&self) -> Option<&JointTable> {
        match &self.source {
            MomentSource::FullJoint(t) => Some(t),
            _ => None,
        }
    }

    /// Whether the caller asserts that each indicator is genuinely
    /// independent of everything outside its neighbourhood (needed for
    /// pair-moment-only bounds to drop the conditional term).
    pub fn asserts_local_dependence(&self) -> bool {
        self.local_dependence
    }

    /// `sum_a sum_{b in outer(a)} p_a p_b`, the pair-product mass over outer
    /// neighbourhoods that the compound bounds multiply their factors by.
    pub fn outer_pair_sum(&self) -> f64 {
        crate::dist::kahan_sum((0..self.n()).flat_map(|a| {
            self.outer(a)
                .iter()
                .map(move |&b| self.marginals[a] * self.marginals[b])
        }))
    }
}
