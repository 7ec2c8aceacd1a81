//! Exact size-bias coupling gap.
//!
//! The size-biased version of `W = sum_a X_a` can be realized as `V_I + 1`:
//! pick index `I = a` with probability `p_a / lambda`, then draw the whole
//! indicator vector from its conditional law given `X_a = 1` and count the
//! fired indicators other than `a`. Here the conditional vector is coupled
//! to the unconditional one through a shared array of uniforms fed through
//! conditional quantiles in fixed index order, and `E|W - V_I|` is summed
//! exactly over the resulting finite partition of the uniform cube.

use super::{law_of_w, JointTable, MAX_CONDITIONAL_INDICATORS};
use crate::dist::{size_bias_transform, Pmf};
use crate::error::{Error, Result};

/// Exact coupling gap and the size-biased law of W.
#[derive(Debug, Clone)]
pub struct SizeBiasCoupling {
    /// `E|W + 1 - (V_I + 1)|` under the canonical shared-uniform coupling.
    pub mean_abs_gap: f64,
    /// Law of the size-biased W (`P_s(k) = k P(k) / E W`).
    pub size_biased_law: Pmf,
}

/// Prefix masses `P(X_0..X_{i-1} = prefix)` for every `i`, built bottom-up
/// from the dense outcome vector. `levels[i]` has `2^i` entries.
struct PrefixMasses {
    levels: Vec<Vec<f64>>,
}

impl PrefixMasses {
    fn new(dense: Vec<f64>, n: usize) -> Self {
        let mut levels = vec![Vec::new(); n + 1];
        levels[n] = dense;
        for i in (0..n).rev() {
            let upper = &levels[i + 1];
            let mut cur = vec![0.0; 1 << i];
            for (prefix, slot) in cur.iter_mut().enumerate() {
                *slot = upper[prefix] + upper[prefix | 1 << i];
            }
            levels[i] = cur;
        }
        PrefixMasses { levels }
    }

    /// `P(X_i = 1 | X_0..X_{i-1} = prefix)`; caller guarantees the prefix is
    /// reachable.
    fn fire_prob(&self, i: usize, prefix: u32) -> f64 {
        let mass = self.levels[i][prefix as usize];
        debug_assert!(mass > 0.0, "conditioning on an impossible prefix");
        self.levels[i + 1][prefix as usize | 1 << i] / mass
    }
}

struct Walk<'a> {
    n: usize,
    alpha: usize,
    plain: &'a PrefixMasses,
    conditioned: &'a PrefixMasses,
}

impl Walk<'_> {
    /// Accumulates `E[ |W - V_alpha| ]` over the region of the uniform cube
    /// described by (prefix_x, prefix_y, weight). `w` counts fired bits of
    /// the unconditional path, `v` fired bits of the conditioned path other
    /// than `alpha`.
    fn run(&self, i: usize, prefix_x: u32, prefix_y: u32, weight: f64, w: i64, v: i64) -> f64 {
        if weight == 0.0 {
            return 0.0;
        }
        if i == self.n {
            return weight * (w - v).abs() as f64;
        }
        // Once the two paths share a prefix in which alpha has already
        // fired, their conditional futures coincide, so the difference W -
        // V_alpha is frozen.
        if prefix_x == prefix_y && i > self.alpha && prefix_x >> self.alpha & 1 == 1 {
            return weight * (w - v).abs() as f64;
        }
        let a = self.plain.fire_prob(i, prefix_x);
        let b = self.conditioned.fire_prob(i, prefix_y);
        let both = a.min(b);
        let one = (a - b).abs();
        let neither = 1.0 - a.max(b);
        let v_inc = if i == self.alpha { 0 } else { 1 };
        let mut total = 0.0;
        // U below both thresholds: the two paths fire together.
        total += self.run(
            i + 1,
            prefix_x | 1 << i,
            prefix_y | 1 << i,
            weight * both,
            w + 1,
            v + v_inc,
        );
        // U between the thresholds: only the larger-threshold path fires.
        if one > 0.0 {
            if a > b {
                total += self.run(i + 1, prefix_x | 1 << i, prefix_y, weight * one, w + 1, v);
            } else {
                total += self.run(i + 1, prefix_x, prefix_y | 1 << i, weight * one, w, v + v_inc);
            }
        }
        // U above both: neither fires.
        total += self.run(i + 1, prefix_x, prefix_y, weight * neither, w, v);
        total
    }
}

/// Exact mean absolute gap of the canonical size-bias coupling, together
/// with the size-biased law of W.
///
/// For independent indicators the gap reduces to `sum p_a^2 / lambda`.
/// Capped at [`MAX_CONDITIONAL_INDICATORS`] indicators.
pub fn exact_size_bias_gap(table: &JointTable) -> Result<SizeBiasCoupling> {
    let n = table.n();
    if n > MAX_CONDITIONAL_INDICATORS {
        return Err(Error::Size(format!(
            "coupling enumeration is capped at {MAX_CONDITIONAL_INDICATORS} indicators, got {n}"
        )));
    }
    let dense = table.dense_probs();
    let ps: Vec<f64> = table.marginals();
    let lambda: f64 = ps.iter().sum();
    if !(lambda > 0.0) {
        return Err(Error::Domain(
            "size-bias coupling needs at least one indicator with positive rate".into(),
        ));
    }
    let plain = PrefixMasses::new(dense.clone(), n);
    let mut gap = 0.0;
    for alpha in 0..n {
        if ps[alpha] == 0.0 {
            continue;
        }
        let mut conditioned_dense = vec![0.0; dense.len()];
        for (mask, &p) in dense.iter().enumerate() {
            if mask >> alpha & 1 == 1 {
                conditioned_dense[mask] = p / ps[alpha];
            }
        }
        let conditioned = PrefixMasses::new(conditioned_dense, n);
        let walk = Walk {
            n,
            alpha,
            plain: &plain,
            conditioned: &conditioned,
        };
        gap += ps[alpha] / lambda * walk.run(0, 0, 0, 1.0, 0, 0);
    }
    let size_biased_law = size_bias_transform(&law_of_w(table)?)?;
    Ok(SizeBiasCoupling {
        mean_abs_gap: gap,
        size_biased_law,
    })
}
