//! Table filter for trials `y < p` where the probability is a decreasing
//! function of a cheap score `s` and `y` ranges over many orders of
//! magnitude (a uniform scaled by a small bound).
//!
//! With `t(y)` the score at which `p = y`, a trial succeeds iff `s < t(y)`.
//! Bins are indexed by the binary exponent of `y` and its top mantissa
//! bits; each stores `t` at both bin ends, widened by a relative margin.
//! Scores between the two values are left to the exact evaluation.

use crate::hrg::FilterDecision;

const OCTAVES: u64 = 64;
const SUB_BITS: u32 = 5;
const SUB: u64 = 1 << SUB_BITS;
const MARGIN: f64 = 1e-9;

#[derive(Debug, Clone)]
pub(crate) struct OctaveFilter {
    /// Scores below are certain edges.
    edge_below: Vec<f64>,
    /// Scores at or above are certain non-edges.
    none_above: Vec<f64>,
}

/// `y` at the lower end of bin `j`, for `j` in `0..=OCTAVES * SUB`.
fn bin_start(j: u64) -> f64 {
    let (e, k) = (j / SUB, j % SUB);
    0.5f64.powi(e as i32 + 1) * (1.0 + k as f64 / SUB as f64)
}

impl OctaveFilter {
    /// `t` must be non-increasing on `(0, 1)`; NaN disables a bin.
    pub(crate) fn new(t: impl Fn(f64) -> f64) -> Self {
        let bins = (OCTAVES * SUB) as usize;
        let mut edge_below = vec![f64::NEG_INFINITY; bins];
        let mut none_above = vec![f64::INFINITY; bins];
        for e in 0..OCTAVES {
            for k in 0..SUB {
                let lo = bin_start(e * SUB + k);
                let hi = if k + 1 == SUB { 2.0 * bin_start(e * SUB) } else { bin_start(e * SUB + k + 1) };
                let (t_hi, t_lo) = (t(hi), t(lo));
                let j = (e * SUB + k) as usize;
                if !t_hi.is_nan() && t_hi > 0.0 {
                    edge_below[j] = t_hi * (1.0 - MARGIN);
                }
                if !t_lo.is_nan() {
                    none_above[j] = if t_lo >= 0.0 { t_lo * (1.0 + MARGIN) } else { t_lo * (1.0 - MARGIN) };
                }
            }
        }
        Self { edge_below, none_above }
    }

    #[inline]
    pub(crate) fn decide(&self, y: f64, s: f64) -> FilterDecision {
        let bits = y.to_bits();
        // y in [2^-(e+1), 2^-e) has biased exponent 1022 - e
        let e = 1022u64.wrapping_sub(bits >> 52);
        if e >= OCTAVES {
            return FilterDecision::Evaluate;
        }
        let j = (e * SUB + ((bits >> (52 - SUB_BITS)) & (SUB - 1))) as usize;
        if s < self.edge_below[j] {
            FilterDecision::Edge
        } else if s >= self.none_above[j] {
            FilterDecision::NoEdge
        } else {
            FilterDecision::Evaluate
        }
    }

    /// `y < p`, with `exact` called only when the table cannot decide.
    #[inline]
    pub(crate) fn trial(&self, y: f64, s: f64, exact: impl FnOnce() -> bool) -> bool {
        match self.decide(y, s) {
            FilterDecision::Edge => true,
            FilterDecision::NoEdge => false,
            FilterDecision::Evaluate => exact(),
        }
    }
}
