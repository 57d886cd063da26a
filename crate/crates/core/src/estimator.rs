//! Expected average degree `f(c)` of a GIRG with given weights and the search
//! for the constant `c` reaching a target degree.
//!
//! With `x = w_u w_v / W`, unit-free weights `s_v = w_v / sqrt(W)` and
//! `y = g s_u s_v` where `g = 2^d c^T` (`T > 0`) or `g = 2^d c^d` (`T = 0`),
//! the expected number of edges between `u` and `v` is
//!
//! ```text
//! T > 0:  y / (1 - T) - y^(1/T) / (1/T - 1)   if y <= 1
//! T = 0:  y                                    if y <= 1
//!         1                                    if y > 1 (saturated)
//! ```
//!
//! The threshold case follows from `P(dist <= k) = (2k)^d` for `k <= 1/2`
//! with `k = c x^(1/d)`, so `E = min{1, 2^d c^d x}`. Summing the unsaturated
//! expression over all ordered pairs gives two power sums; the saturated pairs
//! are corrected afterwards by iterating the heaviest vertices only.
//!
//! Power sums of `s^(1/T)` are kept in log space, relative to their maximum,
//! so small temperatures do not overflow.

use crate::error::{invalid, Error, Result};
use crate::model::{validate_dim, WeightSet};
use crate::rng::det_sum;

/// Largest temperature accepted by the estimator.
pub const MAX_TEMP: f64 = 0.99;

const SEARCH_ITERS: usize = 200;
const BRACKET_STEPS: usize = 2100;
/// Ratio of term magnitudes to the result beyond which the direct power-sum
/// formula is considered cancelled.
const CANCELLATION: f64 = 1e6;

/// Result of [`DegreeEstimator::estimate_c`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub c: f64,
    /// Factor for scaling all weights to obtain the same graphs with `c = 1`:
    /// `c^T` for `T > 0`, `c^d` for `T = 0`.
    pub scale_factor: f64,
    /// `f(c)` at the returned constant.
    pub avg_degree: f64,
    pub iterations: usize,
    /// Whether some evaluation had to use the cancellation-free path.
    pub stable_path_used: bool,
}

/// Per-`c` constants.
#[derive(Debug, Clone, Copy)]
struct Coeffs {
    /// Saturation iff `g s_u s_v > 1`.
    g: f64,
    /// Linear coefficient: `g / (1 - T)`, or `g` for `T = 0`.
    a: f64,
    /// Log of the power coefficient, `ln g / T - ln(1/T - 1)`; `None` for `T = 0`.
    lb: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct DegreeEstimator {
    n: usize,
    dim: usize,
    temp: f64,
    s: Vec<f64>,
    /// `ln(s_v) / T`, empty for `T = 0`.
    lt: Vec<f64>,
    lt_max: f64,
    sum_s: f64,
    sum_s2: f64,
    /// `sum exp(lt - lt_max)` and `sum exp(2 (lt - lt_max))`.
    sum_t: f64,
    sum_t2: f64,
    /// Vertex indices; `order[..sorted]` is sorted by weight, descending.
    order: Vec<u32>,
    sorted: usize,
    /// Prefix sums over the sorted prefix.
    prefix_s: Vec<f64>,
    prefix_t: Vec<f64>,
    stable_used: bool,
}

impl DegreeEstimator {
    pub fn new(weights: &WeightSet, dim: usize, temp: f64) -> Result<Self> {
        validate_dim(dim)?;
        if !(0.0..=MAX_TEMP).contains(&temp) {
            return Err(invalid("temp", format!("estimator needs a temperature in [0, {MAX_TEMP}], got {temp}")));
        }
        let root = weights.total().sqrt();
        let s: Vec<f64> = weights.as_slice().iter().map(|w| w / root).collect();
        let sum_s = det_sum(&s, |x| *x);
        let sum_s2 = det_sum(&s, |x| x * x);
        let (lt, lt_max, sum_t, sum_t2) = if temp > 0.0 {
            let lt: Vec<f64> = s.iter().map(|x| x.ln() / temp).collect();
            let m = lt.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let st = det_sum(&lt, |l| (l - m).exp());
            let st2 = det_sum(&lt, |l| (2.0 * (l - m)).exp());
            (lt, m, st, st2)
        } else {
            (Vec::new(), 0.0, 0.0, 0.0)
        };
        Ok(Self {
            n: s.len(),
            dim,
            temp,
            order: (0..s.len() as u32).collect(),
            s,
            lt,
            lt_max,
            sum_s,
            sum_s2,
            sum_t,
            sum_t2,
            sorted: 0,
            prefix_s: vec![0.0],
            prefix_t: vec![0.0],
            stable_used: false,
        })
    }

    /// Number of vertices in the lazily sorted prefix.
    pub fn sorted_prefix_len(&self) -> usize {
        self.sorted
    }

    fn coeffs(&self, c: f64) -> Coeffs {
        let two_d = 2f64.powi(self.dim as i32);
        if self.temp > 0.0 {
            let g = two_d * c.powf(self.temp);
            Coeffs {
                g,
                a: g / (1.0 - self.temp),
                lb: Some(g.ln() / self.temp - (1.0 / self.temp - 1.0).ln()),
            }
        } else {
            let g = two_d * c.powi(self.dim as i32);
            Coeffs { g, a: g, lb: None }
        }
    }

    #[inline]
    fn sat(&self, k: &Coeffs, u: usize, v: usize) -> bool {
        k.g * self.s[u] * self.s[v] > 1.0
    }

    /// Expected edges of an unsaturated pair.
    #[inline]
    fn pair_expectation(&self, k: &Coeffs, u: usize, v: usize) -> f64 {
        let lin = k.a * self.s[u] * self.s[v];
        match k.lb {
            Some(lb) => lin - (lb + self.lt[u] + self.lt[v]).exp(),
            None => lin,
        }
    }

    #[inline]
    fn key(&self, v: u32) -> (f64, u32) {
        (self.s[v as usize], v)
    }

    /// Sorts at least `m` of the heaviest vertices.
    fn extend_sorted(&mut self, m: usize) {
        let m = m.min(self.n);
        if m <= self.sorted {
            return;
        }
        let s = &self.s;
        let desc = |a: &u32, b: &u32| {
            let (ka, kb) = ((s[*a as usize], *a), (s[*b as usize], *b));
            kb.0.total_cmp(&ka.0).then(ka.1.cmp(&kb.1))
        };
        let rest = &mut self.order[self.sorted..];
        let take = m - self.sorted;
        if take < rest.len() {
            rest.select_nth_unstable_by(take, desc);
        }
        rest[..take].sort_unstable_by(desc);
        for q in self.sorted..m {
            let v = self.order[q] as usize;
            let ps = self.prefix_s[q] + self.s[v];
            self.prefix_s.push(ps);
            let pt = if self.temp > 0.0 {
                self.prefix_t[q] + (self.lt[v] - self.lt_max).exp()
            } else {
                0.0
            };
            self.prefix_t.push(pt);
        }
        self.sorted = m;
        debug_assert!(self.order[..m].windows(2).all(|w| self.key(w[0]).0 >= self.key(w[1]).0));
    }

    /// Size of the set of vertices with a saturated partner; extends the
    /// sorted prefix as needed. These vertices are the first ones in weight order.
    fn saturated_vertices(&mut self, k: &Coeffs) -> usize {
        if self.n < 2 {
            return 0;
        }
        let mut m = self.sorted.max(64);
        loop {
            self.extend_sorted(m);
            let top = self.order[0] as usize;
            let last = self.order[self.sorted - 1] as usize;
            if self.sorted == self.n || !self.sat(k, last, top) {
                break;
            }
            m = self.sorted * 2;
        }
        let top = self.order[0] as usize;
        let partners = (1..self.sorted)
            .take_while(|&q| self.sat(k, self.order[q] as usize, top))
            .count();
        if partners == 0 {
            0
        } else {
            partners + 1
        }
    }

    /// Sum over unordered saturated pairs of (unsaturated expression - 1),
    /// in time linear in the number of vertices involved.
    pub fn saturated_error(&mut self, c: f64) -> f64 {
        let k = self.coeffs(c);
        self.saturated_error_with(&k).0
    }

    /// Returns the error, the number of unordered saturated pairs and the sum
    /// of the absolute values of all added terms.
    fn saturated_error_with(&mut self, k: &Coeffs) -> (f64, u64, f64) {
        let r = self.saturated_vertices(k);
        let mut err = 0.0;
        let mut magnitude = 0.0;
        let mut pairs = 0u64;
        let mut p = 0;
        for iu in (1..r).rev() {
            let u = self.order[iu] as usize;
            while p < r && self.sat(k, u, self.order[p] as usize) {
                p += 1;
            }
            let q = p.min(iu);
            if q == 0 {
                continue;
            }
            let lin = k.a * self.s[u] * self.prefix_s[q];
            let pow = match k.lb {
                Some(lb) => (lb + self.lt[u] + self.lt_max).exp() * self.prefix_t[q],
                None => 0.0,
            };
            err += lin - pow - q as f64;
            magnitude += lin + pow + q as f64;
            pairs += q as u64;
        }
        (err, pairs, magnitude)
    }

    /// Same quantity by scanning all pairs of saturated vertices.
    pub fn saturated_error_direct(&mut self, c: f64) -> f64 {
        let k = self.coeffs(c);
        let r = self.saturated_vertices(&k);
        let mut err = 0.0;
        for iu in 0..r {
            for iv in iu + 1..r {
                let (u, v) = (self.order[iu] as usize, self.order[iv] as usize);
                if self.sat(&k, u, v) {
                    err += self.pair_expectation(&k, u, v) - 1.0;
                }
            }
        }
        err
    }

    /// Number of unordered saturated pairs.
    pub fn saturated_pairs(&mut self, c: f64) -> u64 {
        let k = self.coeffs(c);
        self.saturated_error_with(&k).1
    }

    /// Expected average degree `f(c)`.
    pub fn expected_avg_degree(&mut self, c: f64) -> f64 {
        if !(c > 0.0) || self.n < 2 {
            return 0.0;
        }
        let k = self.coeffs(c);
        let t1 = k.a * (self.sum_s * self.sum_s - self.sum_s2);
        let mut magnitude = k.a * (self.sum_s * self.sum_s + self.sum_s2);
        let t2 = match k.lb {
            Some(lb) => {
                let scale = (lb + 2.0 * self.lt_max).exp();
                magnitude += scale * (self.sum_t * self.sum_t + self.sum_t2);
                scale * (self.sum_t * self.sum_t - self.sum_t2)
            }
            None => 0.0,
        };
        let (err, _, err_magnitude) = self.saturated_error_with(&k);
        let total = t1 - t2 - 2.0 * err;
        magnitude += 2.0 * err_magnitude;
        if magnitude.is_finite() && magnitude <= CANCELLATION * total.abs() {
            return total / self.n as f64;
        }
        self.stable_used = true;
        self.stable_sum(&k) / self.n as f64
    }

    /// Sum over ordered pairs with unsaturated pairs summed explicitly through
    /// suffix sums of the fully sorted weights, free of cancellation.
    fn stable_sum(&mut self, k: &Coeffs) -> f64 {
        self.extend_sorted(self.n);
        let n = self.n;
        let mut suffix_s = vec![0.0; n + 1];
        let mut suffix_t = vec![0.0; n + 1];
        for q in (0..n).rev() {
            let v = self.order[q] as usize;
            suffix_s[q] = suffix_s[q + 1] + self.s[v];
            if self.temp > 0.0 {
                suffix_t[q] = suffix_t[q + 1] + (self.lt[v] - self.lt_max).exp();
            }
        }
        let mut total = 0.0;
        let mut p = n;
        for iu in 0..n {
            let u = self.order[iu] as usize;
            while p > 0 && !self.sat(k, u, self.order[p - 1] as usize) {
                p -= 1;
            }
            // Partners with index < p are saturated, the rest are not.
            let mut unsat = k.a * self.s[u] * suffix_s[p];
            if let (Some(lb), true) = (k.lb, suffix_t[p] > 0.0) {
                unsat -= (lb + self.lt[u] + self.lt_max + suffix_t[p].ln()).exp();
            }
            if iu >= p {
                unsat -= self.pair_expectation(k, u, u);
            }
            let saturated = p - usize::from(iu < p);
            total += unsat + saturated as f64;
        }
        total
    }

    /// Searches `c` with `f(c)` equal to `target` within
    /// `max(1e-7 target, 1e-10)`.
    pub fn estimate_c(&mut self, target: f64) -> Result<Estimate> {
        if !(target > 0.0 && target.is_finite()) {
            return Err(invalid("degree", format!("target must be positive, got {target}")));
        }
        if target >= self.n as f64 - 1.0 {
            return Err(Error::UnreachableTarget { target, n: self.n });
        }
        let tol = (1e-7 * target).max(1e-10);
        let mut iterations = 0;
        let (mut lo, mut hi);
        let f1 = self.expected_avg_degree(1.0);
        if f1 < target {
            lo = 1.0;
            hi = 2.0;
            while self.expected_avg_degree(hi) < target {
                lo = hi;
                hi *= 2.0;
                iterations += 1;
                if iterations > BRACKET_STEPS || !hi.is_finite() {
                    return Err(Error::UnreachableTarget { target, n: self.n });
                }
            }
        } else {
            hi = 1.0;
            lo = 0.5;
            while self.expected_avg_degree(lo) > target {
                hi = lo;
                lo *= 0.5;
                iterations += 1;
                if iterations > BRACKET_STEPS || lo == 0.0 {
                    return Err(Error::NumericRange(format!("no constant below {hi} reaches degree {target}")));
                }
            }
        }
        let mut best = (f64::INFINITY, 1.0, 0.0);
        for _ in 0..SEARCH_ITERS {
            iterations += 1;
            let mid = 0.5 * (lo + hi);
            let f = self.expected_avg_degree(mid);
            if (f - target).abs() < best.0 {
                best = ((f - target).abs(), mid, f);
            }
            if (f - target).abs() <= tol || mid == lo || mid == hi {
                break;
            }
            if f < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let c = best.1;
        Ok(Estimate {
            c,
            scale_factor: if self.temp > 0.0 {
                c.powf(self.temp)
            } else {
                c.powi(self.dim as i32)
            },
            avg_degree: best.2,
            iterations,
            stable_path_used: self.stable_used,
        })
    }
}

/// `f(c)` for one set of weights.
pub fn expected_avg_degree(c: f64, weights: &WeightSet, dim: usize, temp: f64) -> Result<f64> {
    Ok(DegreeEstimator::new(weights, dim, temp)?.expected_avg_degree(c))
}

/// Constant `c` whose expected average degree is `target`.
pub fn estimate_c(target: f64, weights: &WeightSet, dim: usize, temp: f64) -> Result<Estimate> {
    DegreeEstimator::new(weights, dim, temp)?.estimate_c(target)
}
