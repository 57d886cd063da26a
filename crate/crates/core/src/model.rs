//! GIRG model parameters, weight and position sampling, the torus metric and
//! the connection probability of both model variants.

use rand::Rng;

use crate::error::{invalid, Result};
use crate::rng::{self, det_sum, fill_chunked};

/// Largest supported torus dimension.
pub const MAX_DIM: usize = 5;

/// How the average degree of a generated graph is controlled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DegreeSpec {
    /// Desired expected average degree; the constant is estimated from the weights.
    Target(f64),
    /// Explicit connection constant `c`.
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GirgParams {
    pub n: usize,
    pub dim: usize,
    /// Power-law exponent of the weights.
    pub ple: f64,
    /// Temperature; 0 selects the threshold variant.
    pub temp: f64,
    pub degree: DegreeSpec,
    pub seed: u64,
}

impl GirgParams {
    pub fn validate(&self) -> Result<()> {
        validate_n(self.n)?;
        validate_dim(self.dim)?;
        validate_ple(self.ple)?;
        validate_temp(self.temp)?;
        match self.degree {
            DegreeSpec::Target(t) if !(t > 0.0 && t.is_finite()) => {
                Err(invalid("degree", format!("target must be positive, got {t}")))
            }
            DegreeSpec::Target(t) if t >= (self.n as f64 - 1.0) => Err(
                crate::Error::UnreachableTarget { target: t, n: self.n },
            ),
            DegreeSpec::Constant(c) if !(c > 0.0 && c.is_finite()) => {
                Err(invalid("const", format!("must be positive, got {c}")))
            }
            _ => Ok(()),
        }
    }
}

pub(crate) fn validate_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(invalid("n", "at least one vertex is required"));
    }
    if n > u32::MAX as usize {
        return Err(invalid("n", format!("at most {} vertices are supported", u32::MAX)));
    }
    Ok(())
}

pub(crate) fn validate_dim(dim: usize) -> Result<()> {
    if !(1..=MAX_DIM).contains(&dim) {
        return Err(invalid("dim", format!("must be in 1..={MAX_DIM}, got {dim}")));
    }
    Ok(())
}

pub(crate) fn validate_ple(ple: f64) -> Result<()> {
    if !(ple > 2.0 && ple.is_finite()) {
        return Err(invalid("ple", format!("power-law exponent must exceed 2, got {ple}")));
    }
    Ok(())
}

pub(crate) fn validate_temp(temp: f64) -> Result<()> {
    if !(0.0..1.0).contains(&temp) {
        return Err(invalid("temp", format!("temperature must be in [0, 1), got {temp}")));
    }
    Ok(())
}

/// Vertex weights with cached aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    weights: Vec<f64>,
    total: f64,
    sum_sq_over_total: f64,
}

impl WeightSet {
    /// Wraps user-supplied weights. Only positivity is checked.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        validate_n(weights.len())?;
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(invalid("weights", format!("weights must be positive and finite, found {w}")));
        }
        let total = det_sum(&weights, |w| *w);
        let sum_sq_over_total = det_sum(&weights, |w| w * w) / total;
        Ok(Self {
            weights,
            total,
            sum_sq_over_total,
        })
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `W`, the sum of all weights.
    #[inline]
    pub fn total(&self) -> f64 {
        self.total
    }

    /// `sum_v w_v^2 / W`.
    #[inline]
    pub fn sum_sq_over_total(&self) -> f64 {
        self.sum_sq_over_total
    }

    pub fn min(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    /// Every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.weights.iter().map(|w| w * factor).collect())
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.weights
    }
}

/// Inverse CDF of the Pareto law `P(w >= x) = x^(1 - ple)`, `x >= 1`.
#[inline]
pub fn pareto_inverse(u: f64, ple: f64) -> f64 {
    (1.0 - u).powf(1.0 / (1.0 - ple))
}

/// Draws `n` i.i.d. Pareto weights with minimum 1 and exponent `ple`.
pub fn sample_weights(n: usize, ple: f64, seed: u64) -> Result<WeightSet> {
    validate_n(n)?;
    validate_ple(ple)?;
    let mut weights = vec![0.0; n];
    fill_chunked(&mut weights, seed, rng::STREAM_WEIGHTS, 1, |rng, out| {
        for w in out {
            *w = pareto_inverse(rng.gen::<f64>(), ple);
        }
    });
    WeightSet::new(weights)
}

/// Points on the `dim`-dimensional unit torus, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PositionSet {
    /// Wraps row-major coordinates; each must lie in `[0, 1)`.
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        validate_dim(dim)?;
        if coords.len() % dim != 0 {
            return Err(invalid("coords", "length is not a multiple of the dimension"));
        }
        if let Some(x) = coords.iter().find(|x| !(0.0..1.0).contains(*x)) {
            return Err(invalid("coords", format!("coordinate {x} outside [0, 1)")));
        }
        Ok(Self { dim, coords })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn point(&self, v: usize) -> &[f64] {
        &self.coords[v * self.dim..(v + 1) * self.dim]
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }
}

/// Draws `n` uniform points on the `dim`-dimensional torus.
pub fn sample_positions(n: usize, dim: usize, seed: u64) -> Result<PositionSet> {
    validate_n(n)?;
    validate_dim(dim)?;
    let mut coords = vec![0.0; n * dim];
    fill_chunked(&mut coords, seed, rng::STREAM_POSITIONS, dim, |rng, out| {
        for x in out {
            *x = rng.gen::<f64>();
        }
    });
    Ok(PositionSet { dim, coords })
}

/// L-infinity distance on the torus.
#[inline]
pub fn torus_distance(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).fold(0.0, |acc, (a, b)| {
        let d = (a - b).abs();
        acc.max(d.min(1.0 - d))
    })
}

/// Validated connection rule of a GIRG: constant, temperature, dimension and
/// total weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConnectionRule {
    c: f64,
    temp: f64,
    dim: usize,
    total: f64,
    inv_temp: f64,
    inv_dim: f64,
    cd_over_total: f64,
}

impl ConnectionRule {
    pub fn new(c: f64, temp: f64, dim: usize, total: f64) -> Result<Self> {
        validate_temp(temp)?;
        validate_dim(dim)?;
        if !(c > 0.0 && c.is_finite()) {
            return Err(invalid("const", format!("must be positive, got {c}")));
        }
        if !(total > 0.0 && total.is_finite()) {
            return Err(invalid("total", format!("total weight must be positive, got {total}")));
        }
        Ok(Self {
            c,
            temp,
            dim,
            total,
            inv_temp: if temp > 0.0 { 1.0 / temp } else { f64::INFINITY },
            inv_dim: 1.0 / dim as f64,
            cd_over_total: c.powi(dim as i32) / total,
        })
    }

    #[inline]
    pub fn constant(&self) -> f64 {
        self.c
    }

    #[inline]
    pub fn temp(&self) -> f64 {
        self.temp
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.total
    }

    #[inline]
    pub fn is_threshold(&self) -> bool {
        self.temp == 0.0
    }

    #[inline]
    fn root(&self, x: f64) -> f64 {
        match self.dim {
            1 => x,
            2 => x.sqrt(),
            _ => x.powf(self.inv_dim),
        }
    }

    /// Connection radius of the threshold variant, `c (w_u w_v / W)^(1/d)`.
    #[inline]
    pub fn threshold_distance(&self, wu: f64, wv: f64) -> f64 {
        self.c * self.root(wu * wv / self.total)
    }

    /// Distance below which the probability saturates at 1.
    ///
    /// Equals [`Self::threshold_distance`] for `T = 0` and
    /// `(c^T w_u w_v / W)^(1/d)` otherwise.
    #[inline]
    pub fn saturation_distance(&self, wu: f64, wv: f64) -> f64 {
        if self.is_threshold() {
            self.threshold_distance(wu, wv)
        } else {
            self.root(self.c.powf(self.temp) * wu * wv / self.total)
        }
    }

    /// Threshold decision, identical to [`Self::probability`] `== 1` but
    /// avoiding the root except within a tiny band around the boundary.
    #[inline]
    pub(crate) fn threshold_edge(&self, wu: f64, wv: f64, dist: f64) -> bool {
        let q = dist.powi(self.dim as i32);
        let r = self.cd_over_total * wu * wv;
        if q < r * (1.0 - 1e-12) {
            true
        } else if q > r * (1.0 + 1e-12) {
            false
        } else {
            dist <= self.threshold_distance(wu, wv)
        }
    }

    /// Connection probability for weights `wu`, `wv` at torus distance `dist`.
    #[inline]
    pub fn probability(&self, wu: f64, wv: f64, dist: f64) -> f64 {
        if self.is_threshold() {
            if dist <= self.threshold_distance(wu, wv) {
                1.0
            } else {
                0.0
            }
        } else {
            self.binomial(wu * wv / self.total, dist)
        }
    }

    /// `min{1, c (x / dist^d)^(1/T)}` with `x = w_u w_v / W`.
    #[inline]
    pub(crate) fn binomial(&self, x: f64, dist: f64) -> f64 {
        if dist <= 0.0 {
            return 1.0;
        }
        let p = self.c * (x / dist.powi(self.dim as i32)).powf(self.inv_temp);
        p.min(1.0)
    }
}

/// Connection probability of one vertex pair.
pub fn edge_probability(
    wu: f64,
    wv: f64,
    total: f64,
    dist: f64,
    c: f64,
    temp: f64,
    dim: usize,
) -> Result<f64> {
    Ok(ConnectionRule::new(c, temp, dim, total)?.probability(wu, wv, dist))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn pareto_inverse_examples() {
        assert_eq!(pareto_inverse(0.0, 2.5), 1.0);
        assert_eq!(pareto_inverse(0.0, 7.0), 1.0);
        assert!((pareto_inverse(0.75, 3.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn weights_reject_bad_exponent() {
        assert!(sample_weights(10, 2.0, 1).is_err());
        assert!(sample_weights(10, 1.5, 1).is_err());
        assert!(sample_weights(0, 2.5, 1).is_err());
    }

    #[test]
    fn weights_are_reproducible_and_cached_sums_hold() {
        let a = sample_weights(50_000, 2.5, 42).unwrap();
        let b = sample_weights(50_000, 2.5, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.as_slice().iter().all(|w| *w >= 1.0));
        let direct: f64 = a.as_slice().iter().sum();
        assert!((a.total() - direct).abs() <= 1e-9 * direct);
        let sq: f64 = a.as_slice().iter().map(|w| w * w).sum::<f64>() / direct;
        assert!((a.sum_sq_over_total() - sq).abs() <= 1e-9 * sq);
        assert_ne!(a, sample_weights(50_000, 2.5, 43).unwrap());
    }

    #[test]
    fn user_weights_only_need_positivity() {
        assert!(WeightSet::new(vec![0.5, 3.0]).is_ok());
        assert!(WeightSet::new(vec![0.5, 0.0]).is_err());
        assert!(WeightSet::new(vec![]).is_err());
        assert!(WeightSet::new(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn positions_examples() {
        assert!(sample_positions(0, 2, 1).is_err());
        assert!(sample_positions(5, 6, 1).is_err());
        let a = sample_positions(100_000, 2, 7).unwrap();
        assert_eq!(a, sample_positions(100_000, 2, 7).unwrap());
        let p = sample_positions(100_000, 1, 3).unwrap();
        let mean = p.as_slice().iter().sum::<f64>() / 1e5;
        assert!((0.495..=0.505).contains(&mean), "mean {mean}");
    }

    #[test]
    fn positions_uniform_per_coordinate() {
        let n = 20_000;
        for dim in 1..=5 {
            let p = sample_positions(n, dim, 11).unwrap();
            let sigma = (1.0f64 / 12.0 / n as f64).sqrt();
            for k in 0..dim {
                let m = (0..n).map(|v| p.point(v)[k]).sum::<f64>() / n as f64;
                assert!((m - 0.5).abs() < 5.0 * sigma, "dim {dim} coord {k} mean {m}");
            }
            assert!(p.as_slice().iter().all(|x| (0.0..1.0).contains(x)));
        }
    }

    #[test]
    fn torus_distance_examples() {
        assert_eq!(torus_distance(&[0.3, 0.2], &[0.3, 0.2]), 0.0);
        assert!((torus_distance(&[0.1], &[0.9]) - 0.2).abs() < 1e-15);
        assert!((torus_distance(&[0.1, 0.4], &[0.9, 0.5]) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn edge_probability_examples() {
        // (w_u w_v / W) = 0.01 with W = 100.
        let p = edge_probability(1.0, 1.0, 100.0, 0.25, 1.0, 0.5, 1).unwrap();
        assert!((p - 0.0016).abs() < 1e-15);
        // Threshold boundary is inclusive.
        let rule = ConnectionRule::new(0.8, 0.0, 2, 50.0).unwrap();
        let r = rule.threshold_distance(2.0, 3.0);
        assert_eq!(rule.probability(2.0, 3.0, r), 1.0);
        assert_eq!(rule.probability(2.0, 3.0, r * (1.0 + 1e-12)), 0.0);
        // Vanishing constant.
        let p = edge_probability(1.0, 1.0, 1e3, 0.4, 1e-12, 0.5, 2).unwrap();
        assert!(p < 1e-10);
        let p = edge_probability(1.0, 1.0, 1e3, 0.4, 1e-12, 0.0, 2).unwrap();
        assert_eq!(p, 0.0);
        // Coincident points.
        assert_eq!(edge_probability(1.0, 1.0, 1e3, 0.0, 0.1, 0.5, 3).unwrap(), 1.0);
        assert!(edge_probability(1.0, 1.0, 1e3, 0.1, 0.1, 1.0, 3).is_err());
        assert!(edge_probability(1.0, 1.0, 1e3, 0.1, 0.1, -0.1, 3).is_err());
    }

    #[test]
    fn fast_threshold_agrees_with_probability() {
        let mut rng = rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64(3);
        for _ in 0..200_000 {
            let dim = rng.gen_range(1..=5);
            let rule = ConnectionRule::new(rng.gen_range(0.01..3.0), 0.0, dim, 1e4).unwrap();
            let (wu, wv) = (rng.gen_range(1.0..100.0), rng.gen_range(1.0..100.0));
            let r = rule.threshold_distance(wu, wv);
            let dist = match rng.gen_range(0..3) {
                0 => r,
                1 => r * (1.0 + rng.gen_range(-1e-11..1e-11)),
                _ => rng.gen_range(0.0..0.5),
            };
            assert_eq!(rule.threshold_edge(wu, wv, dist), rule.probability(wu, wv, dist) == 1.0);
        }
    }

    fn unit() -> impl Strategy<Value = f64> {
        0.0f64..1.0
    }

    proptest! {
        #[test]
        fn torus_distance_is_a_bounded_metric(
            x in proptest::collection::vec(unit(), 3),
            y in proptest::collection::vec(unit(), 3),
            z in proptest::collection::vec(unit(), 3),
        ) {
            let dxy = torus_distance(&x, &y);
            prop_assert_eq!(dxy, torus_distance(&y, &x));
            prop_assert!((0.0..=0.5).contains(&dxy));
            prop_assert!(dxy <= torus_distance(&x, &z) + torus_distance(&z, &y) + 1e-15);
        }

        #[test]
        fn probability_is_monotone(
            wu in 1.0f64..100.0, wv in 1.0f64..100.0, dist in 0.001f64..0.5,
            c in 0.01f64..10.0, temp in prop_oneof![Just(0.0), 0.05f64..0.95],
            dim in 1usize..=5, f in 1.0f64..3.0,
        ) {
            let rule = ConnectionRule::new(c, temp, dim, 1000.0).unwrap();
            let bigger_c = ConnectionRule::new(c * f, temp, dim, 1000.0).unwrap();
            let p = rule.probability(wu, wv, dist);
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert!(rule.probability(wu, wv, (dist * f).min(0.5)) <= p);
            prop_assert!(rule.probability(wu * f, wv, dist) >= p);
            prop_assert!(rule.probability(wu, wv * f, dist) >= p);
            prop_assert!(bigger_c.probability(wu, wv, dist) >= p);
        }

        #[test]
        fn constant_is_equivalent_to_weight_scaling(
            ws in proptest::collection::vec(1.0f64..50.0, 2..20),
            dist in 0.001f64..0.5, c in 0.05f64..5.0,
            temp in prop_oneof![Just(0.0), 0.05f64..0.95], dim in 1usize..=5,
        ) {
            let set = WeightSet::new(ws.clone()).unwrap();
            let factor = if temp > 0.0 { c.powf(temp) } else { c.powi(dim as i32) };
            let scaled = set.scaled(factor).unwrap();
            let with_c = ConnectionRule::new(c, temp, dim, set.total()).unwrap();
            let unit_c = ConnectionRule::new(1.0, temp, dim, scaled.total()).unwrap();
            for u in 0..ws.len() {
                for v in 0..ws.len() {
                    let a = with_c.probability(ws[u], ws[v], dist);
                    let b = unit_c.probability(
                        scaled.as_slice()[u], scaled.as_slice()[v], dist);
                    if temp > 0.0 {
                        prop_assert!((a - b).abs() <= 1e-9 * a.max(1e-300));
                    } else {
                        // Threshold decisions may only differ within rounding of the radius.
                        let r = with_c.threshold_distance(ws[u], ws[v]);
                        if (dist - r).abs() > 1e-9 * r {
                            prop_assert_eq!(a, b);
                        }
                    }
                }
            }
        }
    }
}
