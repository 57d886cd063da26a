//! Hyperbolic random graphs, sampled by mapping the disk onto a
//! one-dimensional GIRG instance and reusing the cell-pair engine.

use std::f64::consts::{PI, TAU};
use std::ops::Range;

use rand::Rng;
use rayon::prelude::*;

use crate::engine::{Engine, Kernel, Separation};
use crate::error::{invalid, Error, Result};
use crate::filter::OctaveFilter;
use crate::index::{build_buckets, build_index, LevelSchedule, SpatialIndex, WeightBuckets};
use crate::model::{validate_n, validate_temp, DegreeSpec, PositionSet, WeightSet};
use crate::morton;
use crate::rng::{self, event_rng, fill_chunked, CHUNK};
use crate::sampler::{jump_walk, DistantBounds};
use crate::sink::{EdgeBuffer, EdgeSink};

/// Number of probability levels of the distance filter.
pub const FILTER_LEVELS: usize = 100;

/// Largest supported `alpha R`; beyond it `cosh(alpha R)` overflows.
const MAX_ALPHA_R: f64 = 700.0;

#[derive(Debug, Clone, PartialEq)]
pub struct HrgParams {
    pub n: usize,
    /// Radial dispersion; the degree exponent is `2 alpha + 1`.
    pub alpha: f64,
    /// Temperature; 0 selects the threshold variant.
    pub temp: f64,
    /// Target degree, or the offset `C` in `R = 2 ln n + C`.
    pub degree: DegreeSpec,
    pub seed: u64,
}

impl HrgParams {
    pub fn validate(&self) -> Result<()> {
        validate_n(self.n)?;
        validate_alpha(self.alpha)?;
        validate_temp(self.temp)?;
        match self.degree {
            DegreeSpec::Target(t) if !(t > 0.0 && t.is_finite()) => {
                Err(invalid("degree", format!("target must be positive, got {t}")))
            }
            DegreeSpec::Target(t) if t >= self.n as f64 - 1.0 => Err(Error::UnreachableTarget { target: t, n: self.n }),
            DegreeSpec::Constant(c) => disk_radius(self.n, c).map(|_| ()),
            _ => Ok(()),
        }
    }
}

pub(crate) fn validate_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.5 && alpha.is_finite()) {
        return Err(invalid("alpha", format!("must exceed 1/2, got {alpha}")));
    }
    Ok(())
}

/// `R = 2 ln n + C`, which must be positive.
pub fn disk_radius(n: usize, c: f64) -> Result<f64> {
    let r = 2.0 * (n as f64).ln() + c;
    if !(r > 0.0 && r.is_finite()) {
        return Err(invalid("C", format!("disk radius 2 ln n + C must be positive, got {r}")));
    }
    Ok(r)
}

/// Degree exponent `2 alpha + 1`.
pub fn degree_exponent(alpha: f64) -> f64 {
    2.0 * alpha + 1.0
}

/// `cosh(alpha R) - 1`, evaluated without cancellation.
#[inline]
fn cosh_m1(x: f64) -> f64 {
    2.0 * (0.5 * x).sinh().powi(2)
}

/// Radius with CDF `(cosh(alpha r) - 1) / (cosh(alpha R) - 1)` at quantile `u`.
#[inline]
pub fn radius_of(u: f64, alpha: f64, big_r: f64) -> f64 {
    let y = u * cosh_m1(alpha * big_r);
    // acosh(1 + y) without losing small y
    let r = (y + (y * (y + 2.0)).sqrt()).ln_1p() / alpha;
    r.min(big_r * (1.0 - f64::EPSILON))
}

/// CDF of the radial density.
pub fn radius_cdf(r: f64, alpha: f64, big_r: f64) -> f64 {
    (cosh_m1(alpha * r.clamp(0.0, big_r)) / cosh_m1(alpha * big_r)).min(1.0)
}

/// Principal angular distance in `[0, pi]`.
#[inline]
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    if d > PI {
        TAU - d
    } else {
        d
    }
}

/// `cosh` of the hyperbolic distance from cached `cosh r` and `sinh r`.
#[inline]
pub fn cosh_distance_from(cu: f64, su: f64, tu: f64, cv: f64, sv: f64, tv: f64) -> f64 {
    cu * cv - su * sv * angle_diff(tu, tv).cos()
}

/// Raw per-vertex quantiles from which coordinates are built for any disk
/// radius: radial quantiles and angles as fractions of a full turn.
#[derive(Debug, Clone, PartialEq)]
pub struct HrgUniforms {
    pub radial: Vec<f64>,
    pub angular: Vec<f64>,
}

pub fn sample_hrg_uniforms(n: usize, seed: u64) -> Result<HrgUniforms> {
    Ok(HrgUniforms {
        radial: sample_quantiles(n, seed, rng::STREAM_RADII)?,
        angular: sample_quantiles(n, seed, rng::STREAM_ANGLES)?,
    })
}

/// `n` uniforms of one stream: radial quantiles or angular fractions.
pub fn sample_quantiles(n: usize, seed: u64, stream: u64) -> Result<Vec<f64>> {
    validate_n(n)?;
    let mut out = vec![0.0; n];
    fill_chunked(&mut out, seed, stream, 1, |rng, chunk| {
        chunk.iter_mut().for_each(|x| *x = rng.gen::<f64>());
    });
    Ok(out)
}

/// Polar coordinates in the disk of radius `R` with cached `cosh r`, `sinh r`.
#[derive(Debug, Clone, PartialEq)]
pub struct HrgCoordinates {
    big_r: f64,
    radii: Vec<f64>,
    angles: Vec<f64>,
    cosh_r: Vec<f64>,
    sinh_r: Vec<f64>,
}

impl HrgCoordinates {
    /// Radii in `[0, R)`, angles in `[0, 2 pi)`.
    pub fn new(big_r: f64, radii: Vec<f64>, angles: Vec<f64>) -> Result<Self> {
        validate_n(radii.len())?;
        if !(big_r > 0.0 && big_r.is_finite()) {
            return Err(invalid("R", format!("must be positive, got {big_r}")));
        }
        if radii.len() != angles.len() {
            return Err(invalid("angles", "radii and angles differ in length"));
        }
        if let Some(r) = radii.iter().find(|r| !(0.0..big_r).contains(*r)) {
            return Err(invalid("radii", format!("radius {r} outside [0, {big_r})")));
        }
        if let Some(t) = angles.iter().find(|t| !(0.0..TAU).contains(*t)) {
            return Err(invalid("angles", format!("angle {t} outside [0, 2 pi)")));
        }
        let cosh_r = radii.par_iter().map(|r| r.cosh()).collect();
        let sinh_r = radii.par_iter().map(|r| r.sinh()).collect();
        Ok(Self {
            big_r,
            radii,
            angles,
            cosh_r,
            sinh_r,
        })
    }

    pub fn from_uniforms(u: &HrgUniforms, alpha: f64, big_r: f64) -> Result<Self> {
        validate_alpha(alpha)?;
        if alpha * big_r > MAX_ALPHA_R {
            return Err(Error::NumericRange(format!("alpha R = {} exceeds {MAX_ALPHA_R}", alpha * big_r)));
        }
        let radii = u.radial.par_iter().map(|&q| radius_of(q, alpha, big_r)).collect();
        let angles = u.angular.par_iter().map(|&x| (TAU * x).min(TAU * (1.0 - f64::EPSILON))).collect();
        Self::new(big_r, radii, angles)
    }

    #[inline]
    pub fn disk_radius(&self) -> f64 {
        self.big_r
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.radii.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn cosh_radii(&self) -> &[f64] {
        &self.cosh_r
    }

    pub fn sinh_radii(&self) -> &[f64] {
        &self.sinh_r
    }

    /// `cosh d(u, v)`: products of cached values and one cosine.
    #[inline]
    pub fn cosh_distance(&self, u: usize, v: usize) -> f64 {
        if u == v {
            return 1.0;
        }
        cosh_distance_from(
            self.cosh_r[u],
            self.sinh_r[u],
            self.angles[u],
            self.cosh_r[v],
            self.sinh_r[v],
            self.angles[v],
        )
    }
}

/// Draws coordinates for `n` vertices in the disk of radius `big_r`.
pub fn sample_hrg_coordinates(n: usize, alpha: f64, big_r: f64, seed: u64) -> Result<HrgCoordinates> {
    HrgCoordinates::from_uniforms(&sample_hrg_uniforms(n, seed)?, alpha, big_r)
}

/// Connection rule of a hyperbolic random graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperbolicRule {
    big_r: f64,
    temp: f64,
    cosh_big_r: f64,
}

impl HyperbolicRule {
    pub fn new(big_r: f64, temp: f64) -> Result<Self> {
        validate_temp(temp)?;
        if !(big_r > 0.0 && big_r < 710.0) {
            return Err(invalid("R", format!("must be in (0, 710), got {big_r}")));
        }
        Ok(Self {
            big_r,
            temp,
            cosh_big_r: big_r.cosh(),
        })
    }

    #[inline]
    pub fn disk_radius(&self) -> f64 {
        self.big_r
    }

    #[inline]
    pub fn temp(&self) -> f64 {
        self.temp
    }

    #[inline]
    pub fn is_threshold(&self) -> bool {
        self.temp == 0.0
    }

    #[inline]
    pub fn cosh_disk_radius(&self) -> f64 {
        self.cosh_big_r
    }

    /// Threshold rule `cosh d < cosh R`.
    #[inline]
    pub fn threshold_edge(&self, cosh_d: f64) -> bool {
        cosh_d < self.cosh_big_r
    }

    /// `1 / (exp((d - R) / 2T) + 1)`; the threshold indicator for `T = 0`.
    #[inline]
    pub fn probability(&self, d: f64) -> f64 {
        if self.is_threshold() {
            return if d < self.big_r { 1.0 } else { 0.0 };
        }
        1.0 / (((d - self.big_r) / (2.0 * self.temp)).exp() + 1.0)
    }

    #[inline]
    pub fn probability_cosh(&self, cosh_d: f64) -> f64 {
        if self.is_threshold() {
            return if self.threshold_edge(cosh_d) { 1.0 } else { 0.0 };
        }
        self.probability(cosh_d.max(1.0).acosh())
    }

    /// Distance at which the probability equals `x`; `-inf` for `x = 1`.
    pub fn inverse_probability(&self, x: f64) -> f64 {
        self.big_r + 2.0 * self.temp * (1.0 / x - 1.0).ln()
    }
}

/// Connection probability from `cosh d`.
pub fn hrg_connection_prob(cosh_d: f64, big_r: f64, temp: f64) -> Result<f64> {
    Ok(HyperbolicRule::new(big_r, temp)?.probability_cosh(cosh_d))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterDecision {
    Edge,
    NoEdge,
    /// The uniform falls into the level interval of `p`; evaluate exactly.
    Evaluate,
}

/// Table of `cosh(p^-1(x_i))` at equidistant probability levels
/// `x_i = i / (k - 1)`. Levels whose distance is negative store `-inf`, the
/// zero level `+inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceFilter {
    cosh_at: Vec<f64>,
}

const FILTER_MARGIN: f64 = 1e-9;

impl DistanceFilter {
    pub fn new(rule: &HyperbolicRule, k: usize) -> Result<Self> {
        if rule.is_threshold() {
            return Err(invalid("temp", "the distance filter needs a positive temperature"));
        }
        if k < 2 {
            return Err(invalid("k", "at least two levels are required"));
        }
        let cosh_at = (0..k)
            .map(|i| {
                if i == 0 {
                    return f64::INFINITY;
                }
                let d = rule.inverse_probability(i as f64 / (k - 1) as f64);
                if d >= 0.0 {
                    d.cosh()
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        Ok(Self { cosh_at })
    }

    pub fn levels(&self) -> usize {
        self.cosh_at.len()
    }

    /// Stored `cosh(p^-1(x_i))`, non-increasing in `i`.
    pub fn stored(&self) -> &[f64] {
        &self.cosh_at
    }

    /// Decides `u < p` for a uniform `u` in `[0, 1)` where possible.
    #[inline]
    pub fn decide(&self, u: f64, cosh_d: f64) -> FilterDecision {
        let k = self.cosh_at.len();
        let i = ((u * (k - 1) as f64) as usize).min(k - 2);
        let (low, high) = (self.cosh_at[i], self.cosh_at[i + 1]);
        if cosh_d <= high * (1.0 - FILTER_MARGIN) {
            FilterDecision::Edge
        } else if cosh_d >= low * (1.0 + FILTER_MARGIN) {
            FilterDecision::NoEdge
        } else {
            FilterDecision::Evaluate
        }
    }

    /// `u < p(cosh_d)`, evaluated exactly only when the table cannot decide.
    #[inline]
    pub fn trial(&self, rule: &HyperbolicRule, u: f64, cosh_d: f64) -> bool {
        match self.decide(u, cosh_d) {
            FilterDecision::Edge => true,
            FilterDecision::NoEdge => false,
            FilterDecision::Evaluate => u < rule.probability_cosh(cosh_d),
        }
    }
}

/// Weights `e^((R - r) / 2)` and positions `theta / 2 pi` of the equivalent
/// one-dimensional GIRG.
pub fn hrg_to_girg_map(coords: &HrgCoordinates) -> Result<(WeightSet, PositionSet)> {
    let big_r = coords.disk_radius();
    let weights = coords.radii.par_iter().map(|r| (0.5 * (big_r - r)).exp()).collect();
    let positions = coords
        .angles
        .par_iter()
        .map(|t| {
            let x = t / TAU;
            if x >= 1.0 {
                0.0
            } else {
                x
            }
        })
        .collect();
    Ok((WeightSet::new(weights)?, PositionSet::new(1, positions)?))
}

/// Per-bucket radius ranges and the per-pair constants of the lower bound
/// `cosh d >= cosh(radial gap) + 2 sinh r_i sinh r_j sin^2(dtheta / 2)`.
#[derive(Debug, Clone)]
struct PairBounds {
    k: usize,
    base: Vec<f64>,
    prod: Vec<f64>,
    slack: Vec<f64>,
}

impl PairBounds {
    fn new(r_lo: &[f64], r_hi: &[f64]) -> Self {
        let k = r_lo.len();
        let mut b = Self {
            k,
            base: vec![1.0; k * k],
            prod: vec![0.0; k * k],
            slack: vec![0.0; k * k],
        };
        for i in 0..k {
            for j in 0..k {
                let gap = (r_lo[i] - r_hi[j]).max(r_lo[j] - r_hi[i]).max(0.0);
                b.base[i * k + j] = gap.cosh();
                b.prod[i * k + j] = 2.0 * r_lo[i].sinh() * r_lo[j].sinh();
                // rounding of the cancelling evaluation of cosh d
                b.slack[i * k + j] = 8.0 * f64::EPSILON * r_hi[i].cosh() * r_hi[j].cosh();
            }
        }
        b
    }

    /// Lower bound on every computed `cosh d` for angles at least `dtheta` apart.
    #[inline]
    fn lower(&self, i: usize, j: usize, dtheta: f64) -> f64 {
        let s = (0.5 * dtheta.min(PI)).sin();
        let idx = i * self.k + j;
        ((self.base[idx] + self.prod[idx] * s * s) * (1.0 - 1e-12) - self.slack[idx]).max(1.0)
    }
}

/// Comparison levels: the deepest level on which cells that are not
/// neighbours are certain to hold no threshold edge (probability at most 1/2
/// for positive temperature), found by scanning the levels.
fn hrg_levels(bounds: &PairBounds, nonempty: &[bool], rule: &HyperbolicRule, cap: u32) -> Result<LevelSchedule> {
    let k = nonempty.len();
    let limit = rule.cosh_disk_radius() * (1.0 + 1e-9);
    let mut cl = vec![0u32; k * k];
    for i in 0..k {
        for j in i..k {
            let mut level = 0;
            while level < cap && bounds.lower(i, j, TAU * 0.5f64.powi(level as i32 + 1)) >= limit {
                level += 1;
            }
            cl[i * k + j] = level;
            cl[j * k + i] = level;
        }
    }
    LevelSchedule::from_levels(cl, nonempty)
}

struct HrgKernel {
    ids: Vec<u32>,
    cosh_r: Vec<f64>,
    sinh_r: Vec<f64>,
    theta: Vec<f64>,
    bounds: PairBounds,
    rule: HyperbolicRule,
    filter: Option<DistanceFilter>,
    /// Trials `y < p` of distant cell pairs, keyed on `cosh d`.
    distant_filter: Option<OctaveFilter>,
    distant: Option<DistantBounds>,
}

impl HrgKernel {
    #[inline]
    fn cosh_d(&self, a: usize, b: usize) -> f64 {
        cosh_distance_from(
            self.cosh_r[a],
            self.sinh_r[a],
            self.theta[a],
            self.cosh_r[b],
            self.sinh_r[b],
            self.theta[b],
        )
    }

    #[inline]
    fn trial(&self, a: usize, b: usize, u: impl FnOnce() -> f64) -> bool {
        let c = self.cosh_d(a, b);
        match &self.filter {
            None => self.rule.threshold_edge(c),
            Some(f) => f.trial(&self.rule, u(), c),
        }
    }
}

impl Kernel for HrgKernel {
    fn within(&self, r: Range<usize>, key: u64, out: &mut EdgeBuffer) {
        let mut rng = self.filter.is_some().then(|| event_rng(key));
        for a in r.clone() {
            for b in a + 1..r.end {
                if self.trial(a, b, || rng.as_mut().unwrap().gen()) {
                    out.push(self.ids[a], self.ids[b]);
                }
            }
        }
    }

    fn across(&self, ra: Range<usize>, rb: Range<usize>, key: u64, out: &mut EdgeBuffer) {
        let mut rng = self.filter.is_some().then(|| event_rng(key));
        for a in ra {
            for b in rb.clone() {
                if self.trial(a, b, || rng.as_mut().unwrap().gen()) {
                    out.push(self.ids[a], self.ids[b]);
                }
            }
        }
    }

    fn distant(&self, i: usize, j: usize, ra: Range<usize>, rb: Range<usize>, sep: Separation, key: u64, out: &mut EdgeBuffer) {
        let (Some(filter), Some(distant)) = (&self.distant_filter, &self.distant) else { return };
        let (pbar, log_q) = distant.get(i, j, sep);
        if !(pbar > 0.0) {
            return;
        }
        let mut rng = event_rng(key);
        jump_walk(&mut rng, (pbar, log_q), ra.len(), rb.len(), |da, db, y| {
            let (a, b) = (ra.start + da, rb.start + db);
            let c = self.cosh_d(a, b);
            debug_assert!(c >= self.bounds.lower(i, j, TAU * sep.min_dist()));
            if filter.trial(y, c, || y < self.rule.probability_cosh(c)) {
                out.push(self.ids[a], self.ids[b]);
            }
        });
    }

    fn samples_distant(&self) -> bool {
        self.filter.is_some()
    }
}

/// Buckets, levels and index of one hyperbolic instance.
pub struct HrgSampler {
    buckets: WeightBuckets,
    schedule: LevelSchedule,
    index: SpatialIndex,
    kernel: HrgKernel,
}

impl HrgSampler {
    pub fn new(coords: &HrgCoordinates, rule: HyperbolicRule) -> Result<Self> {
        if (coords.disk_radius() - rule.disk_radius()).abs() > 1e-12 * rule.disk_radius() {
            return Err(invalid("R", "coordinates were drawn for another disk radius"));
        }
        let (weights, positions) = hrg_to_girg_map(coords)?;
        let buckets = build_buckets(weights.as_slice())?;
        let k = buckets.len();
        let (mut r_lo, mut r_hi) = (vec![f64::INFINITY; k], vec![0.0f64; k]);
        for (v, &r) in coords.radii.iter().enumerate() {
            let b = buckets.bucket_of(v);
            r_lo[b] = r_lo[b].min(r);
            r_hi[b] = r_hi[b].max(r);
        }
        for b in 0..k {
            if buckets.count(b) == 0 {
                r_lo[b] = 0.0;
            }
        }
        let bounds = PairBounds::new(&r_lo, &r_hi);
        let nonempty: Vec<bool> = (0..k).map(|b| buckets.count(b) > 0).collect();
        let schedule = hrg_levels(&bounds, &nonempty, &rule, morton::depth_cap(coords.len(), 1))?;
        let index = build_index(&buckets, &positions, &schedule)?;
        let ids = index.order().to_vec();
        let gather = |src: &[f64]| ids.iter().map(|&v| src[v as usize]).collect::<Vec<_>>();
        let distant = (!rule.is_threshold()).then(|| {
            DistantBounds::new(k, schedule.max_depth(), |i, j, min_dist| {
                rule.probability_cosh(bounds.lower(i, j, TAU * min_dist)) * (1.0 + 1e-9)
            })
        });
        let kernel = HrgKernel {
            distant,
            cosh_r: gather(&coords.cosh_r),
            sinh_r: gather(&coords.sinh_r),
            theta: gather(&coords.angles),
            ids,
            bounds,
            rule,
            filter: (!rule.is_threshold())
                .then(|| DistanceFilter::new(&rule, FILTER_LEVELS))
                .transpose()?,
            distant_filter: (!rule.is_threshold()).then(|| {
                OctaveFilter::new(|y| {
                    let d = rule.inverse_probability(y);
                    if d >= 0.0 {
                        d.cosh()
                    } else {
                        1.0
                    }
                })
            }),
        };
        Ok(Self {
            buckets,
            schedule,
            index,
            kernel,
        })
    }

    pub fn buckets(&self) -> &WeightBuckets {
        &self.buckets
    }

    pub fn schedule(&self) -> &LevelSchedule {
        &self.schedule
    }

    /// Samples the edge set for `edge_seed` on the current rayon pool.
    pub fn sample_edges(&self, edge_seed: u64, sink: &mut dyn EdgeSink) -> u64 {
        Engine::new(&self.index, &self.schedule, &self.kernel, edge_seed).run(rayon::current_num_threads(), sink)
    }
}

/// Radical inverse of `i` in base `b`.
pub fn halton(mut i: u64, b: u64) -> f64 {
    let (mut f, mut r) = (1.0, 0.0);
    while i > 0 {
        f /= b as f64;
        r += f * (i % b) as f64;
        i /= b;
    }
    r
}

/// Default number of sampled vertex pairs for radius estimation.
pub const ESTIMATE_PAIRS: usize = 1_000_000;

/// Angular strata per sampled pair for positive temperature.
const ANGLE_STRATA: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusEstimate {
    /// Offset `C` of `R = 2 ln n + C`.
    pub offset: f64,
    pub disk_radius: f64,
    /// Estimated average degree at `offset`.
    pub avg_degree: f64,
    pub iterations: u32,
}

/// Expected average degree as a function of `C`, averaged over a fixed
/// quasi-random sample of vertex pairs of the realized radial quantiles.
/// For `T = 0` the angle is integrated out exactly; otherwise each pair
/// averages [`ANGLE_STRATA`] stratified angles with a quasi-random offset.
pub struct RadiusEstimator<'a> {
    radial: &'a [f64],
    alpha: f64,
    temp: f64,
    pairs: usize,
    offset: u64,
}

impl<'a> RadiusEstimator<'a> {
    /// Uses Halton points `offset + 1 ..= offset + pairs`.
    pub fn new(radial: &'a [f64], alpha: f64, temp: f64, pairs: usize, offset: u64) -> Result<Self> {
        validate_n(radial.len())?;
        validate_alpha(alpha)?;
        validate_temp(temp)?;
        if pairs == 0 {
            return Err(invalid("pairs", "at least one pair is required"));
        }
        Ok(Self {
            radial,
            alpha,
            temp,
            pairs,
            offset,
        })
    }

    /// Mean connection probability of two vertices over the angle.
    #[inline]
    fn pair_probability(&self, rule: &HyperbolicRule, (ca, sa): (f64, f64), (cb, sb): (f64, f64), h: f64) -> f64 {
        if rule.is_threshold() {
            let (num, den) = (ca * cb - rule.cosh_disk_radius(), sa * sb);
            return if num < -den {
                1.0
            } else if num >= den {
                0.0
            } else {
                (num / den).acos() / PI
            };
        }
        let step = PI / ANGLE_STRATA as f64;
        (0..ANGLE_STRATA)
            .map(|j| rule.probability_cosh(ca * cb - sa * sb * ((j as f64 + h) * step).cos()))
            .sum::<f64>()
            / ANGLE_STRATA as f64
    }

    pub fn expected_avg_degree(&self, c: f64) -> Result<f64> {
        let n = self.radial.len();
        if n < 2 {
            return Ok(0.0);
        }
        let big_r = disk_radius(n, c)?;
        if self.alpha * big_r > MAX_ALPHA_R {
            return Err(Error::NumericRange(format!("alpha R = {} too large", self.alpha * big_r)));
        }
        let rule = HyperbolicRule::new(big_r, self.temp)?;
        let cs = |q: f64| {
            let r = radius_of(q, self.alpha, big_r);
            (r.cosh(), r.sinh())
        };
        let table: Option<Vec<(f64, f64)>> =
            (n <= 2 * self.pairs).then(|| self.radial.par_iter().map(|&q| cs(q)).collect());
        let vertex = |v: usize| table.as_ref().map_or_else(|| cs(self.radial[v]), |t| t[v]);
        let partial: Vec<f64> = (0..self.pairs.div_ceil(CHUNK))
            .into_par_iter()
            .map(|chunk| {
                let mut s = 0.0;
                for k in chunk * CHUNK..((chunk + 1) * CHUNK).min(self.pairs) {
                    let h = self.offset + k as u64 + 1;
                    let a = ((halton(h, 2) * n as f64) as usize).min(n - 1);
                    let mut b = ((halton(h, 3) * n as f64) as usize).min(n - 1);
                    if a == b {
                        b = (b + 1) % n;
                    }
                    s += self.pair_probability(&rule, vertex(a), vertex(b), halton(h, 5));
                }
                s
            })
            .collect();
        Ok(partial.iter().sum::<f64>() / self.pairs as f64 * (n - 1) as f64)
    }

    /// Finds `C` whose estimated degree is within 1% of `target`: a bracket
    /// is grown from `C = 0`, then narrowed by false position on `ln f`.
    pub fn estimate(&self, target: f64) -> Result<RadiusEstimate> {
        let n = self.radial.len();
        if !(target > 0.0 && target < n as f64 - 1.0) {
            return Err(Error::UnreachableTarget { target, n });
        }
        let calls = std::cell::Cell::new(0u32);
        let eval = |c: f64| -> Result<(f64, f64)> {
            calls.set(calls.get() + 1);
            let f = self.expected_avg_degree(c)?;
            Ok((f, f.max(f64::MIN_POSITIVE).ln() - target.ln()))
        };
        let done = |f: f64| (f - target).abs() <= 0.01 * target;
        let floor = -2.0 * (n as f64).ln();

        let (f0, g0) = eval(0.0)?;
        if done(f0) {
            return Ok(self.result(0.0, f0, calls.get()));
        }
        // g decreases in C; find lo with g > 0 and hi with g < 0
        let (mut lo, mut glo, mut hi, mut ghi);
        if g0 > 0.0 {
            (lo, glo) = (0.0, g0);
            let mut step = 2.0;
            loop {
                let c = lo + step;
                let (f, g) = eval(c)?;
                if done(f) {
                    return Ok(self.result(c, f, calls.get()));
                }
                if g < 0.0 {
                    (hi, ghi) = (c, g);
                    break;
                }
                (lo, glo) = (c, g);
                step *= 2.0;
                if calls.get() > 64 {
                    return Err(Error::UnreachableTarget { target, n });
                }
            }
        } else {
            (hi, ghi) = (0.0, g0);
            loop {
                let c = floor + (hi - floor) / 4.0;
                let (f, g) = eval(c)?;
                if done(f) {
                    return Ok(self.result(c, f, calls.get()));
                }
                if g > 0.0 {
                    (lo, glo) = (c, g);
                    break;
                }
                (hi, ghi) = (c, g);
                if calls.get() > 64 {
                    return Err(Error::UnreachableTarget { target, n });
                }
            }
        }
        let mut best = (lo, f64::INFINITY);
        let mut side = 0i8;
        for _ in 0..200 {
            let mut c = hi - ghi * (hi - lo) / (ghi - glo);
            if !(c > lo && c < hi) {
                c = 0.5 * (lo + hi);
            }
            let (f, g) = eval(c)?;
            if (f - target).abs() < (best.1 - target).abs() {
                best = (c, f);
            }
            if done(f) || hi - lo < 1e-12 {
                break;
            }
            // Illinois step: halve the stale end when one side repeats
            if g > 0.0 {
                (lo, glo) = (c, g);
                if side == 1 {
                    ghi *= 0.5;
                }
                side = 1;
            } else {
                (hi, ghi) = (c, g);
                if side == -1 {
                    glo *= 0.5;
                }
                side = -1;
            }
        }
        Ok(self.result(best.0, best.1, calls.get()))
    }

    fn result(&self, c: f64, f: f64, iterations: u32) -> RadiusEstimate {
        RadiusEstimate {
            offset: c,
            disk_radius: 2.0 * (self.radial.len() as f64).ln() + c,
            avg_degree: f,
            iterations,
        }
    }
}
