//! GIRG edge sampling on top of the cell-pair engine.

use std::ops::Range;

use rand::Rng;

use crate::engine::{Engine, Kernel, Separation};
use crate::error::{invalid, Result};
use crate::filter::OctaveFilter;
use crate::index::{build_buckets, build_index, compute_levels, LevelSchedule, SpatialIndex, WeightBuckets};
use crate::model::{ConnectionRule, PositionSet, WeightSet};
use crate::rng::event_rng;
use crate::sink::{EdgeBuffer, EdgeSink};

/// Number of failures before the first success of Bernoulli(`p`) trials,
/// obtained from one uniform `u` in `[0, 1)`.
pub fn geometric_jump(p: f64, u: f64) -> Result<u64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(invalid("p", format!("jump probability must be in (0, 1], got {p}")));
    }
    Ok(jump(p, u) as u64)
}

/// Skip length as a float so callers can compare before converting.
#[inline]
pub(crate) fn jump(p: f64, u: f64) -> f64 {
    if p >= 1.0 {
        return 0.0;
    }
    ((-u).ln_1p() / (-p).ln_1p()).floor()
}

/// Upper bound `pbar` on the connection probability of distant cell pairs
/// and `ln(1 - pbar)`, by bucket pair, level and separation.
pub(crate) struct DistantBounds {
    k: usize,
    pbar: Vec<f64>,
    log_q: Vec<f64>,
}

impl DistantBounds {
    /// `bound(i, j, min_dist)` for every bucket pair, level up to
    /// `max_depth` and separation of one or two cells.
    pub(crate) fn new(k: usize, max_depth: u32, bound: impl Fn(usize, usize, f64) -> f64) -> Self {
        let len = (max_depth as usize + 1) * 2 * k * k;
        let (mut pbar, mut log_q) = (Vec::with_capacity(len), Vec::with_capacity(len));
        for level in 0..=max_depth {
            for steps in 1..=2 {
                let min_dist = Separation { level, steps }.min_dist();
                for i in 0..k {
                    for j in 0..k {
                        let p = bound(i, j, min_dist).min(1.0);
                        pbar.push(p);
                        log_q.push((-p).ln_1p());
                    }
                }
            }
        }
        Self { k, pbar, log_q }
    }

    #[inline]
    pub(crate) fn get(&self, i: usize, j: usize, sep: Separation) -> (f64, f64) {
        let idx = ((sep.level as usize * 2 + sep.steps as usize - 1) * self.k + i) * self.k + j;
        (self.pbar[idx], self.log_q[idx])
    }
}

/// Bounds at least this large test every candidate directly: one uniform
/// per pair is cheaper than a logarithm per skip.
const DIRECT_BOUND: f64 = 0.5;

/// Bernoulli(`p_ab`) trials for all pairs of an `na x nb` grid given
/// `p_ab <= pbar` (`log_q = ln(1 - pbar)`). Calls `visit(a, b, y)` for a
/// subset of the pairs; the pair is an edge iff `y < p_ab`. Small bounds
/// skip geometrically with `y = u pbar`, large ones visit every pair with a
/// plain uniform.
#[inline]
pub(crate) fn jump_walk<R: Rng>(
    rng: &mut R,
    (pbar, log_q): (f64, f64),
    na: usize,
    nb: usize,
    mut visit: impl FnMut(usize, usize, f64),
) {
    if pbar >= DIRECT_BOUND {
        for a in 0..na {
            for b in 0..nb {
                visit(a, b, rng.gen::<f64>());
            }
        }
        return;
    }
    let total = (na as u64) * (nb as u64);
    // ln(1 - u) <= -u and ln(1 - p) >= -p / (1 - p), so a skip past `rest`
    // candidates is certain once u >= rest p / (1 - p), up to rounding
    let odds = pbar / (1.0 - pbar) * (1.0 + 1e-9);
    let nb = nb as u64;
    let (mut idx, mut a, mut b) = (0u64, 0u64, 0u64);
    loop {
        let u = rng.gen::<f64>();
        let rest = (total - idx) as f64;
        if u >= rest * odds {
            return;
        }
        let skip = ((-u).ln_1p() / log_q).floor();
        if skip >= rest {
            return;
        }
        let skip = skip as u64;
        idx += skip;
        b += skip;
        if b >= nb {
            a += b / nb;
            b %= nb;
        }
        visit(a as usize, b as usize, rng.gen::<f64>() * pbar);
        idx += 1;
        if idx >= total {
            return;
        }
        b += 1;
        if b == nb {
            a += 1;
            b = 0;
        }
    }
}

/// Per-position vertex data in index order.
struct GirgKernel<const D: usize> {
    ids: Vec<u32>,
    weights: Vec<f64>,
    coords: Vec<f64>,
    bounds: DistantBounds,
    rule: ConnectionRule,
    /// Decides `y < p` on the score `dist^d W / (w_u w_v)`; `None` for `T = 0`.
    filter: Option<OctaveFilter>,
}

impl<const D: usize> GirgKernel<D> {
    fn new(
        weights: &WeightSet,
        positions: &PositionSet,
        index: &SpatialIndex,
        buckets: &WeightBuckets,
        schedule: &LevelSchedule,
        rule: ConnectionRule,
    ) -> Self {
        let ids = index.order().to_vec();
        let w: Vec<f64> = ids.iter().map(|&v| weights.as_slice()[v as usize]).collect();
        let mut coords = Vec::with_capacity(ids.len() * D);
        for &v in &ids {
            coords.extend_from_slice(positions.point(v as usize));
        }
        Self {
            ids,
            weights: w,
            coords,
            bounds: DistantBounds::new(buckets.len(), schedule.max_depth(), |i, j, min_dist| {
                rule.binomial(buckets.max_weight(i) * buckets.max_weight(j) / rule.total(), min_dist)
            }),
            rule,
            filter: (!rule.is_threshold()).then(|| {
                let (c, temp) = (rule.constant(), rule.temp());
                OctaveFilter::new(|y| (c / y).powf(temp))
            }),
        }
    }

    #[inline]
    fn dist(&self, a: usize, b: usize) -> f64 {
        let (x, y) = (&self.coords[a * D..a * D + D], &self.coords[b * D..b * D + D]);
        let mut m = 0.0f64;
        for k in 0..D {
            let d = (x[k] - y[k]).abs();
            m = m.max(d.min(1.0 - d));
        }
        m
    }

    /// `y < p` for the pair at positions `a`, `b`.
    #[inline]
    fn binomial_trial(&self, filter: &OctaveFilter, a: usize, b: usize, y: f64) -> bool {
        let (wa, wb, dist) = (self.weights[a], self.weights[b], self.dist(a, b));
        let x = wa * wb / self.rule.total();
        filter.trial(y, dist.powi(D as i32) / x, || y < self.rule.binomial(x, dist))
    }

    #[inline]
    fn trial(&self, a: usize, b: usize, u: impl FnOnce() -> f64) -> bool {
        match &self.filter {
            None => self.rule.threshold_edge(self.weights[a], self.weights[b], self.dist(a, b)),
            Some(f) => self.binomial_trial(f, a, b, u()),
        }
    }
}

impl<const D: usize> Kernel for GirgKernel<D> {
    fn within(&self, r: Range<usize>, key: u64, out: &mut EdgeBuffer) {
        let mut rng = (!self.rule.is_threshold()).then(|| event_rng(key));
        for a in r.clone() {
            for b in a + 1..r.end {
                if self.trial(a, b, || rng.as_mut().unwrap().gen()) {
                    out.push(self.ids[a], self.ids[b]);
                }
            }
        }
    }

    fn across(&self, ra: Range<usize>, rb: Range<usize>, key: u64, out: &mut EdgeBuffer) {
        let mut rng = (!self.rule.is_threshold()).then(|| event_rng(key));
        for a in ra {
            for b in rb.clone() {
                if self.trial(a, b, || rng.as_mut().unwrap().gen()) {
                    out.push(self.ids[a], self.ids[b]);
                }
            }
        }
    }

    fn distant(&self, i: usize, j: usize, ra: Range<usize>, rb: Range<usize>, sep: Separation, key: u64, out: &mut EdgeBuffer) {
        let Some(filter) = &self.filter else { return };
        let (pbar, log_q) = self.bounds.get(i, j, sep);
        if !(pbar > 0.0) {
            return;
        }
        let mut rng = event_rng(key);
        jump_walk(&mut rng, (pbar, log_q), ra.len(), rb.len(), |da, db, y| {
            let (a, b) = (ra.start + da, rb.start + db);
            debug_assert!({
                let p = self.rule.probability(self.weights[a], self.weights[b], self.dist(a, b));
                p <= pbar * (1.0 + 1e-9)
            });
            if self.binomial_trial(filter, a, b, y) {
                out.push(self.ids[a], self.ids[b]);
            }
        });
    }

    fn samples_distant(&self) -> bool {
        !self.rule.is_threshold()
    }
}

enum AnyKernel {
    D1(GirgKernel<1>),
    D2(GirgKernel<2>),
    D3(GirgKernel<3>),
    D4(GirgKernel<4>),
    D5(GirgKernel<5>),
}

/// Buckets, level schedule, spatial index and sorted vertex data of one GIRG
/// instance, ready for repeated edge sampling.
pub struct GirgSampler {
    buckets: WeightBuckets,
    schedule: LevelSchedule,
    index: SpatialIndex,
    kernel: AnyKernel,
}

impl GirgSampler {
    pub fn new(weights: &WeightSet, positions: &PositionSet, rule: ConnectionRule) -> Result<Self> {
        if weights.len() != positions.len() {
            return Err(invalid("positions", "weights and positions differ in length"));
        }
        if positions.dim() != rule.dim() {
            return Err(invalid("dim", "positions and rule differ in dimension"));
        }
        if (weights.total() - rule.total()).abs() > 1e-9 * weights.total() {
            return Err(invalid("total", "rule was built for another total weight"));
        }
        let buckets = build_buckets(weights.as_slice())?;
        let schedule = compute_levels(&buckets, &rule, weights.len())?;
        let index = build_index(&buckets, positions, &schedule)?;
        let kernel = match rule.dim() {
            1 => AnyKernel::D1(GirgKernel::new(weights, positions, &index, &buckets, &schedule, rule)),
            2 => AnyKernel::D2(GirgKernel::new(weights, positions, &index, &buckets, &schedule, rule)),
            3 => AnyKernel::D3(GirgKernel::new(weights, positions, &index, &buckets, &schedule, rule)),
            4 => AnyKernel::D4(GirgKernel::new(weights, positions, &index, &buckets, &schedule, rule)),
            _ => AnyKernel::D5(GirgKernel::new(weights, positions, &index, &buckets, &schedule, rule)),
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

    pub fn index(&self) -> &SpatialIndex {
        &self.index
    }

    /// Samples the edge set for `edge_seed` using the workers of the current
    /// rayon pool. Returns the number of edges.
    pub fn sample_edges(&self, edge_seed: u64, sink: &mut dyn EdgeSink) -> u64 {
        let workers = rayon::current_num_threads();
        let (idx, s) = (&self.index, &self.schedule);
        match &self.kernel {
            AnyKernel::D1(k) => Engine::new(idx, s, k, edge_seed).run(workers, sink),
            AnyKernel::D2(k) => Engine::new(idx, s, k, edge_seed).run(workers, sink),
            AnyKernel::D3(k) => Engine::new(idx, s, k, edge_seed).run(workers, sink),
            AnyKernel::D4(k) => Engine::new(idx, s, k, edge_seed).run(workers, sink),
            AnyKernel::D5(k) => Engine::new(idx, s, k, edge_seed).run(workers, sink),
        }
    }
}
