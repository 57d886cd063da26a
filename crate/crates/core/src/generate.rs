//! End-to-end generation with per-step timings.

use std::time::{Duration, Instant};

use crate::error::{invalid, Result};
use crate::estimator::{DegreeEstimator, Estimate};
use crate::hrg::{
    disk_radius, sample_quantiles, HrgCoordinates, HrgParams, HrgUniforms, HrgSampler, HyperbolicRule, RadiusEstimate,
    RadiusEstimator, ESTIMATE_PAIRS,
};
use crate::model::{sample_positions, sample_weights, ConnectionRule, DegreeSpec, GirgParams, PositionSet, WeightSet};
use crate::rng::{derive_seed, STREAM_ANGLES, STREAM_EDGES, STREAM_RADII};
use crate::sampler::GirgSampler;
use crate::sink::EdgeSink;

/// Wall-clock time of the five generation steps.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepTimings {
    /// Weight sampling (radii for hyperbolic graphs).
    pub weights: Duration,
    /// Position sampling (angles for hyperbolic graphs).
    pub positions: Duration,
    /// Search for the constant matching the target degree.
    pub binary: Duration,
    /// Buckets, levels and spatial index.
    pub pre: Duration,
    pub edges: Duration,
}

impl StepTimings {
    pub fn total(&self) -> Duration {
        self.weights + self.positions + self.binary + self.pre + self.edges
    }
}

/// Thread pool with `threads` workers; 0 means the available parallelism.
pub fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| invalid("threads", e.to_string()))
}

/// Seed of the edge stream derived from a master seed.
pub fn edge_seed(seed: u64) -> u64 {
    derive_seed(seed, STREAM_EDGES)
}

pub(crate) fn timed<T>(slot: &mut Duration, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    *slot = start.elapsed();
    out
}

#[derive(Debug, Clone)]
pub struct GirgOutput {
    pub weights: WeightSet,
    pub positions: PositionSet,
    /// Connection constant used for sampling.
    pub c: f64,
    pub estimate: Option<Estimate>,
    pub edges: u64,
    pub timings: StepTimings,
}

/// Samples weights and positions, fixes the constant and streams all edges
/// into `sink`.
pub fn generate_girg(params: &GirgParams, threads: usize, sink: &mut dyn EdgeSink) -> Result<GirgOutput> {
    params.validate()?;
    let pool = thread_pool(threads)?;
    pool.install(|| {
        let mut t = StepTimings::default();
        let weights = timed(&mut t.weights, || sample_weights(params.n, params.ple, params.seed))?;
        let positions = timed(&mut t.positions, || sample_positions(params.n, params.dim, params.seed))?;
        let (c, estimate) = timed(&mut t.binary, || -> Result<_> {
            match params.degree {
                DegreeSpec::Constant(c) => Ok((c, None)),
                DegreeSpec::Target(target) => {
                    let est = DegreeEstimator::new(&weights, params.dim, params.temp)?.estimate_c(target)?;
                    Ok((est.c, Some(est)))
                }
            }
        })?;
        let rule = ConnectionRule::new(c, params.temp, params.dim, weights.total())?;
        let sampler = timed(&mut t.pre, || GirgSampler::new(&weights, &positions, rule))?;
        let edges = timed(&mut t.edges, || sampler.sample_edges(edge_seed(params.seed), sink));
        Ok(GirgOutput {
            weights,
            positions,
            c,
            estimate,
            edges,
            timings: t,
        })
    })
}

#[derive(Debug, Clone)]
pub struct HrgOutput {
    pub coords: HrgCoordinates,
    /// Offset `C` of the disk radius `R = 2 ln n + C`.
    pub offset: f64,
    pub estimate: Option<RadiusEstimate>,
    pub edges: u64,
    pub timings: StepTimings,
}

/// Hyperbolic counterpart of [`generate_girg`]. Radial quantiles count as
/// the weight step, angles as the position step; turning quantiles into
/// radii is part of the preprocessing.
pub fn generate_hrg(params: &HrgParams, threads: usize, sink: &mut dyn EdgeSink) -> Result<HrgOutput> {
    params.validate()?;
    let pool = thread_pool(threads)?;
    pool.install(|| {
        let mut t = StepTimings::default();
        let radial = timed(&mut t.weights, || sample_quantiles(params.n, params.seed, STREAM_RADII))?;
        let angular = timed(&mut t.positions, || sample_quantiles(params.n, params.seed, STREAM_ANGLES))?;
        let uniforms = HrgUniforms { radial, angular };
        let (offset, estimate) = timed(&mut t.binary, || -> Result<_> {
            match params.degree {
                DegreeSpec::Constant(c) => Ok((c, None)),
                DegreeSpec::Target(target) => {
                    let est = RadiusEstimator::new(&uniforms.radial, params.alpha, params.temp, ESTIMATE_PAIRS, 0)?
                        .estimate(target)?;
                    Ok((est.offset, Some(est)))
                }
            }
        })?;
        let big_r = disk_radius(params.n, offset)?;
        let rule = HyperbolicRule::new(big_r, params.temp)?;
        let (coords, sampler) = timed(&mut t.pre, || -> Result<_> {
            let coords = HrgCoordinates::from_uniforms(&uniforms, params.alpha, big_r)?;
            let sampler = HrgSampler::new(&coords, rule)?;
            Ok((coords, sampler))
        })?;
        let edges = timed(&mut t.edges, || sampler.sample_edges(edge_seed(params.seed), sink));
        Ok(HrgOutput {
            coords,
            offset,
            estimate,
            edges,
            timings: t,
        })
    })
}
