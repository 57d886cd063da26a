//! Seed derivation and random streams.
//!
//! Every random quantity is derived from one 64-bit master seed. Sub-seeds are
//! obtained by folding identifiers into the seed with the SplitMix64 finalizer:
//!
//! ```text
//! mix(x)          = splitmix64_finalize(x + 0x9E3779B97F4A7C15)
//! derive(s, a)    = mix(s ^ mix(a))
//! derive(s, a, b) = derive(derive(s, a), b)
//! ```
//!
//! Bulk per-vertex draws (weights, positions, radii, angles) are split into
//! fixed chunks of [`CHUNK`] vertices, each with its own generator keyed by
//! the chunk index, so the result does not depend on how chunks are spread
//! over workers. Edge sampling uses one counter-based SplitMix64 stream per
//! (cell pair, bucket pair) event.

use rand::SeedableRng;
use rand_xoshiro::{SplitMix64, Xoshiro256PlusPlus};
use rayon::prelude::*;

/// Number of vertices drawn from one chunk generator.
pub const CHUNK: usize = 1 << 14;

pub const STREAM_WEIGHTS: u64 = 1;
pub const STREAM_POSITIONS: u64 = 2;
pub const STREAM_EDGES: u64 = 3;
pub const STREAM_RADII: u64 = 4;
pub const STREAM_ANGLES: u64 = 5;
pub const STREAM_ESTIMATE: u64 = 6;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer applied to `x + golden`.
#[inline]
pub fn mix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
pub fn derive_seed(seed: u64, id: u64) -> u64 {
    mix64(seed ^ mix64(id))
}

/// Generator for chunk `chunk` of stream `stream`.
pub fn chunk_rng(seed: u64, stream: u64, chunk: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(derive_seed(derive_seed(seed, stream), chunk))
}

/// Key of one edge-sampling event. Independent of traversal order.
#[inline]
pub fn event_key(edge_seed: u64, level: u32, a: u64, b: u64, i: u32, j: u32) -> u64 {
    let mut k = derive_seed(edge_seed, level as u64);
    k = derive_seed(k, a);
    k = derive_seed(k, b);
    derive_seed(k, ((i as u64) << 32) | j as u64)
}

pub type EventRng = SplitMix64;

#[inline]
pub fn event_rng(key: u64) -> EventRng {
    SplitMix64::seed_from_u64(key)
}

/// Fills `out` chunk by chunk; `fill(rng, chunk_slice)` draws one chunk.
pub fn fill_chunked<T, F>(out: &mut [T], seed: u64, stream: u64, per_item: usize, fill: F)
where
    T: Send,
    F: Fn(&mut Xoshiro256PlusPlus, &mut [T]) + Sync,
{
    out.par_chunks_mut(CHUNK * per_item)
        .enumerate()
        .for_each(|(chunk, slice)| {
            let mut rng = chunk_rng(seed, stream, chunk as u64);
            fill(&mut rng, slice);
        });
}

/// Sum of `f` over `values` whose rounding does not depend on the worker count.
pub fn det_sum<T: Sync>(values: &[T], f: impl Fn(&T) -> f64 + Sync) -> f64 {
    let partial: Vec<f64> = values
        .par_chunks(CHUNK)
        .map(|c| c.iter().map(&f).sum::<f64>())
        .collect();
    partial.iter().sum()
}
