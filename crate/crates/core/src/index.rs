//! Weight buckets, the comparison/insertion level schedule and the spatial
//! index giving contiguous access to the vertices of one bucket inside one
//! grid cell.

use std::ops::Range;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::model::{ConnectionRule, PositionSet, MAX_DIM};
use crate::morton::{self, CellId, CellCoords};

/// Upper bound on the number of weight buckets; heavier vertices share the last.
pub const MAX_BUCKETS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightBuckets {
    w_min: f64,
    bucket_of: Vec<u8>,
    counts: Vec<usize>,
    max_weight: Vec<f64>,
    min_weight: Vec<f64>,
}

/// Bucket `i` holds weights in `[w_min 2^i, w_min 2^(i+1))`.
pub fn build_buckets(weights: &[f64]) -> Result<WeightBuckets> {
    if weights.is_empty() {
        return Err(invalid("weights", "at least one weight is required"));
    }
    let w_min = weights.iter().copied().fold(f64::INFINITY, f64::min);
    if !(w_min > 0.0 && w_min.is_finite()) {
        return Err(invalid("weights", "weights must be positive and finite"));
    }
    let bucket_of: Vec<u8> = weights.par_iter().map(|&w| bucket_index(w, w_min)).collect();
    let top = *bucket_of.iter().max().unwrap() as usize;
    let mut counts = vec![0; top + 1];
    let mut max_weight: Vec<f64> = (0..=top).map(|i| w_min * 2f64.powi(i as i32 + 1)).collect();
    let mut min_weight: Vec<f64> = (0..=top).map(|i| w_min * 2f64.powi(i as i32)).collect();
    let mut seen = vec![false; top + 1];
    for (&w, &b) in weights.iter().zip(&bucket_of) {
        let b = b as usize;
        counts[b] += 1;
        if !seen[b] {
            seen[b] = true;
            max_weight[b] = w;
            min_weight[b] = w;
        } else {
            max_weight[b] = max_weight[b].max(w);
            min_weight[b] = min_weight[b].min(w);
        }
    }
    Ok(WeightBuckets {
        w_min,
        bucket_of,
        counts,
        max_weight,
        min_weight,
    })
}

#[inline]
fn bucket_index(w: f64, w_min: f64) -> u8 {
    let mut i = ((w / w_min).log2().floor().max(0.0) as usize).min(MAX_BUCKETS - 1);
    // Scaling by a power of two is exact, so these comparisons fix rounding in log2.
    while i > 0 && w < w_min * 2f64.powi(i as i32) {
        i -= 1;
    }
    while i + 1 < MAX_BUCKETS && w >= w_min * 2f64.powi(i as i32 + 1) {
        i += 1;
    }
    i as u8
}

impl WeightBuckets {
    #[inline]
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    #[inline]
    pub fn min_weight_overall(&self) -> f64 {
        self.w_min
    }

    #[inline]
    pub fn bucket_of(&self, v: usize) -> usize {
        self.bucket_of[v] as usize
    }

    #[inline]
    pub fn count(&self, i: usize) -> usize {
        self.counts[i]
    }

    /// Largest weight in bucket `i`; the upper boundary when the bucket is empty.
    #[inline]
    pub fn max_weight(&self, i: usize) -> f64 {
        self.max_weight[i]
    }

    /// Smallest weight in bucket `i`; the lower boundary when the bucket is empty.
    #[inline]
    pub fn min_weight(&self, i: usize) -> f64 {
        self.min_weight[i]
    }
}

/// Comparison levels of bucket pairs and insertion levels of buckets.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSchedule {
    buckets: usize,
    cl: Vec<u32>,
    insertion: Vec<u32>,
    max_depth: u32,
    neighbor_lists: Vec<Vec<(u32, u32)>>,
    distant_lists: Vec<Vec<(u32, u32)>>,
}

impl LevelSchedule {
    /// Schedule from a symmetric level matrix (row-major, `k x k`).
    /// `nonempty[i]` marks buckets taking part in sampling.
    pub fn from_levels(cl: Vec<u32>, nonempty: &[bool]) -> Result<Self> {
        let k = nonempty.len();
        if k == 0 || cl.len() != k * k {
            return Err(invalid("cl", "level matrix does not match the bucket count"));
        }
        if (0..k).any(|i| (0..i).any(|j| cl[i * k + j] != cl[j * k + i])) {
            return Err(invalid("cl", "level matrix is not symmetric"));
        }
        let insertion: Vec<u32> = (0..k)
            .map(|i| (0..k).map(|j| cl[i * k + j]).max().unwrap())
            .collect();
        let mut max_depth = 0;
        for i in 0..k {
            for j in i..k {
                if nonempty[i] && nonempty[j] {
                    max_depth = max_depth.max(cl[i * k + j]);
                }
            }
        }
        let mut neighbor_lists = vec![Vec::new(); max_depth as usize + 1];
        let mut distant_lists = vec![Vec::new(); max_depth as usize + 1];
        for i in 0..k {
            for j in i..k {
                if !(nonempty[i] && nonempty[j]) {
                    continue;
                }
                let level = cl[i * k + j];
                neighbor_lists[level as usize].push((i as u32, j as u32));
                for list in &mut distant_lists[..=level as usize] {
                    list.push((i as u32, j as u32));
                }
            }
        }
        Ok(Self {
            buckets: k,
            cl,
            insertion,
            max_depth,
            neighbor_lists,
            distant_lists,
        })
    }

    /// Levels from a connection length scale per bucket pair.
    ///
    /// `CL(i, j) = clamp(floor(-log2 len), 0, cap)`, lowered while the cell side
    /// does not exceed `len (1 + margin)`, so that every pair of distant cells on
    /// that level is strictly farther apart than the length scale.
    pub fn from_lengths(
        buckets: &WeightBuckets,
        cap: u32,
        margin: f64,
        len: impl Fn(usize, usize) -> f64,
    ) -> Result<Self> {
        let k = buckets.len();
        let mut cl = vec![0; k * k];
        for i in 0..k {
            for j in i..k {
                let level = level_for_length(len(i, j), cap, margin);
                cl[i * k + j] = level;
                cl[j * k + i] = level;
            }
        }
        let nonempty: Vec<bool> = (0..k).map(|i| buckets.count(i) > 0).collect();
        Self::from_levels(cl, &nonempty)
    }

    #[inline]
    pub fn bucket_count(&self) -> usize {
        self.buckets
    }

    #[inline]
    pub fn comparison_level(&self, i: usize, j: usize) -> u32 {
        self.cl[i * self.buckets + j]
    }

    #[inline]
    pub fn insertion_level(&self, i: usize) -> u32 {
        self.insertion[i]
    }

    #[inline]
    pub fn insertion_levels(&self) -> &[u32] {
        &self.insertion
    }

    #[inline]
    pub fn max_depth(&self) -> u32 {
        self.max_depth
    }

    /// Bucket pairs `(i, j)`, `i <= j`, handled by a cell pair on `level`:
    /// `CL == level` for neighbours, `CL >= level` for distant cells.
    #[inline]
    pub fn buckets_for_cell_pair(&self, level: u32, is_neighbor: bool) -> &[(u32, u32)] {
        let lists = if is_neighbor {
            &self.neighbor_lists
        } else {
            &self.distant_lists
        };
        lists.get(level as usize).map_or(&[], |l| l.as_slice())
    }
}

/// Comparison level of one length scale.
pub fn level_for_length(len: f64, cap: u32, margin: f64) -> u32 {
    if !(len > 0.0) {
        return cap;
    }
    let raw = -len.log2();
    if raw <= 0.0 {
        return 0;
    }
    let mut level = (raw.floor() as u64).min(cap as u64) as u32;
    while level > 0 && 0.5f64.powi(level as i32) <= len * (1.0 + margin) {
        level -= 1;
    }
    level
}

/// GIRG schedule: the length scale is where the connection probability saturates.
pub fn compute_levels(
    buckets: &WeightBuckets,
    rule: &ConnectionRule,
    n: usize,
) -> Result<LevelSchedule> {
    let cap = morton::depth_cap(n, rule.dim());
    LevelSchedule::from_lengths(buckets, cap, 1e-9, |i, j| {
        rule.saturation_distance(buckets.max_weight(i), buckets.max_weight(j))
    })
}

/// Vertices grouped by bucket and sorted by the Morton code of their cell on
/// the bucket's insertion level, with prefix sums over those cells.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    dim: usize,
    insertion: Vec<u32>,
    cell_base: Vec<usize>,
    prefix: Vec<u32>,
    order: Vec<u32>,
    position_of: Vec<u32>,
    occupied: Vec<Vec<u64>>,
}

pub fn build_index(
    buckets: &WeightBuckets,
    positions: &PositionSet,
    schedule: &LevelSchedule,
) -> Result<SpatialIndex> {
    let n = positions.len();
    let dim = positions.dim();
    if buckets.bucket_of.len() != n {
        return Err(invalid("positions", "weights and positions differ in length"));
    }
    if schedule.bucket_count() != buckets.len() {
        return Err(invalid("schedule", "schedule was built for other buckets"));
    }
    let insertion = schedule.insertion_levels().to_vec();
    let mut cell_base = Vec::with_capacity(insertion.len() + 1);
    let mut total = 0usize;
    for &level in &insertion {
        cell_base.push(total);
        total = total
            .checked_add(1usize << (dim as u32 * level))
            .ok_or_else(|| Error::NumericRange("grid too large".into()))?;
    }
    cell_base.push(total);

    let keys: Vec<usize> = (0..n)
        .into_par_iter()
        .map(|v| {
            let b = buckets.bucket_of(v);
            cell_base[b] + morton::cell_of_point(positions.point(v), insertion[b]).code as usize
        })
        .collect();

    // Counting sort over (bucket, cell); stable, so ties keep vertex-id order.
    let mut prefix = vec![0u32; total + 1];
    for &k in &keys {
        prefix[k + 1] += 1;
    }
    for z in 0..total {
        prefix[z + 1] += prefix[z];
    }
    let mut next = prefix.clone();
    let mut order = vec![0u32; n];
    let mut position_of = vec![0u32; n];
    for (v, &k) in keys.iter().enumerate() {
        let p = next[k] as usize;
        next[k] += 1;
        order[p] = v as u32;
        position_of[v] = p as u32;
    }

    let occupied = build_occupancy(dim, &insertion, &cell_base, &prefix, schedule.max_depth());
    Ok(SpatialIndex {
        dim,
        insertion,
        cell_base,
        prefix,
        order,
        position_of,
        occupied,
    })
}

/// Bitsets per level marking cells holding a vertex of some bucket indexed at
/// that level or deeper.
fn build_occupancy(
    dim: usize,
    insertion: &[u32],
    cell_base: &[usize],
    prefix: &[u32],
    max_depth: u32,
) -> Vec<Vec<u64>> {
    let top = insertion.iter().copied().max().unwrap_or(0).min(max_depth);
    let mut occ: Vec<Vec<u64>> = (0..=top)
        .map(|l| vec![0u64; ((1usize << (dim as u32 * l)) + 63) / 64])
        .collect();
    for (i, &level) in insertion.iter().enumerate() {
        let shift = dim as u32 * level.saturating_sub(top);
        let level = level.min(top);
        let bits = &mut occ[level as usize];
        let base = cell_base[i];
        for z in 0..(cell_base[i + 1] - base) {
            if prefix[base + z + 1] > prefix[base + z] {
                let z = z >> shift;
                bits[z / 64] |= 1 << (z % 64);
            }
        }
    }
    for l in (1..=top as usize).rev() {
        let (upper, lower) = occ.split_at_mut(l);
        let parent = &mut upper[l - 1];
        for (w, &word) in lower[0].iter().enumerate() {
            let mut word = word;
            while word != 0 {
                let z = w * 64 + word.trailing_zeros() as usize;
                word &= word - 1;
                let p = z >> dim;
                parent[p / 64] |= 1 << (p % 64);
            }
        }
    }
    occ
}

impl SpatialIndex {
    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.order.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Vertex ids in index order.
    #[inline]
    pub fn order(&self) -> &[u32] {
        &self.order
    }

    /// Index position of vertex `v`.
    #[inline]
    pub fn position_of(&self, v: usize) -> usize {
        self.position_of[v] as usize
    }

    /// Number of level cells allocated over all buckets.
    pub fn cell_count(&self) -> usize {
        *self.cell_base.last().unwrap()
    }

    /// Prefix sums of bucket `i`, one entry per insertion-level cell plus one.
    pub fn prefix_sums(&self, i: usize) -> &[u32] {
        &self.prefix[self.cell_base[i]..=self.cell_base[i + 1]]
    }

    /// Index positions of bucket `i`'s vertices inside `cell`.
    pub fn vertices_in(&self, i: usize, cell: CellId) -> Result<Range<usize>> {
        if i >= self.insertion.len() {
            return Err(invalid("bucket", format!("no bucket {i}")));
        }
        if cell.level > self.insertion[i] {
            return Err(Error::LevelTooDeep {
                level: cell.level,
                limit: self.insertion[i],
            });
        }
        CellId::new(cell.level, cell.code, self.dim)?;
        Ok(self.range(i, cell.level, cell.code))
    }

    #[inline]
    pub(crate) fn range(&self, i: usize, level: u32, code: u64) -> Range<usize> {
        let shift = self.dim as u32 * (self.insertion[i] - level);
        let base = self.cell_base[i];
        let lo = self.prefix[base + ((code as usize) << shift)] as usize;
        let hi = self.prefix[base + ((code as usize + 1) << shift)] as usize;
        lo..hi
    }

    /// Whether a cell may contain vertices of buckets indexed on `level` or deeper.
    #[inline]
    pub(crate) fn occupied(&self, level: u32, code: u64) -> bool {
        match self.occupied.get(level as usize) {
            Some(bits) => bits[(code / 64) as usize] >> (code % 64) & 1 == 1,
            None => true,
        }
    }
}

/// A traversal cell: Morton code plus decoded integer coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct GridCell {
    pub code: u64,
    pub x: CellCoords,
}

impl GridCell {
    pub const ROOT: GridCell = GridCell {
        code: 0,
        x: [0; MAX_DIM],
    };

    #[inline]
    pub fn child(&self, dim: usize, k: u64) -> GridCell {
        let mut x = self.x;
        for (m, xm) in x[..dim].iter_mut().enumerate() {
            *xm = (*xm << 1) | ((k >> (dim - 1 - m)) & 1);
        }
        GridCell {
            code: (self.code << dim) | k,
            x,
        }
    }

    /// Largest cyclic coordinate gap to `other` on `level`, in cells.
    #[inline]
    pub fn gap(&self, other: &GridCell, dim: usize, level: u32) -> u64 {
        let side = 1u64 << level;
        (0..dim)
            .map(|m| {
                let d = self.x[m].abs_diff(other.x[m]);
                d.min(side - d)
            })
            .max()
            .unwrap_or(0)
    }
}
