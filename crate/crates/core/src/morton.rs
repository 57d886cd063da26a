//! Hierarchical torus grid addressed by Morton codes.
//!
//! A cell on level `l` has side length `2^-l`. Its code interleaves the bits of
//! its integer coordinates, most significant bit group first, and inside each
//! group the first coordinate takes the highest bit. For `d = 2` and
//! coordinates `a`, `b` the code reads `a3 b3 a2 b2 a1 b1 a0 b0`.

use crate::error::{invalid, Error, Result};
use crate::model::MAX_DIM;

/// Bit budget of a Morton code.
pub const CODE_BITS: u32 = 62;

/// Integer cell coordinates; only the first `dim` entries are meaningful.
pub type CellCoords = [u64; MAX_DIM];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellId {
    pub level: u32,
    pub code: u64,
}

impl CellId {
    pub const ROOT: CellId = CellId { level: 0, code: 0 };

    pub fn new(level: u32, code: u64, dim: usize) -> Result<Self> {
        check_level(dim, level)?;
        if code >> (dim as u32 * level) != 0 {
            return Err(invalid("code", format!("{code} is out of range for level {level}")));
        }
        Ok(Self { level, code })
    }

    #[inline]
    pub fn parent(self, dim: usize) -> Option<CellId> {
        (self.level > 0).then(|| CellId {
            level: self.level - 1,
            code: self.code >> dim,
        })
    }

    /// Codes of the children, which live on `level + 1`.
    #[inline]
    pub fn child_codes(self, dim: usize) -> std::ops::Range<u64> {
        let first = self.code << dim;
        first..first + (1u64 << dim)
    }

    /// Range of codes of all descendants on `level`, which must not be shallower.
    #[inline]
    pub fn descendant_codes(self, dim: usize, level: u32) -> std::ops::Range<u64> {
        debug_assert!(level >= self.level);
        let shift = dim as u32 * (level - self.level);
        (self.code << shift)..((self.code + 1) << shift)
    }
}

/// Deepest grid level used for `n` points in dimension `dim`.
pub fn depth_cap(n: usize, dim: usize) -> u32 {
    let budget = CODE_BITS / dim as u32;
    let log2n = (n.max(1) as f64).log2();
    let by_size = (log2n / dim as f64).ceil() as u32 + 1;
    budget.min(by_size)
}

fn check_level(dim: usize, level: u32) -> Result<()> {
    if !(1..=MAX_DIM).contains(&dim) {
        return Err(invalid("dim", format!("must be in 1..={MAX_DIM}, got {dim}")));
    }
    let limit = CODE_BITS / dim as u32;
    if level > limit {
        return Err(Error::LevelTooDeep { level, limit });
    }
    Ok(())
}

/// Interleaves `coords` (one entry per dimension, each below `2^level`).
pub fn morton_encode(coords: &[u64], level: u32) -> Result<u64> {
    let dim = coords.len();
    check_level(dim, level)?;
    if let Some(x) = coords.iter().find(|x| level < 64 && **x >> level != 0) {
        return Err(invalid("coords", format!("{x} needs more than {level} bits")));
    }
    Ok(encode(coords, level))
}

/// Inverse of [`morton_encode`].
pub fn morton_decode(code: u64, dim: usize, level: u32) -> Result<Vec<u64>> {
    check_level(dim, level)?;
    if code >> (dim as u32 * level) != 0 {
        return Err(invalid("code", format!("{code} is out of range for level {level}")));
    }
    let mut out = [0u64; MAX_DIM];
    decode_into(code, dim, level, &mut out);
    Ok(out[..dim].to_vec())
}

/// Unchecked encode; dispatches to the bit-deposit path when available.
#[inline]
pub fn encode(coords: &[u64], level: u32) -> u64 {
    #[cfg(all(feature = "bmi2", target_arch = "x86_64"))]
    {
        if bmi2::available() {
            // SAFETY: the CPU supports BMI2, checked at runtime.
            return unsafe { bmi2::encode(coords, level) };
        }
    }
    encode_portable(coords, level)
}

/// Unchecked decode into the first `dim` entries of `out`.
#[inline]
pub fn decode_into(code: u64, dim: usize, level: u32, out: &mut [u64]) {
    #[cfg(all(feature = "bmi2", target_arch = "x86_64"))]
    {
        if bmi2::available() {
            // SAFETY: the CPU supports BMI2, checked at runtime.
            return unsafe { bmi2::decode_into(code, dim, level, out) };
        }
    }
    decode_portable_into(code, dim, level, out)
}

/// Per-bit interleaving loop; touches only the `level` significant bits.
pub fn encode_portable(coords: &[u64], level: u32) -> u64 {
    let d = coords.len() as u32;
    if d == 1 {
        return coords[0];
    }
    let mut code = 0u64;
    for j in 0..level {
        let group = j * d;
        for (k, &x) in coords.iter().enumerate() {
            code |= ((x >> j) & 1) << (group + d - 1 - k as u32);
        }
    }
    code
}

pub fn decode_portable_into(code: u64, dim: usize, level: u32, out: &mut [u64]) {
    let d = dim as u32;
    if d == 1 {
        out[0] = code;
        return;
    }
    out[..dim].fill(0);
    for j in 0..level {
        let group = j * d;
        for (k, x) in out[..dim].iter_mut().enumerate() {
            *x |= ((code >> (group + d - 1 - k as u32)) & 1) << j;
        }
    }
}

#[cfg(all(feature = "bmi2", target_arch = "x86_64"))]
pub mod bmi2 {
    use std::arch::x86_64::{_pdep_u64, _pext_u64};
    use std::sync::OnceLock;

    use crate::model::MAX_DIM;

    pub fn available() -> bool {
        static DETECTED: OnceLock<bool> = OnceLock::new();
        *DETECTED.get_or_init(|| std::is_x86_feature_detected!("bmi2"))
    }

    /// Masks over the full 62-bit budget; `MASKS[d-1][k]` selects coordinate `k`.
    const MASKS: [[u64; MAX_DIM]; MAX_DIM] = build_masks();

    const fn build_masks() -> [[u64; MAX_DIM]; MAX_DIM] {
        let mut masks = [[0u64; MAX_DIM]; MAX_DIM];
        let mut d = 1;
        while d <= MAX_DIM {
            let mut k = 0;
            while k < d {
                let mut bit = d - 1 - k;
                while bit < super::CODE_BITS as usize {
                    masks[d - 1][k] |= 1 << bit;
                    bit += d;
                }
                k += 1;
            }
            d += 1;
        }
        masks
    }

    #[inline]
    fn mask(dim: usize, k: usize, level: u32) -> u64 {
        let used = dim as u32 * level;
        let keep = if used >= 64 { u64::MAX } else { (1u64 << used) - 1 };
        MASKS[dim - 1][k] & keep
    }

    /// # Safety
    /// Requires a CPU with BMI2.
    #[target_feature(enable = "bmi2")]
    pub unsafe fn encode(coords: &[u64], level: u32) -> u64 {
        let dim = coords.len();
        let mut code = 0;
        for (k, &x) in coords.iter().enumerate() {
            code |= _pdep_u64(x, mask(dim, k, level));
        }
        code
    }

    /// # Safety
    /// Requires a CPU with BMI2.
    #[target_feature(enable = "bmi2")]
    pub unsafe fn decode_into(code: u64, dim: usize, level: u32, out: &mut [u64]) {
        for (k, x) in out[..dim].iter_mut().enumerate() {
            *x = _pext_u64(code, mask(dim, k, level));
        }
    }
}

/// Level-`level` cell containing `x`.
pub fn cell_of_point(x: &[f64], level: u32) -> CellId {
    let mut coords = [0u64; MAX_DIM];
    cell_coords_of_point(x, level, &mut coords);
    CellId {
        level,
        code: encode(&coords[..x.len()], level),
    }
}

#[inline]
pub(crate) fn cell_coords_of_point(x: &[f64], level: u32, out: &mut [u64]) {
    let side = (1u64 << level) as f64;
    let top = (1u64 << level) - 1;
    for (o, &xi) in out.iter_mut().zip(x) {
        *o = ((xi * side) as u64).min(top);
    }
}

fn check_same_level(a: CellId, b: CellId) -> Result<()> {
    if a.level != b.level {
        return Err(Error::LevelMismatch(a.level, b.level));
    }
    Ok(())
}

/// Chebyshev adjacency on the torus; a cell neighbours itself.
pub fn are_neighbors(a: CellId, b: CellId, dim: usize) -> Result<bool> {
    check_same_level(a, b)?;
    check_level(dim, a.level)?;
    Ok(neighbors(a.code, b.code, dim, a.level))
}

/// Exact minimum torus distance between points of two cells.
pub fn min_cell_distance(a: CellId, b: CellId, dim: usize) -> Result<f64> {
    check_same_level(a, b)?;
    check_level(dim, a.level)?;
    Ok(min_distance(a.code, b.code, dim, a.level))
}

/// Cyclic gap in one dimension, measured in whole cells between the two.
#[inline]
fn cyclic_gap(x: u64, y: u64, level: u32) -> u64 {
    let side = 1u64 << level;
    let diff = x.abs_diff(y);
    diff.min(side - diff)
}

#[inline]
pub(crate) fn neighbors(a: u64, b: u64, dim: usize, level: u32) -> bool {
    if level <= 1 || a == b {
        return true;
    }
    let (mut x, mut y) = ([0u64; MAX_DIM], [0u64; MAX_DIM]);
    decode_into(a, dim, level, &mut x);
    decode_into(b, dim, level, &mut y);
    (0..dim).all(|k| cyclic_gap(x[k], y[k], level) <= 1)
}

#[inline]
pub(crate) fn min_distance(a: u64, b: u64, dim: usize, level: u32) -> f64 {
    if level <= 1 || a == b {
        return 0.0;
    }
    let (mut x, mut y) = ([0u64; MAX_DIM], [0u64; MAX_DIM]);
    decode_into(a, dim, level, &mut x);
    decode_into(b, dim, level, &mut y);
    let gap = (0..dim)
        .map(|k| cyclic_gap(x[k], y[k], level).saturating_sub(1))
        .max()
        .unwrap_or(0);
    gap as f64 / (1u64 << level) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::torus_distance;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;

    #[test]
    fn encode_examples() {
        assert_eq!(morton_encode(&[0b1010, 0b0110], 4).unwrap(), 156);
        assert_eq!(morton_encode(&[0, 0, 0, 0, 0], 12).unwrap(), 0);
        assert_eq!(morton_decode(156, 2, 4).unwrap(), vec![0b1010, 0b0110]);
        assert_eq!(morton_decode(0, 3, 5).unwrap(), vec![0, 0, 0]);
        assert!(morton_encode(&[0; 5], 13).is_err());
        assert!(morton_encode(&[16, 0], 4).is_err());
        assert!(morton_decode(1 << 8, 2, 4).is_err());
    }

    #[test]
    fn exhaustive_roundtrip_small() {
        for dim in 1..=5usize {
            let level = 16 / dim as u32;
            let mut out = [0u64; MAX_DIM];
            for code in 0..(1u64 << (dim as u32 * level)) {
                decode_into(code, dim, level, &mut out);
                assert_eq!(encode(&out[..dim], level), code);
            }
        }
    }

    #[test]
    fn portable_paths_agree_with_dispatch() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(5);
        for _ in 0..10_000 {
            let dim = rng.gen_range(1..=5);
            let level = rng.gen_range(0..=CODE_BITS / dim as u32);
            let code = rng.gen::<u64>() & ((1u64 << (dim as u32 * level)) - 1);
            let (mut a, mut b) = ([0u64; MAX_DIM], [0u64; MAX_DIM]);
            decode_into(code, dim, level, &mut a);
            decode_portable_into(code, dim, level, &mut b);
            assert_eq!(a, b);
            assert_eq!(encode(&a[..dim], level), encode_portable(&a[..dim], level));
        }
    }

    #[test]
    fn cell_of_point_examples() {
        assert_eq!(cell_of_point(&[0.7, 0.2], 0), CellId::ROOT);
        assert_eq!(cell_of_point(&[0.49], 1).code, 0);
        assert_eq!(cell_of_point(&[0.5], 1).code, 1);
        let x = [0.3141, 0.9999];
        let c = cell_of_point(&x, 5);
        assert_eq!(morton_decode(c.code, 2, 5).unwrap(), vec![10, 31]);
    }

    #[test]
    fn neighbour_and_distance_examples() {
        let cell = |code| CellId { level: 3, code };
        assert!(are_neighbors(cell(4), cell(4), 1).unwrap());
        assert!(are_neighbors(cell(0), cell(7), 1).unwrap());
        assert!(!are_neighbors(cell(0), cell(2), 1).unwrap());
        assert_eq!(min_cell_distance(cell(3), cell(3), 1).unwrap(), 0.0);
        assert_eq!(min_cell_distance(cell(0), cell(2), 1).unwrap(), 0.125);
        assert_eq!(min_cell_distance(cell(0), cell(5), 1).unwrap(), 0.25);
        assert!(are_neighbors(cell(0), CellId { level: 2, code: 0 }, 1).is_err());
        // Level 1 wraps onto itself.
        let l1 = |code| CellId { level: 1, code };
        assert!(are_neighbors(l1(0), l1(3), 2).unwrap());
    }

    #[test]
    fn depth_cap_respects_budget() {
        assert_eq!(depth_cap(1 << 20, 1), 21);
        assert_eq!(depth_cap(1 << 20, 2), 11);
        assert_eq!(depth_cap(usize::MAX, 1), 62);
        assert_eq!(depth_cap(1, 3), 1);
    }

    proptest! {
        #[test]
        fn random_roundtrip(dim in 1usize..=5, raw in any::<u64>(), lvl in any::<u32>()) {
            let level = lvl % (CODE_BITS / dim as u32 + 1);
            let code = raw & ((1u64 << (dim as u32 * level)) - 1);
            let coords = morton_decode(code, dim, level).unwrap();
            prop_assert_eq!(morton_encode(&coords, level).unwrap(), code);
        }

        #[test]
        fn descendants_are_contiguous(dim in 1usize..=3, level in 0u32..6, extra in 0u32..4, raw in any::<u64>()) {
            let code = raw & ((1u64 << (dim as u32 * level)) - 1);
            let cell = CellId { level, code };
            let range = cell.descendant_codes(dim, level + extra);
            for z in [range.start, range.end - 1] {
                let mut c = CellId { level: level + extra, code: z };
                for _ in 0..extra {
                    c = c.parent(dim).unwrap();
                }
                prop_assert_eq!(c, cell);
            }
            let children = cell.child_codes(dim);
            prop_assert_eq!(children.start, cell.descendant_codes(dim, level + 1).start);
        }

        #[test]
        fn cell_of_point_is_consistent_with_parent(
            x in proptest::collection::vec(0.0f64..1.0, 3), level in 0u32..15,
        ) {
            let fine = cell_of_point(&x, level + 1);
            prop_assert_eq!(fine.parent(3).unwrap(), cell_of_point(&x, level));
        }

        #[test]
        fn min_distance_bounds_point_distance(
            dim in 1usize..=3, level in 0u32..6, ra in any::<u64>(), rb in any::<u64>(),
            offs in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 3),
        ) {
            let mask = (1u64 << (dim as u32 * level)) - 1;
            let (a, b) = (CellId { level, code: ra & mask }, CellId { level, code: rb & mask });
            let bound = min_cell_distance(a, b, dim).unwrap();
            prop_assert_eq!(bound == 0.0, are_neighbors(a, b, dim).unwrap());
            let (ca, cb) = (morton_decode(a.code, dim, level).unwrap(), morton_decode(b.code, dim, level).unwrap());
            let side = 1.0 / (1u64 << level) as f64;
            let xa: Vec<f64> = (0..dim).map(|k| (ca[k] as f64 + offs[k].0) * side).collect();
            let xb: Vec<f64> = (0..dim).map(|k| (cb[k] as f64 + offs[k].1) * side).collect();
            prop_assert!(bound <= torus_distance(&xa, &xb) + 1e-12);
        }
    }
}
