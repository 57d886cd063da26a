//! Quadratic reference generators and the GIRG/HRG coupling analysis.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::hrg::{hrg_to_girg_map, HrgCoordinates, HyperbolicRule};
use crate::model::{torus_distance, ConnectionRule, PositionSet, WeightSet};

/// Linear index of the unordered pair `u < v` in row-major order.
#[inline]
pub fn pair_index(n: usize, u: usize, v: usize) -> usize {
    debug_assert!(u < v && v < n);
    u * (2 * n - u - 1) / 2 + (v - u - 1)
}

/// Runs `test(u, v)` on every unordered pair and collects the accepted ones,
/// sorted.
fn all_pairs(n: usize, test: impl Fn(usize, usize) -> bool + Sync) -> Vec<(u32, u32)> {
    (0..n)
        .into_par_iter()
        .flat_map_iter(|u| {
            let test = &test;
            (u + 1..n).filter(move |&v| test(u, v)).map(move |v| (u as u32, v as u32))
        })
        .collect()
}

fn check_uniforms(n: usize, binomial: bool, uniforms: &[f64]) -> Result<()> {
    let pairs = n * n.saturating_sub(1) / 2;
    if binomial && uniforms.len() != pairs {
        return Err(invalid("uniforms", format!("expected {pairs} uniforms, got {}", uniforms.len())));
    }
    Ok(())
}

/// Edge set of a GIRG by examining all pairs. For `T > 0` pair `(u, v)` is an
/// edge iff `uniforms[pair_index(n, u, v)] < p_uv`.
pub fn brute_force_girg(
    weights: &WeightSet,
    positions: &PositionSet,
    rule: &ConnectionRule,
    uniforms: &[f64],
) -> Result<Vec<(u32, u32)>> {
    let n = weights.len();
    if positions.len() != n {
        return Err(invalid("positions", "weights and positions differ in length"));
    }
    check_uniforms(n, !rule.is_threshold(), uniforms)?;
    let w = weights.as_slice();
    Ok(all_pairs(n, |u, v| {
        let p = rule.probability(w[u], w[v], torus_distance(positions.point(u), positions.point(v)));
        if rule.is_threshold() {
            p == 1.0
        } else {
            uniforms[pair_index(n, u, v)] < p
        }
    }))
}

/// Edge set of a hyperbolic random graph by examining all pairs, with the
/// same uniform convention as [`brute_force_girg`].
pub fn brute_force_hrg(coords: &HrgCoordinates, rule: &HyperbolicRule, uniforms: &[f64]) -> Result<Vec<(u32, u32)>> {
    let n = coords.len();
    check_uniforms(n, !rule.is_threshold(), uniforms)?;
    Ok(all_pairs(n, |u, v| {
        let c = coords.cosh_distance(u, v);
        if rule.is_threshold() {
            rule.threshold_edge(c)
        } else {
            uniforms[pair_index(n, u, v)] < rule.probability_cosh(c)
        }
    }))
}

/// Threshold HRG compared with the threshold GIRGs on the mapped
/// coordinates, for every value of the GIRG constant at once.
///
/// A pair is a GIRG edge for constant `c` iff `c >= c_crit`, where
/// `c_crit = dist W / (w_u w_v)`. HRG edges use the generator's strict rule
/// `cosh d < cosh R`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    pub n: usize,
    pub hrg_edges: u64,
    /// Smallest critical constant of a pair that is not an HRG edge; every
    /// GIRG with a smaller constant is a subgraph of the HRG.
    pub c_sub: f64,
    /// Largest critical constant of an HRG edge; the GIRG with this constant
    /// contains the HRG.
    pub c_super: f64,
    /// Average degree of the GIRG just below `c_sub`.
    pub d_girg: f64,
    pub d_hrg: f64,
    /// Average degree of the GIRG at `c_super`.
    pub big_d_girg: f64,
    edge_crit: Vec<f64>,
    /// Critical constants of non-edges up to `c_super`, sorted.
    non_edge_crit: Vec<f64>,
}

/// One point of the coupling curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingPoint {
    pub c: f64,
    pub avg_degree: f64,
    /// HRG edges missing from the GIRG.
    pub missing: u64,
    /// GIRG edges that are not HRG edges.
    pub extra: u64,
}

/// Critical constant of every unordered pair, split by HRG adjacency.
pub fn coupling_analysis(coords: &HrgCoordinates, rule: &HyperbolicRule) -> Result<Coupling> {
    let n = coords.len();
    if n < 2 {
        return Err(invalid("n", "coupling needs at least two vertices"));
    }
    if !rule.is_threshold() {
        return Err(invalid("temp", "coupling is defined for the threshold variant"));
    }
    let (weights, positions) = hrg_to_girg_map(coords)?;
    let (w, total) = (weights.as_slice(), weights.total());
    let crit = |u: usize, v: usize| torus_distance(positions.point(u), positions.point(v)) * (total / (w[u] * w[v]));
    let (c_sub, c_super) = (0..n)
        .into_par_iter()
        .map(|u| {
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for v in u + 1..n {
                let k = crit(u, v);
                if rule.threshold_edge(coords.cosh_distance(u, v)) {
                    hi = hi.max(k);
                } else {
                    lo = lo.min(k);
                }
            }
            (lo, hi)
        })
        .reduce(|| (f64::INFINITY, 0.0), |a, b| (a.0.min(b.0), a.1.max(b.1)));
    let (mut edge_crit, mut non_edge_crit): (Vec<f64>, Vec<f64>) = (0..n)
        .into_par_iter()
        .map(|u| {
            let (mut e, mut f) = (Vec::new(), Vec::new());
            for v in u + 1..n {
                let k = crit(u, v);
                if rule.threshold_edge(coords.cosh_distance(u, v)) {
                    e.push(k);
                } else if k <= c_super {
                    f.push(k);
                }
            }
            (e, f)
        })
        .reduce(
            || (Vec::new(), Vec::new()),
            |mut a, b| {
                a.0.extend(b.0);
                a.1.extend(b.1);
                a
            },
        );
    edge_crit.par_sort_unstable_by(f64::total_cmp);
    non_edge_crit.par_sort_unstable_by(f64::total_cmp);
    let hrg_edges = edge_crit.len() as u64;
    let avg = |m: usize| 2.0 * m as f64 / n as f64;
    Ok(Coupling {
        n,
        hrg_edges,
        c_sub,
        c_super,
        d_girg: avg(edge_crit.partition_point(|&k| k < c_sub)),
        d_hrg: avg(edge_crit.len()),
        big_d_girg: avg(edge_crit.len() + non_edge_crit.len()),
        edge_crit,
        non_edge_crit,
    })
}

impl Coupling {
    /// Edge counts of the GIRG with constant `c`, which must not exceed
    /// `c_super` (larger constants need non-edges that are not retained).
    pub fn point(&self, c: f64) -> Result<CouplingPoint> {
        if !(c > 0.0 && c <= self.c_super) {
            return Err(invalid("c", format!("must be in (0, {}], got {c}", self.c_super)));
        }
        let present = self.edge_crit.partition_point(|&k| k <= c);
        let extra = self.non_edge_crit.partition_point(|&k| k <= c);
        Ok(CouplingPoint {
            c,
            avg_degree: 2.0 * (present + extra) as f64 / self.n as f64,
            missing: (self.edge_crit.len() - present) as u64,
            extra: extra as u64,
        })
    }

    /// Smallest constant whose GIRG has at least as many edges as the HRG.
    pub fn degree_matched_constant(&self) -> f64 {
        let m = self.edge_crit.len();
        if m == 0 {
            return self.c_super;
        }
        let (a, b) = (&self.edge_crit, &self.non_edge_crit);
        // m-th smallest of the merged sorted lists
        let (mut lo, mut hi) = (m.saturating_sub(b.len()), m.min(a.len()));
        while lo < hi {
            let i = (lo + hi) / 2;
            let j = m - i;
            if j > 0 && i < a.len() && b[j - 1] > a[i] {
                lo = i + 1;
            } else {
                hi = i;
            }
        }
        let (i, j) = (lo, m - lo);
        let last_a = if i > 0 { a[i - 1] } else { f64::NEG_INFINITY };
        let last_b = if j > 0 { b[j - 1] } else { f64::NEG_INFINITY };
        last_a.max(last_b)
    }

    /// Points at `steps` constants evenly spaced in `(0, c_super]`.
    pub fn curve(&self, steps: usize) -> Vec<CouplingPoint> {
        (1..=steps)
            .map(|s| self.point(self.c_super * s as f64 / steps as f64).unwrap())
            .collect()
    }

    /// Writes `c avg_degree missing extra` lines after `%` metadata.
    pub fn write_curve(&self, out: &mut impl Write, points: &[CouplingPoint]) -> io::Result<()> {
        writeln!(out, "% coupling n={} hrg_edges={}", self.n, self.hrg_edges)?;
        writeln!(out, "% c_sub={} c_super={}", self.c_sub, self.c_super)?;
        writeln!(out, "% d_girg={} d_hrg={} D_girg={}", self.d_girg, self.d_hrg, self.big_d_girg)?;
        writeln!(out, "% ties: girg edge iff c >= c_crit; hrg edge iff cosh d < cosh R")?;
        writeln!(out, "% c avg_degree missing extra")?;
        for p in points {
            writeln!(out, "{} {} {} {}", p.c, p.avg_degree, p.missing, p.extra)?;
        }
        Ok(())
    }
}
