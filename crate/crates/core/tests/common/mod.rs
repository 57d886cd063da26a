//! Helpers shared by the integration tests.
#![allow(dead_code)]

use girgs::estimator::estimate_c;
use girgs::model::{sample_positions, sample_weights, ConnectionRule, PositionSet, WeightSet};

pub fn degrees(n: usize, edges: &[(u32, u32)]) -> Vec<u32> {
    let mut deg = vec![0u32; n];
    for &(u, v) in edges {
        deg[u as usize] += 1;
        deg[v as usize] += 1;
    }
    deg
}

/// Hill estimate of the power-law exponent of a degree sequence from its
/// largest `fraction` of values: `1 + k / sum ln(d_i / d_(k+1))`.
pub fn hill_exponent(degrees: &[u32], fraction: f64) -> f64 {
    let mut d: Vec<f64> = degrees.iter().map(|&x| x as f64).collect();
    d.sort_by(|a, b| b.total_cmp(a));
    let k = ((d.len() as f64 * fraction) as usize).clamp(1, d.len() - 1);
    let base = d[k].max(1.0);
    let s: f64 = d[..k].iter().map(|x| (x / base).ln()).sum();
    1.0 + k as f64 / s
}

/// Seeded GIRG instance whose constant targets `target` average degree.
pub fn girg_instance(n: usize, dim: usize, ple: f64, temp: f64, target: f64, seed: u64) -> (WeightSet, PositionSet, ConnectionRule) {
    let w = sample_weights(n, ple, seed).unwrap();
    let p = sample_positions(n, dim, seed).unwrap();
    let c = estimate_c(target, &w, dim, temp).unwrap().c;
    let rule = ConnectionRule::new(c, temp, dim, w.total()).unwrap();
    (w, p, rule)
}

pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0).max(1.0);
    (m, v.sqrt())
}
