#![allow(dead_code)]

use std::sync::Arc;

use frechet_sets::metric::random_metric;
use frechet_sets::{DiscreteMeasure, MetricSpace, PointSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn line3() -> Arc<MetricSpace> {
    let m = vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.0], vec![2.0, 1.0, 0.0]];
    Arc::new(MetricSpace::from_matrix(vec!["-1".into(), "0".into(), "1".into()], &m).unwrap())
}

/// Random probability vector; each point is dropped with probability `sparsity`
/// (at least one point always keeps mass).
pub fn random_weights(r: &mut ChaCha8Rng, n: usize, sparsity: f64) -> Vec<f64> {
    let keep = r.random_range(0..n);
    let mut w: Vec<f64> = (0..n)
        .map(|i| if i != keep && r.random::<f64>() < sparsity { 0.0 } else { r.random_range(0.01..1.0) })
        .collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}

pub fn random_measure(space: &Arc<MetricSpace>, r: &mut ChaCha8Rng, sparsity: f64) -> DiscreteMeasure {
    DiscreteMeasure::new(space.clone(), random_weights(r, space.len(), sparsity)).unwrap()
}

pub fn random_space(r: &mut ChaCha8Rng, max: usize) -> Arc<MetricSpace> {
    let n = r.random_range(2..=max);
    Arc::new(random_metric(n, r.random()))
}

pub fn random_subset(r: &mut ChaCha8Rng, n: usize) -> PointSet {
    loop {
        let s: PointSet = (0..n).filter(|_| r.random::<bool>()).collect();
        if !s.is_empty() {
            return s;
        }
    }
}

/// Independent exhaustive minimizer: direct `powf` sums with the library's
/// documented tie rule (relative 1e-9, absolute 1e-12 at zero).
pub fn oracle_argmin(space: &MetricSpace, w: &[f64], cand: &PointSet, p: f64) -> (PointSet, f64) {
    let m = space.matrix();
    let f = |x: usize| -> f64 { (0..w.len()).map(|y| w[y] * m[x][y].powf(p)).sum() };
    let vals: Vec<(usize, f64)> = cand.iter().map(|x| (x, f(x))).collect();
    let min = vals.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
    let bound = if min > 0.0 { min * (1.0 + 1e-9) } else { 1e-12 };
    (vals.iter().filter(|v| v.1 <= bound).map(|v| v.0).collect(), min)
}
