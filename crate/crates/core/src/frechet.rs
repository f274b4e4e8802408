//! Exhaustive set-valued Fréchet p-means over finite candidate sets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{check_p, DiscreteMeasure};
use crate::pointset::PointSet;

/// Relative tie tolerance against the minimum value.
pub const TIE_REL: f64 = 1e-9;
/// Absolute tie tolerance used when the minimum is exactly zero.
pub const TIE_ABS: f64 = 1e-12;

#[inline]
pub(crate) fn tie_bound(min: f64) -> f64 {
    if min > 0.0 {
        min + TIE_REL * min
    } else {
        min + TIE_ABS
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrechetResult {
    /// Every candidate whose value is within tie tolerance of the minimum.
    pub argmin: PointSet,
    pub min_value: f64,
    /// `f_p(μ, x)` for every point of the space, candidate or not.
    pub values: Vec<f64>,
    pub candidate_set: PointSet,
    pub p: f64,
}

/// Argmin of `values` over `candidate`. `candidate` must be nonempty.
pub(crate) fn argmin_over(values: &[f64], candidate: &PointSet) -> (PointSet, f64) {
    let min = candidate.iter().map(|x| values[x]).fold(f64::INFINITY, f64::min);
    let bound = tie_bound(min);
    let argmin = candidate.iter().filter(|&x| values[x] <= bound).collect();
    (argmin, min)
}

/// Joint Fréchet p-mean: all minimizers of `f_p(μ, ·)` over `candidate`.
pub fn frechet_mean(mu: &DiscreteMeasure, candidate: &PointSet, p: f64) -> Result<FrechetResult> {
    check_p(p)?;
    if candidate.is_empty() {
        return Err(Error::EmptyDomain);
    }
    candidate.check_in(mu.space())?;
    let values = mu.values(p);
    let (argmin, min_value) = argmin_over(&values, candidate);
    Ok(FrechetResult { argmin, min_value, values, candidate_set: candidate.clone(), p })
}

/// Restricted Fréchet p-mean (the p-medoid for empirical measures): the
/// minimization runs over `supp(μ)` only.
pub fn medoid(mu: &DiscreteMeasure, p: f64) -> Result<FrechetResult> {
    frechet_mean(mu, &mu.support(), p)
}

/// Unrestricted Fréchet p-mean over the whole space.
pub fn unrestricted_mean(mu: &DiscreteMeasure, p: f64) -> Result<FrechetResult> {
    frechet_mean(mu, &PointSet::full(mu.space().len()), p)
}

/// `c_ε = (1/((1+ε)^{1/p} - 1) + 1)^p`, the constant for which
/// `(a+b)^p ≤ (1+ε) a^p + c_ε b^p` holds for all `a, b ≥ 0`.
pub fn peter_paul_constant(epsilon: f64, p: f64) -> Result<f64> {
    check_p(p)?;
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    let root = (1.0 + epsilon).powf(1.0 / p) - 1.0;
    Ok((1.0 / root + 1.0).powf(p))
}

/// Whether `x ∈ F_p(μ)`, i.e. `μ` lies in the Voronoi-type cell `K_{p,x}`.
pub fn in_voronoi_cell(mu: &DiscreteMeasure, x: usize, p: f64) -> Result<bool> {
    mu.space().check_index(x)?;
    Ok(unrestricted_mean(mu, p)?.argmin.contains(x))
}

/// Whether `x ∈ F_p*(μ)`: `x` is in the support and minimal over it.
pub fn in_restricted_voronoi_cell(mu: &DiscreteMeasure, x: usize, p: f64) -> Result<bool> {
    mu.space().check_index(x)?;
    Ok(medoid(mu, p)?.argmin.contains(x))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::measure::empirical_measure;
    use crate::metric::{build_space, MetricSpace, SpaceSpec};

    fn line3() -> Arc<MetricSpace> {
        let m = vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.0], vec![2.0, 1.0, 0.0]];
        Arc::new(MetricSpace::from_matrix(vec!["-1".into(), "0".into(), "1".into()], &m).unwrap())
    }

    fn w(s: &Arc<MetricSpace>, w: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::new(s.clone(), w.to_vec()).unwrap()
    }

    #[test]
    fn interval_median_is_everything() {
        let s = Arc::new(build_space(&SpaceSpec::IntervalGrid { n: 10 }).unwrap());
        let mu = DiscreteMeasure::uniform_on(s, &[0, 10]).unwrap();
        let r = unrestricted_mean(&mu, 1.0).unwrap();
        assert_eq!(r.argmin, PointSet::full(11));
        assert!((r.min_value - 0.5).abs() < 1e-15);
    }

    #[test]
    fn antipodal_mean_on_circle() {
        let s = Arc::new(build_space(&SpaceSpec::CircleGrid { n: 8 }).unwrap());
        let mu = DiscreteMeasure::uniform_on(s, &[0, 4]).unwrap();
        assert_eq!(unrestricted_mean(&mu, 2.0).unwrap().argmin, PointSet::new([2, 6]));
        assert_eq!(unrestricted_mean(&mu, 1.0).unwrap().argmin, PointSet::full(8));
    }

    #[test]
    fn star_mean_is_whole_space() {
        let s = Arc::new(build_space(&SpaceSpec::Star { m: 4, p: 2.0 }).unwrap());
        let mu = DiscreteMeasure::uniform_on(s, &[1, 2, 3, 4]).unwrap();
        let r = unrestricted_mean(&mu, 2.0).unwrap();
        assert_eq!(r.argmin, PointSet::full(5));
        assert!((r.min_value - 0.75).abs() < 1e-12);
    }

    #[test]
    fn empty_candidate_is_an_error() {
        let mu = DiscreteMeasure::uniform(line3());
        assert!(matches!(frechet_mean(&mu, &PointSet::empty(), 2.0), Err(Error::EmptyDomain)));
        assert!(frechet_mean(&mu, &PointSet::singleton(7), 2.0).is_err());
    }

    #[test]
    fn medoid_versus_mean_on_line() {
        let mu = DiscreteMeasure::uniform_on(line3(), &[0, 2]).unwrap();
        let med = medoid(&mu, 2.0).unwrap();
        assert_eq!(med.argmin, PointSet::new([0, 2]));
        assert_eq!(med.min_value, 2.0);
        let mean = unrestricted_mean(&mu, 2.0).unwrap();
        assert_eq!(mean.argmin, PointSet::singleton(1));
        assert!(med.min_value >= mean.min_value);
    }

    #[test]
    fn medoid_of_dirac_and_empirical() {
        let s = Arc::new(build_space(&SpaceSpec::Discrete { m: 2 }).unwrap());
        for p in [1.0, 2.0, 4.5] {
            let d = DiscreteMeasure::dirac(s.clone(), 1).unwrap();
            assert_eq!(medoid(&d, p).unwrap().argmin, PointSet::singleton(1));
        }
        let e = empirical_measure(s, &[0, 0, 1]).unwrap();
        let r = medoid(&e, 1.0).unwrap();
        assert_eq!(r.argmin, PointSet::singleton(0));
        assert!((r.values[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((r.values[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn peter_paul_values() {
        assert!((peter_paul_constant(1.0, 1.0).unwrap() - 2.0).abs() < 1e-12);
        let c = peter_paul_constant(3.0, 2.0).unwrap();
        assert!((c - 4.0).abs() < 1e-12);
        for i in 0..=40 {
            for j in 0..=40 {
                let (a, b) = (i as f64 * 0.25, j as f64 * 0.25);
                assert!((a + b).powi(2) <= 4.0 * a * a + c * b * b + 1e-12);
            }
        }
        assert!(peter_paul_constant(0.0, 2.0).is_err());
        assert!(peter_paul_constant(-1.0, 2.0).is_err());
        assert!(peter_paul_constant(1.0, 0.9).is_err());
    }

    #[test]
    fn voronoi_cells_on_line() {
        let s = line3();
        let mu1 = w(&s, &[0.5, 0.5, 0.0]);
        let mu2 = w(&s, &[0.5, 0.0, 0.5]);
        let mid = mu1.mix(0.5, &mu2).unwrap();
        for p in [1.5, 2.0, 3.0] {
            // unrestricted cell: μ₂'s only mean is the middle point
            assert!(in_voronoi_cell(&mu1, 0, p).unwrap());
            assert!(!in_voronoi_cell(&mu2, 0, p).unwrap());
            assert!(!in_voronoi_cell(&mid, 0, p).unwrap());
            // restricted cell is not convex
            assert!(in_restricted_voronoi_cell(&mu1, 0, p).unwrap());
            assert!(in_restricted_voronoi_cell(&mu2, 0, p).unwrap());
            assert!(in_restricted_voronoi_cell(&mu2, 2, p).unwrap());
            assert!(!in_restricted_voronoi_cell(&mid, 0, p).unwrap());
        }
    }

    #[test]
    fn restricted_cell_not_closed() {
        let s = line3();
        for n in 1..200 {
            let e = 1.0 / n as f64;
            let mu = w(&s, &[0.5 * (1.0 - e), e, 0.5 * (1.0 - e)]);
            assert!(in_restricted_voronoi_cell(&mu, 1, 2.0).unwrap(), "n={n}");
        }
        let limit = w(&s, &[0.5, 0.0, 0.5]);
        assert!(!in_restricted_voronoi_cell(&limit, 1, 2.0).unwrap());
    }

    #[test]
    fn dirac_and_uniform_cells() {
        let s = Arc::new(build_space(&SpaceSpec::Discrete { m: 3 }).unwrap());
        let u = DiscreteMeasure::uniform(s.clone());
        for x in 0..3 {
            let d = DiscreteMeasure::dirac(s.clone(), x).unwrap();
            assert!(in_voronoi_cell(&d, x, 2.0).unwrap());
            assert!(in_restricted_voronoi_cell(&d, x, 2.0).unwrap());
            assert!(in_voronoi_cell(&u, x, 1.0).unwrap());
        }
    }
}
