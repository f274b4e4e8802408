//! Discrete probability measures and the functional `f_p(μ, x) = Σ_y μ(y) d(x,y)^p`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{pow_p, MetricSpace};
use crate::pointset::PointSet;

/// Inputs whose weights sum to within this of one are renormalized.
pub const RENORMALIZE_TOL: f64 = 1e-9;

/// A probability vector over the points of a [`MetricSpace`].
///
/// Empirical measures keep their integer count vector, and `f_p` is then
/// evaluated as `(Σ_y N_y d(x,y)^p) / n` so that equal count vectors give
/// bitwise equal values.
#[derive(Debug, Clone)]
pub struct DiscreteMeasure {
    space: Arc<MetricSpace>,
    weights: Vec<f64>,
    counts: Option<Vec<u64>>,
}

impl DiscreteMeasure {
    pub fn new(space: Arc<MetricSpace>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != space.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} weights for a space with {} points",
                weights.len(),
                space.len()
            )));
        }
        if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidMeasure(format!("weight {i} is {w}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > RENORMALIZE_TOL {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}, not 1")));
        }
        let weights = if total == 1.0 { weights } else { weights.iter().map(|w| w / total).collect() };
        Ok(Self { space, weights, counts: None })
    }

    /// Empirical measure with the given occupation counts.
    pub fn from_counts(space: Arc<MetricSpace>, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != space.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} counts for a space with {} points",
                counts.len(),
                space.len()
            )));
        }
        let n: u64 = counts.iter().sum();
        if n == 0 {
            return Err(Error::EmptySamples);
        }
        let nf = n as f64;
        let weights = counts.iter().map(|&c| c as f64 / nf).collect();
        Ok(Self { space, weights, counts: Some(counts) })
    }

    pub fn dirac(space: Arc<MetricSpace>, x: usize) -> Result<Self> {
        space.check_index(x)?;
        let mut w = vec![0.0; space.len()];
        w[x] = 1.0;
        Ok(Self { space, weights: w, counts: None })
    }

    pub fn uniform(space: Arc<MetricSpace>) -> Self {
        let n = space.len();
        Self { weights: vec![1.0 / n as f64; n], space, counts: None }
    }

    /// Uniform over `points` (duplicates ignored).
    pub fn uniform_on(space: Arc<MetricSpace>, points: &[usize]) -> Result<Self> {
        let set = PointSet::new(points.iter().copied());
        if set.is_empty() {
            return Err(Error::InvalidMeasure("uniform_on needs at least one point".into()));
        }
        set.check_in(&space)?;
        let mut w = vec![0.0; space.len()];
        let mass = 1.0 / set.len() as f64;
        for x in set.iter() {
            w[x] = mass;
        }
        Ok(Self { space, weights: w, counts: None })
    }

    pub fn space(&self) -> &Arc<MetricSpace> {
        &self.space
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn counts(&self) -> Option<&[u64]> {
        self.counts.as_deref()
    }

    pub fn support(&self) -> PointSet {
        support(self)
    }

    /// `α·self + (1-α)·other`. Both measures must live on the same space.
    pub fn mix(&self, alpha: f64, other: &DiscreteMeasure) -> Result<Self> {
        same_space(self, other)?;
        let w = self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
            .collect();
        DiscreteMeasure::new(self.space.clone(), w)
    }

    /// `f_p` at `x` given the matching row of [`MetricSpace::powered`].
    pub(crate) fn f_with_row(&self, pow_row: &[f64]) -> f64 {
        match &self.counts {
            Some(counts) => {
                let n: u64 = counts.iter().sum();
                let mut acc = 0.0;
                for (&c, &dp) in counts.iter().zip(pow_row) {
                    if c > 0 {
                        acc += c as f64 * dp;
                    }
                }
                acc / n as f64
            }
            None => {
                let mut acc = 0.0;
                for (&w, &dp) in self.weights.iter().zip(pow_row) {
                    if w > 0.0 {
                        acc += w * dp;
                    }
                }
                acc
            }
        }
    }

    /// `f_p(μ, x)` for every point `x`, from a precomputed power table.
    pub(crate) fn values_with_table(&self, table: &[f64]) -> Vec<f64> {
        let n = self.space.len();
        table.chunks(n).map(|row| self.f_with_row(row)).collect()
    }

    /// `f_p(μ, x)` for every point `x` of the space.
    pub fn values(&self, p: f64) -> Vec<f64> {
        self.values_with_table(&self.space.powered(p))
    }
}

pub(crate) fn same_space(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<()> {
    if Arc::ptr_eq(&a.space, &b.space) || a.space == b.space {
        Ok(())
    } else {
        Err(Error::InvalidMeasure("measures live on different spaces".into()))
    }
}

/// `Σ_y μ(y) d(x,y)^p`, i.e. the p-th power of the p-Wasserstein distance
/// from `μ` to the point mass at `x`.
pub fn f_p(mu: &DiscreteMeasure, x: usize, p: f64) -> Result<f64> {
    mu.space.check_index(x)?;
    check_p(p)?;
    let row: Vec<f64> = mu.space.row(x).iter().map(|&d| pow_p(d, p)).collect();
    Ok(mu.f_with_row(&row))
}

/// Alias for [`f_p`] under its transport name.
pub fn wasserstein_to_dirac_pow(mu: &DiscreteMeasure, x: usize, p: f64) -> Result<f64> {
    f_p(mu, x, p)
}

pub(crate) fn check_p(p: f64) -> Result<()> {
    if p >= 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("p must be finite and >= 1, got {p}")))
    }
}

pub fn empirical_measure(space: Arc<MetricSpace>, samples: &[usize]) -> Result<DiscreteMeasure> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut counts = vec![0u64; space.len()];
    for &s in samples {
        space.check_index(s)?;
        counts[s] += 1;
    }
    DiscreteMeasure::from_counts(space, counts)
}

pub fn support(mu: &DiscreteMeasure) -> PointSet {
    mu.weights.iter().enumerate().filter(|(_, &w)| w > 0.0).map(|(i, _)| i).collect()
}

/// `H(ν|μ) = Σ ν_i log(ν_i/μ_i)`, with `0 log 0 = 0` and `+∞` when `ν` is not
/// absolutely continuous with respect to `μ`.
pub fn relative_entropy(nu: &DiscreteMeasure, mu: &DiscreteMeasure) -> Result<f64> {
    same_space(nu, mu)?;
    let mut h = 0.0;
    for (&a, &b) in nu.weights.iter().zip(&mu.weights) {
        if a > 0.0 {
            if b <= 0.0 {
                return Ok(f64::INFINITY);
            }
            h += a * (a / b).ln();
        }
    }
    // rounding can leave a tiny negative residue when ν ≈ μ
    Ok(h.max(0.0))
}

/// One row of [`track_tau_wp`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauWpRow {
    pub index: usize,
    pub gaps: Vec<f64>,
    pub max_gap: f64,
    pub max_weight_gap: f64,
}

/// Functional gaps `|f_p(μ_n, x) - f_p(μ, x)|` at each probe point plus the
/// largest weight discrepancy. Probes default to every point.
pub fn track_tau_wp(
    seq: &[DiscreteMeasure],
    mu: &DiscreteMeasure,
    p: f64,
    probes: Option<&PointSet>,
) -> Result<Vec<TauWpRow>> {
    check_p(p)?;
    let probes = match probes {
        Some(pr) => {
            pr.check_in(&mu.space)?;
            pr.clone()
        }
        None => PointSet::full(mu.space.len()),
    };
    let table = mu.space.powered(p);
    let n = mu.space.len();
    let target: Vec<f64> = probes.iter().map(|x| mu.f_with_row(&table[x * n..(x + 1) * n])).collect();
    seq.iter()
        .enumerate()
        .map(|(index, m)| {
            same_space(m, mu)?;
            let gaps: Vec<f64> = probes
                .iter()
                .zip(&target)
                .map(|(x, t)| (m.f_with_row(&table[x * n..(x + 1) * n]) - t).abs())
                .collect();
            let max_gap = gaps.iter().copied().fold(0.0, f64::max);
            let max_weight_gap =
                m.weights.iter().zip(&mu.weights).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            Ok(TauWpRow { index, gaps, max_gap, max_weight_gap })
        })
        .collect()
}

/// JSON description of a measure, resolved against a space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeasureSpec {
    Weights { weights: Vec<f64> },
    UniformOn { uniform_on: Vec<usize> },
    Samples { samples: Vec<usize> },
    Uniform { uniform: bool },
}

impl MeasureSpec {
    pub fn resolve(&self, space: Arc<MetricSpace>) -> Result<DiscreteMeasure> {
        match self {
            MeasureSpec::Weights { weights } => DiscreteMeasure::new(space, weights.clone()),
            MeasureSpec::UniformOn { uniform_on } => DiscreteMeasure::uniform_on(space, uniform_on),
            MeasureSpec::Samples { samples } => empirical_measure(space, samples),
            MeasureSpec::Uniform { uniform: true } => Ok(DiscreteMeasure::uniform(space)),
            MeasureSpec::Uniform { uniform: false } => {
                Err(Error::InvalidMeasure("`uniform: false` describes no measure".into()))
            }
        }
    }
}
