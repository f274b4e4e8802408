//! Finite metric spaces: validation, generators, and the JSON space format.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for every metric-axiom check.
pub const METRIC_TOL: f64 = 1e-12;

/// Which metric axiom a [`Violation`] breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    NonFinite,
    Negative,
    DiagonalNonzero,
    ZeroOffDiagonal,
    Symmetry,
    Triangle,
}

/// A single failed axiom. For [`Rule::Triangle`] the indices are `(i, j, k)`
/// with `d(i,j) > d(i,k) + d(k,j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: Rule,
    pub indices: Vec<usize>,
    pub excess: f64,
}

/// Checks that `matrix` is a metric on `0..n`.
///
/// Each unordered pair is reported at most once per rule; a triangle violation
/// `(i, j, k)` is reported with `i < j`.
pub fn validate_metric(matrix: &[Vec<f64>]) -> Result<Vec<Violation>> {
    let n = matrix.len();
    for (row, r) in matrix.iter().enumerate() {
        if r.len() != n {
            return Err(Error::NonSquare { row, len: r.len(), expected: n });
        }
    }
    let mut out = Vec::new();
    let mut push = |rule, indices: Vec<usize>, excess: f64| {
        out.push(Violation { rule, indices, excess })
    };
    for i in 0..n {
        for j in 0..n {
            let d = matrix[i][j];
            if !d.is_finite() {
                push(Rule::NonFinite, vec![i, j], f64::INFINITY);
            } else if d < -METRIC_TOL {
                push(Rule::Negative, vec![i, j], -d);
            }
        }
        if matrix[i][i].abs() > METRIC_TOL {
            push(Rule::DiagonalNonzero, vec![i, i], matrix[i][i].abs());
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (matrix[i][j], matrix[j][i]);
            if (a - b).abs() > METRIC_TOL {
                push(Rule::Symmetry, vec![i, j], (a - b).abs());
            }
            if a.abs() <= METRIC_TOL || b.abs() <= METRIC_TOL {
                push(Rule::ZeroOffDiagonal, vec![i, j], 0.0);
            }
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            for k in 0..n {
                if k == i || k == j {
                    continue;
                }
                let excess = matrix[i][j] - (matrix[i][k] + matrix[k][j]);
                if excess > METRIC_TOL {
                    push(Rule::Triangle, vec![i, j, k], excess);
                }
            }
        }
    }
    Ok(out)
}

/// An immutable finite metric space with points addressed by index.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpace {
    labels: Vec<String>,
    dist: Vec<f64>,
    n: usize,
    diameter: f64,
    spacing: Option<f64>,
}

impl MetricSpace {
    /// Builds a space from an explicit matrix, rejecting anything that is
    /// not a metric.
    pub fn from_matrix(labels: Vec<String>, matrix: &[Vec<f64>]) -> Result<Self> {
        let n = matrix.len();
        if n == 0 {
            return Err(Error::InvalidMetric("space has no points".into()));
        }
        if labels.len() != n {
            return Err(Error::InvalidMetric(format!(
                "{} labels for {} points",
                labels.len(),
                n
            )));
        }
        let violations = validate_metric(matrix)?;
        if let Some(v) = violations.first() {
            return Err(Error::InvalidMetric(format!(
                "{} violation(s), first: {:?} at {:?}",
                violations.len(),
                v.rule,
                v.indices
            )));
        }
        let dist: Vec<f64> = matrix.iter().flatten().copied().collect();
        let diameter = dist.iter().copied().fold(0.0, f64::max);
        Ok(Self { labels, dist, n, diameter, spacing: None })
    }

    fn with_spacing(mut self, h: f64) -> Self {
        self.spacing = Some(h);
        self
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    /// Row `i` of the distance matrix.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.dist[i * self.n..(i + 1) * self.n]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Grid spacing for generated grid spaces (`circle_grid`, `interval_grid`).
    pub fn grid_spacing(&self) -> Option<f64> {
        self.spacing
    }

    pub fn matrix(&self) -> Vec<Vec<f64>> {
        self.dist.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    /// Row-major table of `d(i,j)^p`.
    ///
    /// `p = 1` and `p = 2` are computed without `powf` so that equal distances
    /// give bitwise equal powers on every platform.
    pub fn powered(&self, p: f64) -> Vec<f64> {
        self.dist.iter().map(|&d| pow_p(d, p)).collect()
    }

    pub fn check_index(&self, index: usize) -> Result<()> {
        if index < self.n {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { index, size: self.n })
        }
    }
}

#[inline]
pub(crate) fn pow_p(d: f64, p: f64) -> f64 {
    if p == 1.0 {
        d
    } else if p == 2.0 {
        d * d
    } else {
        d.powf(p)
    }
}

impl Serialize for MetricSpace {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ExplicitSpace { labels: self.labels.clone(), dist: self.matrix() }.serialize(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitSpace {
    #[serde(default)]
    pub labels: Vec<String>,
    pub dist: Vec<Vec<f64>>,
}

/// How to obtain a [`MetricSpace`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", from = "RawSpaceSpec")]
pub enum SpaceSpec {
    Explicit {
        #[serde(default)]
        labels: Vec<String>,
        dist: Vec<Vec<f64>>,
    },
    /// `N` equally spaced points on the unit-circumference circle with the
    /// geodesic metric.
    CircleGrid {
        #[serde(rename = "N")]
        n: usize,
    },
    /// Points `k/N`, `k = 0..=N`, on the unit interval.
    IntervalGrid {
        #[serde(rename = "N")]
        n: usize,
    },
    /// `m` points at mutual distance one.
    Discrete { m: usize },
    /// Hub `0` at distance `(1 - 1/m)^(1/p)` from each of `m` mutually
    /// unit-distant leaves.
    Star { m: usize, p: f64 },
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum TaggedSpaceSpec {
    Explicit {
        #[serde(default)]
        labels: Vec<String>,
        dist: Vec<Vec<f64>>,
    },
    CircleGrid {
        #[serde(rename = "N")]
        n: usize,
    },
    IntervalGrid {
        #[serde(rename = "N")]
        n: usize,
    },
    Discrete {
        m: usize,
    },
    Star {
        m: usize,
        p: f64,
    },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawSpaceSpec {
    Tagged(TaggedSpaceSpec),
    Explicit(ExplicitSpace),
}

impl From<RawSpaceSpec> for SpaceSpec {
    fn from(raw: RawSpaceSpec) -> Self {
        match raw {
            RawSpaceSpec::Explicit(ExplicitSpace { labels, dist }) => {
                SpaceSpec::Explicit { labels, dist }
            }
            RawSpaceSpec::Tagged(t) => match t {
                TaggedSpaceSpec::Explicit { labels, dist } => SpaceSpec::Explicit { labels, dist },
                TaggedSpaceSpec::CircleGrid { n } => SpaceSpec::CircleGrid { n },
                TaggedSpaceSpec::IntervalGrid { n } => SpaceSpec::IntervalGrid { n },
                TaggedSpaceSpec::Discrete { m } => SpaceSpec::Discrete { m },
                TaggedSpaceSpec::Star { m, p } => SpaceSpec::Star { m, p },
            },
        }
    }
}

/// Materializes a [`SpaceSpec`]. Every generated space is re-validated.
pub fn build_space(spec: &SpaceSpec) -> Result<MetricSpace> {
    let index_labels = |n: usize| (0..n).map(|i| i.to_string()).collect::<Vec<_>>();
    match *spec {
        SpaceSpec::Explicit { ref labels, ref dist } => {
            let labels = if labels.is_empty() { index_labels(dist.len()) } else { labels.clone() };
            MetricSpace::from_matrix(labels, dist)
        }
        SpaceSpec::CircleGrid { n } => {
            if n == 0 || n % 4 != 0 {
                return Err(Error::InvalidSpec(format!(
                    "circle_grid N must be a positive multiple of 4, got {n}"
                )));
            }
            let nf = n as f64;
            let m: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            let k = i.abs_diff(j);
                            k.min(n - k) as f64 / nf
                        })
                        .collect()
                })
                .collect();
            let labels = (0..n).map(|i| format!("{i}/{n}")).collect();
            Ok(MetricSpace::from_matrix(labels, &m)?.with_spacing(1.0 / nf))
        }
        SpaceSpec::IntervalGrid { n } => {
            if n == 0 {
                return Err(Error::InvalidSpec("interval_grid N must be positive".into()));
            }
            let nf = n as f64;
            let m: Vec<Vec<f64>> = (0..=n)
                .map(|i| (0..=n).map(|j| i.abs_diff(j) as f64 / nf).collect())
                .collect();
            let labels = (0..=n).map(|i| format!("{i}/{n}")).collect();
            Ok(MetricSpace::from_matrix(labels, &m)?.with_spacing(1.0 / nf))
        }
        SpaceSpec::Discrete { m } => {
            if m < 2 {
                return Err(Error::InvalidSpec(format!("discrete needs m >= 2, got {m}")));
            }
            let mat: Vec<Vec<f64>> = (0..m)
                .map(|i| (0..m).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
                .collect();
            MetricSpace::from_matrix(index_labels(m), &mat)
        }
        SpaceSpec::Star { m, p } => {
            if m < 2 || !(p >= 1.0) || !p.is_finite() {
                return Err(Error::InvalidSpec(format!(
                    "star needs m >= 2 and finite p >= 1, got m={m}, p={p}"
                )));
            }
            let hub = (1.0 - 1.0 / m as f64).powf(1.0 / p);
            let mat: Vec<Vec<f64>> = (0..=m)
                .map(|i| {
                    (0..=m)
                        .map(|j| match (i, j) {
                            _ if i == j => 0.0,
                            (0, _) | (_, 0) => hub,
                            _ => 1.0,
                        })
                        .collect()
                })
                .collect();
            MetricSpace::from_matrix(index_labels(m + 1), &mat)
        }
    }
}

/// Random metric on `size` points: symmetric edge weights drawn from
/// `[0.05, 1)` completed by all-pairs shortest paths.
pub fn random_metric(size: usize, seed: u64) -> MetricSpace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = vec![vec![0.0; size]; size];
    for i in 0..size {
        for j in (i + 1)..size {
            let w = rng.random_range(0.05..1.0);
            m[i][j] = w;
            m[j][i] = w;
        }
    }
    for k in 0..size {
        for i in 0..size {
            for j in 0..size {
                let via = m[i][k] + m[k][j];
                if via < m[i][j] {
                    m[i][j] = via;
                }
            }
        }
    }
    let labels = (0..size).map(|i| i.to_string()).collect();
    MetricSpace::from_matrix(labels, &m).expect("shortest-path completion is a metric")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn discrete3() -> Vec<Vec<f64>> {
        vec![vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]]
    }

    #[test]
    fn discrete_metric_is_valid() {
        assert!(validate_metric(&discrete3()).unwrap().is_empty());
    }

    #[test]
    fn triangle_violation_reported_once() {
        let m = vec![vec![0.0, 1.0, 3.0], vec![1.0, 0.0, 1.0], vec![3.0, 1.0, 0.0]];
        let v = validate_metric(&m).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::Triangle);
        assert_eq!(v[0].indices, vec![0, 2, 1]);
    }

    #[test]
    fn asymmetry_reported_once() {
        let m = vec![vec![0.0, 1.0], vec![2.0, 0.0]];
        let v = validate_metric(&m).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::Symmetry);
    }

    #[test]
    fn non_square_rejected() {
        let m = vec![vec![0.0, 1.0], vec![1.0]];
        assert!(matches!(validate_metric(&m), Err(Error::NonSquare { row: 1, .. })));
    }

    #[test]
    fn zero_off_diagonal_and_negative() {
        let m = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        let v = validate_metric(&m).unwrap();
        assert_eq!(v.iter().filter(|v| v.rule == Rule::ZeroOffDiagonal).count(), 1);
        let m = vec![vec![0.0, -1.0], vec![-1.0, 0.0]];
        assert!(validate_metric(&m).unwrap().iter().any(|v| v.rule == Rule::Negative));
    }

    #[test]
    fn circle_grid_wraps() {
        let s = build_space(&SpaceSpec::CircleGrid { n: 8 }).unwrap();
        assert_eq!(s.d(1, 7), 0.25);
        for i in 0..8 {
            assert_eq!(s.d(i, (i + 4) % 8), 0.5);
        }
        assert_eq!(s.diameter(), 0.5);
        assert_eq!(s.grid_spacing(), Some(0.125));
    }

    #[test]
    fn circle_grid_requires_multiple_of_four() {
        assert!(build_space(&SpaceSpec::CircleGrid { n: 6 }).is_err());
        assert!(build_space(&SpaceSpec::CircleGrid { n: 0 }).is_err());
    }

    #[test]
    fn star_hub_distance() {
        let s = build_space(&SpaceSpec::Star { m: 4, p: 2.0 }).unwrap();
        assert!((s.d(0, 1) - 0.8660254037844386).abs() < 1e-15);
        assert_eq!(s.d(1, 2), 1.0);
        assert_eq!(s.len(), 5);
        assert!(build_space(&SpaceSpec::Star { m: 1, p: 2.0 }).is_err());
        assert!(build_space(&SpaceSpec::Star { m: 3, p: 0.5 }).is_err());
    }

    #[test]
    fn discrete_entries() {
        let s = build_space(&SpaceSpec::Discrete { m: 3 }).unwrap();
        assert_eq!(s.matrix(), discrete3());
        assert!(build_space(&SpaceSpec::Discrete { m: 1 }).is_err());
    }

    #[test]
    fn interval_grid_points() {
        let s = build_space(&SpaceSpec::IntervalGrid { n: 10 }).unwrap();
        assert_eq!(s.len(), 11);
        assert_eq!(s.d(0, 10), 1.0);
        assert_eq!(s.labels()[5], "5/10");
    }

    #[test]
    fn generated_spaces_validate() {
        let specs = [
            SpaceSpec::CircleGrid { n: 4 },
            SpaceSpec::CircleGrid { n: 36 },
            SpaceSpec::IntervalGrid { n: 17 },
            SpaceSpec::Discrete { m: 7 },
            SpaceSpec::Star { m: 2, p: 1.0 },
            SpaceSpec::Star { m: 6, p: 3.5 },
        ];
        for spec in &specs {
            let s = build_space(spec).unwrap();
            assert!(validate_metric(&s.matrix()).unwrap().is_empty(), "{spec:?}");
            let max = s.matrix().into_iter().flatten().fold(0.0, f64::max);
            assert_eq!(s.diameter(), max);
        }
    }

    #[test]
    fn json_forms() {
        let s: SpaceSpec = serde_json::from_str(r#"{"kind":"circle_grid","N":8}"#).unwrap();
        assert_eq!(s, SpaceSpec::CircleGrid { n: 8 });
        let s: SpaceSpec = serde_json::from_str(r#"{"kind":"star","m":4,"p":2}"#).unwrap();
        assert_eq!(s, SpaceSpec::Star { m: 4, p: 2.0 });
        let s: SpaceSpec =
            serde_json::from_str(r#"{"labels":["a","b"],"dist":[[0,1],[1,0]]}"#).unwrap();
        assert!(matches!(s, SpaceSpec::Explicit { .. }));
        let back = serde_json::to_string(&SpaceSpec::CircleGrid { n: 8 }).unwrap();
        assert_eq!(back, r#"{"kind":"circle_grid","N":8}"#);
        assert!(serde_json::from_str::<SpaceSpec>(r#"{"kind":"circle_grid"}"#).is_err());
    }

    #[test]
    fn random_metric_is_metric() {
        for seed in 0..20 {
            let s = random_metric(9, seed);
            assert!(validate_metric(&s.matrix()).unwrap().is_empty());
        }
    }
}
