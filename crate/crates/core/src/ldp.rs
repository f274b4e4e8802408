//! Large-deviations quantities on finite spaces.
//!
//! The rate function `I(C) = inf { H(ν|μ) : C ⊆ F_p(ν) }` is evaluated by
//! exhaustive search over the lattice of measures with weights in
//! `{0, 1/h, ..., 1}`. The result is an upper bound on the true infimum.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frechet::{argmin_over, frechet_mean};
use crate::limits::{least_squares_slope, rho};
use crate::measure::{check_p, relative_entropy, DiscreteMeasure};
use crate::pointset::PointSet;
use crate::sampling::{mean_set_from_counts, par_replicates, sample_iid_with};

/// Refuse grids larger than this many lattice points.
pub const MAX_GRID_POINTS: u128 = 20_000_000;

/// Lattice `{k / h : k ∈ ℕ^m, Σk = h}` on the probability simplex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimplexGrid {
    pub dimension: usize,
    pub resolution: usize,
}

impl SimplexGrid {
    pub fn new(dimension: usize, resolution: usize) -> Result<Self> {
        if dimension == 0 || resolution == 0 {
            return Err(Error::InvalidParameter("grid needs m >= 1 and h >= 1".into()));
        }
        let g = Self { dimension, resolution };
        if g.size_u128() > MAX_GRID_POINTS {
            return Err(Error::InvalidParameter(format!(
                "simplex grid with m={dimension}, h={resolution} has {} points",
                g.size_u128()
            )));
        }
        Ok(g)
    }

    fn size_u128(&self) -> u128 {
        // C(h + m - 1, m - 1)
        let (n, k) = ((self.resolution + self.dimension - 1) as u128, (self.dimension - 1) as u128);
        let k = k.min(n - k);
        let mut c: u128 = 1;
        for i in 0..k {
            c = c * (n - i) / (i + 1);
            if c > MAX_GRID_POINTS * 1000 {
                return c;
            }
        }
        c
    }

    pub fn size(&self) -> usize {
        self.size_u128() as usize
    }

    /// All count vectors in lexicographically decreasing order of the first
    /// coordinate.
    pub fn points(&self) -> Vec<Vec<u64>> {
        let mut out = Vec::with_capacity(self.size());
        let mut cur = vec![0u64; self.dimension];
        fill(&mut cur, 0, self.resolution as u64, &mut out);
        out
    }
}

fn fill(cur: &mut [u64], i: usize, left: u64, out: &mut Vec<Vec<u64>>) {
    if i + 1 == cur.len() {
        cur[i] = left;
        out.push(cur.to_vec());
        return;
    }
    for k in (0..=left).rev() {
        cur[i] = k;
        fill(cur, i + 1, left - k, out);
    }
}

pub(crate) mod extended_real {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            Repr::Str("+inf".into()).serialize(s)
        } else {
            Repr::Num(*v).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s == "+inf" => Ok(f64::INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("unexpected value `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateResult {
    /// Grid upper bound on the rate; `+inf` when no grid measure is feasible.
    #[serde(with = "extended_real")]
    pub value: f64,
    pub witness: Option<Vec<f64>>,
    pub witness_counts: Option<Vec<u64>>,
    pub grid_size: usize,
    pub resolution: usize,
    pub label: String,
}

/// Mean set and relative entropy of every grid measure, indexed like
/// [`SimplexGrid::points`].
fn scan_grid(mu: &DiscreteMeasure, p: f64, h: usize) -> Result<(Vec<Vec<u64>>, Vec<(PointSet, f64)>)> {
    check_p(p)?;
    let space = mu.space();
    let grid = SimplexGrid::new(space.len(), h)?;
    let points = grid.points();
    let table = space.powered(p);
    let scanned = points
        .par_iter()
        .map(|counts| {
            let nu = DiscreteMeasure::from_counts(space.clone(), counts.clone())?;
            let h = relative_entropy(&nu, mu)?;
            let values = nu.values_with_table(&table);
            let (set, _) = argmin_over(&values, &PointSet::full(space.len()));
            Ok((set, h))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((points, scanned))
}

/// Grid upper bound on `inf { H(ν|μ) : C ⊆ F_p(ν) }`.
pub fn rate_function(c: &PointSet, mu: &DiscreteMeasure, p: f64, h: usize) -> Result<RateResult> {
    if c.is_empty() {
        return Err(Error::EmptySet);
    }
    c.check_in(mu.space())?;
    let (points, scanned) = scan_grid(mu, p, h)?;
    let best = scanned
        .par_iter()
        .enumerate()
        .filter(|(_, (set, _))| c.is_subset(set))
        .map(|(i, &(_, v))| (v, i))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut out = RateResult {
        value: f64::INFINITY,
        witness: None,
        witness_counts: None,
        grid_size: points.len(),
        resolution: h,
        label: "grid upper bound".into(),
    };
    if let Some((v, i)) = best.filter(|(v, _)| v.is_finite()) {
        out.value = v;
        out.witness = Some(points[i].iter().map(|&k| k as f64 / h as f64).collect());
        out.witness_counts = Some(points[i].clone());
    }
    Ok(out)
}

/// Every nonempty `C` with grid rate at most `alpha`, sorted.
pub fn sublevel_sets(mu: &DiscreteMeasure, p: f64, h: usize, alpha: f64) -> Result<Vec<PointSet>> {
    let (_, scanned) = scan_grid(mu, p, h)?;
    let mut out = std::collections::BTreeSet::new();
    for (set, v) in scanned {
        if v <= alpha {
            let pts = set.as_slice();
            for mask in 1u64..(1u64 << pts.len()) {
                out.insert(PointSet::new((0..pts.len()).filter(|b| mask >> b & 1 == 1).map(|b| pts[b])));
            }
        }
    }
    Ok(out.into_iter().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub n: usize,
    pub hits: usize,
    pub estimate: f64,
    pub stderr: f64,
    pub log_estimate: f64,
    /// No replicate hit the event; `log_estimate` is `log(1/n_reps)`.
    pub censored: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailDecayReport {
    pub epsilon: f64,
    pub reps: usize,
    pub seed: u64,
    pub target: PointSet,
    pub rows: Vec<DecayRow>,
    /// Least-squares slope of `log_estimate` against `n` over uncensored rows.
    pub slope: Option<f64>,
    /// `slope < 0`, reported when at least three rows are uncensored.
    pub slope_negative: Option<bool>,
}

impl TailDecayReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,estimate,stderr,censored\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{}\n", r.n, r.estimate, r.stderr, r.censored));
        }
        s
    }
}

/// Monte Carlo estimate of `P{ρ(F_p(μ̄_n), F_p(μ)) ≥ ε}` along `n_grid`.
///
/// Replicate `r` draws from `ChaCha8Rng::seed_from_u64(seed + r)` with stream
/// index equal to the position of `n` in `n_grid`.
pub fn tail_decay_diagnostic(
    mu: &DiscreteMeasure,
    p: f64,
    epsilon: f64,
    n_grid: &[usize],
    n_reps: usize,
    seed: u64,
    threads: Option<usize>,
) -> Result<TailDecayReport> {
    check_p(p)?;
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    if n_reps == 0 || n_grid.is_empty() || n_grid.contains(&0) {
        return Err(Error::InvalidParameter("need n_reps >= 1 and a nonempty grid of positive n".into()));
    }
    let space = mu.space();
    let target = frechet_mean(mu, &PointSet::full(space.len()), p)?.argmin;
    let table = space.powered(p);
    let hits_per_rep: Vec<Vec<bool>> = par_replicates(n_reps, seed, threads, |_, s| {
        n_grid
            .iter()
            .enumerate()
            .map(|(j, &n)| {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                rng.set_stream(j as u64);
                let mut counts = vec![0u64; space.len()];
                for x in sample_iid_with(mu, n, &mut rng) {
                    counts[x] += 1;
                }
                let set = mean_set_from_counts(space, &table, &counts, false)?;
                Ok(rho(space, &set, &target)? >= epsilon)
            })
            .collect()
    })?;
    let reps_f = n_reps as f64;
    let rows: Vec<DecayRow> = n_grid
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let hits = hits_per_rep.iter().filter(|h| h[j]).count();
            let est = hits as f64 / reps_f;
            DecayRow {
                n,
                hits,
                estimate: est,
                stderr: (est * (1.0 - est) / reps_f).sqrt(),
                log_estimate: if hits > 0 { est.ln() } else { (1.0 / reps_f).ln() },
                censored: hits == 0,
            }
        })
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        rows.iter().filter(|r| !r.censored).map(|r| (r.n as f64, r.log_estimate)).unzip();
    let slope = least_squares_slope(&xs, &ys);
    let slope_negative = if xs.len() >= 3 { slope.map(|s| s < 0.0) } else { None };
    Ok(TailDecayReport { epsilon, reps: n_reps, seed, target, rows, slope, slope_negative })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::metric::{build_space, SpaceSpec};

    #[test]
    fn grid_sizes() {
        for (m, h) in [(1, 5), (2, 10), (3, 40), (4, 12)] {
            let g = SimplexGrid::new(m, h).unwrap();
            let pts = g.points();
            assert_eq!(pts.len(), g.size());
            assert!(pts.iter().all(|k| k.iter().sum::<u64>() == h as u64));
        }
        assert_eq!(SimplexGrid::new(3, 40).unwrap().size(), 861);
        assert!(SimplexGrid::new(12, 1000).is_err());
    }

    #[test]
    fn rate_zero_at_own_mean() {
        let s = Arc::new(build_space(&SpaceSpec::Discrete { m: 3 }).unwrap());
        let mu = DiscreteMeasure::new(s, vec![0.5, 0.25, 0.25]).unwrap();
        let r = rate_function(&PointSet::singleton(0), &mu, 2.0, 8).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.witness.unwrap(), vec![0.5, 0.25, 0.25]);
    }

    #[test]
    fn infeasible_is_infinite() {
        // Reaching point 2 needs mass there, which μ forbids.
        let s = Arc::new(build_space(&SpaceSpec::Discrete { m: 3 }).unwrap());
        let mu = DiscreteMeasure::new(s, vec![0.5, 0.5, 0.0]).unwrap();
        let r = rate_function(&PointSet::singleton(2), &mu, 1.0, 10).unwrap();
        assert_eq!(r.value, f64::INFINITY);
        assert!(r.witness.is_none());
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"+inf\""));
        let back: RateResult = serde_json::from_str(&json).unwrap();
        assert_eq!(back.value, f64::INFINITY);
        assert!(rate_function(&PointSet::empty(), &mu, 1.0, 10).is_err());
    }

    #[test]
    fn dirac_never_deviates() {
        let s = Arc::new(build_space(&SpaceSpec::Discrete { m: 3 }).unwrap());
        let mu = DiscreteMeasure::dirac(s, 1).unwrap();
        let rep = tail_decay_diagnostic(&mu, 2.0, 0.5, &[1, 5, 10], 200, 3, Some(2)).unwrap();
        assert!(rep.rows.iter().all(|r| r.censored && r.hits == 0));
        assert!((rep.rows[0].log_estimate - (1.0f64 / 200.0).ln()).abs() < 1e-15);
        assert_eq!(rep.slope, None);
        assert_eq!(rep.slope_negative, None);
    }

    #[test]
    fn decay_is_deterministic_across_threads() {
        let s = Arc::new(build_space(&SpaceSpec::Discrete { m: 2 }).unwrap());
        let mu = DiscreteMeasure::new(s, vec![0.7, 0.3]).unwrap();
        let a = tail_decay_diagnostic(&mu, 1.0, 0.5, &[3, 7, 11], 300, 9, Some(1)).unwrap();
        let b = tail_decay_diagnostic(&mu, 1.0, 0.5, &[3, 7, 11], 300, 9, Some(4)).unwrap();
        assert_eq!(a, b);
        assert!(a.to_csv().starts_with("n,estimate,stderr,censored\n3,"));
    }
}
