//! Seeded sampling, empirical mean-set trajectories and replicated runs.
//!
//! Every random stream is a `ChaCha8Rng` seeded with `seed_from_u64`, and a
//! uniform draw is `(next_u64 >> 11) · 2^-53`. Replicate `i` of a run with base
//! seed `s` uses seed `s + i` (wrapping). Nothing reads the clock.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frechet::argmin_over;
use crate::limits::{detect_convergence, kuratowski_limits, ConvergenceReport, DetectorOptions, LimitEstimate, Mode};
use crate::measure::{check_p, DiscreteMeasure};
use crate::metric::MetricSpace;
use crate::pointset::PointSet;

/// Identifier of the random stream written into reports.
pub const RNG_ALGORITHM: &str = "chacha8/seed_from_u64; u01 = (next_u64 >> 11) * 2^-53";

const KERNEL_ROW_TOL: f64 = 1e-12;
const STATIONARY_RESIDUAL: f64 = 1e-10;

pub fn rng_for_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[inline]
pub fn uniform01<R: RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Inverse-CDF sampler over a weight vector.
#[derive(Debug, Clone)]
struct Categorical {
    cdf: Vec<f64>,
    last_positive: usize,
}

impl Categorical {
    fn new(weights: &[f64]) -> Self {
        let mut acc = 0.0;
        let cdf = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        let last_positive = weights.iter().rposition(|&w| w > 0.0).unwrap_or(0);
        Self { cdf, last_positive }
    }

    #[inline]
    fn draw<R: RngCore>(&self, rng: &mut R) -> usize {
        let u = uniform01(rng);
        self.cdf.partition_point(|&c| c <= u).min(self.last_positive)
    }
}

/// `n` i.i.d. draws from `mu`.
pub fn sample_iid(mu: &DiscreteMeasure, n: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng_for_seed(seed);
    sample_iid_with(mu, n, &mut rng)
}

pub fn sample_iid_with<R: RngCore>(mu: &DiscreteMeasure, n: usize, rng: &mut R) -> Vec<usize> {
    let cat = Categorical::new(mu.weights());
    (0..n).map(|_| cat.draw(rng)).collect()
}

/// Row-stochastic transition matrix over the points of a space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct MarkovKernel {
    rows: Vec<Vec<f64>>,
}

impl TryFrom<Vec<Vec<f64>>> for MarkovKernel {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        MarkovKernel::new(rows)
    }
}

impl From<MarkovKernel> for Vec<Vec<f64>> {
    fn from(k: MarkovKernel) -> Self {
        k.rows
    }
}

impl MarkovKernel {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidKernel("kernel has no states".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidKernel(format!("row {i} has {} entries, expected {n}", row.len())));
            }
            if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                return Err(Error::InvalidKernel(format!("row {i} has a negative or non-finite entry")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > KERNEL_ROW_TOL {
                return Err(Error::InvalidKernel(format!("row {i} sums to {s}")));
            }
        }
        Ok(Self { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    fn reachable_from(&self, start: usize, reverse: bool) -> Vec<bool> {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(u) = stack.pop() {
            for v in 0..n {
                let edge = if reverse { self.rows[v][u] } else { self.rows[u][v] };
                if edge > 0.0 && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }

    pub fn is_irreducible(&self) -> bool {
        self.reachable_from(0, false).into_iter().all(|b| b)
            && self.reachable_from(0, true).into_iter().all(|b| b)
    }

    /// Period of an irreducible kernel: gcd of `level(u) + 1 - level(v)` over
    /// all edges `u → v`, with levels from a breadth-first search.
    pub fn period(&self) -> Option<usize> {
        if !self.is_irreducible() {
            return None;
        }
        let n = self.len();
        let mut level = vec![usize::MAX; n];
        level[0] = 0;
        let mut queue = std::collections::VecDeque::from([0usize]);
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if self.rows[u][v] > 0.0 && level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        let mut g = 0usize;
        for u in 0..n {
            for v in 0..n {
                if self.rows[u][v] > 0.0 {
                    g = gcd(g, (level[u] + 1).abs_diff(level[v]));
                }
            }
        }
        Some(g)
    }

    /// Errors unless the kernel is irreducible and aperiodic.
    pub fn check_ergodic(&self) -> Result<()> {
        match self.period() {
            None => Err(Error::InvalidKernel("kernel is reducible".into())),
            Some(1) => Ok(()),
            Some(d) => Err(Error::InvalidKernel(format!("kernel is periodic with period {d}"))),
        }
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Stationary weights `π = πP` of an irreducible aperiodic kernel.
pub fn stationary_weights(kernel: &MarkovKernel) -> Result<Vec<f64>> {
    kernel.check_ergodic()?;
    let n = kernel.len();
    // (Pᵀ - I) π = 0 with the last equation replaced by Σπ = 1
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = kernel.rows[j][i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let pi = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::InvalidKernel("stationary system is singular".into()))?;
    let mut pi: Vec<f64> = pi.iter().map(|&v| v.max(0.0)).collect();
    let s: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= s);
    let res = stationary_residual(kernel, &pi);
    if res > STATIONARY_RESIDUAL {
        return Err(Error::InvalidKernel(format!("stationary residual {res:e} too large")));
    }
    Ok(pi)
}

/// `max_j |(πP)_j - π_j|`.
pub fn stationary_residual(kernel: &MarkovKernel, pi: &[f64]) -> f64 {
    let n = kernel.len();
    (0..n)
        .map(|j| {
            let v: f64 = (0..n).map(|i| pi[i] * kernel.rows[i][j]).sum();
            (v - pi[j]).abs()
        })
        .fold(0.0, f64::max)
}

pub fn stationary_distribution(kernel: &MarkovKernel, space: Arc<MetricSpace>) -> Result<DiscreteMeasure> {
    if kernel.len() != space.len() {
        return Err(Error::InvalidKernel(format!(
            "kernel has {} states, space has {} points",
            kernel.len(),
            space.len()
        )));
    }
    DiscreteMeasure::new(space, stationary_weights(kernel)?)
}

/// A chain of length `n` started from `nu0`.
pub fn sample_markov(kernel: &MarkovKernel, nu0: &DiscreteMeasure, n: usize, seed: u64) -> Result<Vec<usize>> {
    let mut rng = rng_for_seed(seed);
    let mut chain = MarkovChain::new(kernel, nu0)?;
    Ok((0..n).map(|_| chain.step(&mut rng)).collect())
}

struct MarkovChain {
    initial: Categorical,
    rows: Vec<Categorical>,
    state: Option<usize>,
}

impl MarkovChain {
    fn new(kernel: &MarkovKernel, nu0: &DiscreteMeasure) -> Result<Self> {
        if kernel.len() != nu0.weights().len() {
            return Err(Error::InvalidKernel("kernel and initial law differ in size".into()));
        }
        Ok(Self {
            initial: Categorical::new(nu0.weights()),
            rows: kernel.rows.iter().map(|r| Categorical::new(r)).collect(),
            state: None,
        })
    }

    fn step<R: RngCore>(&mut self, rng: &mut R) -> usize {
        let next = match self.state {
            None => self.initial.draw(rng),
            Some(s) => self.rows[s].draw(rng),
        };
        self.state = Some(next);
        next
    }
}

/// Checkpoint schedules for trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "schedule", rename_all = "snake_case", deny_unknown_fields)]
pub enum Checkpoints {
    /// `⌈ratio^k⌉` for `k = 0, 1, ...`, deduplicated, plus `n_max`.
    Geometric {
        #[serde(default = "default_ratio")]
        ratio: f64,
    },
    /// Every `n` from 1 to `n_max`.
    All,
    /// Every `step`-th `n`, plus `n_max`.
    Every { step: usize },
    Explicit { values: Vec<usize> },
}

fn default_ratio() -> f64 {
    1.2
}

impl Default for Checkpoints {
    fn default() -> Self {
        Checkpoints::Geometric { ratio: default_ratio() }
    }
}

impl Checkpoints {
    pub fn resolve(&self, n_max: usize) -> Result<Vec<usize>> {
        if n_max == 0 {
            return Err(Error::InvalidParameter("n_max must be >= 1".into()));
        }
        let mut v = match self {
            Checkpoints::Geometric { ratio } => {
                if !(*ratio > 1.0) || !ratio.is_finite() {
                    return Err(Error::InvalidParameter(format!("geometric ratio must exceed 1, got {ratio}")));
                }
                let mut out = Vec::new();
                let mut k = 0i32;
                loop {
                    let n = ratio.powi(k).ceil() as usize;
                    if n > n_max {
                        break;
                    }
                    out.push(n);
                    k += 1;
                }
                out.push(n_max);
                out
            }
            Checkpoints::All => (1..=n_max).collect(),
            Checkpoints::Every { step } => {
                if *step == 0 {
                    return Err(Error::InvalidParameter("checkpoint step must be >= 1".into()));
                }
                let mut out: Vec<usize> = (1..=n_max).filter(|n| n % step == 0).collect();
                out.push(n_max);
                out
            }
            Checkpoints::Explicit { values } => {
                if let Some(&bad) = values.iter().find(|&&n| n == 0 || n > n_max) {
                    return Err(Error::InvalidParameter(format!("checkpoint {bad} outside 1..={n_max}")));
                }
                values.clone()
            }
        };
        v.sort_unstable();
        v.dedup();
        if v.is_empty() {
            return Err(Error::InvalidParameter("no checkpoints".into()));
        }
        Ok(v)
    }
}

/// Where samples come from.
#[derive(Debug, Clone)]
pub enum Sampler {
    Iid,
    Markov { kernel: MarkovKernel, initial: DiscreteMeasure },
}

/// A fully resolved trajectory experiment.
#[derive(Debug, Clone)]
pub struct SllnSetup {
    pub mu: DiscreteMeasure,
    pub p: f64,
    pub restricted: bool,
    pub sampler: Sampler,
    pub n_max: usize,
    pub checkpoints: Vec<usize>,
    /// Population mean set the trajectory is compared against.
    pub target: PointSet,
    pub detector: DetectorOptions,
    pub modes: Vec<Mode>,
}

impl SllnSetup {
    /// Builds a setup whose target is the population mean set: `F_p(μ)` (or
    /// `F_p*(μ)`) for i.i.d. sampling, and the same for the stationary law of
    /// a Markov sampler.
    pub fn new(
        mu: DiscreteMeasure,
        p: f64,
        restricted: bool,
        sampler: Sampler,
        n_max: usize,
        checkpoints: Vec<usize>,
    ) -> Result<Self> {
        check_p(p)?;
        if let Some(&bad) = checkpoints.iter().find(|&&n| n == 0 || n > n_max) {
            return Err(Error::InvalidParameter(format!("checkpoint {bad} outside 1..={n_max}")));
        }
        if checkpoints.is_empty() || checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("checkpoints must be nonempty and increasing".into()));
        }
        let population = match &sampler {
            Sampler::Iid => mu.clone(),
            Sampler::Markov { kernel, .. } => stationary_distribution(kernel, mu.space().clone())?,
        };
        let candidate = if restricted { population.support() } else { PointSet::full(mu.space().len()) };
        let target = crate::frechet::frechet_mean(&population, &candidate, p)?.argmin;
        let detector = DetectorOptions::for_space(mu.space());
        Ok(Self { mu, p, restricted, sampler, n_max, checkpoints, target, detector, modes: Mode::ALL.to_vec() })
    }

    pub fn space(&self) -> &Arc<MetricSpace> {
        self.mu.space()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRow {
    pub n: usize,
    pub set: PointSet,
    /// `ρ(set, target)`; `None` when the set is empty.
    pub rho: Option<f64>,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub rng: String,
    pub p: f64,
    pub restricted: bool,
    pub target: PointSet,
    pub rows: Vec<CheckpointRow>,
    pub limits: LimitEstimate,
    pub detectors: Vec<ConvergenceReport>,
}

impl TrajectoryRecord {
    pub fn sets(&self) -> Vec<PointSet> {
        self.rows.iter().map(|r| r.set.clone()).collect()
    }

    pub fn last(&self) -> &CheckpointRow {
        self.rows.last().expect("at least one checkpoint")
    }
}

/// Mean set of the empirical measure with the given counts, by the same path
/// the solver uses for any measure.
pub fn mean_set_from_counts(
    space: &Arc<MetricSpace>,
    table: &[f64],
    counts: &[u64],
    restricted: bool,
) -> Result<PointSet> {
    let emp = DiscreteMeasure::from_counts(space.clone(), counts.to_vec())?;
    let candidate = if restricted { emp.support() } else { PointSet::full(space.len()) };
    let values = emp.values_with_table(table);
    Ok(argmin_over(&values, &candidate).0)
}

/// Samples one trajectory and evaluates the empirical mean set at every
/// checkpoint.
pub fn run_slln(setup: &SllnSetup, seed: u64) -> Result<TrajectoryRecord> {
    let space = setup.space();
    let table = space.powered(setup.p);
    let mut rng = rng_for_seed(seed);
    let mut counts = vec![0u64; space.len()];
    let mut rows = Vec::with_capacity(setup.checkpoints.len());
    let mut next_cp = setup.checkpoints.iter().peekable();

    let mut draw: Box<dyn FnMut(&mut ChaCha8Rng) -> usize> = match &setup.sampler {
        Sampler::Iid => {
            let cat = Categorical::new(setup.mu.weights());
            Box::new(move |r| cat.draw(r))
        }
        Sampler::Markov { kernel, initial } => {
            let mut chain = MarkovChain::new(kernel, initial)?;
            Box::new(move |r| chain.step(r))
        }
    };

    for n in 1..=setup.n_max {
        counts[draw(&mut rng)] += 1;
        if next_cp.peek() == Some(&&n) {
            next_cp.next();
            let set = mean_set_from_counts(space, &table, &counts, setup.restricted)?;
            let rho = if set.is_empty() { None } else { Some(crate::limits::rho(space, &set, &setup.target)?) };
            rows.push(CheckpointRow { n, set, rho, counts: counts.clone() });
        }
    }
    let sets: Vec<PointSet> = rows.iter().map(|r| r.set.clone()).collect();
    let n0 = setup.detector.tail_start_for(sets.len());
    let limits = kuratowski_limits(&sets, n0, setup.detector.recurrence)?;
    let detectors = setup
        .modes
        .iter()
        .map(|&m| detect_convergence(Some(space), &sets, &setup.target, m, &setup.detector))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrajectoryRecord {
        seed,
        rng: RNG_ALGORITHM.into(),
        p: setup.p,
        restricted: setup.restricted,
        target: setup.target.clone(),
        rows,
        limits,
        detectors,
    })
}

/// Per-replicate digest kept after the full trajectory is dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateSummary {
    pub rep: usize,
    pub seed: u64,
    pub final_n: usize,
    pub final_set: PointSet,
    pub final_rho: Option<f64>,
    pub li: PointSet,
    pub ls: PointSet,
    pub passed: Vec<(Mode, bool)>,
}

impl ReplicateSummary {
    fn from_record(rep: usize, rec: &TrajectoryRecord) -> Self {
        let last = rec.last();
        Self {
            rep,
            seed: rec.seed,
            final_n: last.n,
            final_set: last.set.clone(),
            final_rho: last.rho,
            li: rec.limits.li.clone(),
            ls: rec.limits.ls.clone(),
            passed: rec.detectors.iter().map(|d| (d.mode, d.passed)).collect(),
        }
    }

    pub fn passed(&self, mode: Mode) -> Option<bool> {
        self.passed.iter().find(|(m, _)| *m == mode).map(|&(_, b)| b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

impl Quantiles {
    /// Linear-interpolation quantiles; `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |t: f64| {
            let pos = t * (v.len() - 1) as f64;
            let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Some(Self { min: v[0], q25: q(0.25), median: q(0.5), q75: q(0.75), max: v[v.len() - 1] })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub reps: usize,
    pub base_seed: u64,
    pub rng: String,
    pub target: PointSet,
    pub pass_rates: Vec<(Mode, f64)>,
    pub final_rho: Option<Quantiles>,
    /// Fraction of replicates whose final mean set has more than one point.
    pub tie_frequency: f64,
    /// For each point, the fraction of replicates with the point in the final set.
    pub final_membership: Vec<f64>,
    /// For each point, the fraction of replicates with the point in the Ls estimate.
    pub ls_membership: Vec<f64>,
    pub li_empty_frequency: f64,
    pub ls_equals_target_frequency: f64,
    pub replicates: Vec<ReplicateSummary>,
}

pub fn aggregate(setup: &SllnSetup, base_seed: u64, summaries: Vec<ReplicateSummary>) -> AggregateReport {
    let reps = summaries.len();
    let frac = |k: usize| if reps == 0 { 0.0 } else { k as f64 / reps as f64 };
    let pass_rates = setup
        .modes
        .iter()
        .map(|&m| (m, frac(summaries.iter().filter(|s| s.passed(m) == Some(true)).count())))
        .collect();
    let rhos: Vec<f64> = summaries.iter().filter_map(|s| s.final_rho).collect();
    let npts = setup.space().len();
    let membership = |f: &dyn Fn(&ReplicateSummary) -> &PointSet| {
        (0..npts).map(|x| frac(summaries.iter().filter(|s| f(s).contains(x)).count())).collect()
    };
    AggregateReport {
        reps,
        base_seed,
        rng: RNG_ALGORITHM.into(),
        target: setup.target.clone(),
        pass_rates,
        final_rho: Quantiles::of(&rhos),
        tie_frequency: frac(summaries.iter().filter(|s| s.final_set.len() > 1).count()),
        final_membership: membership(&|s| &s.final_set),
        ls_membership: membership(&|s| &s.ls),
        li_empty_frequency: frac(summaries.iter().filter(|s| s.li.is_empty()).count()),
        ls_equals_target_frequency: frac(summaries.iter().filter(|s| s.ls == setup.target).count()),
        replicates: summaries,
    }
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))
}

/// Runs `n_reps` replicates in parallel and hands each record to `extra`;
/// results come back in replicate order whatever the thread count.
pub fn replicate_with<T, F>(
    setup: &SllnSetup,
    n_reps: usize,
    base_seed: u64,
    threads: Option<usize>,
    extra: F,
) -> Result<Vec<(ReplicateSummary, T)>>
where
    T: Send,
    F: Fn(usize, &TrajectoryRecord) -> T + Sync,
{
    if n_reps == 0 {
        return Err(Error::InvalidParameter("need at least one replicate".into()));
    }
    pool(threads)?.install(|| {
        (0..n_reps)
            .into_par_iter()
            .map(|rep| {
                let rec = run_slln(setup, base_seed.wrapping_add(rep as u64))?;
                Ok((ReplicateSummary::from_record(rep, &rec), extra(rep, &rec)))
            })
            .collect()
    })
}

/// Replicates a trajectory experiment and aggregates the outcomes.
pub fn replicate(setup: &SllnSetup, n_reps: usize, base_seed: u64, threads: Option<usize>) -> Result<AggregateReport> {
    let out = replicate_with(setup, n_reps, base_seed, threads, |_, _| ())?;
    Ok(aggregate(setup, base_seed, out.into_iter().map(|(s, _)| s).collect()))
}

/// Runs `f(rep, seed)` for every replicate on a pool of `threads` workers and
/// returns results in replicate order.
pub fn par_replicates<T, F>(n_reps: usize, base_seed: u64, threads: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, u64) -> Result<T> + Sync,
{
    pool(threads)?.install(|| {
        (0..n_reps).into_par_iter().map(|rep| f(rep, base_seed.wrapping_add(rep as u64))).collect()
    })
}
