//! Experiment configuration, replicated trajectory runs and the preset
//! reproductions of the worked examples on small spaces.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::equivalence::t2_slln_hypothesis;
use crate::error::{Error, Result};
use crate::limits::{hausdorff, DetectorOptions, Mode, DEFAULT_RECURRENCE};
use crate::measure::{DiscreteMeasure, MeasureSpec};
use crate::metric::{build_space, MetricSpace, SpaceSpec};
use crate::pointset::PointSet;
use crate::sampling::{
    aggregate, replicate_with, AggregateReport, CheckpointRow, Checkpoints, MarkovKernel, Sampler, SllnSetup,
    TrajectoryRecord, RNG_ALGORITHM,
};
use crate::SCHEMA_VERSION;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplerSpec {
    #[default]
    Iid,
    /// The experiment's measure is the initial law; the target is the mean
    /// set of the stationary law.
    Markov { kernel: MarkovKernel },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    #[serde(default = "all_modes")]
    pub modes: Vec<Mode>,
    #[serde(default)]
    pub tail_start: Option<usize>,
    #[serde(default = "default_recurrence")]
    pub recurrence: usize,
    /// Hausdorff pass tolerance; defaults to the grid spacing (zero on
    /// explicit spaces).
    #[serde(default)]
    pub tolerance: Option<f64>,
}

fn all_modes() -> Vec<Mode> {
    Mode::ALL.to_vec()
}

fn default_recurrence() -> usize {
    DEFAULT_RECURRENCE
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self { modes: all_modes(), tail_start: None, recurrence: DEFAULT_RECURRENCE, tolerance: None }
    }
}

/// Per-checkpoint tag from the sign of `N_plus - N_minus`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeSpec {
    pub plus: usize,
    pub minus: usize,
}

impl RegimeSpec {
    pub fn tag(&self, row: &CheckpointRow) -> &'static str {
        match row.counts[self.plus].cmp(&row.counts[self.minus]) {
            std::cmp::Ordering::Greater => "S>0",
            std::cmp::Ordering::Less => "S<0",
            std::cmp::Ordering::Equal => "S=0",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub json: Option<String>,
    #[serde(default)]
    pub csv: Option<String>,
    /// Include per-replicate summaries in the JSON report.
    #[serde(default = "yes")]
    pub replicates: bool,
}

fn yes() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { json: None, csv: None, replicates: true }
    }
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub space: SpaceSpec,
    pub measure: MeasureSpec,
    pub p: f64,
    #[serde(default)]
    pub restricted: bool,
    #[serde(default)]
    pub sampler: SamplerSpec,
    pub n_max: usize,
    #[serde(default)]
    pub checkpoints: Checkpoints,
    #[serde(default = "one")]
    pub reps: usize,
    pub seed: u64,
    #[serde(default)]
    pub detectors: DetectorConfig,
    /// Replaces the population mean set as the comparison target.
    #[serde(default)]
    pub target: Option<PointSet>,
    #[serde(default)]
    pub regime: Option<RegimeSpec>,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn build_space(&self) -> Result<Arc<MetricSpace>> {
        Ok(Arc::new(build_space(&self.space)?))
    }

    pub fn setup(&self) -> Result<SllnSetup> {
        let space = self.build_space()?;
        let mu = self.measure.resolve(space.clone())?;
        let sampler = match &self.sampler {
            SamplerSpec::Iid => Sampler::Iid,
            SamplerSpec::Markov { kernel } => {
                kernel.check_ergodic()?;
                Sampler::Markov { kernel: kernel.clone(), initial: mu.clone() }
            }
        };
        let cps = self.checkpoints.resolve(self.n_max)?;
        let mut setup = SllnSetup::new(mu, self.p, self.restricted, sampler, self.n_max, cps)?;
        if let Some(t) = &self.target {
            t.check_in(&space)?;
            setup.target = t.clone();
        }
        if let Some(r) = &self.regime {
            space.check_index(r.plus)?;
            space.check_index(r.minus)?;
        }
        let d = &self.detectors;
        if d.modes.iter().any(|m| m.needs_metric()) && setup.target.is_empty() {
            return Err(Error::EmptySet);
        }
        setup.modes = d.modes.clone();
        setup.detector = DetectorOptions {
            tail_start: d.tail_start,
            recurrence: d.recurrence,
            tolerance: d.tolerance.unwrap_or_else(|| space.grid_spacing().unwrap_or(0.0)),
        };
        if d.recurrence == 0 {
            return Err(Error::InvalidParameter("recurrence threshold must be >= 1".into()));
        }
        if let Some(n0) = d.tail_start {
            if n0 == 0 || n0 > setup.checkpoints.len() {
                return Err(Error::InvalidParameter(format!(
                    "tail_start {n0} outside 1..={}",
                    setup.checkpoints.len()
                )));
            }
        }
        Ok(setup)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub rng: String,
    pub grid_spacing: Option<f64>,
    pub checkpoints: usize,
    pub detector: DetectorOptions,
    pub aggregate: AggregateReport,
}

/// Output of [`run_experiment_with`]: the report plus whatever the
/// per-trajectory hook produced, in replicate order.
pub struct ExperimentRun<T> {
    pub report: ExperimentReport,
    pub extras: Vec<T>,
}

pub const CSV_HEADER: &str = "rep,n,set,rho,counts,regime\n";

/// Long-format CSV rows for one trajectory.
pub fn trajectory_csv(rep: usize, rec: &TrajectoryRecord, regime: Option<&RegimeSpec>) -> String {
    let mut s = String::new();
    for row in &rec.rows {
        let rho = row.rho.map(|r| r.to_string()).unwrap_or_default();
        let counts: Vec<String> = row.counts.iter().map(u64::to_string).collect();
        let tag = regime.map(|r| r.tag(row)).unwrap_or("");
        let _ = writeln!(s, "{rep},{},{},{rho},{},{tag}", row.n, row.set, counts.join(";"));
    }
    s
}

pub fn run_experiment_with<T, F>(cfg: &ExperimentConfig, threads: Option<usize>, hook: F) -> Result<ExperimentRun<T>>
where
    T: Send,
    F: Fn(usize, &TrajectoryRecord) -> T + Sync,
{
    let setup = cfg.setup()?;
    let out = replicate_with(&setup, cfg.reps, cfg.seed, threads, hook)?;
    let (summaries, extras): (Vec<_>, Vec<_>) = out.into_iter().unzip();
    let mut agg = aggregate(&setup, cfg.seed, summaries);
    if !cfg.output.replicates {
        agg.replicates.clear();
    }
    let report = ExperimentReport {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        rng: RNG_ALGORITHM.into(),
        grid_spacing: setup.space().grid_spacing(),
        checkpoints: setup.checkpoints.len(),
        detector: setup.detector.clone(),
        aggregate: agg,
    };
    Ok(ExperimentRun { report, extras })
}

/// Runs the experiment; when `csv` is set, also returns the trajectory table.
pub fn run_experiment(cfg: &ExperimentConfig, threads: Option<usize>, csv: bool) -> Result<(ExperimentReport, Option<String>)> {
    let regime = cfg.regime.clone();
    let run = run_experiment_with(cfg, threads, |rep, rec| {
        csv.then(|| trajectory_csv(rep, rec, regime.as_ref()))
    })?;
    let table = csv.then(|| {
        let mut s = String::from(CSV_HEADER);
        run.extras.iter().flatten().for_each(|chunk| s.push_str(chunk));
        s
    });
    Ok((run.report, table))
}

/// Knobs every preset accepts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExampleOverrides {
    /// Number of leaves / points (`ex5_1`, `ex5_3`).
    pub m: Option<usize>,
    /// Circle grid size (`ex5_2_*`).
    #[serde(rename = "N")]
    pub big_n: Option<usize>,
    pub p: Option<f64>,
    pub n_max: Option<usize>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    /// Replicates for the tie-probability run of `ex5_3`.
    pub tie_reps: Option<usize>,
    /// Sample size for the tie-probability run of `ex5_3`; a multiple of `m`.
    pub tie_n: Option<usize>,
}

pub const EXAMPLES: [&str; 4] = ["ex5_1", "ex5_2_p1", "ex5_2_p2", "ex5_3"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub check: String,
    pub expected: String,
    pub observed: String,
    pub pass: bool,
}

impl Verdict {
    fn frac(check: &str, expected_min: f64, observed: f64) -> Self {
        Self {
            check: check.into(),
            expected: format!(">= {expected_min}"),
            observed: observed.to_string(),
            pass: observed >= expected_min,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleReport {
    pub schema_version: u32,
    pub example: String,
    pub overrides: ExampleOverrides,
    pub report: ExperimentReport,
    /// Secondary runs some presets need (`ex5_3` tie probability).
    #[serde(default)]
    pub auxiliary: Option<ExperimentReport>,
    pub verdicts: Vec<Verdict>,
}

/// The preset configuration behind a named example.
pub fn preset(name: &str, o: &ExampleOverrides) -> Result<ExperimentConfig> {
    let seed = o.seed.unwrap_or(1);
    let whole_window = DetectorConfig { tail_start: Some(1), ..DetectorConfig::default() };
    let base = |space, measure, p, n_max, reps, checkpoints, detectors| ExperimentConfig {
        space,
        measure,
        p,
        restricted: false,
        sampler: SamplerSpec::Iid,
        n_max,
        checkpoints,
        reps,
        seed,
        detectors,
        target: None,
        regime: None,
        output: OutputConfig::default(),
    };
    match name {
        "ex5_1" => {
            let m = o.m.unwrap_or(4);
            Ok(base(
                SpaceSpec::Discrete { m },
                MeasureSpec::Uniform { uniform: true },
                o.p.unwrap_or(2.0),
                o.n_max.unwrap_or(10_000),
                o.reps.unwrap_or(50),
                Checkpoints::All,
                whole_window,
            ))
        }
        "ex5_2_p1" | "ex5_2_p2" => {
            let n = o.big_n.unwrap_or(8);
            let p1 = name == "ex5_2_p1";
            let mut cfg = base(
                SpaceSpec::CircleGrid { n },
                MeasureSpec::UniformOn { uniform_on: vec![0, n / 2] },
                o.p.unwrap_or(if p1 { 1.0 } else { 2.0 }),
                o.n_max.unwrap_or(if p1 { 100_000 } else { 10_000 }),
                o.reps.unwrap_or(if p1 { 20 } else { 100 }),
                if p1 { Checkpoints::All } else { Checkpoints::default() },
                if p1 { whole_window } else { DetectorConfig::default() },
            );
            if p1 {
                cfg.regime = Some(RegimeSpec { plus: 0, minus: n / 2 });
                cfg.output.replicates = false;
            }
            Ok(cfg)
        }
        "ex5_3" => {
            let m = o.m.unwrap_or(4);
            let p = o.p.unwrap_or(2.0);
            Ok(base(
                SpaceSpec::Star { m, p },
                MeasureSpec::UniformOn { uniform_on: (1..=m).collect() },
                p,
                o.n_max.unwrap_or(10_000),
                o.reps.unwrap_or(50),
                Checkpoints::All,
                whole_window,
            ))
        }
        other => Err(Error::UnknownExample(other.into())),
    }
}

/// `n! / ((n/m)!)^m / m^n` in log space; zero when `m ∤ n`.
pub fn multinomial_tie_probability(n: usize, m: usize) -> f64 {
    if m == 0 || n % m != 0 {
        return 0.0;
    }
    let lf = |k: usize| (1..=k).map(|i| (i as f64).ln()).sum::<f64>();
    (lf(n) - m as f64 * lf(n / m) - n as f64 * (m as f64).ln()).exp()
}

#[derive(Debug, Clone, Default)]
struct RegimeTally {
    violations: usize,
    seen: [bool; 3],
}

/// Runs a preset and scores it against the behaviour the example predicts.
pub fn run_named_example(name: &str, o: &ExampleOverrides, threads: Option<usize>) -> Result<ExampleReport> {
    let cfg = preset(name, o)?;
    let space = cfg.build_space()?;
    let npts = space.len();
    let mut auxiliary = None;
    let mut verdicts = Vec::new();
    let report = match name {
        "ex5_2_p1" => {
            let regime = cfg.regime.clone().expect("preset sets a regime");
            let half = regime.minus;
            let run = run_experiment_with(&cfg, threads, |_, rec| {
                let mut t = RegimeTally::default();
                for row in &rec.rows {
                    let (slot, expected) = match regime.tag(row) {
                        "S>0" => (0, PointSet::singleton(0)),
                        "S<0" => (1, PointSet::singleton(half)),
                        _ => (2, PointSet::full(npts)),
                    };
                    t.seen[slot] = true;
                    if row.set != expected {
                        t.violations += 1;
                    }
                }
                t
            })?;
            let violations: usize = run.extras.iter().map(|t| t.violations).sum();
            verdicts.push(Verdict {
                check: "mean set matches the sign of S_n at every checkpoint".into(),
                expected: "0 violations".into(),
                observed: format!("{violations} violations"),
                pass: violations == 0,
            });
            let all_three = run.extras.iter().filter(|t| t.seen.iter().all(|&b| b)).count();
            verdicts.push(Verdict::frac(
                "all three regimes observed",
                0.9,
                all_three as f64 / run.extras.len() as f64,
            ));
            let agg = &run.report.aggregate;
            verdicts.push(Verdict::frac("Ls estimate = whole circle", 0.95, agg.ls_equals_target_frequency));
            verdicts.push(Verdict::frac("Li estimate empty", 0.95, agg.li_empty_frequency));
            run.report
        }
        "ex5_2_p2" => {
            let n = match cfg.space {
                SpaceSpec::CircleGrid { n } => n,
                _ => unreachable!(),
            };
            let quarter = PointSet::new([n / 4, 3 * n / 4]);
            let mu = cfg.measure.resolve(space.clone())?;
            let hyp = t2_slln_hypothesis(&mu, cfg.p, false)?;
            verdicts.push(Verdict {
                check: "mean set is a single equivalence class".into(),
                expected: format!("holds, witness {quarter}"),
                observed: format!(
                    "holds={}, witness {}",
                    hyp.holds,
                    hyp.witness_class.as_ref().map(|w| w.to_string()).unwrap_or_default()
                ),
                pass: hyp.holds && hyp.witness_class.as_ref() == Some(&quarter),
            });
            let sp = space.clone();
            let q = quarter.clone();
            let run = run_experiment_with(&cfg, threads, move |_, rec| {
                hausdorff(&sp, &rec.last().set, &q).map(|d| d == 0.0).unwrap_or(false)
            })?;
            let hits = run.extras.iter().filter(|&&b| b).count();
            verdicts.push(Verdict::frac(
                "d_H(final mean set, quarter points) = 0",
                0.95,
                hits as f64 / run.extras.len() as f64,
            ));
            run.report
        }
        "ex5_1" => {
            let run = run_experiment_with(&cfg, threads, |_, _| ())?;
            let agg = &run.report.aggregate;
            verdicts.push(Verdict::frac("Ls estimate = X", 0.95, agg.ls_equals_target_frequency));
            verdicts.push(Verdict::frac("Li estimate empty", 1.0, agg.li_empty_frequency));
            run.report
        }
        "ex5_3" => {
            let m = npts - 1;
            let run = run_experiment_with(&cfg, threads, |_, _| ())?;
            let agg = &run.report.aggregate;
            verdicts.push(Verdict::frac("hub not in Ls estimate", 0.95, 1.0 - agg.ls_membership[0]));
            let reps = agg.replicates.len() as f64;
            let leaves_in = agg
                .replicates
                .iter()
                .filter(|r| (1..=m).all(|x| r.ls.contains(x)))
                .count() as f64
                / reps;
            verdicts.push(Verdict {
                check: "all leaves in Ls estimate".into(),
                expected: "reported".into(),
                observed: leaves_in.to_string(),
                pass: true,
            });
            verdicts.push(Verdict::frac("Li estimate empty", 0.95, agg.li_empty_frequency));

            let tie_n = o.tie_n.unwrap_or(2 * m);
            let tie_cfg = ExperimentConfig {
                n_max: tie_n,
                checkpoints: Checkpoints::Explicit { values: vec![tie_n] },
                reps: o.tie_reps.unwrap_or(100_000),
                detectors: DetectorConfig { modes: vec![Mode::KPlus], ..DetectorConfig::default() },
                output: OutputConfig { replicates: false, ..OutputConfig::default() },
                ..cfg.clone()
            };
            let tie = run_experiment_with(&tie_cfg, threads, |_, _| ())?.report;
            let freq = tie.aggregate.final_membership[0];
            let exact = multinomial_tie_probability(tie_n, m);
            let sigma = (exact * (1.0 - exact) / tie_cfg.reps as f64).sqrt();
            verdicts.push(Verdict {
                check: format!("P(hub in mean set) at n={tie_n}"),
                expected: format!("{exact} ± 3σ (σ = {sigma})"),
                observed: freq.to_string(),
                pass: (freq - exact).abs() <= 3.0 * sigma,
            });
            auxiliary = Some(tie);
            run.report
        }
        other => return Err(Error::UnknownExample(other.into())),
    };
    Ok(ExampleReport {
        schema_version: SCHEMA_VERSION,
        example: name.into(),
        overrides: o.clone(),
        report,
        auxiliary,
        verdicts,
    })
}

/// Mean set of a measure resolved against `space`; a convenience for callers
/// that only have specs.
pub fn population_mean(space: Arc<MetricSpace>, measure: &MeasureSpec, p: f64, restricted: bool) -> Result<PointSet> {
    let mu: DiscreteMeasure = measure.resolve(space.clone())?;
    let cand = if restricted { mu.support() } else { PointSet::full(space.len()) };
    Ok(crate::frechet::frechet_mean(&mu, &cand, p)?.argmin)
}
