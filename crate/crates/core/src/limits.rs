//! Hausdorff excess/metric, Kuratowski limits of finite set sequences, and
//! convergence detectors.
//!
//! The limits of an infinite sequence are estimated from a finite window
//! `[n0, N]` of its prefix. On a finite space, with the discrete topology of
//! point indices, the lower limit is the set of points present in every set
//! of the window and the upper limit is the set of points present in at least
//! `r` of them. Both are estimators; the window and threshold are echoed in
//! every [`LimitEstimate`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::MetricSpace;
use crate::pointset::PointSet;

pub const DEFAULT_RECURRENCE: usize = 3;

/// `ρ(C, C') = max_{x∈C} min_{x'∈C'} d(x, x')`.
pub fn rho(space: &MetricSpace, c: &PointSet, c2: &PointSet) -> Result<f64> {
    if c.is_empty() || c2.is_empty() {
        return Err(Error::EmptySet);
    }
    c.check_in(space)?;
    c2.check_in(space)?;
    Ok(c.iter()
        .map(|x| c2.iter().map(|y| space.d(x, y)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max))
}

/// Hausdorff distance `max{ρ(C, C'), ρ(C', C)}`.
pub fn hausdorff(space: &MetricSpace, c: &PointSet, c2: &PointSet) -> Result<f64> {
    Ok(rho(space, c, c2)?.max(rho(space, c2, c)?))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LimitEstimate {
    pub li: PointSet,
    pub ls: PointSet,
    /// Set when `li == ls`.
    pub lt: Option<PointSet>,
    /// 1-based inclusive window `(n0, N)` over sequence positions.
    pub window: (usize, usize),
    pub recurrence: usize,
    /// `min(recurrence, window length)`; keeps `li ⊆ ls` on short windows.
    pub effective_recurrence: usize,
    pub estimator: String,
}

/// Tail-window estimates of the Kuratowski lower and upper limits.
///
/// `n0` is the 1-based position of the first set in the window.
pub fn kuratowski_limits(seq: &[PointSet], n0: usize, r: usize) -> Result<LimitEstimate> {
    if seq.is_empty() {
        return Err(Error::InvalidParameter("sequence is empty".into()));
    }
    if r < 1 {
        return Err(Error::InvalidParameter("recurrence threshold must be >= 1".into()));
    }
    let len = seq.len();
    if n0 < 1 || n0 > len {
        return Err(Error::InvalidParameter(format!("tail start {n0} outside 1..={len}")));
    }
    let tail = &seq[n0 - 1..];
    let r_eff = r.min(tail.len());

    let mut li = tail[0].clone();
    let mut hits: std::collections::BTreeMap<usize, usize> = Default::default();
    for set in tail {
        li = li.intersection(set);
        for x in set.iter() {
            *hits.entry(x).or_default() += 1;
        }
    }
    let ls: PointSet = hits.into_iter().filter(|&(_, c)| c >= r_eff).map(|(x, _)| x).collect();
    let lt = (li == ls).then(|| li.clone());
    Ok(LimitEstimate {
        li,
        ls,
        lt,
        window: (n0, len),
        recurrence: r,
        effective_recurrence: r_eff,
        estimator: "finite-window tail estimator".into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// Upper limit contained in the target.
    #[serde(rename = "K_plus")]
    KPlus,
    /// Target contained in the lower limit.
    #[serde(rename = "K_minus")]
    KMinus,
    /// `ρ(C_n, C) → 0`.
    #[serde(rename = "H_plus")]
    HPlus,
    /// `d_H(C_n, C) → 0`.
    H,
    /// Both Kuratowski halves.
    K,
}

impl Mode {
    pub const ALL: [Mode; 5] = [Mode::KPlus, Mode::KMinus, Mode::HPlus, Mode::H, Mode::K];

    pub fn needs_metric(self) -> bool {
        matches!(self, Mode::HPlus | Mode::H)
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::KPlus => "K_plus",
            Mode::KMinus => "K_minus",
            Mode::HPlus => "H_plus",
            Mode::H => "H",
            Mode::K => "K",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown detector mode `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorOptions {
    /// 1-based first position of the tail window; `None` means `max(1, N/2)`.
    #[serde(default)]
    pub tail_start: Option<usize>,
    #[serde(default = "default_recurrence")]
    pub recurrence: usize,
    /// Pass threshold for the Hausdorff-type modes.
    #[serde(default)]
    pub tolerance: f64,
}

fn default_recurrence() -> usize {
    DEFAULT_RECURRENCE
}

impl Default for DetectorOptions {
    fn default() -> Self {
        Self { tail_start: None, recurrence: DEFAULT_RECURRENCE, tolerance: 0.0 }
    }
}

impl DetectorOptions {
    pub fn tail_start_for(&self, len: usize) -> usize {
        self.tail_start.unwrap_or((len / 2).max(1))
    }

    /// Default tolerance: one grid step on generated grids, zero otherwise.
    pub fn for_space(space: &MetricSpace) -> Self {
        Self { tolerance: space.grid_spacing().unwrap_or(0.0), ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub mode: Mode,
    pub passed: bool,
    pub estimate: LimitEstimate,
    /// Largest `ρ(C_n, target)` over the tail (Hausdorff modes).
    pub rho_tail_max: Option<f64>,
    /// Largest `ρ(target, C_n)` over the tail (mode `H`).
    pub rho_back_tail_max: Option<f64>,
    /// Least-squares slope of `ρ(C_n, target)` against position over the tail.
    pub rho_trend: Option<f64>,
    /// Number of empty sets in the tail; each fails the Hausdorff modes.
    pub empty_in_tail: usize,
    pub tolerance: f64,
}

pub(crate) fn least_squares_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

/// Runs one convergence detector on `seq` against `target`.
///
/// `space` is only consulted by the Hausdorff modes, which also reject an
/// empty target.
pub fn detect_convergence(
    space: Option<&MetricSpace>,
    seq: &[PointSet],
    target: &PointSet,
    mode: Mode,
    opts: &DetectorOptions,
) -> Result<ConvergenceReport> {
    let n0 = opts.tail_start_for(seq.len());
    let estimate = kuratowski_limits(seq, n0, opts.recurrence)?;
    let tail = &seq[n0 - 1..];
    let empty_in_tail = tail.iter().filter(|s| s.is_empty()).count();
    let mut report = ConvergenceReport {
        mode,
        passed: false,
        estimate,
        rho_tail_max: None,
        rho_back_tail_max: None,
        rho_trend: None,
        empty_in_tail,
        tolerance: opts.tolerance,
    };
    let k_plus = report.estimate.ls.is_subset(target);
    let k_minus = target.is_subset(&report.estimate.li);
    if mode.needs_metric() {
        let space = space.ok_or_else(|| {
            Error::InvalidParameter(format!("mode {} needs a metric space", mode.name()))
        })?;
        if target.is_empty() {
            return Err(Error::EmptySet);
        }
        let mut xs = Vec::new();
        let mut fwd = Vec::new();
        let mut back = Vec::new();
        for (i, set) in tail.iter().enumerate() {
            if set.is_empty() {
                continue;
            }
            xs.push((n0 + i) as f64);
            fwd.push(rho(space, set, target)?);
            if mode == Mode::H {
                back.push(rho(space, target, set)?);
            }
        }
        let max = |v: &[f64]| v.iter().copied().reduce(f64::max);
        report.rho_tail_max = max(&fwd);
        report.rho_trend = least_squares_slope(&xs, &fwd);
        let fwd_ok = empty_in_tail == 0 && report.rho_tail_max.is_some_and(|m| m <= opts.tolerance);
        report.passed = if mode == Mode::H {
            report.rho_back_tail_max = max(&back);
            fwd_ok && report.rho_back_tail_max.is_some_and(|m| m <= opts.tolerance)
        } else {
            fwd_ok
        };
    } else {
        report.passed = match mode {
            Mode::KPlus => k_plus,
            Mode::KMinus => k_minus,
            _ => k_plus && k_minus,
        };
    }
    Ok(report)
}
