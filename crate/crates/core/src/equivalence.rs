//! Points that no measure supported in `supp(μ)` can tell apart.
//!
//! On a finite space two points are equivalent under `μ` exactly when their
//! distance vectors agree on the support of `μ`.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::frechet::frechet_mean;
use crate::measure::DiscreteMeasure;
use crate::pointset::PointSet;

/// Per-coordinate tolerance when comparing distance vectors.
pub const COORD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    /// Disjoint, nonempty, covering; ordered by smallest member.
    pub blocks: Vec<PointSet>,
}

impl Partition {
    pub fn block_of(&self, x: usize) -> Option<&PointSet> {
        self.blocks.iter().find(|b| b.contains(x))
    }
}

/// Groups points by their distance vectors restricted to `supp(μ)`.
pub fn equivalence_classes(mu: &DiscreteMeasure) -> Partition {
    let space = mu.space();
    let supp = mu.support();
    let same = |a: usize, b: usize| supp.iter().all(|y| (space.d(a, y) - space.d(b, y)).abs() <= COORD_TOL);
    let mut reps: Vec<usize> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for x in 0..space.len() {
        match reps.iter().position(|&r| same(r, x)) {
            Some(i) => members[i].push(x),
            None => {
                reps.push(x);
                members.push(vec![x]);
            }
        }
    }
    Partition { blocks: members.into_iter().map(PointSet::from).collect() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    /// Whether the mean set is a single equivalence class.
    pub holds: bool,
    pub witness_class: Option<PointSet>,
    pub mean_set: PointSet,
    pub restricted: bool,
    pub partition: Partition,
}

/// Checks whether `F_p(μ)` (or `F_p*(μ)` when `restricted`) is exactly one
/// block of [`equivalence_classes`]. On finite spaces this is the condition
/// under which the empirical mean sets converge in the Hausdorff topology.
pub fn t2_slln_hypothesis(mu: &DiscreteMeasure, p: f64, restricted: bool) -> Result<HypothesisReport> {
    let candidate = if restricted { mu.support() } else { PointSet::full(mu.space().len()) };
    let mean_set = frechet_mean(mu, &candidate, p)?.argmin;
    let partition = equivalence_classes(mu);
    let first = mean_set.iter().next().expect("finite means are nonempty");
    let block = partition.block_of(first).expect("partition covers the space").clone();
    let holds = block == mean_set;
    Ok(HypothesisReport {
        holds,
        witness_class: holds.then_some(block),
        mean_set,
        restricted,
        partition,
    })
}
