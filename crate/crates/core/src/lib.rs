//! Set-valued Fréchet p-means and medoids on finite metric spaces.
//!
//! The crate computes the full argmin set of `x ↦ Σ_y μ(y) d(x,y)^p`
//! (optionally restricted to the support of `μ` or to an arbitrary
//! candidate set), tracks how these sets behave along empirical measures of
//! seeded samples, and estimates Kuratowski/Hausdorff limits of the
//! resulting set sequences. A brute-force large-deviations rate function
//! and a handful of preset experiments on small spaces round it off.
//!
//! ```
//! use std::sync::Arc;
//! use frechet_sets::{build_space, frechet_mean, DiscreteMeasure, PointSet, SpaceSpec};
//!
//! let space = Arc::new(build_space(&SpaceSpec::CircleGrid { n: 8 }).unwrap());
//! let mu = DiscreteMeasure::uniform_on(space.clone(), &[0, 4]).unwrap();
//! let res = frechet_mean(&mu, &PointSet::full(8), 2.0).unwrap();
//! assert_eq!(res.argmin.as_slice(), &[2, 6]);
//! ```

pub mod cli;
pub mod equivalence;
pub mod error;
pub mod experiment;
pub mod frechet;
pub mod ldp;
pub mod limits;
pub mod measure;
pub mod metric;
pub mod pointset;
pub mod sampling;

pub use equivalence::{equivalence_classes, t2_slln_hypothesis, HypothesisReport, Partition};
pub use error::{Error, Result};
pub use frechet::{
    frechet_mean, in_restricted_voronoi_cell, in_voronoi_cell, medoid, peter_paul_constant,
    FrechetResult,
};
pub use ldp::{rate_function, tail_decay_diagnostic, RateResult, SimplexGrid, TailDecayReport};
pub use limits::{
    detect_convergence, hausdorff, kuratowski_limits, rho, ConvergenceReport, DetectorOptions,
    LimitEstimate, Mode,
};
pub use measure::{empirical_measure, relative_entropy, track_tau_wp, DiscreteMeasure};
pub use metric::{build_space, validate_metric, MetricSpace, SpaceSpec, Violation};
pub use pointset::PointSet;
pub use sampling::{
    replicate, run_slln, sample_iid, sample_markov, stationary_distribution, MarkovKernel,
    TrajectoryRecord,
};

/// Version tag written into every JSON report.
pub const SCHEMA_VERSION: u32 = 1;
