//! Traffic phases over the number of trains and the branch imbalance.

mod boundary;
mod census;
mod classify;
mod growth;
mod sweep;

use thiserror::Error;

pub use boundary::{
    boundaries_csv, boundary_shift, compare_scenarios, extract_boundaries, extract_boundary,
    Boundary, BoundaryKind, BoundaryShift, LineFit, PointDiff, ScenarioDiff,
};
pub use census::{binding_census, BindingCensus, Family};
pub use classify::{
    circuit_travel_times, classify_phase, Classification, ClassifyOptions, PhaseLabel,
};
pub use growth::{growth_rate, growth_rate_with_tolerance, GrowthRateEstimate, DEFAULT_TOLERANCE};
pub use sweep::{evaluate_point, sweep, PhaseDiagram, PhasePoint, SweepOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhaseError {
    #[error("only {retained} counts left after the transient cut, need {need}")]
    InsufficientData { retained: usize, need: usize },
    #[error("transient fraction {0} is outside [0, 1)")]
    BadTransient(f64),
    #[error("no constraint family dominates the critical path ({reason})")]
    Unclassifiable { reason: String },
    #[error("the grid has no feasible point")]
    EmptyGrid,
    #[error("the diagram lacks one of the regions on either side of [{boundary}]")]
    MissingRegion { boundary: &'static str },
    #[error("the diagrams are not on the same grid")]
    GridMismatch,
}
