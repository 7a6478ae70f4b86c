//! Train dynamics on a metro line with a junction.
//!
//! A line is a central part shared by two branches, discretized into segments
//! that hold at most one train. Trains obey run, dwell and safe-separation
//! constraints, dwell times follow the passenger demand, and downstream runs
//! compensate dwell extensions. The junction is served in strict alternation.
//!
//! The crate provides the departure-time recursion ([`engine`]), an
//! independent train-level event simulation ([`oracle`]), max-plus cycle
//! times for the demand-free case ([`maxplus`]) and the traffic phase diagram
//! over the number of trains and the branch imbalance ([`phase`]).

pub mod control;
pub mod engine;
pub mod fixtures;
pub mod maxplus;
pub mod oracle;
pub mod phase;
mod scalar;
pub mod topology;

pub use scalar::Scalar;

/// Double-precision instances of the generic types.
pub type Line = topology::LineTopology<f64>;
pub type Controls = control::ControlParams<f64>;
pub type Table = engine::DepartureTable<f64>;
pub type Matrix = maxplus::MaxPlusMatrix<f64>;
pub type Estimate = phase::GrowthRateEstimate<f64>;
pub type Diagram = phase::PhaseDiagram<f64>;
