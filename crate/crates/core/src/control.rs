//! Dwell-time and run-time control laws.
//!
//! Dwell times cover the exchange of the passengers accumulated since the
//! previous departure, `(lambda / alpha) * interval`, clamped to the platform
//! bounds. A dwell longer than the platform's nominal dwell is compensated by
//! shortening the same train's following runs, down to their minimum run
//! times, until the next platform is reached.

use thiserror::Error;

use crate::topology::{LineTopology, PlatformParams, Segment};
use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("accumulation interval {0} is negative")]
    NegativeInterval(f64),
    #[error("reference headway must be finite and non-negative")]
    BadReferenceHeadway,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DwellOutcome<T> {
    pub dwell: T,
    /// Dwell beyond the nominal dwell, never negative.
    pub extension: T,
    /// The maximum dwell bound was hit.
    pub saturated: bool,
}

/// Demand-dependent dwell at `platform` after `interval` seconds of accumulation.
pub fn dwell_time<T: Scalar>(
    platform: &PlatformParams<T>,
    interval: T,
    nominal_dwell: T,
) -> Result<DwellOutcome<T>, ControlError> {
    if interval < T::zero() {
        return Err(ControlError::NegativeInterval(interval.as_f64()));
    }
    let raw = platform.demand_ratio() * interval;
    let saturated = raw >= platform.max_dwell && platform.max_dwell > platform.min_dwell;
    let dwell = raw.max(platform.min_dwell).min(platform.max_dwell);
    Ok(DwellOutcome {
        dwell,
        extension: (dwell - nominal_dwell).max(T::zero()),
        saturated,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunOutcome<T> {
    pub run: T,
    /// Extension still to be absorbed downstream.
    pub residual: T,
}

/// Run time of `segment` for a train still carrying `upstream_extension`
/// seconds of dwell extension.
pub fn controlled_run_time<T: Scalar>(
    segment: &Segment<T>,
    upstream_extension: T,
) -> RunOutcome<T> {
    let ext = upstream_extension.max(T::zero());
    let run = segment.min_run_time.max(segment.nominal_run_time - ext);
    let applied = segment.nominal_run_time - run;
    RunOutcome {
        run,
        residual: (ext - applied).max(T::zero()),
    }
}

/// Per-line control settings.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlParams<T> {
    /// Nominal dwell per segment (zero where there is no platform).
    pub nominal_dwell: Vec<T>,
    /// `nominal_run_time - min_run_time` per segment.
    pub margin: Vec<T>,
    pub reference_headway: T,
    /// When false every run takes its nominal time.
    pub compensation: bool,
}

impl<T: Scalar> ControlParams<T> {
    /// Nominal dwell is the clamped dwell of a train arriving one reference
    /// headway after its predecessor left.
    pub fn new(line: &LineTopology<T>, reference_headway: T) -> Result<Self, ControlError> {
        if !reference_headway.is_finite() || reference_headway < T::zero() {
            return Err(ControlError::BadReferenceHeadway);
        }
        let nominal_dwell = line
            .segments()
            .iter()
            .map(|s| match &s.platform {
                Some(p) => (p.demand_ratio() * reference_headway)
                    .max(p.min_dwell)
                    .min(p.max_dwell),
                None => T::zero(),
            })
            .collect();
        Ok(ControlParams {
            nominal_dwell,
            margin: line.segments().iter().map(|s| s.margin()).collect(),
            reference_headway,
            compensation: true,
        })
    }

    /// No run-time compensation; nominal dwell at the lower bound.
    pub fn inactive(line: &LineTopology<T>) -> Self {
        let mut params = Self::new(line, T::zero()).expect("zero headway is valid");
        params.compensation = false;
        params
    }
}
