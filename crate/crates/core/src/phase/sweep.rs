//! One simulation per feasible `(m, Δm)` grid point.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::ops::RangeInclusive;

use rayon::prelude::*;

use crate::control::ControlParams;
use crate::engine::{simulate, EngineError, SimOptions};
use crate::topology::{seed_trains, LineTopology, TrainConfiguration};
use crate::Scalar;

use super::{
    binding_census, classify_phase, growth_rate, Classification, ClassifyOptions,
    GrowthRateEstimate, PhaseError, PhaseLabel,
};

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOptions<T> {
    /// Simulated periods per point.
    pub periods: usize,
    pub transient_fraction: f64,
    /// Offset between consecutive initial trains.
    pub stagger: T,
    pub classify: ClassifyOptions,
}

impl<T: Scalar> Default for SweepOptions<T> {
    fn default() -> Self {
        SweepOptions {
            periods: 500,
            transient_fraction: 0.3,
            stagger: T::zero(),
            classify: ClassifyOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhasePoint<T> {
    pub m: usize,
    pub dm: i64,
    /// Missing only when the simulation itself failed.
    pub estimate: Option<GrowthRateEstimate<T>>,
    pub classification: Option<Classification>,
    /// Why the point has no estimate or no label.
    pub error: Option<String>,
}

impl<T: Scalar> PhasePoint<T> {
    pub fn label(&self) -> Option<PhaseLabel> {
        self.classification.map(|c| c.label)
    }

    pub fn f0(&self) -> Option<T> {
        self.estimate.map(|e| e.f0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseDiagram<T> {
    /// Feasible points ordered by `(m, dm)`.
    pub points: Vec<PhasePoint<T>>,
}

impl<T: Scalar> PhaseDiagram<T> {
    pub fn point(&self, m: usize, dm: i64) -> Option<&PhasePoint<T>> {
        self.points.iter().find(|p| p.m == m && p.dm == dm)
    }

    pub fn labels(&self) -> BTreeSet<PhaseLabel> {
        self.points.iter().filter_map(PhasePoint::label).collect()
    }

    pub fn grid(&self) -> Vec<(usize, i64)> {
        self.points.iter().map(|p| (p.m, p.dm)).collect()
    }

    /// `m,dm,f0_tph,h0_s,phase,on_boundary,converged`, one row per feasible point.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,dm,f0_tph,h0_s,phase,on_boundary,converged\n");
        for p in &self.points {
            let (f0, h0, converged) = match &p.estimate {
                Some(e) => (
                    e.f0_per_hour().as_f64().to_string(),
                    e.h0.as_f64().to_string(),
                    e.converged.to_string(),
                ),
                None => (String::new(), String::new(), "false".to_string()),
            };
            let phase = p.label().map_or("unclassified", PhaseLabel::as_str);
            let edge = p.classification.is_some_and(|c| c.on_boundary);
            let _ = writeln!(out, "{},{},{f0},{h0},{phase},{edge},{converged}", p.m, p.dm);
        }
        out
    }
}

/// Simulate and classify one configuration. A deadlock is the zero-frequency
/// phase; other failures are recorded on the point.
pub fn evaluate_point<T: Scalar>(
    line: &LineTopology<T>,
    config: &TrainConfiguration,
    controls: &ControlParams<T>,
    options: &SweepOptions<T>,
) -> PhasePoint<T> {
    let mut point = PhasePoint {
        m: config.m(),
        dm: config.delta_m(line),
        estimate: None,
        classification: None,
        error: None,
    };
    let mut sim = SimOptions::periods(options.periods);
    sim.stagger = options.stagger;
    let table = match simulate(line, config, controls, &sim) {
        Ok(t) => t,
        Err(EngineError::Deadlock { .. }) => {
            point.estimate = Some(GrowthRateEstimate::stopped());
            point.classification = Some(Classification {
                label: PhaseLabel::IVa,
                on_boundary: false,
            });
            return point;
        }
        Err(e) => {
            point.error = Some(e.to_string());
            return point;
        }
    };
    let estimate = match growth_rate(&table, options.transient_fraction) {
        Ok(e) => e,
        Err(e) => {
            point.error = Some(e.to_string());
            return point;
        }
    };
    point.estimate = Some(estimate);
    let census = binding_census(line, config, &table, options.transient_fraction);
    match classify_phase(
        &estimate,
        &census,
        line,
        config,
        controls,
        &options.classify,
    ) {
        Ok(c) => point.classification = Some(c),
        Err(e) => point.error = Some(e.to_string()),
    }
    point
}

/// Sweep every feasible point of the grid. Points are evaluated in parallel on
/// the current rayon pool; the result does not depend on the pool size.
pub fn sweep<T: Scalar>(
    line: &LineTopology<T>,
    controls: &ControlParams<T>,
    m_range: RangeInclusive<usize>,
    dm_range: RangeInclusive<i64>,
    options: &SweepOptions<T>,
) -> Result<PhaseDiagram<T>, PhaseError> {
    let configs: Vec<TrainConfiguration> = m_range
        .flat_map(|m| dm_range.clone().map(move |dm| (m, dm)))
        .filter_map(|(m, dm)| seed_trains(line, m, dm).ok())
        .collect();
    if configs.is_empty() {
        return Err(PhaseError::EmptyGrid);
    }
    let points = configs
        .par_iter()
        .map(|cfg| evaluate_point(line, cfg, controls, options))
        .collect();
    Ok(PhaseDiagram { points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::topology::build_line;

    #[test]
    fn one_row_per_feasible_point() {
        let line: LineTopology<f64> = build_line(&fixtures::t9_description()).unwrap();
        let options = SweepOptions {
            periods: 60,
            ..SweepOptions::default()
        };
        let d = sweep(
            &line,
            &ControlParams::inactive(&line),
            0..=12,
            -3..=3,
            &options,
        )
        .unwrap();
        let feasible = (0..=12usize)
            .flat_map(|m| (-3..=3i64).map(move |dm| (m, dm)))
            .filter(|&(m, dm)| seed_trains(&line, m, dm).is_ok())
            .count();
        assert_eq!(d.points.len(), feasible);
        let csv = d.to_csv();
        assert_eq!(csv.lines().count(), feasible + 1);
        assert!(csv.starts_with(
            "m,dm,f0_tph,h0_s,phase,on_boundary,converged\n0,0,0,inf,IVa,false,true\n"
        ));
        assert!(d.grid().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn infeasible_grid() {
        let line: LineTopology<f64> = build_line(&fixtures::t9_description()).unwrap();
        let r = sweep(
            &line,
            &ControlParams::inactive(&line),
            0..=1,
            5..=6,
            &SweepOptions::default(),
        );
        assert_eq!(r, Err(PhaseError::EmptyGrid));
    }

    #[test]
    fn deadlock_is_stopped() {
        let line: LineTopology<f64> = build_line(&fixtures::t9_description()).unwrap();
        let cfg = seed_trains(&line, 1, 1).unwrap();
        let p = evaluate_point(
            &line,
            &cfg,
            &ControlParams::inactive(&line),
            &SweepOptions::default(),
        );
        assert_eq!(p.label(), Some(PhaseLabel::IVa));
        assert_eq!(p.f0(), Some(0.0));
    }
}
