//! Phase label of one grid point.
//!
//! The census decides the regime: a zero frequency is IV-a, a critical walk
//! confined to one part is the capacity plateau IV-b, forward arcs on every
//! traversed part are free flow (I), separation and junction arcs on every
//! traversed part are congestion (III), and one branch forward with the other
//! congested is the unbalanced regime (II).
//!
//! The suffix is always `a` on the side where branch 2 holds the surplus of
//! trains: the branch 1 circuit limits free flow, branch 2 limits congestion,
//! branch 1 runs free while branch 2 is congested. In free flow the limiting
//! circuit is the one with the larger nominal travel time per train, which is
//! what the [AG] line balances.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::control::ControlParams;
use crate::topology::{Branch, LineTopology, Part, TrainConfiguration};
use crate::Scalar;

use super::{BindingCensus, Family, GrowthRateEstimate, PhaseError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PhaseLabel {
    Ia,
    Ib,
    IIa,
    IIb,
    IIIa,
    IIIb,
    IVa,
    IVb,
}

impl PhaseLabel {
    pub const ALL: [PhaseLabel; 8] = [
        PhaseLabel::Ia,
        PhaseLabel::Ib,
        PhaseLabel::IIa,
        PhaseLabel::IIb,
        PhaseLabel::IIIa,
        PhaseLabel::IIIb,
        PhaseLabel::IVa,
        PhaseLabel::IVb,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PhaseLabel::Ia => "Ia",
            PhaseLabel::Ib => "Ib",
            PhaseLabel::IIa => "IIa",
            PhaseLabel::IIb => "IIb",
            PhaseLabel::IIIa => "IIIa",
            PhaseLabel::IIIb => "IIIb",
            PhaseLabel::IVa => "IVa",
            PhaseLabel::IVb => "IVb",
        }
    }

    /// Same regime on the other side of the imbalance; IV labels are their own mirror.
    pub fn mirrored(self) -> Self {
        match self {
            PhaseLabel::Ia => PhaseLabel::Ib,
            PhaseLabel::Ib => PhaseLabel::Ia,
            PhaseLabel::IIa => PhaseLabel::IIb,
            PhaseLabel::IIb => PhaseLabel::IIa,
            PhaseLabel::IIIa => PhaseLabel::IIIb,
            PhaseLabel::IIIb => PhaseLabel::IIIa,
            other => other,
        }
    }

    pub fn is_free_flow(self) -> bool {
        matches!(self, PhaseLabel::Ia | PhaseLabel::Ib)
    }

    pub fn is_congested(self) -> bool {
        matches!(self, PhaseLabel::IIIa | PhaseLabel::IIIb)
    }
}

impl fmt::Display for PhaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PhaseLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PhaseLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| format!("unknown phase label {s:?}"))
    }
}

/// Thresholds of the classification.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifyOptions {
    /// A family dominates a part when it holds at least this share of the
    /// part's critical arcs.
    pub dominance: f64,
    /// Relative tolerance under which the two circuits' travel times per
    /// train count as equal.
    pub tie_tolerance: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            dominance: 0.9,
            tie_tolerance: 1e-9,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Classification {
    pub label: PhaseLabel,
    /// Both sides of the a/b split are critical; the label then follows the
    /// sign of Δm, with Δm = 0 counted as `a`.
    pub on_boundary: bool,
}

/// Nominal travel time of each branch circuit (runs plus nominal dwells).
pub fn circuit_travel_times<T: Scalar>(
    line: &LineTopology<T>,
    controls: &ControlParams<T>,
) -> [T; 2] {
    Branch::BOTH.map(|b| {
        line.circuit(b).iter().fold(T::zero(), |acc, &j| {
            acc + line.segment(j).nominal_run_time + controls.nominal_dwell[j]
        })
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Status {
    Absent,
    Forward,
    Congested,
    Mixed,
}

fn status(census: &BindingCensus, part: Part, dominance: f64) -> Status {
    if census.part_total(part) == 0 {
        Status::Absent
    } else if census.share(part, Family::Forward) >= dominance {
        Status::Forward
    } else if census.share(part, Family::Backward) + census.share(part, Family::Junction)
        >= dominance
    {
        Status::Congested
    } else {
        Status::Mixed
    }
}

fn side(a_side: bool, b_side: bool, dm: i64) -> (bool, bool) {
    // (is_a, on_boundary)
    match (a_side, b_side) {
        (true, false) => (true, false),
        (false, true) => (false, false),
        _ => (dm >= 0, true),
    }
}

pub fn classify_phase<T: Scalar>(
    estimate: &GrowthRateEstimate<T>,
    census: &BindingCensus,
    line: &LineTopology<T>,
    config: &TrainConfiguration,
    controls: &ControlParams<T>,
    options: &ClassifyOptions,
) -> Result<Classification, PhaseError> {
    let dm = config.delta_m(line);
    let plain = |label| {
        Ok(Classification {
            label,
            on_boundary: false,
        })
    };
    if estimate.f0 <= T::zero() || config.m() == 0 {
        return plain(PhaseLabel::IVa);
    }
    let traversed: Vec<Part> = Part::ALL
        .into_iter()
        .filter(|&p| census.part_total(p) > 0)
        .collect();
    if traversed.len() <= 1 {
        return plain(PhaseLabel::IVb);
    }
    let st = |p| status(census, p, options.dominance);
    let (s1, s2) = (st(Part::Branch1), st(Part::Branch2));

    let free = traversed.iter().all(|&p| st(p) == Status::Forward);
    let congested = traversed.iter().all(|&p| st(p) == Status::Congested);
    let (label_a, label_b, is_a, on_boundary) = if free {
        let times = circuit_travel_times(line, controls);
        let counts = config.circuit_counts(line);
        // per-train travel time; a circuit with no train never limits
        let per_train = |b: Branch| {
            let n = counts[b.index()];
            (n > 0).then(|| times[b.index()] / T::of_usize(n))
        };
        let (t1, t2) = (per_train(Branch::One), per_train(Branch::Two));
        let (a_side, b_side) = match (t1, t2) {
            (Some(x), Some(y)) => {
                let tol = T::of(options.tie_tolerance) * x.max(y);
                (x >= y - tol, y >= x - tol)
            }
            (Some(_), None) => (true, false),
            (None, Some(_)) => (false, true),
            (None, None) => (true, true),
        };
        let (is_a, tie) = side(a_side, b_side, dm);
        (PhaseLabel::Ia, PhaseLabel::Ib, is_a, tie)
    } else if congested {
        let (is_a, tie) = side(s2 != Status::Absent, s1 != Status::Absent, dm);
        (PhaseLabel::IIIa, PhaseLabel::IIIb, is_a, tie)
    } else if s1 == Status::Forward && s2 == Status::Congested {
        (PhaseLabel::IIa, PhaseLabel::IIb, true, false)
    } else if s1 == Status::Congested && s2 == Status::Forward {
        (PhaseLabel::IIa, PhaseLabel::IIb, false, false)
    } else {
        return Err(PhaseError::Unclassifiable {
            reason: describe(census),
        });
    };
    Ok(Classification {
        label: if is_a { label_a } else { label_b },
        on_boundary,
    })
}

fn describe(census: &BindingCensus) -> String {
    Part::ALL
        .iter()
        .map(|&p| {
            format!(
                "{}: forward {:.2}, backward {:.2}, junction {:.2}",
                p.key(),
                census.share(p, Family::Forward),
                census.share(p, Family::Backward),
                census.share(p, Family::Junction),
            )
        })
        .collect::<Vec<_>>()
        .join("; ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::phase::{sweep, PhaseDiagram, SweepOptions};
    use crate::topology::build_line;

    fn t9_diagram() -> PhaseDiagram<f64> {
        let line: LineTopology<f64> = build_line(&fixtures::t9_description()).unwrap();
        let options = SweepOptions {
            periods: 200,
            ..SweepOptions::default()
        };
        sweep(
            &line,
            &ControlParams::inactive(&line),
            0..=12,
            -2..=2,
            &options,
        )
        .unwrap()
    }

    fn label(d: &PhaseDiagram<f64>, m: usize, dm: i64) -> PhaseLabel {
        d.point(m, dm).and_then(|p| p.label()).unwrap()
    }

    #[test]
    fn labels_round_trip() {
        for l in PhaseLabel::ALL {
            assert_eq!(l.to_string().parse::<PhaseLabel>(), Ok(l));
            assert_eq!(l.mirrored().mirrored(), l);
        }
        assert!("V".parse::<PhaseLabel>().is_err());
        assert_eq!(PhaseLabel::IVb.mirrored(), PhaseLabel::IVb);
    }

    #[test]
    fn desk_instance_without_demand() {
        let d = t9_diagram();
        assert_eq!(d.labels().len(), 8);
        assert_eq!(label(&d, 0, 0), PhaseLabel::IVa);
        assert_eq!(label(&d, 12, 0), PhaseLabel::IVa);
        assert_eq!(label(&d, 8, 0), PhaseLabel::IVb);
        assert_eq!(label(&d, 6, 2), PhaseLabel::IIa);
        assert_eq!(label(&d, 6, -2), PhaseLabel::IIb);
        for m in 2..=7 {
            for dm in [-1, 1] {
                if let Some(p) = d.point(m, dm) {
                    assert!(p.label().unwrap().is_free_flow(), "({m}, {dm})");
                }
            }
        }
        for dm in -1..=1 {
            assert!(label(&d, 9, dm).is_congested());
        }
        assert_eq!(label(&d, 9, 1), label(&d, 9, -1).mirrored());
    }

    #[test]
    fn equal_branches_tie() {
        let line: LineTopology<f64> = build_line(&fixtures::t9_description()).unwrap();
        let times = circuit_travel_times(&line, &ControlParams::inactive(&line));
        assert_eq!(times[0], times[1]);
        // ten runs of 60 s and five platforms at the 20 s minimum dwell
        assert_eq!(times[0], 10.0 * 60.0 + 5.0 * 20.0);
    }
}
