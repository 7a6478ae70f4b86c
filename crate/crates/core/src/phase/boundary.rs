//! The [AG] and [JD] boundaries and scenario comparison.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::Scalar;

use super::{PhaseDiagram, PhaseError, PhaseLabel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryKind {
    /// Between the free-flow phases Ia and Ib.
    Ag,
    /// Between the congested phases IIIa and IIIb.
    Jd,
}

impl BoundaryKind {
    pub fn name(self) -> &'static str {
        match self {
            BoundaryKind::Ag => "AG",
            BoundaryKind::Jd => "JD",
        }
    }

    /// `(a, b)` labels on either side.
    pub fn labels(self) -> (PhaseLabel, PhaseLabel) {
        match self {
            BoundaryKind::Ag => (PhaseLabel::Ia, PhaseLabel::Ib),
            BoundaryKind::Jd => (PhaseLabel::IIIa, PhaseLabel::IIIb),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub r_squared: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Boundary {
    pub kind: BoundaryKind,
    /// One `(m, Δm)` vertex per column of the grid that the boundary crosses.
    pub polyline: Vec<(f64, f64)>,
    /// Least-squares `Δm = intercept + slope·m`; `None` below two columns.
    pub fit: Option<LineFit>,
}

impl Boundary {
    /// Position of the boundary in column `m`.
    pub fn at(&self, m: f64) -> Option<f64> {
        self.polyline.iter().find(|p| p.0 == m).map(|p| p.1)
    }
}

/// Vertex per column: the mean Δm of the points on the boundary and of the
/// midpoints between adjacent points of opposite sides.
pub fn extract_boundary<T: Scalar>(
    diagram: &PhaseDiagram<T>,
    kind: BoundaryKind,
) -> Result<Boundary, PhaseError> {
    let (la, lb) = kind.labels();
    let present = diagram.labels();
    if !present.contains(&la) || !present.contains(&lb) {
        return Err(PhaseError::MissingRegion {
            boundary: kind.name(),
        });
    }
    let mut columns: BTreeMap<usize, Vec<(i64, PhaseLabel, bool)>> = BTreeMap::new();
    for p in &diagram.points {
        if let Some(c) = p.classification {
            columns
                .entry(p.m)
                .or_default()
                .push((p.dm, c.label, c.on_boundary));
        }
    }
    let mut polyline = Vec::new();
    for (m, mut col) in columns {
        col.sort_by_key(|c| c.0);
        let mut marks: Vec<f64> = col
            .iter()
            .filter(|c| c.2 && (c.1 == la || c.1 == lb))
            .map(|c| c.0 as f64)
            .collect();
        for w in col.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let opposite = (lo.1 == la && hi.1 == lb) || (lo.1 == lb && hi.1 == la);
            if hi.0 == lo.0 + 1 && opposite && !lo.2 && !hi.2 {
                marks.push((lo.0 + hi.0) as f64 / 2.0);
            }
        }
        if !marks.is_empty() {
            polyline.push((m as f64, marks.iter().sum::<f64>() / marks.len() as f64));
        }
    }
    let fit = line_fit(&polyline);
    Ok(Boundary {
        kind,
        polyline,
        fit,
    })
}

/// Both boundaries; fails when either pair of regions is missing.
pub fn extract_boundaries<T: Scalar>(
    diagram: &PhaseDiagram<T>,
) -> Result<(Boundary, Boundary), PhaseError> {
    Ok((
        extract_boundary(diagram, BoundaryKind::Ag)?,
        extract_boundary(diagram, BoundaryKind::Jd)?,
    ))
}

fn line_fit(points: &[(f64, f64)]) -> Option<LineFit> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Some(LineFit {
        intercept,
        slope,
        r_squared,
    })
}

/// `name,m,dm` rows for each boundary vertex.
pub fn boundaries_csv(boundaries: &[&Boundary]) -> String {
    let mut out = String::from("name,m,dm\n");
    for b in boundaries {
        for (m, dm) in &b.polyline {
            let _ = writeln!(out, "{},{m},{dm}", b.kind.name());
        }
    }
    out
}

/// Movement of a boundary between two diagrams, in grid cells of Δm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryShift {
    /// Columns where both diagrams have a vertex.
    pub columns: usize,
    /// Mean of `variant - base`.
    pub mean: f64,
    /// Largest `|variant - base|`.
    pub max_abs: f64,
}

pub fn boundary_shift(base: &Boundary, variant: &Boundary) -> Option<BoundaryShift> {
    let deltas: Vec<f64> = base
        .polyline
        .iter()
        .filter_map(|&(m, dm)| variant.at(m).map(|v| v - dm))
        .collect();
    if deltas.is_empty() {
        return None;
    }
    Some(BoundaryShift {
        columns: deltas.len(),
        mean: deltas.iter().sum::<f64>() / deltas.len() as f64,
        max_abs: deltas.iter().fold(0.0, |acc, d| acc.max(d.abs())),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointDiff {
    pub m: usize,
    pub dm: i64,
    /// Variant minus base, trains per hour; `None` when either lacks an estimate.
    pub f0_delta_tph: Option<f64>,
    pub base: Option<PhaseLabel>,
    pub variant: Option<PhaseLabel>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioDiff {
    pub points: Vec<PointDiff>,
    /// `None` when the boundary is missing or shares no column in one diagram.
    pub ag: Option<BoundaryShift>,
    pub jd: Option<BoundaryShift>,
}

impl ScenarioDiff {
    /// Boundaries whose vertices moved.
    pub fn moved(&self) -> Vec<BoundaryKind> {
        [(BoundaryKind::Ag, self.ag), (BoundaryKind::Jd, self.jd)]
            .into_iter()
            .filter(|(_, s)| s.is_some_and(|s| s.max_abs > 0.0))
            .map(|(k, _)| k)
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.moved().is_empty()
            && self
                .points
                .iter()
                .all(|p| p.base == p.variant && p.f0_delta_tph.is_none_or(|d| d == 0.0))
    }

    /// `m,dm,f0_delta_tph,base_phase,variant_phase`, one row per point.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,dm,f0_delta_tph,base_phase,variant_phase\n");
        let label = |l: Option<PhaseLabel>| l.map_or("unclassified", PhaseLabel::as_str);
        for p in &self.points {
            let delta = p.f0_delta_tph.map_or(String::new(), |d| d.to_string());
            let _ = writeln!(
                out,
                "{},{},{delta},{},{}",
                p.m,
                p.dm,
                label(p.base),
                label(p.variant)
            );
        }
        out
    }

    pub fn shifts_csv(&self) -> String {
        let mut out = String::from("name,columns,mean_shift_dm,max_abs_shift_dm\n");
        for (kind, shift) in [(BoundaryKind::Ag, self.ag), (BoundaryKind::Jd, self.jd)] {
            match shift {
                Some(s) => {
                    let _ = writeln!(
                        out,
                        "{},{},{},{}",
                        kind.name(),
                        s.columns,
                        s.mean,
                        s.max_abs
                    );
                }
                None => {
                    let _ = writeln!(out, "{},0,,", kind.name());
                }
            }
        }
        out
    }
}

pub fn compare_scenarios<T: Scalar>(
    base: &PhaseDiagram<T>,
    variant: &PhaseDiagram<T>,
) -> Result<ScenarioDiff, PhaseError> {
    if base.grid() != variant.grid() {
        return Err(PhaseError::GridMismatch);
    }
    let points = base
        .points
        .iter()
        .zip(&variant.points)
        .map(|(b, v)| PointDiff {
            m: b.m,
            dm: b.dm,
            f0_delta_tph: b
                .estimate
                .zip(v.estimate)
                .map(|(eb, ev)| (ev.f0_per_hour() - eb.f0_per_hour()).as_f64()),
            base: b.label(),
            variant: v.label(),
        })
        .collect();
    let shift = |kind| {
        let b = extract_boundary(base, kind).ok()?;
        let v = extract_boundary(variant, kind).ok()?;
        boundary_shift(&b, &v)
    };
    Ok(ScenarioDiff {
        points,
        ag: shift(BoundaryKind::Ag),
        jd: shift(BoundaryKind::Jd),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::{Classification, GrowthRateEstimate, PhasePoint};

    fn point(m: usize, dm: i64, label: PhaseLabel, on_boundary: bool, f0: f64) -> PhasePoint<f64> {
        let mut estimate = GrowthRateEstimate::stopped();
        estimate.f0 = f0;
        PhasePoint {
            m,
            dm,
            estimate: Some(estimate),
            classification: Some(Classification { label, on_boundary }),
            error: None,
        }
    }

    /// Free flow split at Δm = m/2 - 0.5, congested split on a tie at Δm = 0.
    fn diagram() -> PhaseDiagram<f64> {
        let mut points = Vec::new();
        for m in [2usize, 4] {
            for dm in -2..=2 {
                let label = if (dm as f64) > m as f64 / 2.0 - 1.0 {
                    PhaseLabel::Ia
                } else {
                    PhaseLabel::Ib
                };
                points.push(point(m, dm, label, false, 10.0));
            }
        }
        for dm in -1..=1 {
            let label = if dm >= 0 {
                PhaseLabel::IIIa
            } else {
                PhaseLabel::IIIb
            };
            points.push(point(6, dm, label, dm == 0, 5.0));
        }
        PhaseDiagram { points }
    }

    #[test]
    fn vertices_and_fit() {
        let d = diagram();
        let (ag, jd) = extract_boundaries(&d).unwrap();
        assert_eq!(ag.polyline, vec![(2.0, 0.5), (4.0, 1.5)]);
        let fit = ag.fit.unwrap();
        assert!((fit.slope - 0.5).abs() < 1e-12);
        assert!((fit.intercept + 0.5).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(jd.polyline, vec![(6.0, 0.0)]);
        assert_eq!(jd.fit, None);
        assert_eq!(ag.at(4.0), Some(1.5));
        assert_eq!(
            boundaries_csv(&[&ag, &jd]),
            "name,m,dm\nAG,2,0.5\nAG,4,1.5\nJD,6,0\n"
        );
    }

    #[test]
    fn missing_region() {
        let mut d = diagram();
        d.points.retain(|p| p.label() != Some(PhaseLabel::IIIb));
        assert_eq!(
            extract_boundary(&d, BoundaryKind::Jd),
            Err(PhaseError::MissingRegion { boundary: "JD" })
        );
        assert!(extract_boundary(&d, BoundaryKind::Ag).is_ok());
    }

    #[test]
    fn identical_diagrams_do_not_differ() {
        let d = diagram();
        let diff = compare_scenarios(&d, &d).unwrap();
        assert!(diff.is_zero());
        assert_eq!(diff.ag.unwrap().max_abs, 0.0);
    }

    #[test]
    fn shifted_boundary_is_measured() {
        let base = diagram();
        let mut variant = diagram();
        // move the free-flow split of column 4 down by one cell
        for p in variant.points.iter_mut().filter(|p| p.m == 4 && p.dm == 1) {
            p.classification = Some(Classification {
                label: PhaseLabel::Ia,
                on_boundary: false,
            });
            p.estimate.as_mut().unwrap().f0 = 12.0;
        }
        let diff = compare_scenarios(&base, &variant).unwrap();
        let ag = diff.ag.unwrap();
        assert_eq!(ag.columns, 2);
        assert_eq!(ag.max_abs, 1.0);
        assert_eq!(ag.mean, -0.5);
        assert_eq!(diff.moved(), vec![BoundaryKind::Ag]);
        let changed: Vec<&PointDiff> = diff.points.iter().filter(|p| p.base != p.variant).collect();
        assert_eq!(changed.len(), 1);
        assert_eq!(changed[0].f0_delta_tph, Some(2.0 * 3600.0));
    }

    #[test]
    fn grids_must_match() {
        let base = diagram();
        let mut other = diagram();
        other.points.pop();
        assert_eq!(
            compare_scenarios(&base, &other),
            Err(PhaseError::GridMismatch)
        );
    }
}
