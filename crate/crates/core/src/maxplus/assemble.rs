//! First-order max-plus system of the demand-free dynamics.
//!
//! With constant run and dwell times the recursion is max-plus linear in
//! the period index: `x(n) = A0 x(n) ⊕ A1 x(n-1)` where `x(n)` holds the
//! departures of period n (two per central segment, one per branch segment).
//! Same-period arcs are acyclic unless the line is deadlocked, so
//! `x(n) = A0* A1 x(n-1)`. Nodes whose previous-period value is never read
//! are dropped, leaving a square matrix whose cycle time is the duration of a
//! period, i.e. the branch headway (twice the central headway).

use super::{MaxPlusError, MaxPlusMatrix};
use crate::engine::{Event, Recurrence};
use crate::topology::{LineTopology, TrainConfiguration};
use crate::Scalar;

#[derive(Clone, Debug)]
pub struct AssembledSystem<T> {
    pub matrix: MaxPlusMatrix<T>,
    /// `(segment, slot)` of every matrix row.
    pub nodes: Vec<(usize, i64)>,
}

/// Build the period-to-period matrix for a line without demand.
pub fn assemble_matrix<T: Scalar>(
    line: &LineTopology<T>,
    config: &TrainConfiguration,
) -> Result<AssembledSystem<T>, MaxPlusError> {
    if let Some(seg) = line
        .segments()
        .iter()
        .find(|s| s.platform.is_some_and(|p| p.arrival_rate > T::zero()))
    {
        return Err(MaxPlusError::DemandNotZero { segment: seg.id });
    }
    if config.m() == 0 {
        return Err(MaxPlusError::NotStronglyConnected);
    }
    let rec = Recurrence::new(line, config);
    let order = rec.period_order().map_err(|_| MaxPlusError::Deadlock)?;
    let all: Vec<(usize, i64)> = (0..line.len())
        .flat_map(|j| (0..rec.slots(j)).map(move |s| (j, s)))
        .collect();
    let size = all.len();
    let index = |ev: Event| {
        let (_, slot) = rec.period_of(ev);
        all.iter().position(|&n| n == (ev.segment, slot)).unwrap()
    };

    const PROBE: i64 = 3;
    let mut same = MaxPlusMatrix::epsilon(size)?;
    let mut previous = MaxPlusMatrix::epsilon(size)?;
    for (row, &(j, slot)) in all.iter().enumerate() {
        let ev = Event {
            segment: j,
            count: rec.count_of(j, PROBE, slot),
        };
        let seg = line.segment(j);
        let dwell = seg.platform.map_or(T::zero(), |p| p.min_dwell);
        let mut arcs = Vec::new();
        if let Some(src) = rec.forward_source(ev) {
            arcs.push((src, seg.nominal_run_time + dwell));
        }
        if let Some(dst) = rec.backward_target(ev) {
            arcs.push((dst, line.segment(dst.segment).safe_separation_time));
        }
        for (other, w) in arcs {
            let target = match rec.period_of(other).0 - PROBE {
                0 => &mut same,
                -1 => &mut previous,
                d => unreachable!("recursion looks back {d} periods"),
            };
            target.raise(row, index(other), w);
        }
    }

    // A0* A1 row by row in evaluation order
    let mut closure = MaxPlusMatrix::epsilon(size)?;
    for &(j, slot) in &order {
        let row = all.iter().position(|&n| n == (j, slot)).unwrap();
        for col in 0..size {
            if let Some(w) = previous.get(row, col) {
                closure.raise(row, col, w);
            }
        }
        for mid in 0..size {
            let Some(w) = same.get(row, mid) else {
                continue;
            };
            for col in 0..size {
                if let Some(x) = closure.get(mid, col) {
                    closure.raise(row, col, w + x);
                }
            }
        }
    }
    let kept: Vec<usize> = (0..size)
        .filter(|&c| (0..size).any(|r| closure.get(r, c).is_some()))
        .collect();
    Ok(AssembledSystem {
        matrix: closure.submatrix(&kept)?,
        nodes: kept.into_iter().map(|i| all[i]).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::ControlParams;
    use crate::engine::{simulate, SimOptions};
    use crate::fixtures;
    use crate::maxplus::{howard, karp};
    use crate::topology::{build_line, seed_trains};

    fn t9() -> LineTopology<f64> {
        build_line(&fixtures::t9_description()).unwrap()
    }

    #[test]
    fn two_trains_take_one_circuit_per_period() {
        let line = t9();
        let cfg = seed_trains(&line, 2, 0).unwrap();
        let sys = assemble_matrix(&line, &cfg).unwrap();
        assert_eq!(sys.matrix.dim(), sys.nodes.len());
        // ten runs of 60 s and five 20 s dwells
        assert_eq!(karp(&sys.matrix).unwrap(), 700.0);
        assert_eq!(howard(&sys.matrix).unwrap(), 700.0);

        let table = simulate(
            &line,
            &cfg,
            &ControlParams::inactive(&line),
            &SimOptions::periods(20),
        )
        .unwrap();
        let j = line.branch_head(crate::topology::Branch::One);
        assert_eq!(table.departure(j, 20) - table.departure(j, 19), 700.0);
    }

    #[test]
    fn demand_is_rejected() {
        let line: LineTopology<f64> = build_line(&fixtures::t9_with_demand(0.1, 0.0, 0.0)).unwrap();
        let cfg = seed_trains(&line, 2, 0).unwrap();
        assert!(matches!(
            assemble_matrix(&line, &cfg),
            Err(MaxPlusError::DemandNotZero { .. })
        ));
    }

    #[test]
    fn degenerate_configurations() {
        let line = t9();
        let empty = seed_trains(&line, 0, 0).unwrap();
        assert_eq!(
            assemble_matrix(&line, &empty).err(),
            Some(MaxPlusError::NotStronglyConnected)
        );
        let full = seed_trains(&line, 12, 0).unwrap();
        assert_eq!(
            assemble_matrix(&line, &full).err(),
            Some(MaxPlusError::Deadlock)
        );
    }
}
