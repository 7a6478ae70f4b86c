//! Which constraint binds along the critical path of the steady regime.
//!
//! Every departure records the term that achieved its maximum. Following
//! these pointers backwards from the last period walks the longest path of
//! the precedence graph, which settles on a critical circuit. The arcs of the
//! older half of each walk are counted per part and constraint family.

use crate::engine::{Binding, DepartureTable, Event, Recurrence};
use crate::topology::{Branch, LineTopology, Part, TrainConfiguration};
use crate::Scalar;

/// Constraint family of one arc of the critical path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    /// Run from upstream plus dwell.
    Forward,
    /// Safe separation behind the train ahead.
    Backward,
    /// A branch tail waiting for the convergence: the train ahead came from
    /// the other branch.
    Junction,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Forward, Family::Backward, Family::Junction];

    fn index(self) -> usize {
        self as usize
    }
}

/// Arc counts per part and family over the steady part of the walks.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BindingCensus {
    /// `counts[part][family]`, parts in `Part::ALL` order.
    pub counts: [[usize; 3]; 3],
    /// Segments visited by the counted arcs.
    pub visited: Vec<bool>,
}

fn part_index(part: Part) -> usize {
    Part::ALL.iter().position(|&p| p == part).unwrap()
}

impl BindingCensus {
    pub fn count(&self, part: Part, family: Family) -> usize {
        self.counts[part_index(part)][family.index()]
    }

    pub fn part_total(&self, part: Part) -> usize {
        self.counts[part_index(part)].iter().sum()
    }

    pub fn total(&self) -> usize {
        Part::ALL.iter().map(|&p| self.part_total(p)).sum()
    }

    /// Share of `family` among the arcs in `part` (zero when the part is not visited).
    pub fn share(&self, part: Part, family: Family) -> f64 {
        let total = self.part_total(part);
        if total == 0 {
            0.0
        } else {
            self.count(part, family) as f64 / total as f64
        }
    }

    /// Whether the counted arcs traverse `branch`.
    pub fn traverses(&self, branch: Branch) -> bool {
        self.part_total(branch.part()) > 0
    }
}

/// Walk the binding pointers from every departure of the last period down to
/// the first retained period and count the older half of each walk.
pub fn binding_census<T: Scalar>(
    line: &LineTopology<T>,
    config: &TrainConfiguration,
    table: &DepartureTable<T>,
    transient_fraction: f64,
) -> BindingCensus {
    let mut census = BindingCensus {
        visited: vec![false; line.len()],
        ..BindingCensus::default()
    };
    if table.is_empty() {
        return census;
    }
    let rec = Recurrence::new(line, config);
    let periods = table.periods as i64;
    let floor = (transient_fraction * table.periods as f64).floor() as i64 + 1;
    let tails = [line.branch_tail(Branch::One), line.branch_tail(Branch::Two)];

    for j in 0..line.len() {
        for slot in 0..rec.slots(j) {
            let mut ev = Event {
                segment: j,
                count: rec.count_of(j, periods, slot),
            };
            let mut walk: Vec<(usize, Family)> = Vec::new();
            loop {
                if rec.period_of(ev).0 < floor {
                    break;
                }
                let binding = table.segments[ev.segment].binding[(ev.count - 1) as usize];
                let (next, family) = match binding {
                    Binding::Initial => break,
                    Binding::Forward => (rec.forward_source(ev), Family::Forward),
                    Binding::Backward if tails.contains(&ev.segment) => {
                        (rec.backward_target(ev), Family::Junction)
                    }
                    Binding::Backward => (rec.backward_target(ev), Family::Backward),
                };
                walk.push((ev.segment, family));
                match next {
                    Some(n) => ev = n,
                    None => break,
                }
            }
            for &(seg, family) in &walk[walk.len() / 2..] {
                census.counts[part_index(line.segment(seg).part)][family.index()] += 1;
                census.visited[seg] = true;
            }
        }
    }
    census
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::ControlParams;
    use crate::engine::{simulate, SimOptions};
    use crate::fixtures;
    use crate::topology::{build_line, seed_trains, Part};

    fn census(m: usize, dm: i64) -> BindingCensus {
        let line: LineTopology<f64> = build_line(&fixtures::t9_description()).unwrap();
        let cfg = seed_trains(&line, m, dm).unwrap();
        let table = simulate(
            &line,
            &cfg,
            &ControlParams::inactive(&line),
            &SimOptions::periods(100),
        )
        .unwrap();
        binding_census(&line, &cfg, &table, 0.3)
    }

    #[test]
    fn few_trains_run_freely() {
        let c = census(3, 1);
        assert!(c.total() > 0);
        // the critical walk follows one circuit, all of it run-and-dwell arcs
        for part in Part::ALL.into_iter().filter(|&p| c.part_total(p) > 0) {
            assert_eq!(c.share(part, Family::Forward), 1.0, "{part}");
        }
        assert!(c.part_total(Part::Central) > 0);
        assert!(
            c.traverses(Branch::One) != c.traverses(Branch::Two),
            "{c:?}"
        );
    }

    #[test]
    fn dense_line_waits() {
        let c = census(10, 0);
        let waiting: usize = Part::ALL
            .iter()
            .map(|&p| c.count(p, Family::Backward) + c.count(p, Family::Junction))
            .sum();
        assert!(waiting * 10 >= c.total() * 9, "{c:?}");
    }

    #[test]
    fn empty_table_counts_nothing() {
        let line: LineTopology<f64> = build_line(&fixtures::t9_description()).unwrap();
        let cfg = seed_trains(&line, 0, 0).unwrap();
        let c = binding_census(&line, &cfg, &DepartureTable::empty(&line), 0.3);
        assert_eq!(c.total(), 0);
        assert_eq!(c.share(Part::Central, Family::Forward), 0.0);
    }
}
