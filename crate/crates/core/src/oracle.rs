//! Train-by-train event simulation of the same line.
//!
//! Trains are entities that move from segment to segment through a
//! time-ordered event queue. Nothing here uses departure counts: a train
//! leaves when its dwell is over, the next segment on its own route is empty
//! and its separation time has elapsed, and, at the convergence, when it is
//! its branch's turn. Every train keeps the branch circuit it was assigned at
//! the start. The result must match [`crate::engine::simulate`] exactly.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::control::{controlled_run_time, dwell_time, ControlParams};
use crate::engine::{demand_origin, Binding, DepartureTable, EngineError, SimOptions};
use crate::topology::{Branch, LineTopology, Part, TrainConfiguration};
use crate::Scalar;

#[derive(Clone, Debug)]
struct Train<T> {
    route: Branch,
    segment: usize,
    arrival: T,
    dwell: T,
    residual: T,
    /// Set once the dwell is over and the train waits to leave.
    ready_at: Option<T>,
}

#[derive(Clone, Debug, Default)]
struct Slot<T> {
    occupant: Option<usize>,
    reserved: bool,
    last_vacated: Option<T>,
}

#[derive(Clone, Copy, Debug)]
enum Kind<T> {
    Ready {
        train: usize,
    },
    Depart {
        train: usize,
        to: usize,
        binding: Binding,
        time: T,
    },
}

struct Scheduled<T> {
    time: T,
    seq: u64,
    kind: Kind<T>,
}

impl<T: Scalar> PartialEq for Scheduled<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: Scalar> Eq for Scheduled<T> {}

impl<T: Scalar> PartialOrd for Scheduled<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Scalar> Ord for Scheduled<T> {
    // reversed: BinaryHeap is a max-heap and we want the earliest event
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .partial_cmp(&self.time)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct World<'a, T: Scalar> {
    line: &'a LineTopology<T>,
    controls: &'a ControlParams<T>,
    origin: T,
    trains: Vec<Train<T>>,
    slots: Vec<Slot<T>>,
    turn: Branch,
    queue: BinaryHeap<Scheduled<T>>,
    seq: u64,
    table: DepartureTable<T>,
    initial: Vec<bool>,
}

impl<T: Scalar> World<'_, T> {
    fn push(&mut self, time: T, kind: Kind<T>) {
        self.seq += 1;
        self.queue.push(Scheduled {
            time,
            seq: self.seq,
            kind,
        });
    }

    /// Dwell at the train's current segment after arriving at `arrival`.
    fn arrive(&mut self, train: usize, arrival: T, carried: T) -> Result<(), EngineError> {
        let j = self.trains[train].segment;
        let (dwell, residual) = match &self.line.segment(j).platform {
            Some(platform) => {
                let previous = self.slots[j].last_vacated.unwrap_or(self.origin);
                let out = dwell_time(platform, arrival - previous, self.controls.nominal_dwell[j])?;
                (out.dwell, out.extension)
            }
            None => (T::zero(), carried),
        };
        let t = &mut self.trains[train];
        t.arrival = arrival;
        t.dwell = dwell;
        t.residual = residual;
        let ready = arrival + dwell;
        self.push(ready, Kind::Ready { train });
        Ok(())
    }

    fn next_segment(&self, train: usize) -> usize {
        let t = &self.trains[train];
        self.line.successor_on(t.segment, t.route)
    }

    /// Start the departure of the train in `segment` if it may go.
    fn try_leave(&mut self, segment: usize) {
        let Some(train) = self.slots[segment].occupant else {
            return;
        };
        let Some(ready) = self.trains[train].ready_at else {
            return;
        };
        let to = self.next_segment(train);
        if to == self.line.convergence() && self.trains[train].route != self.turn {
            return;
        }
        let next = &self.slots[to];
        if next.occupant.is_some() || next.reserved {
            return;
        }
        let clear = next
            .last_vacated
            .map(|v| v + self.line.segment(to).safe_separation_time);
        let (time, binding) = match clear {
            Some(c) if c > ready => (c, Binding::Backward),
            _ => {
                let first =
                    self.initial[segment] && self.table.segments[segment].departure.is_empty();
                (
                    ready,
                    if first {
                        Binding::Initial
                    } else {
                        Binding::Forward
                    },
                )
            }
        };
        self.slots[to].reserved = true;
        self.trains[train].ready_at = None;
        if to == self.line.convergence() {
            self.turn = self.turn.other();
        }
        self.push(
            time,
            Kind::Depart {
                train,
                to,
                binding,
                time,
            },
        );
    }

    fn feeders(&self, segment: usize) -> Vec<usize> {
        if segment == self.line.convergence() {
            Branch::BOTH
                .iter()
                .map(|&b| self.line.branch_tail(b))
                .collect()
        } else {
            vec![self.line.predecessor_on(segment, Branch::One)]
        }
    }

    fn depart(
        &mut self,
        train: usize,
        to: usize,
        binding: Binding,
        time: T,
    ) -> Result<(), EngineError> {
        let from = self.trains[train].segment;
        let t = &self.trains[train];
        let h = &mut self.table.segments[from];
        h.arrival.push(t.arrival);
        h.dwell.push(t.dwell);
        h.departure.push(time);
        h.binding.push(binding);

        self.slots[from].occupant = None;
        self.slots[from].last_vacated = Some(time);

        let seg = self.line.segment(to);
        let (run, carried) = if self.controls.compensation {
            let out = controlled_run_time(seg, self.trains[train].residual);
            (out.run, out.residual)
        } else {
            (seg.nominal_run_time, T::zero())
        };
        self.slots[to].reserved = false;
        self.slots[to].occupant = Some(train);
        self.trains[train].segment = to;
        self.arrive(train, time + run, carried)?;

        for f in self.feeders(from) {
            self.try_leave(f);
        }
        Ok(())
    }
}

/// Event-queue simulation with the same output shape as the recursion.
pub fn entity_oracle_simulate<T: Scalar>(
    line: &LineTopology<T>,
    config: &TrainConfiguration,
    controls: &ControlParams<T>,
    options: &SimOptions<T>,
) -> Result<DepartureTable<T>, EngineError> {
    if options.periods == 0 {
        return Err(EngineError::NoCounts);
    }
    let mut table = DepartureTable::<T>::empty(line);
    if config.m() == 0 {
        return Ok(table);
    }
    let n = line.len();
    if config.occupancy().len() != n {
        return Err(EngineError::ConfigMismatch {
            expected: n,
            got: config.occupancy().len(),
        });
    }
    let ready = options.ready_times(config);
    let routes = config.central_routes(line);

    let mut world = World {
        line,
        controls,
        origin: demand_origin(config, &ready),
        trains: Vec::new(),
        slots: vec![Slot::default(); n],
        turn: config.first_branch(),
        queue: BinaryHeap::new(),
        seq: 0,
        table: DepartureTable::empty(line),
        initial: config.occupancy().to_vec(),
    };
    for j in (0..n).filter(|&j| config.is_occupied(j)) {
        let route = match line.segment(j).part.branch() {
            Some(b) => b,
            None => {
                routes
                    .iter()
                    .find(|r| r.0 == j)
                    .expect("central train has a route")
                    .1
            }
        };
        let id = world.trains.len();
        world.trains.push(Train {
            route,
            segment: j,
            arrival: ready[j],
            dwell: T::zero(),
            residual: T::zero(),
            ready_at: None,
        });
        world.slots[j].occupant = Some(id);
        world.arrive(id, ready[j], T::zero())?;
    }

    let target = |j: usize| {
        options.periods
            * if line.segment(j).part == Part::Central {
                2
            } else {
                1
            }
    };
    let done = |w: &World<T>| (0..n).all(|j| w.table.segments[j].departure.len() >= target(j));
    while !done(&world) {
        let Some(ev) = world.queue.pop() else {
            let mut cycle: Vec<usize> = world.trains.iter().map(|t| t.segment).collect();
            cycle.sort_unstable();
            return Err(EngineError::Deadlock { cycle });
        };
        match ev.kind {
            Kind::Ready { train } => {
                world.trains[train].ready_at = Some(ev.time);
                let seg = world.trains[train].segment;
                world.try_leave(seg);
            }
            Kind::Depart {
                train,
                to,
                binding,
                time,
            } => world.depart(train, to, binding, time)?,
        }
    }

    table.segments = world.table.segments;
    for (j, h) in table.segments.iter_mut().enumerate() {
        let k = target(j);
        h.arrival.truncate(k);
        h.dwell.truncate(k);
        h.departure.truncate(k);
        h.binding.truncate(k);
    }
    table.periods = options.periods;
    Ok(table)
}
