//! Departure-time recursion.
//!
//! `d[j][k]` is the k-th departure (k >= 1) from segment j. A train leaves j
//! once it has run into j, dwelt at j's platform, and the next segment has
//! been vacated for at least the next segment's safe separation time:
//!
//! ```text
//! a[j][k] = d[p][k - b[j]] + run[j]
//! d[j][k] = max(a[j][k] + dwell[j][k], d[q][k - 1 + b[q]] + s[q])
//! ```
//!
//! with `b` the initial occupancy, `p`/`q` the upstream/downstream segments.
//! Central segments see every train, branch segments every second one, so the
//! recursion is evaluated one *period* at a time: two central counts and one
//! branch count per period. At the convergence the k-th entrant comes from
//! the branch given by the parity of k; the divergence sends departures
//! alternately to the two branches in the same order.

use std::collections::VecDeque;
use std::fmt::Write as _;

use thiserror::Error;

use crate::control::{controlled_run_time, dwell_time, ControlError, ControlParams};
use crate::topology::{Branch, LineTopology, Part, TrainConfiguration};
use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("deadlock: segments {cycle:?} wait on each other")]
    Deadlock { cycle: Vec<usize> },
    #[error("window of {got} periods is shorter than the {need} the recursion looks back")]
    WindowTooShort { need: usize, got: usize },
    #[error("at least one period must be simulated")]
    NoCounts,
    #[error("configuration has {got} segments, line has {expected}")]
    ConfigMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Control(#[from] ControlError),
}

/// Which term achieved the maximum in a departure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Binding {
    /// Run and dwell of a train present from the start.
    Initial,
    /// Run from upstream plus dwell.
    Forward,
    /// Waiting for the downstream segment to clear.
    Backward,
}

/// Reference to the k-th departure of a segment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Event {
    pub segment: usize,
    pub count: i64,
}

/// Index arithmetic of the recursion for one line and configuration.
#[derive(Clone, Debug)]
pub struct Recurrence {
    occupied: Vec<bool>,
    central: Vec<bool>,
    pred: Vec<Option<usize>>,
    succ: Vec<Option<usize>>,
    convergence: usize,
    divergence: usize,
    heads: [usize; 2],
    tails: [usize; 2],
    first_conv: Branch,
    first_div: Branch,
}

fn slot_of(branch: Branch, first: Branch) -> i64 {
    if branch == first {
        1
    } else {
        2
    }
}

impl Recurrence {
    pub fn new<T: Scalar>(line: &LineTopology<T>, config: &TrainConfiguration) -> Self {
        let n = line.len();
        let pred = (0..n)
            .map(|j| match line.predecessor(j) {
                crate::topology::Predecessor::Single(p) => Some(p),
                crate::topology::Predecessor::Merge { .. } => None,
            })
            .collect();
        let succ = (0..n)
            .map(|j| match line.successor(j) {
                crate::topology::Successor::Single(q) => Some(q),
                crate::topology::Successor::Fork { .. } => None,
            })
            .collect();
        Recurrence {
            occupied: config.occupancy().to_vec(),
            central: line
                .segments()
                .iter()
                .map(|s| s.part == Part::Central)
                .collect(),
            pred,
            succ,
            convergence: line.convergence(),
            divergence: line.divergence(),
            heads: [line.branch_head(Branch::One), line.branch_head(Branch::Two)],
            tails: [line.branch_tail(Branch::One), line.branch_tail(Branch::Two)],
            first_conv: config.first_branch(),
            first_div: config.first_diverging(line),
        }
    }

    pub fn len(&self) -> usize {
        self.occupied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty()
    }

    fn b(&self, j: usize) -> i64 {
        i64::from(self.occupied[j])
    }

    /// Departures of segment `j` per period.
    pub fn slots(&self, j: usize) -> i64 {
        if self.central[j] {
            2
        } else {
            1
        }
    }

    /// Period (1-based) and slot of the k-th departure of `j`.
    pub fn period_of(&self, ev: Event) -> (i64, i64) {
        let s = self.slots(ev.segment);
        (
            (ev.count - 1).div_euclid(s) + 1,
            (ev.count - 1).rem_euclid(s),
        )
    }

    pub fn count_of(&self, j: usize, period: i64, slot: i64) -> i64 {
        self.slots(j) * (period - 1) + slot + 1
    }

    /// Upstream departure whose train makes `ev`; `None` for a train present
    /// at the start.
    pub fn forward_source(&self, ev: Event) -> Option<Event> {
        let Event {
            segment: j,
            count: k,
        } = ev;
        let entrant = k - self.b(j);
        if entrant < 1 {
            return None;
        }
        let src = if j == self.convergence {
            let branch = if entrant % 2 == 1 {
                self.first_conv
            } else {
                self.first_conv.other()
            };
            Event {
                segment: self.tails[branch.index()],
                count: (entrant + 1) / 2,
            }
        } else if let Some(branch) = self.head_branch(j) {
            Event {
                segment: self.divergence,
                count: 2 * (entrant - 1) + slot_of(branch, self.first_div),
            }
        } else {
            Event {
                segment: self.pred[j].expect("single predecessor"),
                count: entrant,
            }
        };
        Some(src)
    }

    /// Downstream departure that must precede `ev` (plus the separation time
    /// of that segment); `None` when the downstream segment starts empty.
    pub fn backward_target(&self, ev: Event) -> Option<Event> {
        let Event {
            segment: j,
            count: k,
        } = ev;
        let target = if let Some(branch) = self.tail_branch(j) {
            let entrant = 2 * (k - 1) + slot_of(branch, self.first_conv);
            Event {
                segment: self.convergence,
                count: entrant - 1 + self.b(self.convergence),
            }
        } else if j == self.divergence {
            let branch = self.diverging_branch(k);
            let head = self.heads[branch.index()];
            Event {
                segment: head,
                count: (k + 1) / 2 - 1 + self.b(head),
            }
        } else {
            let q = self.succ[j].expect("single successor");
            Event {
                segment: q,
                count: k - 1 + self.b(q),
            }
        };
        (target.count >= 1).then_some(target)
    }

    /// Branch entered by the k-th departure from the divergence.
    pub fn diverging_branch(&self, k: i64) -> Branch {
        if k % 2 == 1 {
            self.first_div
        } else {
            self.first_div.other()
        }
    }

    fn head_branch(&self, j: usize) -> Option<Branch> {
        Branch::BOTH
            .into_iter()
            .find(|b| self.heads[b.index()] == j)
    }

    fn tail_branch(&self, j: usize) -> Option<Branch> {
        Branch::BOTH
            .into_iter()
            .find(|b| self.tails[b.index()] == j)
    }

    /// Departures of the same period that `ev` depends on.
    fn same_period_deps(&self, ev: Event) -> Vec<Event> {
        let (period, _) = self.period_of(ev);
        let mut deps: Vec<Event> = [self.forward_source(ev), self.backward_target(ev)]
            .into_iter()
            .flatten()
            .collect();
        if ev.count > 1 {
            deps.push(Event {
                segment: ev.segment,
                count: ev.count - 1,
            });
        }
        deps.retain(|d| self.period_of(*d).0 == period);
        deps
    }

    /// Evaluation order of one period's departures, as `(segment, slot)`.
    ///
    /// The dependency pattern repeats from period to period, so a cyclic
    /// pattern means no train can ever move: a deadlock.
    pub fn period_order(&self) -> Result<Vec<(usize, i64)>, EngineError> {
        const PROBE: i64 = 3;
        let nodes: Vec<Event> = (0..self.len())
            .flat_map(|j| (0..self.slots(j)).map(move |slot| (j, slot)))
            .map(|(j, slot)| Event {
                segment: j,
                count: self.count_of(j, PROBE, slot),
            })
            .collect();
        let index = |ev: &Event| nodes.iter().position(|n| n == ev).expect("node in period");
        let deps: Vec<Vec<usize>> = nodes
            .iter()
            .map(|ev| self.same_period_deps(*ev).iter().map(index).collect())
            .collect();

        let mut indegree: Vec<usize> = deps.iter().map(Vec::len).collect();
        let mut dependents = vec![Vec::new(); nodes.len()];
        for (i, ds) in deps.iter().enumerate() {
            for &d in ds {
                dependents[d].push(i);
            }
        }
        let mut ready: VecDeque<usize> = (0..nodes.len()).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(nodes.len());
        while let Some(i) = ready.pop_front() {
            order.push(i);
            for &t in &dependents[i] {
                indegree[t] -= 1;
                if indegree[t] == 0 {
                    ready.push_back(t);
                }
            }
        }
        if order.len() < nodes.len() {
            // walk dependencies among the blocked nodes until one repeats
            let mut seen = vec![usize::MAX; nodes.len()];
            let mut path = Vec::new();
            let mut cur = (0..nodes.len()).find(|&i| indegree[i] > 0).unwrap();
            while seen[cur] == usize::MAX {
                seen[cur] = path.len();
                path.push(cur);
                cur = *deps[cur].iter().find(|&&d| indegree[d] > 0).unwrap();
            }
            let mut cycle: Vec<usize> = path[seen[cur]..]
                .iter()
                .map(|&i| nodes[i].segment)
                .collect();
            cycle.dedup();
            return Err(EngineError::Deadlock { cycle });
        }
        Ok(order
            .into_iter()
            .map(|i| (nodes[i].segment, self.period_of(nodes[i]).1))
            .collect())
    }
}

/// Times of one departure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Departure<T> {
    pub arrival: T,
    pub dwell: T,
    pub departure: T,
    /// Dwell extension still carried by the train when it leaves.
    pub residual: T,
    pub binding: Binding,
}

/// Per-segment departure history.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentHistory<T> {
    pub arrival: Vec<T>,
    pub dwell: Vec<T>,
    pub departure: Vec<T>,
    pub binding: Vec<Binding>,
}

impl<T> Default for SegmentHistory<T> {
    fn default() -> Self {
        SegmentHistory {
            arrival: Vec::new(),
            dwell: Vec::new(),
            departure: Vec::new(),
            binding: Vec::new(),
        }
    }
}

/// Departure times of every segment, indexed by count (k = 1 at index 0).
#[derive(Clone, Debug, PartialEq)]
pub struct DepartureTable<T> {
    pub segments: Vec<SegmentHistory<T>>,
    pub parts: Vec<Part>,
    /// Simulated periods (branch counts; central segments have twice as many).
    pub periods: usize,
}

impl<T: Scalar> DepartureTable<T> {
    pub fn empty<U: Scalar>(line: &LineTopology<U>) -> Self {
        DepartureTable {
            segments: vec![SegmentHistory::default(); line.len()],
            parts: line.segments().iter().map(|s| s.part).collect(),
            periods: 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.segments.iter().all(|s| s.departure.is_empty())
    }

    pub fn counts(&self, j: usize) -> usize {
        self.segments[j].departure.len()
    }

    pub fn departure(&self, j: usize, k: usize) -> T {
        self.segments[j].departure[k - 1]
    }

    /// Largest absolute difference of arrival or departure times, or `None`
    /// when the tables do not have the same shape.
    pub fn max_discrepancy(&self, other: &Self) -> Option<T> {
        if self.segments.len() != other.segments.len() {
            return None;
        }
        let mut worst = T::zero();
        for (a, b) in self.segments.iter().zip(&other.segments) {
            if a.departure.len() != b.departure.len() || a.arrival.len() != b.arrival.len() {
                return None;
            }
            for (x, y) in a
                .departure
                .iter()
                .zip(&b.departure)
                .chain(a.arrival.iter().zip(&b.arrival))
            {
                worst = worst.max((*x - *y).abs());
            }
        }
        Some(worst)
    }

    /// Exact equality of all arrival and departure times.
    pub fn same_times(&self, other: &Self) -> bool {
        self.segments.len() == other.segments.len()
            && self
                .segments
                .iter()
                .zip(&other.segments)
                .all(|(a, b)| a.arrival == b.arrival && a.departure == b.departure)
    }

    /// CSV with columns `segment_id,part,k,arrival_s,departure_s`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("segment_id,part,k,arrival_s,departure_s\n");
        for (j, seg) in self.segments.iter().enumerate() {
            for (i, (a, d)) in seg.arrival.iter().zip(&seg.departure).enumerate() {
                let _ = writeln!(
                    out,
                    "{j},{},{},{},{}",
                    self.parts[j],
                    i + 1,
                    a.as_f64(),
                    d.as_f64()
                );
            }
        }
        out
    }
}

/// Initial condition and length of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct SimOptions<T> {
    /// Number of periods (branch departures per segment).
    pub periods: usize,
    /// Offset between consecutive initial trains, in segment id order.
    pub stagger: T,
    /// Explicit ready time per segment for the initial trains; overrides `stagger`.
    pub initial_ready: Option<Vec<T>>,
    /// Periods of history kept by the engine.
    pub window: usize,
}

impl<T: Scalar> SimOptions<T> {
    pub fn periods(periods: usize) -> Self {
        SimOptions {
            periods,
            stagger: T::zero(),
            initial_ready: None,
            window: MIN_WINDOW,
        }
    }

    /// Time at which each initially present train has completed its run into its segment.
    pub fn ready_times(&self, config: &TrainConfiguration) -> Vec<T> {
        if let Some(r) = &self.initial_ready {
            return r.clone();
        }
        let mut order = 0usize;
        config
            .occupancy()
            .iter()
            .map(|&b| {
                if b {
                    let t = self.stagger * T::of_usize(order);
                    order += 1;
                    t
                } else {
                    T::zero()
                }
            })
            .collect()
    }
}

/// Periods of history the recursion reads: the current one and the previous one.
pub const MIN_WINDOW: usize = 2;

/// Start of passenger accumulation: the earliest initial ready time, or zero.
pub(crate) fn demand_origin<T: Scalar>(config: &TrainConfiguration, ready: &[T]) -> T {
    config
        .occupancy()
        .iter()
        .zip(ready)
        .filter(|(b, _)| **b)
        .fold(T::zero(), |acc, (_, &r)| acc.min(r))
}

/// Rolling state of the recursion.
#[derive(Clone, Debug)]
pub struct EngineState<'a, T: Scalar> {
    line: &'a LineTopology<T>,
    controls: &'a ControlParams<T>,
    rec: Recurrence,
    order: Vec<(usize, i64)>,
    ready: Vec<T>,
    origin: T,
    /// Last departures per segment, newest at the back.
    window: Vec<VecDeque<(i64, Departure<T>)>>,
    window_periods: usize,
    period: i64,
}

impl<'a, T: Scalar> EngineState<'a, T> {
    pub fn new(
        line: &'a LineTopology<T>,
        config: &TrainConfiguration,
        controls: &'a ControlParams<T>,
        options: &SimOptions<T>,
    ) -> Result<Self, EngineError> {
        if config.occupancy().len() != line.len() {
            return Err(EngineError::ConfigMismatch {
                expected: line.len(),
                got: config.occupancy().len(),
            });
        }
        if options.window < MIN_WINDOW {
            return Err(EngineError::WindowTooShort {
                need: MIN_WINDOW,
                got: options.window,
            });
        }
        let rec = Recurrence::new(line, config);
        let order = rec.period_order()?;
        let ready = options.ready_times(config);
        if ready.len() != line.len() {
            return Err(EngineError::ConfigMismatch {
                expected: line.len(),
                got: ready.len(),
            });
        }
        Ok(EngineState {
            line,
            controls,
            origin: demand_origin(config, &ready),
            ready,
            order,
            window: vec![VecDeque::new(); line.len()],
            window_periods: options.window,
            rec,
            period: 0,
        })
    }

    pub fn recurrence(&self) -> &Recurrence {
        &self.rec
    }

    /// Periods computed so far.
    pub fn period(&self) -> i64 {
        self.period
    }

    fn lookup(&self, ev: Event) -> Result<&Departure<T>, EngineError> {
        self.window[ev.segment]
            .iter()
            .rev()
            .find(|(k, _)| *k == ev.count)
            .map(|(_, d)| d)
            .ok_or(EngineError::WindowTooShort {
                need: MIN_WINDOW,
                got: self.window_periods,
            })
    }

    fn evaluate(&self, ev: Event) -> Result<Departure<T>, EngineError> {
        let j = ev.segment;
        let seg = self.line.segment(j);
        let (arrival, carried) = match self.rec.forward_source(ev) {
            None => (self.ready[j], T::zero()),
            Some(src) => {
                let up = self.lookup(src)?;
                if self.controls.compensation {
                    let run = controlled_run_time(seg, up.residual);
                    (up.departure + run.run, run.residual)
                } else {
                    (up.departure + seg.nominal_run_time, T::zero())
                }
            }
        };
        let (dwell, residual) = match &seg.platform {
            Some(platform) => {
                let previous = if ev.count > 1 {
                    self.lookup(Event {
                        segment: j,
                        count: ev.count - 1,
                    })?
                    .departure
                } else {
                    self.origin
                };
                let out = dwell_time(platform, arrival - previous, self.controls.nominal_dwell[j])?;
                (out.dwell, out.extension)
            }
            None => (T::zero(), carried),
        };
        let forward = arrival + dwell;
        let mut departure = forward;
        let mut binding = if ev.count == 1 && self.rec.occupied[j] {
            Binding::Initial
        } else {
            Binding::Forward
        };
        if let Some(target) = self.rec.backward_target(ev) {
            let q = target.segment;
            let clear = self.lookup(target)?.departure + self.line.segment(q).safe_separation_time;
            if clear > forward {
                departure = clear;
                binding = Binding::Backward;
            }
        }
        Ok(Departure {
            arrival,
            dwell,
            departure,
            residual,
            binding,
        })
    }

    /// Compute the next period. Returns the new departures as `(event, times)`
    /// in evaluation order.
    pub fn step(&mut self) -> Result<Vec<(Event, Departure<T>)>, EngineError> {
        let period = self.period + 1;
        let mut out = Vec::with_capacity(self.order.len());
        for i in 0..self.order.len() {
            let (j, slot) = self.order[i];
            let ev = Event {
                segment: j,
                count: self.rec.count_of(j, period, slot),
            };
            let dep = self.evaluate(ev)?;
            self.window[j].push_back((ev.count, dep));
            out.push((ev, dep));
        }
        let keep = self.window_periods;
        for (j, w) in self.window.iter_mut().enumerate() {
            let cap = keep * self.rec.slots(j) as usize;
            while w.len() > cap {
                w.pop_front();
            }
        }
        self.period = period;
        Ok(out)
    }
}

/// Run the recursion for `options.periods` periods.
///
/// An empty line never departs and yields an empty table.
pub fn simulate<T: Scalar>(
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
    let mut state = EngineState::new(line, config, controls, options)?;
    for _ in 0..options.periods {
        let mut events = state.step()?;
        events.sort_by_key(|(ev, _)| (ev.segment, ev.count));
        for (ev, d) in events {
            let h = &mut table.segments[ev.segment];
            h.arrival.push(d.arrival);
            h.dwell.push(d.dwell);
            h.departure.push(d.departure);
            h.binding.push(d.binding);
        }
    }
    table.periods = options.periods;
    Ok(table)
}
