//! Discretized line: a central part and two branches, each travelled in both
//! directions, wired through a divergence and a convergence segment.
//!
//! Segment ids are assigned part by part in the order central outbound,
//! central inbound, branch 1 outbound, branch 1 inbound, branch 2 outbound,
//! branch 2 inbound. "Outbound" runs from the central terminus toward the
//! branch termini. Terminus turnaround time is folded into the run time of the
//! last segment before the turnaround.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Part {
    Central,
    Branch1,
    Branch2,
}

impl Part {
    pub const ALL: [Part; 3] = [Part::Central, Part::Branch1, Part::Branch2];

    pub fn key(self) -> &'static str {
        match self {
            Part::Central => "central",
            Part::Branch1 => "branch1",
            Part::Branch2 => "branch2",
        }
    }

    pub fn branch(self) -> Option<Branch> {
        match self {
            Part::Central => None,
            Part::Branch1 => Some(Branch::One),
            Part::Branch2 => Some(Branch::Two),
        }
    }
}

impl fmt::Display for Part {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Outbound,
    Inbound,
}

/// One of the two branches served alternately at the junction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Branch {
    One,
    Two,
}

impl Branch {
    pub const BOTH: [Branch; 2] = [Branch::One, Branch::Two];

    pub fn other(self) -> Branch {
        match self {
            Branch::One => Branch::Two,
            Branch::Two => Branch::One,
        }
    }

    pub fn part(self) -> Part {
        match self {
            Branch::One => Part::Branch1,
            Branch::Two => Part::Branch2,
        }
    }

    pub(crate) fn index(self) -> usize {
        match self {
            Branch::One => 0,
            Branch::Two => 1,
        }
    }
}

/// Passenger exchange parameters of a platform.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlatformParams<T> {
    /// Passenger arrival rate on the platform (passengers/s).
    pub arrival_rate: T,
    /// Passenger boarding/alighting rate (passengers/s).
    pub exchange_rate: T,
    pub min_dwell: T,
    pub max_dwell: T,
}

impl<T: Scalar> PlatformParams<T> {
    /// Ratio of arrival to exchange rate; below one on every validated platform.
    pub fn demand_ratio(&self) -> T {
        self.arrival_rate / self.exchange_rate
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Segment<T> {
    pub id: usize,
    pub part: Part,
    pub direction: Direction,
    pub nominal_run_time: T,
    pub min_run_time: T,
    pub safe_separation_time: T,
    pub platform: Option<PlatformParams<T>>,
}

impl<T: Scalar> Segment<T> {
    /// Run-time margin available to compensate dwell extensions.
    pub fn margin(&self) -> T {
        self.nominal_run_time - self.min_run_time
    }
}

/// Where a segment leads. Only the divergence segment forks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Successor {
    Single(usize),
    Fork { branch1: usize, branch2: usize },
}

/// Where a segment is fed from. Only the convergence segment merges.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Predecessor {
    Single(usize),
    Merge { branch1: usize, branch2: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("{path}: run_time must be positive")]
    NonPositiveRunTime { path: String },
    #[error("{path}: min_run_time exceeds run_time")]
    MarginViolation { path: String },
    #[error("{path}: arrival rate lambda must stay below exchange rate alpha")]
    SaturatedPlatform { path: String },
    #[error("{path}: part has no segments")]
    EmptyPart { path: String },
    #[error("{path}: part has no platform")]
    MissingPlatform { path: String },
    #[error("{path}: {reason}")]
    InvalidValue { path: String, reason: &'static str },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SeedError {
    #[error("cannot place m={m}, dm={dm} trains: {reason}")]
    InfeasibleSeed { m: usize, dm: i64, reason: String },
    #[error("occupancy has {got} entries but the line has {expected} segments")]
    LengthMismatch { expected: usize, got: usize },
}

/// Validated line.
#[derive(Clone, Debug)]
pub struct LineTopology<T> {
    segments: Vec<Segment<T>>,
    next: Vec<Option<usize>>,
    prev: Vec<Option<usize>>,
    divergence: usize,
    convergence: usize,
    branch_heads: [usize; 2],
    branch_tails: [usize; 2],
}

impl<T: Scalar> LineTopology<T> {
    pub fn segments(&self) -> &[Segment<T>] {
        &self.segments
    }

    pub fn segment(&self, id: usize) -> &Segment<T> {
        &self.segments[id]
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Maximum number of trains (one per segment).
    pub fn capacity(&self) -> usize {
        self.segments.len()
    }

    /// Last central outbound segment; its departures alternate between the branches.
    pub fn divergence(&self) -> usize {
        self.divergence
    }

    /// First central inbound segment; fed alternately by the two branch tails.
    pub fn convergence(&self) -> usize {
        self.convergence
    }

    /// First outbound segment of a branch (fed by the divergence).
    pub fn branch_head(&self, branch: Branch) -> usize {
        self.branch_heads[branch.index()]
    }

    /// Last inbound segment of a branch (feeds the convergence).
    pub fn branch_tail(&self, branch: Branch) -> usize {
        self.branch_tails[branch.index()]
    }

    pub fn successor(&self, id: usize) -> Successor {
        match self.next[id] {
            Some(q) => Successor::Single(q),
            None => Successor::Fork {
                branch1: self.branch_heads[0],
                branch2: self.branch_heads[1],
            },
        }
    }

    pub fn predecessor(&self, id: usize) -> Predecessor {
        match self.prev[id] {
            Some(p) => Predecessor::Single(p),
            None => Predecessor::Merge {
                branch1: self.branch_tails[0],
                branch2: self.branch_tails[1],
            },
        }
    }

    /// Successor with the junction parity resolved toward `branch`.
    pub fn successor_on(&self, id: usize, branch: Branch) -> usize {
        self.next[id].unwrap_or(self.branch_heads[branch.index()])
    }

    /// Predecessor with the junction parity resolved toward `branch`.
    pub fn predecessor_on(&self, id: usize, branch: Branch) -> usize {
        self.prev[id].unwrap_or(self.branch_tails[branch.index()])
    }

    pub fn part_segments(&self, part: Part) -> impl Iterator<Item = usize> + '_ {
        self.segments
            .iter()
            .filter(move |s| s.part == part)
            .map(|s| s.id)
    }

    pub fn part_len(&self, part: Part) -> usize {
        self.part_segments(part).count()
    }

    /// Segments of the circuit central + `branch`, in travel order starting at the convergence.
    pub fn circuit(&self, branch: Branch) -> Vec<usize> {
        let start = self.convergence;
        let mut out = vec![start];
        let mut cur = self.successor_on(start, branch);
        while cur != start {
            out.push(cur);
            cur = self.successor_on(cur, branch);
        }
        out
    }

    /// Central segments in travel order from the convergence to the divergence.
    pub fn central_path(&self) -> Vec<usize> {
        let mut out = vec![self.convergence];
        let mut cur = self.convergence;
        while cur != self.divergence {
            cur = self.next[cur].expect("central path ends at the divergence");
            out.push(cur);
        }
        out
    }

    pub fn platform_count(&self, part: Part) -> usize {
        self.part_segments(part)
            .filter(|&j| self.segments[j].platform.is_some())
            .count()
    }

    /// Copy of the line with every arrival rate on `parts` multiplied by `factor`.
    pub fn with_demand_scaled(&self, parts: &[Part], factor: T) -> Result<Self, TopologyError> {
        let mut line = self.clone();
        for seg in line.segments.iter_mut().filter(|s| parts.contains(&s.part)) {
            if let Some(p) = seg.platform.as_mut() {
                p.arrival_rate = p.arrival_rate * factor;
                if p.arrival_rate >= p.exchange_rate {
                    return Err(TopologyError::SaturatedPlatform {
                        path: segment_path(seg),
                    });
                }
            }
        }
        Ok(line)
    }

    /// Copy of the line with the two branches swapped.
    pub fn mirrored(&self) -> Self {
        let mut desc = LineDescription::from_topology(self);
        std::mem::swap(&mut desc.branch1, &mut desc.branch2);
        build_line(&desc).expect("mirroring preserves validity")
    }
}

fn segment_path<T>(seg: &Segment<T>) -> String {
    format!("segment {} ({} {:?})", seg.id, seg.part, seg.direction)
}

/// Serialized line layout, all times in seconds and rates in passengers/s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineDescription {
    pub central: PartDescription,
    pub branch1: PartDescription,
    pub branch2: PartDescription,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartDescription {
    pub outbound: Vec<SegmentDescription>,
    pub inbound: Vec<SegmentDescription>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentDescription {
    pub run_time: f64,
    pub min_run_time: f64,
    pub safe_separation: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub platform: Option<PlatformDescription>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlatformDescription {
    pub lambda: f64,
    pub alpha: f64,
    pub min_dwell: f64,
    pub max_dwell: f64,
}

impl LineDescription {
    pub fn part(&self, part: Part) -> &PartDescription {
        match part {
            Part::Central => &self.central,
            Part::Branch1 => &self.branch1,
            Part::Branch2 => &self.branch2,
        }
    }

    pub fn from_topology<T: Scalar>(line: &LineTopology<T>) -> Self {
        let describe = |part: Part, dir: Direction| -> Vec<SegmentDescription> {
            line.segments
                .iter()
                .filter(|s| s.part == part && s.direction == dir)
                .map(|s| SegmentDescription {
                    run_time: s.nominal_run_time.as_f64(),
                    min_run_time: s.min_run_time.as_f64(),
                    safe_separation: s.safe_separation_time.as_f64(),
                    platform: s.platform.map(|p| PlatformDescription {
                        lambda: p.arrival_rate.as_f64(),
                        alpha: p.exchange_rate.as_f64(),
                        min_dwell: p.min_dwell.as_f64(),
                        max_dwell: p.max_dwell.as_f64(),
                    }),
                })
                .collect()
        };
        let part = |p: Part| PartDescription {
            outbound: describe(p, Direction::Outbound),
            inbound: describe(p, Direction::Inbound),
        };
        LineDescription {
            central: part(Part::Central),
            branch1: part(Part::Branch1),
            branch2: part(Part::Branch2),
        }
    }
}

fn check_segment(path: &str, d: &SegmentDescription) -> Result<(), TopologyError> {
    let invalid = |reason| TopologyError::InvalidValue {
        path: path.to_string(),
        reason,
    };
    if !d.run_time.is_finite() || d.run_time <= 0.0 {
        return Err(TopologyError::NonPositiveRunTime {
            path: path.to_string(),
        });
    }
    if !d.min_run_time.is_finite() || d.min_run_time <= 0.0 {
        return Err(TopologyError::NonPositiveRunTime {
            path: format!("{path}.min_run_time"),
        });
    }
    if d.min_run_time > d.run_time {
        return Err(TopologyError::MarginViolation {
            path: path.to_string(),
        });
    }
    if !d.safe_separation.is_finite() || d.safe_separation < 0.0 {
        return Err(invalid("safe_separation must be finite and non-negative"));
    }
    if let Some(p) = &d.platform {
        let ppath = format!("{path}.platform");
        let invalid = |reason| TopologyError::InvalidValue {
            path: ppath.clone(),
            reason,
        };
        if !p.lambda.is_finite() || p.lambda < 0.0 {
            return Err(invalid("lambda must be finite and non-negative"));
        }
        if !p.alpha.is_finite() || p.alpha <= 0.0 {
            return Err(invalid("alpha must be positive"));
        }
        if !p.min_dwell.is_finite() || p.min_dwell < 0.0 {
            return Err(invalid("min_dwell must be finite and non-negative"));
        }
        if !p.max_dwell.is_finite() || p.max_dwell < p.min_dwell {
            return Err(invalid("max_dwell must be finite and at least min_dwell"));
        }
        if p.lambda >= p.alpha {
            return Err(TopologyError::SaturatedPlatform { path: ppath });
        }
    }
    Ok(())
}

/// Validate a description and wire the junction.
pub fn build_line<T: Scalar>(desc: &LineDescription) -> Result<LineTopology<T>, TopologyError> {
    let mut segments = Vec::new();
    // (first id, last id) of every (part, direction) run
    let mut spans = Vec::new();
    for part in Part::ALL {
        let pd = desc.part(part);
        let mut platforms = 0;
        for (dir, list, key) in [
            (Direction::Outbound, &pd.outbound, "outbound"),
            (Direction::Inbound, &pd.inbound, "inbound"),
        ] {
            if list.is_empty() {
                return Err(TopologyError::EmptyPart {
                    path: format!("line.{}.{key}", part.key()),
                });
            }
            let first = segments.len();
            for (i, d) in list.iter().enumerate() {
                let path = format!("line.{}.{key}[{i}]", part.key());
                check_segment(&path, d)?;
                platforms += usize::from(d.platform.is_some());
                segments.push(Segment {
                    id: segments.len(),
                    part,
                    direction: dir,
                    nominal_run_time: T::of(d.run_time),
                    min_run_time: T::of(d.min_run_time),
                    safe_separation_time: T::of(d.safe_separation),
                    platform: d.platform.map(|p| PlatformParams {
                        arrival_rate: T::of(p.lambda),
                        exchange_rate: T::of(p.alpha),
                        min_dwell: T::of(p.min_dwell),
                        max_dwell: T::of(p.max_dwell),
                    }),
                });
            }
            spans.push((first, segments.len() - 1));
        }
        if platforms == 0 {
            return Err(TopologyError::MissingPlatform {
                path: format!("line.{}", part.key()),
            });
        }
    }
    let [c_out, c_in, b1_out, b1_in, b2_out, b2_in]: [(usize, usize); 6] =
        spans.try_into().expect("six directed runs");

    let n = segments.len();
    let mut next = vec![None; n];
    for (first, last) in [c_out, c_in, b1_out, b1_in, b2_out, b2_in] {
        for (slot, j) in next[first..last].iter_mut().zip(first + 1..) {
            *slot = Some(j);
        }
    }
    // c_out.1 is the divergence and keeps no single successor
    next[c_in.1] = Some(c_out.0);
    next[b1_out.1] = Some(b1_in.0);
    next[b2_out.1] = Some(b2_in.0);
    next[b1_in.1] = Some(c_in.0);
    next[b2_in.1] = Some(c_in.0);

    let mut prev = vec![None; n];
    for (j, q) in next.iter().enumerate() {
        if let Some(q) = *q {
            if q != c_in.0 {
                prev[q] = Some(j);
            }
        }
    }
    prev[b1_out.0] = Some(c_out.1);
    prev[b2_out.0] = Some(c_out.1);

    Ok(LineTopology {
        segments,
        next,
        prev,
        divergence: c_out.1,
        convergence: c_in.0,
        branch_heads: [b1_out.0, b2_out.0],
        branch_tails: [b1_in.1, b2_in.1],
    })
}

/// Maximum number of trains the line holds.
pub fn capacity<T: Scalar>(line: &LineTopology<T>) -> usize {
    line.capacity()
}

/// Initial train positions and the junction alternation phase.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TrainConfiguration {
    occupancy: Vec<bool>,
    first_branch: Branch,
}

impl TrainConfiguration {
    /// Configuration with the canonical alternation phase.
    ///
    /// Central trains are assigned alternately to the two branch circuits by
    /// their order of passage at the junction. When the central part holds an
    /// odd number of trains, the extra one belongs to the circuit whose branch
    /// holds fewer trains (branch 1 on a tie); `first_branch` is chosen to
    /// realize that assignment.
    pub fn new<T: Scalar>(line: &LineTopology<T>, occupancy: Vec<bool>) -> Result<Self, SeedError> {
        if occupancy.len() != line.len() {
            return Err(SeedError::LengthMismatch {
                expected: line.len(),
                got: occupancy.len(),
            });
        }
        let mut cfg = TrainConfiguration {
            occupancy,
            first_branch: Branch::One,
        };
        let central = cfg.part_count(line, Part::Central);
        if central % 2 == 1 {
            let m1 = cfg.part_count(line, Part::Branch1);
            let m2 = cfg.part_count(line, Part::Branch2);
            let extra = if m1 <= m2 { Branch::One } else { Branch::Two };
            cfg.first_branch = extra.other();
        }
        Ok(cfg)
    }

    /// Override the branch of the first converging train.
    pub fn with_first_branch(mut self, branch: Branch) -> Self {
        self.first_branch = branch;
        self
    }

    pub fn occupancy(&self) -> &[bool] {
        &self.occupancy
    }

    pub fn is_occupied(&self, id: usize) -> bool {
        self.occupancy[id]
    }

    pub fn first_branch(&self) -> Branch {
        self.first_branch
    }

    /// Total number of trains.
    pub fn m(&self) -> usize {
        self.occupancy.iter().filter(|&&b| b).count()
    }

    pub fn part_count<T: Scalar>(&self, line: &LineTopology<T>, part: Part) -> usize {
        line.part_segments(part)
            .filter(|&j| self.occupancy[j])
            .count()
    }

    /// Branch 2 trains minus branch 1 trains.
    pub fn delta_m<T: Scalar>(&self, line: &LineTopology<T>) -> i64 {
        self.part_count(line, Part::Branch2) as i64 - self.part_count(line, Part::Branch1) as i64
    }

    /// Branch taken by the first train leaving the divergence.
    ///
    /// Central trains alternate between the circuits in the order they passed
    /// the convergence, so the divergence order is the convergence order
    /// delayed by the central trains.
    pub fn first_diverging<T: Scalar>(&self, line: &LineTopology<T>) -> Branch {
        if self.part_count(line, Part::Central).is_multiple_of(2) {
            self.first_branch
        } else {
            self.first_branch.other()
        }
    }

    /// Number of trains circulating on each branch circuit (branch trains plus
    /// the central trains assigned to that circuit).
    pub fn circuit_counts<T: Scalar>(&self, line: &LineTopology<T>) -> [usize; 2] {
        let central = self.part_count(line, Part::Central);
        // central trains nearest the convergence belong to first_branch.other()
        let to_other = central.div_ceil(2);
        let to_first = central / 2;
        let mut counts = [
            self.part_count(line, Part::Branch1),
            self.part_count(line, Part::Branch2),
        ];
        counts[self.first_branch.index()] += to_first;
        counts[self.first_branch.other().index()] += to_other;
        counts
    }

    /// Route of every central train, keyed by segment id.
    pub(crate) fn central_routes<T: Scalar>(&self, line: &LineTopology<T>) -> Vec<(usize, Branch)> {
        let mut out = Vec::new();
        let mut position = 0usize;
        for j in line.central_path() {
            if self.occupancy[j] {
                position += 1;
                let branch = if position % 2 == 1 {
                    self.first_branch.other()
                } else {
                    self.first_branch
                };
                out.push((j, branch));
            }
        }
        out
    }
}

/// Evenly spaced indices: `count` picks out of `slots`, starting at 0.
fn spread(slots: usize, count: usize) -> impl Iterator<Item = usize> {
    (0..count).map(move |i| i * slots / count)
}

/// Place `m` trains with branch imbalance `dm` (branch 2 minus branch 1).
///
/// The central share is chosen first, as close as possible to its
/// proportional share of the line, then the branch trains are split to
/// realize `dm`. Trains are evenly spaced inside each part.
pub fn seed_trains<T: Scalar>(
    line: &LineTopology<T>,
    m: usize,
    dm: i64,
) -> Result<TrainConfiguration, SeedError> {
    let n = line.len();
    if m > n {
        return Err(SeedError::InfeasibleSeed {
            m,
            dm,
            reason: format!("capacity is {n}"),
        });
    }
    let n_c = line.part_len(Part::Central);
    let n_1 = line.part_len(Part::Branch1);
    let n_2 = line.part_len(Part::Branch2);

    // central counts ordered by distance to the proportional share, larger first on ties
    let mut candidates: Vec<usize> = (0..=m.min(n_c)).collect();
    candidates.sort_by_key(|&c| {
        let dist = (c * n).abs_diff(m * n_c);
        (dist, std::cmp::Reverse(c))
    });
    let split = candidates.into_iter().find_map(|c| {
        let mb = (m - c) as i64;
        if (mb - dm).rem_euclid(2) != 0 {
            return None;
        }
        let m1 = (mb - dm) / 2;
        let m2 = (mb + dm) / 2;
        (m1 >= 0 && m2 >= 0 && m1 as usize <= n_1 && m2 as usize <= n_2).then_some((
            c,
            m1 as usize,
            m2 as usize,
        ))
    });
    let Some((m0, m1, m2)) = split else {
        let reason = if dm.unsigned_abs() as usize > n_1.max(n_2) {
            "imbalance exceeds branch capacity".to_string()
        } else {
            "no central allotment gives integer branch counts within capacity".to_string()
        };
        return Err(SeedError::InfeasibleSeed { m, dm, reason });
    };

    let mut occupancy = vec![false; n];
    for (part, count) in [
        (Part::Central, m0),
        (Part::Branch1, m1),
        (Part::Branch2, m2),
    ] {
        let ids: Vec<usize> = line.part_segments(part).collect();
        for i in spread(ids.len(), count) {
            occupancy[ids[i]] = true;
        }
    }
    TrainConfiguration::new(line, occupancy)
}
