//! Asymptotic headway from a departure table.
//!
//! The recursion settles into a periodic regime: after a transient,
//! `d[k] - d[k - c]` is constant for some cyclicity `c`. The per-count
//! headway of a segment is that constant divided by `c`; when no cyclicity is
//! found the least-squares slope of `d[k]` over `k` is used instead and the
//! estimate is marked unconverged.

use crate::engine::DepartureTable;
use crate::topology::Part;
use crate::Scalar;

use super::PhaseError;

/// Relative tolerance on the per-segment estimates.
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

/// Retained counts needed per segment.
const MIN_RETAINED: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthRateEstimate<T> {
    /// Central headway (seconds per central departure); infinite without trains.
    pub h0: T,
    pub h1: T,
    pub h2: T,
    /// Central frequency in trains per second.
    pub f0: T,
    pub converged: bool,
    /// Largest deviation of a segment's estimate from `h0`, in central seconds.
    pub residual: T,
}

impl<T: Scalar> GrowthRateEstimate<T> {
    /// No departure ever happens.
    pub fn stopped() -> Self {
        GrowthRateEstimate {
            h0: T::infinity(),
            h1: T::infinity(),
            h2: T::infinity(),
            f0: T::zero(),
            converged: true,
            residual: T::zero(),
        }
    }

    /// Central frequency in trains per hour.
    pub fn f0_per_hour(&self) -> T {
        self.f0 * T::of(3600.0)
    }

    /// Duration of one period: one departure per branch segment.
    pub fn period(&self) -> T {
        self.h0 + self.h0
    }
}

/// Headway of one segment and whether a cyclicity was found.
///
/// Looks for the smallest cyclicity `c` such that `d[k] - d[k - c]` is
/// constant on a tail covering at least half of the counts and two cycles.
/// Slowly locking trains can keep a drift well past the transient cut, so the
/// head of the window is allowed to differ.
fn segment_headway<T: Scalar>(d: &[T], rel_tol: T) -> (T, bool) {
    let n = d.len();
    for c in 1..=n / 3 {
        let last = d[n - 1] - d[n - 1 - c];
        let spread = rel_tol * last.abs().max(T::one());
        let (mut lo, mut hi, mut sum, mut len) = (last, last, T::zero(), 0usize);
        for i in (c..n).rev() {
            let x = d[i] - d[i - c];
            if hi.max(x) - lo.min(x) > spread {
                break;
            }
            lo = lo.min(x);
            hi = hi.max(x);
            sum = sum + x;
            len += 1;
        }
        if 2 * len >= n && len >= 2 * c {
            return (sum / T::of_usize(len) / T::of_usize(c), true);
        }
    }
    (least_squares_slope(d), false)
}

fn least_squares_slope<T: Scalar>(d: &[T]) -> T {
    let n = T::of_usize(d.len());
    let k_mean = (n - T::one()) / T::of(2.0);
    let d_mean = d.iter().fold(T::zero(), |acc, &x| acc + x) / n;
    let (mut num, mut den) = (T::zero(), T::zero());
    for (i, &x) in d.iter().enumerate() {
        let dk = T::of_usize(i) - k_mean;
        num = num + dk * (x - d_mean);
        den = den + dk * dk;
    }
    num / den
}

/// Headways per part after discarding the first `transient_fraction` of
/// every segment's departures.
pub fn growth_rate<T: Scalar>(
    table: &DepartureTable<T>,
    transient_fraction: f64,
) -> Result<GrowthRateEstimate<T>, PhaseError> {
    growth_rate_with_tolerance(table, transient_fraction, DEFAULT_TOLERANCE)
}

pub fn growth_rate_with_tolerance<T: Scalar>(
    table: &DepartureTable<T>,
    transient_fraction: f64,
    rel_tol: f64,
) -> Result<GrowthRateEstimate<T>, PhaseError> {
    if !(0.0..1.0).contains(&transient_fraction) {
        return Err(PhaseError::BadTransient(transient_fraction));
    }
    if table.is_empty() {
        return Ok(GrowthRateEstimate::stopped());
    }
    let tol = T::of(rel_tol);
    let mut per_part = [(T::zero(), 0usize); 3];
    // (central-equivalent headway, periodic) per segment
    let mut estimates = Vec::with_capacity(table.segments.len());
    for (seg, &part) in table.segments.iter().zip(&table.parts) {
        let d = &seg.departure;
        let cut = (transient_fraction * d.len() as f64).floor() as usize;
        let kept = &d[cut..];
        if kept.len() < MIN_RETAINED {
            return Err(PhaseError::InsufficientData {
                retained: kept.len(),
                need: MIN_RETAINED,
            });
        }
        let (h, periodic) = segment_headway(kept, tol);
        let idx = part_index(part);
        per_part[idx].0 = per_part[idx].0 + h;
        per_part[idx].1 += 1;
        let central_equivalent = if part == Part::Central {
            h
        } else {
            h / T::of(2.0)
        };
        estimates.push((central_equivalent, periodic));
    }
    let mean = |i: usize| per_part[i].0 / T::of_usize(per_part[i].1);
    let h0 = mean(0);
    let residual = estimates
        .iter()
        .fold(T::zero(), |acc, &(h, _)| acc.max((h - h0).abs()));
    let converged = estimates.iter().all(|&(_, p)| p) && residual <= tol * h0;
    Ok(GrowthRateEstimate {
        h0,
        h1: mean(1),
        h2: mean(2),
        f0: T::one() / h0,
        converged,
        residual,
    })
}

fn part_index(part: Part) -> usize {
    match part {
        Part::Central => 0,
        Part::Branch1 => 1,
        Part::Branch2 => 2,
    }
}
