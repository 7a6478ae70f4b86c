//! Reference lines and random instances used by tests and the CLI.

use rand::{Rng, RngExt};

use crate::maxplus::MaxPlusMatrix;
use crate::topology::{LineDescription, PartDescription, PlatformDescription, SegmentDescription};

pub const T9_RUN: f64 = 60.0;
pub const T9_MIN_RUN: f64 = 45.0;
pub const T9_SEPARATION: f64 = 30.0;
pub const T9_MIN_DWELL: f64 = 20.0;
pub const T9_MAX_DWELL: f64 = 60.0;
pub const T9_ALPHA: f64 = 1.0;

fn plain() -> SegmentDescription {
    SegmentDescription {
        run_time: T9_RUN,
        min_run_time: T9_MIN_RUN,
        safe_separation: T9_SEPARATION,
        platform: None,
    }
}

fn platform(lambda: f64) -> SegmentDescription {
    SegmentDescription {
        platform: Some(PlatformDescription {
            lambda,
            alpha: T9_ALPHA,
            min_dwell: T9_MIN_DWELL,
            max_dwell: T9_MAX_DWELL,
        }),
        ..plain()
    }
}

/// Desk instance: four central segments per direction with platforms on the
/// second and third, one segment per branch direction with a platform on the
/// outbound (terminus) segment. Twelve segments, no demand.
pub fn t9_description() -> LineDescription {
    t9_with_demand(0.0, 0.0, 0.0)
}

/// Desk instance with the given arrival rate on the platforms of each part.
pub fn t9_with_demand(central: f64, branch1: f64, branch2: f64) -> LineDescription {
    let central_dir = || vec![plain(), platform(central), platform(central), plain()];
    let branch = |lambda| PartDescription {
        outbound: vec![platform(lambda)],
        inbound: vec![plain()],
    };
    LineDescription {
        central: PartDescription {
            outbound: central_dir(),
            inbound: central_dir(),
        },
        branch1: branch(branch1),
        branch2: branch(branch2),
    }
}

/// Arrival rate on every platform of the eight-phase setting.
pub const EIGHT_PHASE_LAMBDA: f64 = 0.15;
/// Reference headway of the eight-phase setting; compensation is on.
pub const EIGHT_PHASE_REFERENCE_HEADWAY: f64 = 150.0;

/// Desk instance under uniform demand. With compensation against
/// [`EIGHT_PHASE_REFERENCE_HEADWAY`] its sweep over m in 0..=12 and Δm in
/// -2..=2 shows all eight phases.
pub fn t9_eight_phase() -> LineDescription {
    t9_with_demand(EIGHT_PHASE_LAMBDA, EIGHT_PHASE_LAMBDA, EIGHT_PHASE_LAMBDA)
}

/// One segment per part and direction, one platform per part.
pub fn minimal_description() -> LineDescription {
    let part = || PartDescription {
        outbound: vec![platform(0.0)],
        inbound: vec![plain()],
    };
    LineDescription {
        central: part(),
        branch1: part(),
        branch2: part(),
    }
}

/// Random valid line with at most `max_segments` (>= 6) segments.
///
/// Times are whole seconds and arrival rates multiples of 0.01 so that runs
/// are reproducible to the last bit; without `demand` every rate is zero.
pub fn random_description<R: Rng + ?Sized>(
    rng: &mut R,
    max_segments: usize,
    demand: bool,
) -> LineDescription {
    assert!(max_segments >= 6, "a line needs six directed runs");
    let segment = |rng: &mut R, platform: bool| {
        let run_time = f64::from(rng.random_range(30u32..=90));
        SegmentDescription {
            run_time,
            min_run_time: run_time - f64::from(rng.random_range(0u32..=15)),
            safe_separation: f64::from(rng.random_range(10u32..=40)),
            platform: platform.then(|| {
                let min_dwell = f64::from(rng.random_range(10u32..=30));
                PlatformDescription {
                    lambda: if demand {
                        f64::from(rng.random_range(0u32..=30)) / 100.0
                    } else {
                        0.0
                    },
                    alpha: 1.0,
                    min_dwell,
                    max_dwell: min_dwell + f64::from(rng.random_range(0u32..=40)),
                }
            }),
        }
    };
    let part = |rng: &mut R, max_dir: usize| {
        let run = |rng: &mut R, forced: bool| -> Vec<SegmentDescription> {
            let len = rng.random_range(1..=max_dir);
            (0..len)
                .map(|i| {
                    let platform = (forced && i == 0) || rng.random_bool(0.4);
                    segment(rng, platform)
                })
                .collect()
        };
        PartDescription {
            outbound: run(rng, true),
            inbound: run(rng, false),
        }
    };
    let branch_max = ((max_segments - 2) / 4).clamp(1, 2);
    let branch1 = part(rng, branch_max);
    let branch2 = part(rng, branch_max);
    let used: usize = [&branch1, &branch2]
        .iter()
        .map(|p| p.outbound.len() + p.inbound.len())
        .sum();
    let central = part(rng, ((max_segments - used) / 2).clamp(1, 4));
    LineDescription {
        central,
        branch1,
        branch2,
    }
}

/// Random irreducible `n`×`n` matrix: a Hamiltonian cycle plus arcs of
/// density `density`, weights uniform in [-100, 100].
pub fn random_irreducible_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    density: f64,
) -> MaxPlusMatrix<f64> {
    let mut a = MaxPlusMatrix::epsilon(n).expect("n > 0");
    let weight = |rng: &mut R| rng.random_range(-100.0..=100.0);
    for i in 0..n {
        a.raise((i + 1) % n, i, weight(rng));
    }
    for i in 0..n {
        for j in 0..n {
            if rng.random_bool(density) {
                a.raise(i, j, weight(rng));
            }
        }
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::build_line;
    use crate::Line;
    use rand::SeedableRng;

    #[test]
    fn random_lines_are_valid() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for max in [6, 9, 16] {
            for _ in 0..50 {
                let line: Line = build_line(&random_description(&mut rng, max, true)).unwrap();
                assert!(line.len() <= max);
            }
        }
    }

    #[test]
    fn random_matrices_are_irreducible() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for n in [1, 2, 17] {
            assert!(random_irreducible_matrix(&mut rng, n, 0.1).is_strongly_connected());
        }
    }
}
