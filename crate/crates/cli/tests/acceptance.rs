//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero when any fails.

use std::path::{Path, PathBuf};
use std::time::Instant;

use metro_junction::control::ControlParams;
use metro_junction::engine::{simulate, EngineError, SimOptions};
use metro_junction::fixtures;
use metro_junction::maxplus::{assemble_matrix, howard, karp};
use metro_junction::oracle::entity_oracle_simulate;
use metro_junction::phase::{compare_scenarios, growth_rate, sweep, PhaseDiagram, PhaseLabel};
use metro_junction::topology::{build_line, seed_trains, Part};
use metro_junction::{Controls, Line};
use metro_junction_cli::config::{parse_config, DemandScale, Overrides, Scenario};
use metro_junction_cli::run_cli;
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

type Outcome = Result<String, String>;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn scenario(name: &str) -> Scenario {
    let text = std::fs::read_to_string(fixture(name)).unwrap();
    Scenario::from_config(parse_config(&text).unwrap(), &Overrides::default()).unwrap()
}

fn diagram(s: &Scenario) -> PhaseDiagram<f64> {
    sweep(
        &s.line,
        &s.controls,
        s.m_range.clone(),
        s.dm_range.clone(),
        &s.options,
    )
    .unwrap()
}

/// Exact recursion/oracle equality and the max-plus cycle time at every
/// feasible point of a demand-free line.
fn three_way(line: &Line, periods: usize) -> Result<(usize, f64), String> {
    let controls = ControlParams::inactive(line);
    let opts = SimOptions::periods(periods);
    let branch_cap = line
        .part_len(Part::Branch1)
        .max(line.part_len(Part::Branch2)) as i64;
    let (mut points, mut worst) = (0, 0.0f64);
    for m in 0..=line.capacity() {
        for dm in -branch_cap..=branch_cap {
            let Ok(cfg) = seed_trains(line, m, dm) else {
                continue;
            };
            let fast = simulate(line, &cfg, &controls, &opts);
            let slow = entity_oracle_simulate(line, &cfg, &controls, &opts);
            let table = match (fast, slow) {
                (Ok(a), Ok(b)) if a == b => a,
                (Ok(a), Ok(b)) => {
                    return Err(format!(
                        "({m}, {dm}) oracle gap {:?}",
                        a.max_discrepancy(&b)
                    ))
                }
                (Err(EngineError::Deadlock { .. }), Err(EngineError::Deadlock { .. })) => continue,
                (a, b) => return Err(format!("({m}, {dm}) {:?} vs {:?}", a.err(), b.err())),
            };
            points += 1;
            if m == 0 {
                continue;
            }
            let est = growth_rate(&table, 0.3).map_err(|e| e.to_string())?;
            let sys = assemble_matrix(line, &cfg).map_err(|e| format!("({m}, {dm}) {e}"))?;
            let rate = karp(&sys.matrix).map_err(|e| e.to_string())?;
            let gap = (est.period() - rate).abs();
            if !est.converged || gap >= 1e-6 {
                return Err(format!(
                    "({m}, {dm}) simulated {} vs max-plus {rate} (converged {})",
                    est.period(),
                    est.converged
                ));
            }
            worst = worst.max(gap);
        }
    }
    Ok((points, worst))
}

fn oracle_agreement() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(2024);
    let mut lines: Vec<Line> = (0..24)
        .map(|_| build_line(&fixtures::random_description(&mut rng, 16, false)).unwrap())
        .collect();
    lines.push(build_line(&fixtures::t9_description()).unwrap());
    let (mut points, mut worst) = (0, 0.0f64);
    for (i, line) in lines.iter().enumerate() {
        let (p, w) = three_way(line, 500).map_err(|e| format!("instance {i}: {e}"))?;
        points += p;
        worst = worst.max(w);
    }
    let elapsed = start.elapsed().as_secs_f64();
    if elapsed >= 10.0 {
        return Err(format!("took {elapsed:.1} s"));
    }
    Ok(format!(
        "{} instances, {points} points, oracle exact, max-plus gap {worst:e} s, {elapsed:.2} s",
        lines.len()
    ))
}

fn karp_howard() -> Outcome {
    let mut rng = StdRng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let n = rng.random_range(1..=50);
        let density = rng.random_range(0.0..0.3);
        let a = fixtures::random_irreducible_matrix(&mut rng, n, density);
        let (k, h) = (
            karp(&a).map_err(|e| e.to_string())?,
            howard(&a).map_err(|e| e.to_string())?,
        );
        let gap = (k - h).abs();
        if gap >= 1e-9 {
            return Err(format!("matrix {i} (n = {n}): karp {k} howard {h}"));
        }
        worst = worst.max(gap);
    }
    Ok(format!("100 matrices, max gap {worst:e}"))
}

fn frequency_relation(diagrams: &[&PhaseDiagram<f64>]) -> Outcome {
    let mut checked = 0;
    for d in diagrams {
        for p in &d.points {
            let Some(e) = p.estimate.filter(|e| e.converged && e.f0 > 0.0) else {
                continue;
            };
            for (name, h) in [("h1", e.h1), ("h2", e.h2)] {
                if (h - 2.0 * e.h0).abs() > 1e-4 * 2.0 * e.h0 {
                    return Err(format!("({}, {}): {name} = {h}, h0 = {}", p.m, p.dm, e.h0));
                }
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} converged points"))
}

fn endpoints(cases: &[(&Scenario, &PhaseDiagram<f64>)]) -> Outcome {
    let mut checked = 0;
    for (s, d) in cases {
        let cap = s.line.capacity();
        for p in d.points.iter().filter(|p| p.m == 0 || p.m == cap) {
            if p.f0() != Some(0.0) {
                return Err(format!("({}, {}): f0 = {:?}", p.m, p.dm, p.f0()));
            }
            checked += 1;
        }
        if !d.points.iter().any(|p| p.m == cap) {
            return Err("full line missing from the grid".into());
        }
    }
    Ok(format!("{checked} points at m = 0 or capacity"))
}

fn eight_phases(d: &PhaseDiagram<f64>) -> Outcome {
    let labels = d.labels();
    let unclassified = d.points.iter().filter(|p| p.label().is_none()).count();
    let names: Vec<&str> = labels.iter().map(|l| l.as_str()).collect();
    if labels.len() == PhaseLabel::ALL.len() && unclassified == 0 {
        Ok(format!("labels {}", names.join(" ")))
    } else {
        Err(format!(
            "labels {}, {unclassified} unclassified",
            names.join(" ")
        ))
    }
}

fn boundary_behavior(s: &Scenario, base: &PhaseDiagram<f64>) -> Outcome {
    let run = |scale: DemandScale| -> Result<PhaseDiagram<f64>, String> {
        Ok(diagram(&s.variant_with(scale).map_err(|e| e.to_string())?))
    };
    let uniform = run(DemandScale {
        central: 1.5,
        branch1: 1.5,
        branch2: 1.5,
    })?;
    let skewed = run(DemandScale {
        central: 1.5,
        branch1: 1.0,
        branch2: 1.5,
    })?;
    let jd = compare_scenarios(base, &uniform)
        .map_err(|e| e.to_string())?
        .jd;
    let ag = compare_scenarios(base, &skewed)
        .map_err(|e| e.to_string())?
        .ag;
    match (jd, ag) {
        (Some(jd), Some(ag)) if jd.max_abs <= 1.0 && ag.max_abs >= 1.0 => Ok(format!(
            "JD moves {} cells under uniform scaling, AG moves {} cells under branch 2 + central scaling",
            jd.max_abs, ag.max_abs
        )),
        (jd, ag) => Err(format!("JD shift {jd:?}, AG shift {ag:?}")),
    }
}

/// Initial ready times shifted by +10 s and -10 s on alternate trains.
fn offsets(occupancy: &[bool], sign: f64) -> Vec<f64> {
    let mut i = 0;
    occupancy
        .iter()
        .map(|&b| {
            if !b {
                return 0.0;
            }
            i += 1;
            if i % 2 == 0 {
                10.0 * sign
            } else {
                -10.0 * sign
            }
        })
        .collect()
}

fn uniqueness() -> Outcome {
    let line: Line = build_line(&fixtures::t9_with_demand(0.05, 0.05, 0.05)).unwrap();
    let controls: Controls = ControlParams::new(&line, 150.0).unwrap();
    let margin = controls.margin.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let (mut extension, mut worst, mut points) = (0.0f64, 0.0f64, 0);
    for m in 1..line.capacity() {
        for dm in -2..=2 {
            let Ok(cfg) = seed_trains(&line, m, dm) else {
                continue;
            };
            let mut rates = Vec::new();
            for sign in [1.0, -1.0] {
                let mut o = SimOptions::periods(500);
                o.initial_ready = Some(offsets(cfg.occupancy(), sign));
                let Ok(t) = simulate(&line, &cfg, &controls, &o) else {
                    continue;
                };
                for (j, seg) in t.segments.iter().enumerate() {
                    if line.segment(j).platform.is_some() {
                        for d in &seg.dwell {
                            extension = extension.max(d - controls.nominal_dwell[j]);
                        }
                    }
                }
                let est = growth_rate(&t, 0.3).map_err(|e| e.to_string())?;
                if !est.converged {
                    return Err(format!("({m}, {dm}): no cyclic regime"));
                }
                rates.push(est.h0);
            }
            match rates[..] {
                [] => {}
                [a, b] => {
                    worst = worst.max((a - b).abs() / a);
                    points += 1;
                }
                _ => return Err(format!("({m}, {dm}): only one offset run moves")),
            }
        }
    }
    if extension > margin {
        return Err(format!(
            "precondition: extension {extension} s exceeds margin {margin} s"
        ));
    }
    if worst > 1e-6 {
        return Err(format!("relative rate gap {worst:e}"));
    }
    Ok(format!(
        "{points} points, max dwell extension {extension} s <= margin {margin} s, max relative gap {worst:e}"
    ))
}

fn monotonicity(
    s: &Scenario,
    base: &PhaseDiagram<f64>,
    demand_free: &PhaseDiagram<f64>,
) -> Outcome {
    let mut pairs = 0;
    for d in [base, demand_free] {
        for a in &d.points {
            let Some(b) = d.point(a.m + 1, a.dm) else {
                continue;
            };
            let (Some(la), Some(lb), Some(fa), Some(fb)) = (a.label(), b.label(), a.f0(), b.f0())
            else {
                continue;
            };
            if la.is_free_flow() && lb.is_free_flow() {
                if fb < fa * (1.0 - 1e-9) {
                    return Err(format!(
                        "free flow drops from ({}, {}) to ({}, {})",
                        a.m, a.dm, b.m, b.dm
                    ));
                }
                pairs += 1;
            }
            if la.is_congested() && lb.is_congested() {
                if fb > fa * (1.0 + 1e-9) {
                    return Err(format!(
                        "congestion rises from ({}, {}) to ({}, {})",
                        a.m, a.dm, b.m, b.dm
                    ));
                }
                pairs += 1;
            }
        }
    }
    let mut scaled_points = 0;
    for factor in [1.25, 1.5] {
        let busier = diagram(
            &s.variant_with(DemandScale {
                central: factor,
                branch1: factor,
                branch2: factor,
            })
            .map_err(|e| e.to_string())?,
        );
        for (p, q) in base.points.iter().zip(&busier.points) {
            let (Some(f), Some(g)) = (p.f0(), q.f0()) else {
                continue;
            };
            if g > f * (1.0 + 1e-9) {
                return Err(format!(
                    "({}, {}): f0 rises from {f} to {g} at demand x{factor}",
                    p.m, p.dm
                ));
            }
            scaled_points += 1;
        }
    }
    Ok(format!(
        "{pairs} same-regime pairs adjacent in m, {scaled_points} demand-scaled points"
    ))
}

fn cli_determinism() -> Outcome {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let commands = ["simulate", "sweep", "boundaries", "compare", "oracle-check"];
    for (dir, threads) in dirs.iter().zip(["1", "4"]) {
        for cmd in commands {
            let out = dir.path().join(cmd);
            let config = fixture("t9_eight_phase.json");
            let args = [
                "metro-junction",
                cmd,
                "--config",
                config.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--parallel",
                threads,
            ];
            let code = run_cli(args, &mut Vec::new(), &mut Vec::new());
            if code != 0 {
                return Err(format!("{cmd} exited with {code}"));
            }
        }
    }
    let mut files = 0;
    for cmd in commands {
        let read = |d: &tempfile::TempDir| -> Vec<(String, Vec<u8>)> {
            let mut entries: Vec<_> = std::fs::read_dir(d.path().join(cmd))
                .unwrap()
                .map(|e| e.unwrap().path())
                .collect();
            entries.sort();
            entries
                .into_iter()
                .map(|p| {
                    (
                        p.file_name().unwrap().to_string_lossy().into_owned(),
                        std::fs::read(&p).unwrap(),
                    )
                })
                .collect()
        };
        let (a, b) = (read(&dirs[0]), read(&dirs[1]));
        if a != b {
            return Err(format!("{cmd} outputs differ"));
        }
        files += a.len();
    }
    Ok(format!(
        "{files} files byte-identical across runs with 1 and 4 threads"
    ))
}

fn main() {
    let eight = scenario("t9_eight_phase.json");
    let plain = scenario("t9.json");
    let eight_diagram = diagram(&eight);
    let plain_diagram = diagram(&plain);

    let results: Vec<(&str, Outcome)> = vec![
        ("three-way oracle agreement", oracle_agreement()),
        ("Karp/Howard cross-check", karp_howard()),
        (
            "branch headways twice the central one",
            frequency_relation(&[&eight_diagram, &plain_diagram]),
        ),
        (
            "zero frequency at m = 0 and capacity",
            endpoints(&[(&eight, &eight_diagram), (&plain, &plain_diagram)]),
        ),
        (
            "eight phases on the committed fixture",
            eight_phases(&eight_diagram),
        ),
        (
            "boundary behavior under demand scaling",
            boundary_behavior(&eight, &eight_diagram),
        ),
        ("rate independent of initial offsets", uniqueness()),
        (
            "monotonicity",
            monotonicity(&eight, &eight_diagram, &plain_diagram),
        ),
        ("byte-identical CLI outputs", cli_determinism()),
    ];
    let mut failed = 0;
    for (i, (name, outcome)) in results.iter().enumerate() {
        match outcome {
            Ok(detail) => println!("criterion {} PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} FAIL {name}: {detail}", i + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
