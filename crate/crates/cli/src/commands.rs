use std::fmt::Write as _;
use std::path::Path;

use metro_junction::engine::{simulate as run_recursion, EngineError, SimOptions};
use metro_junction::maxplus::{assemble_matrix, karp, MaxPlusError};
use metro_junction::oracle::entity_oracle_simulate;
use metro_junction::phase::{
    binding_census, boundaries_csv, classify_phase, compare_scenarios, extract_boundary,
    growth_rate, sweep as run_sweep, Boundary, BoundaryKind, PhaseError, PhaseLabel,
};
use metro_junction::topology::{seed_trains, Part, TrainConfiguration};
use metro_junction::{Diagram, Line};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Scenario;
use crate::CliError;

/// Largest departure-time gap between the recursion and the max-plus cycle
/// time for the check to pass, in seconds per period.
const MAXPLUS_TOLERANCE: f64 = 1e-6;

fn write_file(dir: &Path, name: &str, contents: &str, report: &mut String) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
    let _ = writeln!(report, "wrote {}", path.display());
    Ok(())
}

fn infeasible(e: impl std::fmt::Display) -> CliError {
    CliError::Infeasible(e.to_string())
}

pub fn validate(s: &Scenario, report: &mut String) -> Result<(), CliError> {
    let line = &s.line;
    let counts = |f: &dyn Fn(Part) -> usize| {
        Part::ALL
            .map(|p| format!("{} {}", p.key(), f(p)))
            .join(", ")
    };
    let platforms: usize = Part::ALL.iter().map(|&p| line.platform_count(p)).sum();
    let _ = writeln!(
        report,
        "segments {}: {}",
        line.len(),
        counts(&|p| line.part_len(p))
    );
    let _ = writeln!(
        report,
        "platforms {platforms}: {}",
        counts(&|p| line.platform_count(p))
    );
    let _ = writeln!(report, "capacity {}", line.capacity());
    let _ = writeln!(
        report,
        "junction: divergence segment {}, convergence segment {}",
        line.divergence(),
        line.convergence()
    );
    Ok(())
}

fn configuration(s: &Scenario) -> Result<TrainConfiguration, CliError> {
    let (m, dm, first) = s.point().ok_or_else(|| {
        CliError::Config("simulate: no point given (set simulate.m/dm or --m/--dm)".into())
    })?;
    let cfg = seed_trains(&s.line, m, dm).map_err(infeasible)?;
    Ok(match first {
        Some(b) => cfg.with_first_branch(b),
        None => cfg,
    })
}

fn sim_options(s: &Scenario) -> SimOptions<f64> {
    let mut o = SimOptions::periods(s.options.periods);
    o.stagger = s.options.stagger;
    o
}

#[derive(Serialize)]
struct SimulationSummary {
    m: usize,
    dm: i64,
    first_branch: u8,
    periods: usize,
    transient_fraction: f64,
    /// Infinite headways are written as null.
    h0_s: f64,
    h1_s: f64,
    h2_s: f64,
    f0_tph: f64,
    converged: bool,
    residual_s: f64,
    phase: Option<String>,
    on_boundary: bool,
}

pub fn simulate(s: &Scenario, out: &Path, report: &mut String) -> Result<(), CliError> {
    let cfg = configuration(s)?;
    let table = run_recursion(&s.line, &cfg, &s.controls, &sim_options(s)).map_err(infeasible)?;
    let estimate = growth_rate(&table, s.options.transient_fraction).map_err(infeasible)?;
    let census = binding_census(&s.line, &cfg, &table, s.options.transient_fraction);
    let class = classify_phase(
        &estimate,
        &census,
        &s.line,
        &cfg,
        &s.controls,
        &s.options.classify,
    )
    .ok();
    let summary = SimulationSummary {
        m: cfg.m(),
        dm: cfg.delta_m(&s.line),
        first_branch: match cfg.first_branch() {
            metro_junction::topology::Branch::One => 1,
            metro_junction::topology::Branch::Two => 2,
        },
        periods: s.options.periods,
        transient_fraction: s.options.transient_fraction,
        h0_s: estimate.h0,
        h1_s: estimate.h1,
        h2_s: estimate.h2,
        f0_tph: estimate.f0_per_hour(),
        converged: estimate.converged,
        residual_s: estimate.residual,
        phase: class.map(|c| c.label.to_string()),
        on_boundary: class.is_some_and(|c| c.on_boundary),
    };
    let mut json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    json.push('\n');
    write_file(out, "departures.csv", &table.to_csv(), report)?;
    write_file(out, "summary.json", &json, report)?;
    let _ = writeln!(
        report,
        "m={} dm={}: h0 {} s, f0 {} trains/h, phase {}",
        summary.m,
        summary.dm,
        summary.h0_s,
        summary.f0_tph,
        summary.phase.as_deref().unwrap_or("unclassified")
    );
    Ok(())
}

fn diagram(s: &Scenario) -> Result<Diagram, CliError> {
    run_sweep(
        &s.line,
        &s.controls,
        s.m_range.clone(),
        s.dm_range.clone(),
        &s.options,
    )
    .map_err(infeasible)
}

fn summarize(d: &Diagram, report: &mut String) {
    let labels: Vec<&str> = d.labels().into_iter().map(|l| l.as_str()).collect();
    let unclassified = d.points.iter().filter(|p| p.label().is_none()).count();
    let _ = writeln!(
        report,
        "{} points, phases {}, {unclassified} unclassified",
        d.points.len(),
        labels.join(" ")
    );
    if d.labels().contains(&PhaseLabel::IVb) {
        let _ = writeln!(
            report,
            "note: IVb marks moving trains whose critical walk stays inside one part"
        );
    }
}

pub fn sweep(s: &Scenario, out: &Path, report: &mut String) -> Result<(), CliError> {
    let d = diagram(s)?;
    write_file(out, "phase_diagram.csv", &d.to_csv(), report)?;
    summarize(&d, report);
    Ok(())
}

fn boundary_fit_csv(boundaries: &[&Boundary]) -> String {
    let mut out = String::from("name,intercept,slope,r_squared,columns\n");
    for b in boundaries {
        match &b.fit {
            Some(f) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    b.kind.name(),
                    f.intercept,
                    f.slope,
                    f.r_squared,
                    b.polyline.len()
                );
            }
            None => {
                let _ = writeln!(out, "{},,,,{}", b.kind.name(), b.polyline.len());
            }
        }
    }
    out
}

pub fn boundaries(s: &Scenario, out: &Path, report: &mut String) -> Result<(), CliError> {
    let d = diagram(s)?;
    let mut found = Vec::new();
    for kind in [BoundaryKind::Ag, BoundaryKind::Jd] {
        match extract_boundary(&d, kind) {
            Ok(b) => found.push(b),
            Err(e @ PhaseError::MissingRegion { .. }) => {
                let _ = writeln!(report, "skipped {}: {e}", kind.name());
            }
            Err(e) => return Err(infeasible(e)),
        }
    }
    if found.is_empty() {
        return Err(CliError::Infeasible(
            "no phase boundary in the swept grid".into(),
        ));
    }
    let refs: Vec<&Boundary> = found.iter().collect();
    write_file(out, "phase_diagram.csv", &d.to_csv(), report)?;
    write_file(out, "boundaries.csv", &boundaries_csv(&refs), report)?;
    write_file(out, "boundary_fit.csv", &boundary_fit_csv(&refs), report)?;
    summarize(&d, report);
    Ok(())
}

pub fn compare(s: &Scenario, out: &Path, report: &mut String) -> Result<(), CliError> {
    let scale = s
        .config
        .variant
        .as_ref()
        .ok_or_else(|| {
            CliError::Config("variant: compare needs a variant.demand_scale section".into())
        })?
        .demand_scale;
    let variant = s.variant_with(scale)?;
    let base = diagram(s)?;
    let other = diagram(&variant)?;
    let diff = compare_scenarios(&base, &other).map_err(infeasible)?;
    write_file(out, "comparison.csv", &diff.to_csv(), report)?;
    write_file(out, "boundary_shift.csv", &diff.shifts_csv(), report)?;
    for (kind, shift) in [(BoundaryKind::Ag, diff.ag), (BoundaryKind::Jd, diff.jd)] {
        match shift {
            Some(sh) => {
                let _ = writeln!(
                    report,
                    "{}: max shift {} cells over {} columns",
                    kind.name(),
                    sh.max_abs,
                    sh.columns
                );
            }
            None => {
                let _ = writeln!(report, "{}: not present in both diagrams", kind.name());
            }
        }
    }
    Ok(())
}

/// Outcome of the three-way check at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCheck {
    pub m: usize,
    pub dm: i64,
    /// Both simulations deadlocked.
    pub deadlock: bool,
    /// `None` when only one of the two simulations deadlocked.
    pub oracle_max_abs: Option<f64>,
    pub period: Option<f64>,
    pub maxplus_period: Option<f64>,
}

impl PointCheck {
    pub fn maxplus_abs(&self) -> Option<f64> {
        Some((self.period? - self.maxplus_period?).abs())
    }

    pub fn passed(&self) -> bool {
        self.oracle_max_abs == Some(0.0) && self.maxplus_abs().is_none_or(|d| d < MAXPLUS_TOLERANCE)
    }
}

fn has_demand(line: &Line) -> bool {
    line.segments()
        .iter()
        .any(|seg| seg.platform.is_some_and(|p| p.arrival_rate > 0.0))
}

/// Recursion against the entity simulation and, without demand, the max-plus cycle time.
pub fn check_point(s: &Scenario, cfg: &TrainConfiguration) -> Result<PointCheck, CliError> {
    let opts = sim_options(s);
    let fast = run_recursion(&s.line, cfg, &s.controls, &opts);
    let slow = entity_oracle_simulate(&s.line, cfg, &s.controls, &opts);
    let mut check = PointCheck {
        m: cfg.m(),
        dm: cfg.delta_m(&s.line),
        deadlock: false,
        oracle_max_abs: None,
        period: None,
        maxplus_period: None,
    };
    let table = match (fast, slow) {
        (Err(EngineError::Deadlock { .. }), Err(EngineError::Deadlock { .. })) => {
            check.deadlock = true;
            check.oracle_max_abs = Some(0.0);
            return Ok(check);
        }
        (Ok(a), Ok(b)) => {
            check.oracle_max_abs = a.max_discrepancy(&b);
            a
        }
        (Err(e), _) | (_, Err(e)) if !matches!(e, EngineError::Deadlock { .. }) => {
            return Err(infeasible(e))
        }
        _ => return Ok(check),
    };
    if table.is_empty() {
        return Ok(check);
    }
    let estimate = growth_rate(&table, s.options.transient_fraction).map_err(infeasible)?;
    check.period = Some(estimate.period());
    if !has_demand(&s.line) {
        match assemble_matrix(&s.line, cfg).and_then(|sys| karp(&sys.matrix)) {
            Ok(rate) => check.maxplus_period = Some(rate),
            Err(MaxPlusError::NotStronglyConnected) => {}
            Err(e) => return Err(infeasible(e)),
        }
    }
    Ok(check)
}

fn cell(x: Option<f64>) -> String {
    x.map_or(String::new(), |v| v.to_string())
}

pub fn oracle_check(s: &Scenario, out: &Path, report: &mut String) -> Result<(), CliError> {
    let configs: Vec<TrainConfiguration> = match s.point() {
        Some(_) => vec![configuration(s)?],
        None => s
            .m_range
            .clone()
            .flat_map(|m| s.dm_range.clone().map(move |dm| (m, dm)))
            .filter_map(|(m, dm)| seed_trains(&s.line, m, dm).ok())
            .collect(),
    };
    if configs.is_empty() {
        return Err(CliError::Infeasible(
            "the grid has no feasible point".into(),
        ));
    }
    let checks = configs
        .par_iter()
        .map(|cfg| check_point(s, cfg))
        .collect::<Result<Vec<_>, _>>()?;

    let mut csv =
        String::from("m,dm,deadlock,oracle_max_abs_s,period_s,maxplus_period_s,maxplus_abs_s\n");
    for c in &checks {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            c.m,
            c.dm,
            c.deadlock,
            cell(c.oracle_max_abs),
            cell(c.period),
            cell(c.maxplus_period),
            cell(c.maxplus_abs())
        );
    }
    write_file(out, "oracle_check.csv", &csv, report)?;
    if checks.len() == 1 && !has_demand(&s.line) {
        if let Ok(sys) = assemble_matrix(&s.line, &configs[0]) {
            write_file(
                out,
                "maxplus_matrix.csv",
                &sys.matrix.to_triplet_csv(),
                report,
            )?;
        }
    }

    let worst =
        |f: &dyn Fn(&PointCheck) -> Option<f64>| checks.iter().filter_map(f).fold(0.0f64, f64::max);
    let oracle = worst(&|c| c.oracle_max_abs);
    let maxplus = worst(&|c| c.maxplus_abs());
    let compared = checks.iter().filter(|c| c.maxplus_period.is_some()).count();
    let _ = writeln!(
        report,
        "{} points: max oracle discrepancy {oracle} s, max max-plus discrepancy {maxplus} s ({compared} compared)",
        checks.len()
    );
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.passed())
        .map(|c| format!("({}, {})", c.m, c.dm))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::CheckFailed(format!(
            "disagreement at {}",
            failed.join(" ")
        )))
    }
}
