//! Scenario files.
//!
//! A scenario is one JSON document:
//!
//! ```json
//! {
//!   "line": { "central": {...}, "branch1": {...}, "branch2": {...} },
//!   "controls": { "reference_headway": 150.0, "compensation": true },
//!   "sweep": { "m": [0, 12], "dm": [-2, 2] },
//!   "run": { "periods": 500, "transient_fraction": 0.3, "stagger": 0.0 },
//!   "simulate": { "m": 5, "dm": 1, "first_branch": 1 },
//!   "variant": { "demand_scale": { "central": 1.5, "branch1": 1.0, "branch2": 1.5 } },
//!   "classify": { "dominance": 0.9, "tie_tolerance": 1e-9 }
//! }
//! ```
//!
//! Only `line` is required. Without `controls` the runs use nominal times and
//! minimum dwells as nominal dwells. Every validation error starts with the
//! path of the offending field.

use std::ops::RangeInclusive;

use metro_junction::control::ControlParams;
use metro_junction::phase::{ClassifyOptions, SweepOptions};
use metro_junction::topology::{build_line, Branch, LineDescription, Part, PartDescription};
use metro_junction::{Controls, Line};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub line: LineDescription,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controls: Option<ControlsConfig>,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<PointConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<VariantConfig>,
    #[serde(default)]
    pub classify: ClassifyOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlsConfig {
    /// Seconds; sets the nominal dwells.
    pub reference_headway: f64,
    #[serde(default = "enabled")]
    pub compensation: bool,
}

fn enabled() -> bool {
    true
}

/// Inclusive bounds; missing bounds cover every feasible point.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dm: Option<[i64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Simulated periods K (branch departures per segment).
    pub periods: usize,
    pub transient_fraction: f64,
    /// Seconds between the initial trains.
    pub stagger: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            periods: 500,
            transient_fraction: 0.3,
            stagger: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointConfig {
    pub m: usize,
    pub dm: i64,
    /// Branch (1 or 2) whose train enters the central part first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_branch: Option<u8>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantConfig {
    pub demand_scale: DemandScale,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DemandScale {
    pub central: f64,
    pub branch1: f64,
    pub branch2: f64,
}

impl Default for DemandScale {
    fn default() -> Self {
        DemandScale {
            central: 1.0,
            branch1: 1.0,
            branch2: 1.0,
        }
    }
}

impl DemandScale {
    fn factor(&self, part: Part) -> f64 {
        match part {
            Part::Central => self.central,
            Part::Branch1 => self.branch1,
            Part::Branch2 => self.branch2,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub periods: Option<usize>,
    pub transient_fraction: Option<f64>,
    pub m: Option<usize>,
    pub dm: Option<i64>,
}

/// A validated scenario ready to run.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub line: Line,
    pub controls: Controls,
    pub m_range: RangeInclusive<usize>,
    pub dm_range: RangeInclusive<i64>,
    pub options: SweepOptions<f64>,
}

fn config_error(path: &str, message: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{path}: {message}"))
}

/// Parse JSON, reporting the path of the first field that does not fit.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." {
            "config".to_string()
        } else {
            path
        };
        config_error(&path, e.into_inner())
    })
}

fn controls_for(config: &ScenarioConfig, line: &Line) -> Result<Controls, CliError> {
    match &config.controls {
        None => Ok(ControlParams::inactive(line)),
        Some(c) => {
            let mut params = ControlParams::new(line, c.reference_headway)
                .map_err(|e| config_error("controls.reference_headway", e))?;
            params.compensation = c.compensation;
            Ok(params)
        }
    }
}

fn scale_part(part: &mut PartDescription, factor: f64) {
    for seg in part.outbound.iter_mut().chain(part.inbound.iter_mut()) {
        if let Some(p) = seg.platform.as_mut() {
            p.lambda *= factor;
        }
    }
}

impl Scenario {
    pub fn from_config(
        mut config: ScenarioConfig,
        overrides: &Overrides,
    ) -> Result<Self, CliError> {
        if let Some(k) = overrides.periods {
            config.run.periods = k;
        }
        if let Some(f) = overrides.transient_fraction {
            config.run.transient_fraction = f;
        }
        let line: Line = build_line(&config.line).map_err(|e| CliError::Config(e.to_string()))?;
        let controls = controls_for(&config, &line)?;

        let run = &config.run;
        if run.periods == 0 {
            return Err(config_error("run.periods", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&run.transient_fraction) {
            return Err(config_error("run.transient_fraction", "must lie in [0, 1)"));
        }
        if !run.stagger.is_finite() || run.stagger < 0.0 {
            return Err(config_error(
                "run.stagger",
                "must be finite and non-negative",
            ));
        }
        let c = &config.classify;
        if !(c.dominance > 0.5 && c.dominance <= 1.0) {
            return Err(config_error("classify.dominance", "must lie in (0.5, 1]"));
        }
        if !c.tie_tolerance.is_finite() || c.tie_tolerance < 0.0 {
            return Err(config_error(
                "classify.tie_tolerance",
                "must be finite and non-negative",
            ));
        }

        let capacity = line.capacity();
        let m_range = match config.sweep.m {
            Some([lo, hi]) if lo > hi => return Err(config_error("sweep.m", "range is empty")),
            Some([lo, _]) if lo > capacity => {
                return Err(config_error(
                    "sweep.m",
                    format!("starts above the capacity {capacity}"),
                ))
            }
            Some([lo, hi]) => lo..=hi.min(capacity),
            None => 0..=capacity,
        };
        let branch_cap = line
            .part_len(Part::Branch1)
            .max(line.part_len(Part::Branch2)) as i64;
        let dm_range = match config.sweep.dm {
            Some([lo, hi]) if lo > hi => return Err(config_error("sweep.dm", "range is empty")),
            Some([lo, hi]) => lo..=hi,
            None => -branch_cap..=branch_cap,
        };

        if let Some(p) = &config.simulate {
            if p.first_branch.is_some_and(|b| b != 1 && b != 2) {
                return Err(config_error("simulate.first_branch", "must be 1 or 2"));
            }
        }
        if let Some(v) = &config.variant {
            for part in Part::ALL {
                let f = v.demand_scale.factor(part);
                if !f.is_finite() || f < 0.0 {
                    return Err(config_error(
                        &format!("variant.demand_scale.{}", part.key()),
                        "must be finite and non-negative",
                    ));
                }
            }
        }

        let options = SweepOptions {
            periods: run.periods,
            transient_fraction: run.transient_fraction,
            stagger: run.stagger,
            classify: *c,
        };
        let mut scenario = Scenario {
            config,
            line,
            controls,
            m_range,
            dm_range,
            options,
        };
        if let Some(m) = overrides.m {
            scenario.config.simulate = Some(PointConfig {
                m,
                dm: overrides.dm.unwrap_or(0),
                first_branch: scenario
                    .config
                    .simulate
                    .as_ref()
                    .and_then(|p| p.first_branch),
            });
        } else if let (Some(dm), Some(p)) = (overrides.dm, scenario.config.simulate.as_mut()) {
            p.dm = dm;
        }
        if let Some(v) = &scenario.config.variant {
            scenario.variant_with(v.demand_scale)?;
        }
        Ok(scenario)
    }

    /// The single point to simulate, if one is configured.
    pub fn point(&self) -> Option<(usize, i64, Option<Branch>)> {
        self.config.simulate.as_ref().map(|p| {
            let branch = p
                .first_branch
                .map(|b| if b == 1 { Branch::One } else { Branch::Two });
            (p.m, p.dm, branch)
        })
    }

    /// Same scenario with scaled arrival rates. Controls are rebuilt on the
    /// scaled line, so nominal dwells follow the demand.
    pub fn variant_with(&self, scale: DemandScale) -> Result<Scenario, CliError> {
        let mut config = self.config.clone();
        for part in Part::ALL {
            let desc = match part {
                Part::Central => &mut config.line.central,
                Part::Branch1 => &mut config.line.branch1,
                Part::Branch2 => &mut config.line.branch2,
            };
            scale_part(desc, scale.factor(part));
        }
        let line: Line = build_line(&config.line).map_err(|e| {
            let culprit = Part::ALL
                .into_iter()
                .find(|p| e.to_string().starts_with(&format!("line.{}", p.key())))
                .unwrap_or(Part::Central);
            config_error(&format!("variant.demand_scale.{}", culprit.key()), e)
        })?;
        let controls = controls_for(&config, &line)?;
        Ok(Scenario {
            config,
            line,
            controls,
            m_range: self.m_range.clone(),
            dm_range: self.dm_range.clone(),
            options: self.options.clone(),
        })
    }
}
