//! Flat `key = value` configuration text.
//!
//! Keys are the dotted field paths of [`ExperimentConfig`]. Blank lines and
//! lines starting with `#` are ignored. Overrides use the same syntax and are
//! applied after the file; errors from overrides report line 0.

use std::collections::BTreeMap;
use std::path::Path;

use crate::dynamics::SlitProfile;
use crate::error::{Error, Result};
use crate::experiment::ExperimentConfig;
use crate::hilbert::{FockRegister, GridSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Count,
    Seed,
    Real,
    Flag,
    Pair,
    OptionalPair,
    Profile,
}

impl Kind {
    fn expected(self) -> &'static str {
        match self {
            Kind::Count => "a non-negative integer",
            Kind::Seed => "an unsigned 64-bit integer",
            Kind::Real => "a real number",
            Kind::Flag => "true or false",
            Kind::Pair => "two reals `a, b`",
            Kind::OptionalPair => "two reals `a, b` or `none`",
            Kind::Profile => "`flat` or `smooth`",
        }
    }

    fn accepts(self, v: &str) -> bool {
        match self {
            Kind::Count => v.parse::<usize>().is_ok(),
            Kind::Seed => v.parse::<u64>().is_ok(),
            Kind::Real => v.parse::<f64>().is_ok(),
            Kind::Flag => parse_flag(v).is_some(),
            Kind::Pair => parse_pair(v).is_some(),
            Kind::OptionalPair => v == "none" || parse_pair(v).is_some(),
            Kind::Profile => SlitProfile::parse(v).is_some(),
        }
    }
}

const KEYS: &[(&str, Kind)] = &[
    ("grid.n_points", Kind::Count),
    ("grid.x_min", Kind::Real),
    ("grid.x_max", Kind::Real),
    ("fock.n_max", Kind::Count),
    ("packet.x0", Kind::Real),
    ("packet.sigma", Kind::Real),
    ("packet.k0", Kind::Real),
    ("evolution.dt", Kind::Real),
    ("evolution.n_steps", Kind::Count),
    ("evolution.potential.barrier_center", Kind::Real),
    ("evolution.potential.barrier_width", Kind::Real),
    ("evolution.potential.barrier_height", Kind::Real),
    ("evolution.potential.slit_centers", Kind::OptionalPair),
    ("evolution.potential.slit_width", Kind::Real),
    ("evolution.potential.slit_profile", Kind::Profile),
    ("evolution.coupling.g", Kind::Real),
    ("evolution.coupling.window_center", Kind::Real),
    ("evolution.coupling.window_width", Kind::Real),
    ("evolution.coupling.omega", Kind::Real),
    ("flight_time", Kind::Real),
    ("monitor.cadence", Kind::Count),
    ("monitor.enabled", Kind::Flag),
    ("n_trajectories", Kind::Count),
    ("master_seed", Kind::Seed),
    ("screen_window", Kind::Pair),
    ("histogram_bins", Kind::Count),
    ("analysis.visibility_window", Kind::Pair),
    ("analysis.prominence", Kind::Real),
    ("analysis.smoothing", Kind::Count),
    ("analysis.permutations", Kind::Count),
    ("defect.u_x0", Kind::Real),
    ("defect.v_x0", Kind::Real),
    ("defect.sigma", Kind::Real),
    ("defect.k0", Kind::Real),
    ("defect.g", Kind::Real),
    ("defect.window_center", Kind::Real),
    ("defect.window_width", Kind::Real),
    ("defect.n_steps", Kind::Count),
    ("mzi.theta1", Kind::Real),
    ("mzi.theta2", Kind::Real),
    ("mzi.phase", Kind::Real),
    ("mzi.object_present", Kind::Flag),
    ("mzi.n_shots", Kind::Seed),
];

fn parse_flag(v: &str) -> Option<bool> {
    match v {
        "true" => Some(true),
        "false" => Some(false),
        _ => None,
    }
}

fn parse_pair(v: &str) -> Option<(f64, f64)> {
    let (a, b) = v.split_once(',')?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

fn fmt_pair((a, b): (f64, f64)) -> String {
    format!("{a}, {b}")
}

/// Every key with its value for `cfg`, in documentation order.
pub fn entries(cfg: &ExperimentConfig) -> Vec<(&'static str, String)> {
    let e = &cfg.evolution;
    let p = &e.potential;
    let c = &e.coupling;
    let d = &cfg.defect;
    let a = &cfg.analysis;
    let values = [
        cfg.grid.n_points().to_string(),
        cfg.grid.x_min().to_string(),
        cfg.grid.x_max().to_string(),
        cfg.fock.n_max().to_string(),
        cfg.packet.x0.to_string(),
        cfg.packet.sigma.to_string(),
        cfg.packet.k0.to_string(),
        e.dt.to_string(),
        e.n_steps.to_string(),
        p.barrier_center.to_string(),
        p.barrier_width.to_string(),
        p.barrier_height.to_string(),
        p.slit_centers.map_or_else(|| "none".to_string(), fmt_pair),
        p.slit_width.to_string(),
        p.slit_profile.as_str().to_string(),
        c.g.to_string(),
        c.window_center.to_string(),
        c.window_width.to_string(),
        c.omega.to_string(),
        cfg.flight_time.to_string(),
        cfg.monitor.cadence.to_string(),
        cfg.monitor.enabled.to_string(),
        cfg.n_trajectories.to_string(),
        cfg.master_seed.to_string(),
        fmt_pair(cfg.screen_window),
        cfg.histogram_bins.to_string(),
        fmt_pair(a.visibility_window),
        a.prominence.to_string(),
        a.smoothing.to_string(),
        a.permutations.to_string(),
        d.u_x0.to_string(),
        d.v_x0.to_string(),
        d.sigma.to_string(),
        d.k0.to_string(),
        d.g.to_string(),
        d.window_center.to_string(),
        d.window_width.to_string(),
        d.n_steps.to_string(),
        cfg.mzi.theta1.to_string(),
        cfg.mzi.theta2.to_string(),
        cfg.mzi.phase.to_string(),
        cfg.mzi.object_present.to_string(),
        cfg.mzi_shots.to_string(),
    ];
    KEYS.iter().map(|(k, _)| *k).zip(values).collect()
}

/// Effective configuration as loadable text.
pub fn dump(cfg: &ExperimentConfig) -> String {
    entries(cfg)
        .into_iter()
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect()
}

/// Accumulates assignments, remembering the line each key was last set on.
struct Assignments {
    values: BTreeMap<&'static str, String>,
    lines: BTreeMap<&'static str, usize>,
}

impl Assignments {
    fn new() -> Self {
        Assignments {
            values: entries(&ExperimentConfig::default()).into_iter().collect(),
            lines: BTreeMap::new(),
        }
    }

    fn set(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        let (name, kind) =
            KEYS.iter()
                .find(|(k, _)| *k == key)
                .ok_or_else(|| Error::UnknownKey {
                    key: key.to_string(),
                    line,
                })?;
        if !kind.accepts(value) {
            return Err(Error::TypeMismatch {
                key: key.to_string(),
                line,
                expected: kind.expected(),
                value: value.to_string(),
            });
        }
        self.values.insert(name, value.to_string());
        self.lines.insert(name, line);
        Ok(())
    }

    fn apply_line(&mut self, raw: &str, line: usize) -> Result<()> {
        // `#` starts a comment anywhere on the line; no value contains one.
        let text = raw.split_once('#').map_or(raw, |(t, _)| t).trim();
        if text.is_empty() {
            return Ok(());
        }
        let (key, value) = text.split_once('=').ok_or_else(|| Error::Syntax {
            line,
            text: raw.to_string(),
        })?;
        self.set(key.trim(), value.trim(), line)
    }

    fn get(&self, key: &str) -> &str {
        &self.values[key]
    }

    fn real(&self, key: &str) -> f64 {
        self.get(key).parse().expect("checked on assignment")
    }

    fn count(&self, key: &str) -> usize {
        self.get(key).parse().expect("checked on assignment")
    }

    fn seed(&self, key: &str) -> u64 {
        self.get(key).parse().expect("checked on assignment")
    }

    fn flag(&self, key: &str) -> bool {
        parse_flag(self.get(key)).expect("checked on assignment")
    }

    fn pair(&self, key: &str) -> (f64, f64) {
        parse_pair(self.get(key)).expect("checked on assignment")
    }

    /// Attaches the assignment line to errors that name a key.
    fn locate(&self, e: Error) -> Error {
        match e {
            Error::InvariantViolation {
                key,
                message,
                line: None,
            } => {
                let line = self.lines.get(key.as_str()).copied();
                Error::InvariantViolation { key, message, line }
            }
            other => other,
        }
    }

    fn build(&self) -> Result<ExperimentConfig> {
        let key_err = |key: &str, e: Error| match e {
            Error::InvalidGrid(m) => Error::invariant(key, m),
            other => other,
        };
        let grid = GridSpec::new(
            self.count("grid.n_points"),
            self.real("grid.x_min"),
            self.real("grid.x_max"),
        )
        .map_err(|e| key_err("grid.n_points", e))?;
        let fock = FockRegister::new(self.count("fock.n_max"))
            .map_err(|_| Error::invariant("fock.n_max", "must be at least 1"))?;

        let mut cfg = ExperimentConfig {
            grid,
            fock,
            ..ExperimentConfig::default()
        };
        cfg.packet.x0 = self.real("packet.x0");
        cfg.packet.sigma = self.real("packet.sigma");
        cfg.packet.k0 = self.real("packet.k0");
        let e = &mut cfg.evolution;
        e.dt = self.real("evolution.dt");
        e.n_steps = self.count("evolution.n_steps");
        let p = &mut e.potential;
        p.barrier_center = self.real("evolution.potential.barrier_center");
        p.barrier_width = self.real("evolution.potential.barrier_width");
        p.barrier_height = self.real("evolution.potential.barrier_height");
        p.slit_centers = match self.get("evolution.potential.slit_centers") {
            "none" => None,
            _ => Some(self.pair("evolution.potential.slit_centers")),
        };
        p.slit_width = self.real("evolution.potential.slit_width");
        p.slit_profile = SlitProfile::parse(self.get("evolution.potential.slit_profile"))
            .expect("checked on assignment");
        let c = &mut e.coupling;
        c.g = self.real("evolution.coupling.g");
        c.window_center = self.real("evolution.coupling.window_center");
        c.window_width = self.real("evolution.coupling.window_width");
        c.omega = self.real("evolution.coupling.omega");
        cfg.flight_time = self.real("flight_time");
        cfg.monitor.cadence = self.count("monitor.cadence");
        cfg.monitor.enabled = self.flag("monitor.enabled");
        cfg.n_trajectories = self.count("n_trajectories");
        cfg.master_seed = self.seed("master_seed");
        cfg.screen_window = self.pair("screen_window");
        cfg.histogram_bins = self.count("histogram_bins");
        let a = &mut cfg.analysis;
        a.visibility_window = self.pair("analysis.visibility_window");
        a.prominence = self.real("analysis.prominence");
        a.smoothing = self.count("analysis.smoothing");
        a.permutations = self.count("analysis.permutations");
        let d = &mut cfg.defect;
        d.u_x0 = self.real("defect.u_x0");
        d.v_x0 = self.real("defect.v_x0");
        d.sigma = self.real("defect.sigma");
        d.k0 = self.real("defect.k0");
        d.g = self.real("defect.g");
        d.window_center = self.real("defect.window_center");
        d.window_width = self.real("defect.window_width");
        d.n_steps = self.count("defect.n_steps");
        cfg.mzi.theta1 = self.real("mzi.theta1");
        cfg.mzi.theta2 = self.real("mzi.theta2");
        cfg.mzi.phase = self.real("mzi.phase");
        cfg.mzi.object_present = self.flag("mzi.object_present");
        cfg.mzi_shots = self.seed("mzi.n_shots");
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses configuration text, applies `overrides` (each `key=value`), and
/// validates the result.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut a = Assignments::new();
    for (k, raw) in text.lines().enumerate() {
        a.apply_line(raw, k + 1)?;
    }
    for o in overrides {
        a.apply_line(o, 0)?;
    }
    a.build().map_err(|e| a.locate(e))
}

pub fn load_config(path: &Path, overrides: &[String]) -> Result<ExperimentConfig> {
    parse_config(&std::fs::read_to_string(path)?, overrides)
}
