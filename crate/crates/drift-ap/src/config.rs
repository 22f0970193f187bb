//! Run configuration and its flat `key = value` text form.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use drift_ap_core::{CaseKind, SchemeKind, SpeedMode};

use crate::HarnessError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scheme: SchemeKind,
    pub mode: SpeedMode,
    pub epsilon: f64,
    /// Boundary perturbation amplitude for unprepared data.
    pub epsilon_prime: f64,
    pub case: CaseKind,
    pub cfl: f64,
    pub nx: usize,
    pub ny: usize,
    pub t_final: f64,
    /// Extra observation times strictly below `t_final`; the final state is
    /// always observed.
    pub snapshot_times: Vec<f64>,
    pub out_dir: Option<PathBuf>,
    /// Stop after this many steps even if `t_final` is not reached.
    pub max_steps: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scheme: SchemeKind::Ap,
            mode: SpeedMode::NonResolved,
            epsilon: 1e-6,
            epsilon_prime: 1e-2,
            case: CaseKind::Prepared,
            cfl: 0.5,
            nx: 100,
            ny: 100,
            t_final: 0.1,
            snapshot_times: Vec::new(),
            out_dir: None,
            max_steps: None,
        }
    }
}

pub fn scheme_name(s: SchemeKind) -> &'static str {
    s.as_str()
}

pub fn parse_scheme(s: &str) -> Result<SchemeKind, HarnessError> {
    match s {
        "ap" => Ok(SchemeKind::Ap),
        "conventional" => Ok(SchemeKind::Conventional),
        "drift-limit" => Ok(SchemeKind::DriftLimit),
        _ => Err(HarnessError::Value { key: "scheme".into(), value: s.into() }),
    }
}

pub fn mode_name(m: SpeedMode) -> &'static str {
    match m {
        SpeedMode::Resolved => "resolved",
        SpeedMode::NonResolved => "nonresolved",
    }
}

pub fn parse_mode(s: &str) -> Result<SpeedMode, HarnessError> {
    match s {
        "resolved" => Ok(SpeedMode::Resolved),
        "nonresolved" => Ok(SpeedMode::NonResolved),
        _ => Err(HarnessError::Value { key: "mode".into(), value: s.into() }),
    }
}

pub fn case_name(c: CaseKind) -> &'static str {
    match c {
        CaseKind::Prepared => "prepared",
        CaseKind::Unprepared => "unprepared",
    }
}

pub fn parse_case(s: &str) -> Result<CaseKind, HarnessError> {
    match s {
        "prepared" => Ok(CaseKind::Prepared),
        "unprepared" => Ok(CaseKind::Unprepared),
        _ => Err(HarnessError::Value { key: "case".into(), value: s.into() }),
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, HarnessError> {
    value
        .trim()
        .parse()
        .map_err(|_| HarnessError::Value { key: key.into(), value: value.into() })
}

impl RunConfig {
    /// Model epsilon actually used by the stepper.
    pub fn model_epsilon(&self) -> f64 {
        match self.scheme {
            SchemeKind::DriftLimit => 0.0,
            _ => self.epsilon,
        }
    }

    /// Speed mode actually used by the stepper.
    pub fn effective_mode(&self) -> SpeedMode {
        match self.scheme {
            SchemeKind::DriftLimit => SpeedMode::NonResolved,
            _ => self.mode,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |key: &str, v: String| Err(HarnessError::Value { key: key.into(), value: v });
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return bad("t-final", self.t_final.to_string());
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad("cfl", self.cfl.to_string());
        }
        if self.nx < 2 {
            return bad("nx", self.nx.to_string());
        }
        if self.ny < 2 {
            return bad("ny", self.ny.to_string());
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon", self.epsilon.to_string());
        }
        if self.epsilon == 0.0 && self.scheme != SchemeKind::DriftLimit {
            if self.scheme == SchemeKind::Conventional {
                return Err(HarnessError::Precondition(
                    "the conventional scheme needs epsilon > 0".into(),
                ));
            }
            if self.mode == SpeedMode::Resolved {
                return Err(HarnessError::Precondition(
                    "resolved speeds need epsilon > 0 (use --mode nonresolved or --scheme drift-limit)".into(),
                ));
            }
        }
        if self.case == CaseKind::Unprepared && !(self.epsilon_prime > 0.0) {
            return bad("epsilon-prime", self.epsilon_prime.to_string());
        }
        if let Some(t) = self.snapshot_times.iter().find(|t| !(**t > 0.0 && **t <= self.t_final)) {
            return bad("snapshots", t.to_string());
        }
        Ok(())
    }

    /// Renders the flat `key = value` form read back by [`RunConfig::parse_text`].
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scheme = {}", scheme_name(self.scheme));
        let _ = writeln!(s, "mode = {}", mode_name(self.mode));
        let _ = writeln!(s, "epsilon = {:e}", self.epsilon);
        let _ = writeln!(s, "epsilon-prime = {:e}", self.epsilon_prime);
        let _ = writeln!(s, "case = {}", case_name(self.case));
        let _ = writeln!(s, "cfl = {:e}", self.cfl);
        let _ = writeln!(s, "nx = {}", self.nx);
        let _ = writeln!(s, "ny = {}", self.ny);
        let _ = writeln!(s, "t-final = {:e}", self.t_final);
        let snaps: Vec<String> = self.snapshot_times.iter().map(|t| format!("{t:e}")).collect();
        let _ = writeln!(s, "snapshots = {}", snaps.join(","));
        if let Some(out) = &self.out_dir {
            let _ = writeln!(s, "out = {}", out.display());
        }
        if let Some(m) = self.max_steps {
            let _ = writeln!(s, "max-steps = {m}");
        }
        s
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        let value = value.trim();
        match key.trim() {
            "scheme" => self.scheme = parse_scheme(value)?,
            "mode" => self.mode = parse_mode(value)?,
            "epsilon" => self.epsilon = parse_num(key, value)?,
            "epsilon-prime" => self.epsilon_prime = parse_num(key, value)?,
            "case" => self.case = parse_case(value)?,
            "cfl" => self.cfl = parse_num(key, value)?,
            "nx" => self.nx = parse_num(key, value)?,
            "ny" => self.ny = parse_num(key, value)?,
            "t-final" => self.t_final = parse_num(key, value)?,
            "snapshots" => {
                self.snapshot_times = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| parse_num("snapshots", s))
                    .collect::<Result<_, _>>()?
            }
            "out" => self.out_dir = if value.is_empty() { None } else { Some(PathBuf::from(value)) },
            "max-steps" => self.max_steps = Some(parse_num(key, value)?),
            other => return Err(HarnessError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Overlays the settings of a `key = value` text on `self`. Blank lines
    /// and lines starting with `#` are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), HarnessError> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::Syntax { line: lineno + 1, text: line.to_string() })?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn parse_text(text: &str) -> Result<RunConfig, HarnessError> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }
}

/// Boundary side assignment written next to every resolved config.
pub fn side_assignment_note() -> String {
    use drift_ap_core::Side;
    let mut s = String::from("# boundary sides (test-case columns -> grid sides)\n");
    for side in Side::FILL_ORDER {
        let _ = writeln!(s, "#   {:>3} -> {}", side.table_label(), side.as_str());
    }
    s.push_str("#   ghost fill order west, east, south, north (corners take south/north)\n");
    s
}
