//! Run configuration: defaults, a flat `key = value` file, and command-line
//! overrides, applied in that order.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::model::ModelParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    Oracle,
    Fig2,
    Fig3,
    Fig4,
    SweepPabs,
    Validate,
}

impl Scenario {
    pub const ALL: [Scenario; 6] =
        [Scenario::Oracle, Scenario::Fig2, Scenario::Fig3, Scenario::Fig4, Scenario::SweepPabs, Scenario::Validate];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Oracle => "oracle",
            Scenario::Fig2 => "fig2",
            Scenario::Fig3 => "fig3",
            Scenario::Fig4 => "fig4",
            Scenario::SweepPabs => "sweep-pabs",
            Scenario::Validate => "validate",
        }
    }
}

impl FromStr for Scenario {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Scenario::ALL.into_iter().find(|sc| sc.name() == s).ok_or_else(|| ConfigError {
            source: "command line".into(),
            line: None,
            field: "scenario".into(),
            message: format!(
                "unknown scenario `{s}` (expected one of {})",
                Scenario::ALL.map(Scenario::name).join(", ")
            ),
        })
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRange {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Default for SweepRange {
    fn default() -> Self {
        Self { min: 0.5, max: 2.0, step: 0.01 }
    }
}

impl SweepRange {
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.max - self.min) / self.step).round() as usize + 1;
        (0..n).map(|k| self.min + k as f64 * self.step).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub scenario: Scenario,
    /// Time horizon in units of 1/γ₁.
    pub horizon: f64,
    /// Output rows for time curves.
    pub samples: usize,
    pub output_path: PathBuf,
    /// Detection efficiency applied to `N_D` on output.
    pub eta: f64,
    pub sweep: SweepRange,
}

impl RunConfig {
    pub fn defaults(scenario: Scenario) -> Self {
        Self {
            params: ModelParams::default(),
            scenario,
            horizon: 50.0,
            samples: 500,
            output_path: PathBuf::from(format!("{}.csv", scenario.name())),
            eta: 1.0,
            sweep: SweepRange::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |field: &str, message: String| ConfigError {
            source: "configuration".into(),
            line: None,
            field: field.into(),
            message,
        };
        if self.samples < 2 {
            return Err(err("samples", format!("must be >= 2, got {}", self.samples)));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(err("horizon", format!("must be > 0, got {}", self.horizon)));
        }
        if !(self.eta >= 0.0) {
            return Err(err("eta", format!("must be >= 0, got {}", self.eta)));
        }
        let s = self.sweep;
        if !(s.step > 0.0) || !(s.max >= s.min) || !(s.min > 0.0) {
            return Err(err("sweep_step", format!("need 0 < sweep_min <= sweep_max and sweep_step > 0, got {s:?}")));
        }
        self.params.validate().map_err(|e| err("params", e.to_string()))
    }

    /// Sets one field from its textual form. Keys match the long flag names.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: FromStr>(v: &str) -> Result<T, String> {
            v.parse::<T>().map_err(|_| format!("expected a number, got `{v}`"))
        }
        let p = &mut self.params;
        match key {
            "kappa" => p.kappa = num(value)?,
            "gamma1" => p.gamma1 = num(value)?,
            "gamma2" => p.gamma2 = num(value)?,
            "Gamma" => p.amp_decay = num(value)?,
            "mu" => p.drive = num(value)?,
            "delta" => p.detuning = num(value)?,
            "Delta" => p.amp_detuning = num(value)?,
            "nc" => p.n_c = value.parse().map_err(|_| format!("expected a non-negative integer, got `{value}`"))?,
            "rtol" => p.tolerances.rtol = num(value)?,
            "atol" => p.tolerances.atol = num(value)?,
            "horizon" => self.horizon = num(value)?,
            "samples" => {
                self.samples = value.parse().map_err(|_| format!("expected a non-negative integer, got `{value}`"))?
            }
            "out" => self.output_path = PathBuf::from(value),
            "eta" => self.eta = num(value)?,
            "sweep_min" => self.sweep.min = num(value)?,
            "sweep_max" => self.sweep.max = num(value)?,
            "sweep_step" => self.sweep.step = num(value)?,
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    /// Applies a `key = value` file; `#` starts a comment.
    pub fn apply_file_contents(&mut self, source: &str, contents: &str) -> Result<(), ConfigError> {
        for (lineno, raw) in contents.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |field: &str, message: String| ConfigError {
                source: source.into(),
                line: Some(lineno + 1),
                field: field.into(),
                message,
            };
            let Some((key, value)) = line.split_once('=') else {
                return Err(err(line, "expected `key = value`".into()));
            };
            let (key, value) = (key.trim(), value.trim());
            self.set(key, value).map_err(|m| err(key, m))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let contents = std::fs::read_to_string(path).map_err(|e| ConfigError {
            source: path.display().to_string(),
            line: None,
            field: "config".into(),
            message: format!("cannot read: {e}"),
        })?;
        self.apply_file_contents(&path.display().to_string(), &contents)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub source: String,
    pub line: Option<usize>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{l}: field `{}`: {}", self.source, self.field, self.message),
            None => write!(f, "{}: field `{}`: {}", self.source, self.field, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}
