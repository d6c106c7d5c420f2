//! JSON run configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{SpaceTimeGrid, WaveSpec};
use crate::noise::NoiseKind;
use crate::optimize::{OptimizerOptions, RareEventSpec, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    #[serde(rename = "L")]
    pub left: f64,
    #[serde(rename = "R")]
    pub right: f64,
    pub dx: f64,
    #[serde(rename = "T")]
    pub duration: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveBlock {
    pub u_minus: f64,
    pub u_plus: f64,
    #[serde(rename = "D")]
    pub viscosity: f64,
    pub gamma_frame: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseName {
    Identity,
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseBlock {
    pub kind: NoiseName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_c: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioName {
    Displacement,
    SpeedChange,
    WeakToStrong,
    StrongToWeak,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioBlock {
    pub kind: ScenarioName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    #[serde(default)]
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_u_minus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_u_plus: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialGuess {
    Interpolation,
    Shift,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorName {
    Mc,
    #[serde(rename = "is-0")]
    IsPinned,
    IsDelta,
}

impl EstimatorName {
    pub fn label(self) -> &'static str {
        match self {
            EstimatorName::Mc => "mc",
            EstimatorName::IsPinned => "is-0",
            EstimatorName::IsDelta => "is-delta",
        }
    }
}

fn default_samples() -> usize {
    10_000
}

fn default_trials() -> usize {
    10_000
}

fn default_output() -> String {
    "out".to_string()
}

fn default_estimators() -> Vec<EstimatorName> {
    vec![EstimatorName::Mc, EstimatorName::IsDelta]
}

fn default_tolerance() -> f64 {
    1e-6
}

fn default_max_iterations() -> usize {
    5000
}

fn default_init() -> InitialGuess {
    InitialGuess::Interpolation
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_grid: Option<Vec<f64>>,
    #[serde(rename = "K", default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: String,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0_grid: Option<Vec<f64>>,
    #[serde(rename = "T_grid", default, skip_serializing_if = "Option::is_none")]
    pub duration_grid: Option<Vec<f64>>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_init")]
    pub init: InitialGuess,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridBlock,
    pub wave: WaveBlock,
    pub noise: NoiseBlock,
    pub scenario: ScenarioBlock,
    pub run: RunBlock,
}

/// Subcommands accepted by [`crate::harness::run`] and `run.mode`.
pub const SUBCOMMANDS: [&str; 8] = [
    "optimize",
    "mc",
    "is",
    "sweep-x0",
    "sweep-T",
    "sweep-eps",
    "convexity",
    "center-diagnostics",
];

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let key = if path == "." { "<document>".to_string() } else { path };
        Error::Config {
            key,
            message: e.into_inner().to_string(),
        }
    })?;
    config.validate()?;
    Ok(config)
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be positive, got {v}")))
    }
}

fn finite(key: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(key, "must be finite"))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        finite("grid.L", g.left)?;
        finite("grid.R", g.right)?;
        positive("grid.dx", g.dx)?;
        positive("grid.T", g.duration)?;
        positive("grid.dt", g.dt)?;
        self.space_time_grid()?;
        self.wave_spec()?;
        self.noise_kind()?;
        let s = &self.scenario;
        if !(s.delta.is_finite() && s.delta >= 0.0) {
            return Err(Error::config("scenario.delta", format!("must be >= 0, got {}", s.delta)));
        }
        self.rare_event()?;
        let r = &self.run;
        if let Some(mode) = &r.mode {
            if !SUBCOMMANDS.contains(&mode.as_str()) {
                return Err(Error::config("run.mode", format!("unknown mode {mode:?}")));
            }
        }
        if let Some(eps) = r.eps {
            if !(eps.is_finite() && eps >= 0.0) {
                return Err(Error::config("run.eps", format!("must be >= 0, got {eps}")));
            }
        }
        for (key, list) in [("run.eps_grid", &r.eps_grid), ("run.T_grid", &r.duration_grid)] {
            if let Some(list) = list {
                if list.is_empty() {
                    return Err(Error::config(key, "must not be empty"));
                }
                for &v in list {
                    positive(key, v)?;
                }
            }
        }
        if let Some(list) = &r.duration_grid {
            for &t in list {
                self.space_time_grid()?.with_duration(t).map_err(|e| Error::config("run.T_grid", e.to_string()))?;
            }
        }
        if let Some(list) = &r.x0_grid {
            if list.is_empty() {
                return Err(Error::config("run.x0_grid", "must not be empty"));
            }
            for &v in list {
                finite("run.x0_grid", v)?;
            }
        }
        if r.samples == 0 {
            return Err(Error::config("run.K", "must be >= 1"));
        }
        if r.estimators.is_empty() {
            return Err(Error::config("run.estimators", "must not be empty"));
        }
        positive("run.tolerance", r.tolerance)?;
        if r.max_iterations == 0 {
            return Err(Error::config("run.max_iterations", "must be >= 1"));
        }
        Ok(())
    }

    pub fn space_time_grid(&self) -> Result<SpaceTimeGrid> {
        let g = &self.grid;
        SpaceTimeGrid::from_spacing(g.left, g.right, g.dx, g.duration, g.dt)
            .map_err(|e| Error::config("grid", e.to_string()))
    }

    pub fn wave_spec(&self) -> Result<WaveSpec> {
        let w = &self.wave;
        WaveSpec::new(w.u_minus, w.u_plus, w.viscosity, w.gamma_frame)
            .map_err(|e| Error::config("wave", e.to_string()))
    }

    pub fn noise_kind(&self) -> Result<NoiseKind> {
        let n = &self.noise;
        match n.kind {
            NoiseName::Identity => {
                if n.sigma.is_some() || n.l_c.is_some() {
                    return Err(Error::config("noise", "identity noise takes no sigma or l_c"));
                }
                Ok(NoiseKind::Identity)
            }
            NoiseName::Exponential => {
                let sigma = n.sigma.ok_or_else(|| Error::config("noise.sigma", "required for exponential noise"))?;
                let l_c = n.l_c.ok_or_else(|| Error::config("noise.l_c", "required for exponential noise"))?;
                positive("noise.sigma", sigma)?;
                positive("noise.l_c", l_c)?;
                Ok(NoiseKind::Exponential {
                    sigma,
                    correlation_length: l_c,
                })
            }
        }
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let s = &self.scenario;
        Ok(match s.kind {
            ScenarioName::Displacement => {
                let x0 = s.x0.ok_or_else(|| Error::config("scenario.x0", "required for displacement"))?;
                finite("scenario.x0", x0)?;
                Scenario::Displacement { x0 }
            }
            ScenarioName::SpeedChange => {
                let um = s
                    .target_u_minus
                    .ok_or_else(|| Error::config("scenario.target_u_minus", "required for speed-change"))?;
                let up = s
                    .target_u_plus
                    .ok_or_else(|| Error::config("scenario.target_u_plus", "required for speed-change"))?;
                let target = self
                    .wave_spec()?
                    .with_states(um, up)
                    .map_err(|e| Error::config("scenario.target_u_minus", e.to_string()))?;
                Scenario::SpeedChange { target }
            }
            ScenarioName::WeakToStrong => Scenario::WeakToStrong,
            ScenarioName::StrongToWeak => Scenario::StrongToWeak,
        })
    }

    /// Pinned cells on each side; 1 for displacement, 2 otherwise unless set.
    pub fn boundary_width(&self) -> Result<usize> {
        let s = &self.scenario;
        match (s.kind, s.boundary_width) {
            (ScenarioName::Displacement, None | Some(1)) => Ok(1),
            (ScenarioName::Displacement, Some(w)) => Err(Error::config(
                "scenario.boundary_width",
                format!("displacement pins one cell per side, got {w}"),
            )),
            (_, None) => Ok(2),
            (_, Some(w)) if (1..=2).contains(&w) => Ok(w),
            (_, Some(w)) => Err(Error::config("scenario.boundary_width", format!("must be 1 or 2, got {w}"))),
        }
    }

    pub fn rare_event(&self) -> Result<RareEventSpec> {
        RareEventSpec::new(
            self.scenario()?,
            self.space_time_grid()?,
            self.wave_spec()?,
            self.scenario.delta,
            self.boundary_width()?,
        )
    }

    pub fn optimizer_options(&self) -> OptimizerOptions {
        OptimizerOptions {
            tolerance: self.run.tolerance,
            max_iterations: self.run.max_iterations,
            ..OptimizerOptions::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const TABLE: &str = r#"{
        "grid": {"L": -15, "R": 20, "dx": 0.5, "T": 1, "dt": 0.05},
        "wave": {"u_minus": 2, "u_plus": 1, "D": 1, "gamma_frame": 1.5},
        "noise": {"kind": "exponential", "sigma": 1, "l_c": 5},
        "scenario": {"kind": "displacement", "x0": 5, "delta": 0.7071067811865476},
        "run": {"eps": 0.15, "K": 10000, "seed": 7}
    }"#;

    fn key_of(text: &str) -> String {
        match parse_config(text) {
            Err(Error::Config { key, .. }) => key,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn table_document_is_accepted() {
        let c = parse_config(TABLE).unwrap();
        let g = c.space_time_grid().unwrap();
        assert_eq!((g.cells, g.steps), (70, 20));
        assert_eq!(c.run.estimators, default_estimators());
        assert_eq!(c.boundary_width().unwrap(), 1);
    }

    #[test]
    fn bad_spacing_is_rejected() {
        let text = TABLE.replace("\"dx\": 0.5", "\"dx\": 0.3");
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("dx does not divide domain"), "{err}");
    }

    #[test]
    fn negative_delta_is_rejected() {
        let text = TABLE.replace("\"delta\": 0.7071067811865476", "\"delta\": -1");
        assert_eq!(key_of(&text), "scenario.delta");
    }

    #[test]
    fn errors_name_the_key() {
        assert_eq!(key_of(&TABLE.replace("\"dt\": 0.05", "\"dtt\": 0.05")), "grid.dtt");
        assert_eq!(key_of(&TABLE.replace("\"sigma\": 1", "\"sigma\": \"one\"")), "noise.sigma");
        assert_eq!(key_of(&TABLE.replace("\"K\": 10000", "\"K\": 10000, \"extra\": 1")), "run.extra");
        assert_eq!(key_of(&TABLE.replace(", \"l_c\": 5", "")), "noise.l_c");
        assert_eq!(key_of(&TABLE.replace("\"x0\": 5, ", "")), "scenario.x0");
    }

    #[test]
    fn config_round_trips_through_json() {
        let c = parse_config(TABLE).unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(parse_config(&text).unwrap(), c);
    }
}
