//! JSON run configuration. Every field is optional; missing fields take the
//! defaults below. Validation happens once, before any computation.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use ckdv_core::grid::MIN_POINTS;
use ckdv_core::integrator::{suggest_dt, SolverConfig};
use ckdv_core::solitons::{soliton_profile, soliton_state, SolitonSpec};
use ckdv_core::stability::{make_perturbation, perturbed_soliton, PerturbationMode, TranslationMode};
use ckdv_core::state::MAX_COMPONENTS;
use ckdv_core::{CoupledState, Grid1D, RealField};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Domain {
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "N")]
    pub n_points: usize,
}

impl Default for Domain {
    fn default() -> Self {
        Self {
            length: 40.0 * PI,
            n_points: 512,
        }
    }
}

/// A fixed step or `"auto"` (CFL suggestion from the initial state).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TimeStep {
    Auto,
    Fixed(f64),
}

impl Serialize for TimeStep {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            TimeStep::Auto => s.serialize_str("auto"),
            TimeStep::Fixed(dt) => s.serialize_f64(*dt),
        }
    }
}

impl<'de> Deserialize<'de> for TimeStep {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(dt) => Ok(TimeStep::Fixed(dt)),
            Raw::Word(w) if w == "auto" => Ok(TimeStep::Auto),
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                "expected a number or \"auto\", got {w:?}"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialCondition {
    Soliton {
        #[serde(default = "one")]
        speed: f64,
        #[serde(default)]
        x0: f64,
    },
    /// Sum of two profiles; no closed form exists for the interaction.
    SolitonPair {
        speeds: [f64; 2],
        centers: [f64; 2],
    },
    PerturbedSoliton {
        #[serde(default = "one")]
        speed: f64,
        #[serde(default = "default_delta")]
        delta: f64,
        #[serde(default)]
        mode: PerturbationMode,
        #[serde(default = "yes")]
        v_rescale: bool,
    },
    Random {
        #[serde(default = "default_delta")]
        delta: f64,
        #[serde(default)]
        mode: PerturbationMode,
    },
    /// CSV with columns `x,u,phi_1..phi_Nc`, one row per grid node.
    File { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    Soliton {
        #[serde(rename = "C", default = "one")]
        speed: f64,
        #[serde(default = "default_delta")]
        delta: f64,
        #[serde(default = "default_seeds")]
        seeds: u64,
        #[serde(default)]
        mode: PerturbationMode,
        #[serde(default = "yes")]
        v_rescale: bool,
        #[serde(default)]
        translation: TranslationMode,
    },
    Ground {
        #[serde(default = "default_ground_delta")]
        delta: f64,
        #[serde(default = "default_seeds")]
        seeds: u64,
        #[serde(default)]
        mode: PerturbationMode,
    },
}

fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_delta() -> f64 {
    1e-2
}
fn default_ground_delta() -> f64 {
    0.1
}
fn default_seeds() -> u64 {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub domain: Domain,
    pub n_components: usize,
    pub dt: TimeStep,
    pub t_end: f64,
    /// Steps between invariant samples.
    pub sample_every: usize,
    /// Steps between field snapshots (`0` disables all but the first and last).
    pub snapshot_every: usize,
    pub seed: u64,
    pub dealias: bool,
    pub initial: InitialCondition,
    pub experiment: Option<Experiment>,
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            domain: Domain::default(),
            n_components: 2,
            dt: TimeStep::Fixed(1e-3),
            t_end: 10.0,
            sample_every: 100,
            snapshot_every: 1000,
            seed: 0,
            dealias: true,
            initial: InitialCondition::Soliton { speed: 1.0, x0: 0.0 },
            experiment: None,
            output: PathBuf::from("out"),
        }
    }
}

fn field_error(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

fn positive(field: &str, v: f64) -> CliResult<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(field_error(field, format!("must be positive and finite, got {v}")))
    }
}

fn non_negative(field: &str, v: f64) -> CliResult<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(field_error(field, format!("must be non-negative and finite, got {v}")))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        positive("domain.L", self.domain.length)?;
        let n = self.domain.n_points;
        if n < MIN_POINTS || !n.is_multiple_of(2) {
            return Err(field_error(
                "domain.N",
                format!("must be even and at least {MIN_POINTS}, got {n}"),
            ));
        }
        if !(1..=MAX_COMPONENTS).contains(&self.n_components) {
            return Err(field_error(
                "n_components",
                format!("must lie in 1..={MAX_COMPONENTS}, got {}", self.n_components),
            ));
        }
        if let TimeStep::Fixed(dt) = self.dt {
            positive("dt", dt)?;
        }
        non_negative("t_end", self.t_end)?;
        if self.sample_every == 0 {
            return Err(field_error("sample_every", "must be at least 1"));
        }
        match &self.initial {
            InitialCondition::Soliton { speed, x0 } => {
                positive("initial.speed", *speed)?;
                if !x0.is_finite() {
                    return Err(field_error("initial.x0", "must be finite"));
                }
            }
            InitialCondition::SolitonPair { speeds, centers } => {
                for (i, c) in speeds.iter().enumerate() {
                    positive(&format!("initial.speeds[{i}]"), *c)?;
                }
                if centers.iter().any(|c| !c.is_finite()) {
                    return Err(field_error("initial.centers", "must be finite"));
                }
            }
            InitialCondition::PerturbedSoliton { speed, delta, .. } => {
                positive("initial.speed", *speed)?;
                non_negative("initial.delta", *delta)?;
            }
            InitialCondition::Random { delta, .. } => non_negative("initial.delta", *delta)?,
            InitialCondition::File { path } => {
                if !path.is_file() {
                    return Err(field_error(
                        "initial.path",
                        format!("{} is not a readable file", path.display()),
                    ));
                }
            }
        }
        match &self.experiment {
            Some(Experiment::Soliton { speed, delta, seeds, .. }) => {
                positive("experiment.C", *speed)?;
                non_negative("experiment.delta", *delta)?;
                if *seeds == 0 {
                    return Err(field_error("experiment.seeds", "must be at least 1"));
                }
            }
            Some(Experiment::Ground { delta, seeds, .. }) => {
                non_negative("experiment.delta", *delta)?;
                if *seeds == 0 {
                    return Err(field_error("experiment.seeds", "must be at least 1"));
                }
            }
            None => {}
        }
        let grid = self.grid()?;
        // soliton profiles must decay inside the box
        let mut speeds = Vec::new();
        match &self.initial {
            InitialCondition::Soliton { speed, .. } | InitialCondition::PerturbedSoliton { speed, .. } => {
                speeds.push(*speed)
            }
            InitialCondition::SolitonPair { speeds: s, .. } => speeds.extend(s),
            _ => {}
        }
        if let Some(Experiment::Soliton { speed, .. }) = &self.experiment {
            speeds.push(*speed);
        }
        for c in speeds {
            SolitonSpec::new(c, 0.0)?
                .check_fits(&grid)
                .map_err(|e| field_error("domain.L", e))?;
        }
        Ok(())
    }

    pub fn grid(&self) -> CliResult<Grid1D> {
        Grid1D::new(self.domain.length, self.domain.n_points).map_err(|e| field_error("domain", e))
    }

    pub fn initial_state(&self, grid: &Grid1D) -> CliResult<CoupledState> {
        let nc = self.n_components;
        let state = match &self.initial {
            InitialCondition::Soliton { speed, x0 } => soliton_state(&SolitonSpec::new(*speed, *x0)?, grid, nc)?,
            InitialCondition::SolitonPair { speeds, centers } => {
                let a = soliton_profile(&SolitonSpec::new(speeds[0], centers[0])?, grid, 0.0)?;
                let b = soliton_profile(&SolitonSpec::new(speeds[1], centers[1])?, grid, 0.0)?;
                CoupledState::new(a.axpy(1.0, &b)?, vec![RealField::zeros(grid); nc])?
            }
            InitialCondition::PerturbedSoliton {
                speed,
                delta,
                mode,
                v_rescale,
            } => perturbed_soliton(&SolitonSpec::new(*speed, 0.0)?, grid, nc, *delta, self.seed, *mode, *v_rescale)?,
            InitialCondition::Random { delta, mode } => make_perturbation(grid, nc, *delta, self.seed, *mode)?,
            InitialCondition::File { path } => crate::output::read_fields(path, grid, nc)?,
        };
        Ok(state)
    }

    pub fn resolve_dt(&self, grid: &Grid1D, state: &CoupledState) -> f64 {
        match self.dt {
            TimeStep::Fixed(dt) => dt,
            TimeStep::Auto => {
                // round down so that t_end is a whole number of steps
                let ceiling = suggest_dt(grid, state);
                if self.t_end == 0.0 {
                    ceiling
                } else {
                    self.t_end / (self.t_end / ceiling).ceil()
                }
            }
        }
    }

    /// Solver settings. The step ceiling is reported, not enforced, so
    /// that an oversized step surfaces as a recorded blow-up.
    pub fn solver(&self, dt: f64) -> SolverConfig {
        let mut cfg = SolverConfig::new(dt, self.t_end)
            .with_sample_every(self.sample_every)
            .allowing_large_dt();
        cfg.dealias = self.dealias;
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let cfg: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn dt_accepts_number_or_auto() {
        let cfg: RunConfig = serde_json::from_str(r#"{"dt": "auto"}"#).unwrap();
        assert_eq!(cfg.dt, TimeStep::Auto);
        let cfg: RunConfig = serde_json::from_str(r#"{"dt": 0.002}"#).unwrap();
        assert_eq!(cfg.dt, TimeStep::Fixed(0.002));
        assert!(serde_json::from_str::<RunConfig>(r#"{"dt": "fast"}"#).is_err());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = serde_json::from_str::<RunConfig>(r#"{"domain": {"L": 10, "M": 3}}"#).unwrap_err();
        assert!(err.to_string().contains("unknown field `M`"));
    }

    #[test]
    fn validation_names_the_field() {
        let mut cfg = RunConfig::default();
        cfg.domain.n_points = 7;
        assert!(cfg.validate().unwrap_err().to_string().contains("domain.N"));
        let cfg = RunConfig {
            t_end: -1.0,
            ..RunConfig::default()
        };
        assert!(cfg.validate().unwrap_err().to_string().contains("t_end"));
        let mut cfg = RunConfig::default();
        cfg.domain.length = 10.0;
        cfg.initial = InitialCondition::Soliton { speed: 0.25, x0: 0.0 };
        assert!(cfg.validate().unwrap_err().to_string().contains("domain.L"));
    }

    #[test]
    fn auto_step_divides_the_interval() {
        let cfg = RunConfig {
            dt: TimeStep::Auto,
            t_end: 1.0,
            ..RunConfig::default()
        };
        let grid = cfg.grid().unwrap();
        let state = cfg.initial_state(&grid).unwrap();
        let dt = cfg.resolve_dt(&grid, &state);
        assert!(dt <= suggest_dt(&grid, &state));
        assert!(cfg.solver(dt).n_steps().is_ok());
    }

    #[test]
    fn experiments_parse() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"experiment": {"kind": "soliton", "C": 4, "seeds": 3, "mode": "u-only", "translation": "both"}}"#,
        )
        .unwrap();
        match cfg.experiment.unwrap() {
            Experiment::Soliton { speed, seeds, mode, translation, delta, v_rescale } => {
                assert_eq!((speed, seeds, delta, v_rescale), (4.0, 3, 1e-2, true));
                assert_eq!(mode, PerturbationMode::UOnly);
                assert_eq!(translation, TranslationMode::Both);
            }
            other => panic!("{other:?}"),
        }
    }
}
