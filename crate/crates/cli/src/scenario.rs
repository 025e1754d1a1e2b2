//! Scenario files: one experiment on one instance, as TOML.
//!
//! ```toml
//! name = "lq-rate"
//! experiment = "rate"
//! seed = 7
//!
//! [model]
//! instance = "constant-sigma-scalar"
//! lambda = 1.0
//!
//! [stepper]
//! dt = 0.02
//! horizon = 1.0
//! penalty_n = 1e4
//! ```

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use refldp::rate::{OptimizerSettings, TargetEvent};
use refldp::reflected::SolutionTolerances;
use refldp::{Control, ModelSpec, StepperConfig};

use crate::instances::build_instance;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    VerifyAssumptions,
    PenalizationSweep,
    DefinitionChecks,
    WeakContinuity,
    ConditionI,
    Rate,
    McLdp,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::VerifyAssumptions => "verify-assumptions",
            Experiment::PenalizationSweep => "penalization-sweep",
            Experiment::DefinitionChecks => "definition-checks",
            Experiment::WeakContinuity => "weak-continuity",
            Experiment::ConditionI => "condition-i",
            Experiment::Rate => "rate",
            Experiment::McLdp => "mc-ldp",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct ModelSection {
    pub instance: String,
    #[serde(flatten)]
    pub params: toml::Table,
}

/// Piecewise-constant control on `pieces` equal cells of `[0, horizon]`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSection {
    pub pieces: Option<usize>,
    pub value: Option<f64>,
    pub values: Option<Vec<f64>>,
    /// Controls CSV (`t,k`), relative to the scenario file.
    pub csv: Option<PathBuf>,
}

/// Checks applied to the scenario's primary reflected trajectory.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChecksSection {
    pub probes: usize,
    /// Noise level of the primary trajectory.
    pub eps: f64,
    pub vi_rel: f64,
    pub overshoot: f64,
    pub support: f64,
    pub energy_nonincreasing: bool,
}

impl Default for ChecksSection {
    fn default() -> Self {
        let t = SolutionTolerances::default();
        Self { probes: 1000, eps: 0.0, vi_rel: t.vi_rel, overshoot: t.overshoot, support: t.support, energy_nonincreasing: false }
    }
}

impl ChecksSection {
    pub fn tolerances(&self) -> SolutionTolerances {
        SolutionTolerances { vi_rel: self.vi_rel, overshoot: self.overshoot, support: self.support }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub model: ModelSection,
    pub stepper: StepperConfig,
    #[serde(default)]
    pub control: ControlSection,
    #[serde(default)]
    pub checks: ChecksSection,
    #[serde(default)]
    pub params: toml::Table,
    pub event: Option<TargetEvent>,
    #[serde(default)]
    pub optimizer: OptimizerSettings,
}

/// A parsed scenario with its model built.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub source: String,
    pub base_dir: PathBuf,
    pub model: ModelSpec,
    pub control: Control,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let source = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.display().to_string(), source: e })?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&source, &base_dir).map_err(|e| match e {
            CliError::Toml { source, .. } => CliError::Toml { path: path.display().to_string(), source },
            other => other,
        })
    }

    pub fn parse(source: &str, base_dir: &Path) -> Result<Self, CliError> {
        let file: ScenarioFile = toml::from_str(source).map_err(|e| CliError::Toml { path: "<scenario>".into(), source: e })?;
        let model = build_instance(&file.model.instance, &file.model.params)?;
        file.stepper.validate(&model.space)?;
        let control = build_control(&file.control, file.stepper.horizon, base_dir)?;
        Ok(Self { file, source: source.to_string(), base_dir: base_dir.to_path_buf(), model, control })
    }

    pub fn seed(&self) -> u64 {
        self.file.seed
    }

    /// Experiment parameters of type `T` from the `[params]` table.
    pub fn params<T: DeserializeOwned>(&self) -> Result<T, CliError> {
        toml::Value::Table(self.file.params.clone())
            .try_into()
            .map_err(|e| CliError::Config(format!("[params] for experiment `{}`: {e}", self.file.experiment.as_str())))
    }

    pub fn event(&self) -> Result<&TargetEvent, CliError> {
        let e = self
            .file
            .event
            .as_ref()
            .ok_or_else(|| CliError::Config(format!("experiment `{}` needs an [event] section", self.file.experiment.as_str())))?;
        e.validate(self.model.dim())?;
        Ok(e)
    }
}

fn build_control(c: &ControlSection, horizon: f64, base_dir: &Path) -> Result<Control, CliError> {
    if let Some(csv) = &c.csv {
        let path = base_dir.join(csv);
        let file = std::fs::File::open(&path).map_err(|e| CliError::Io { path: path.display().to_string(), source: e })?;
        let k = Control::read_csv(file)?;
        if (k.horizon() - horizon).abs() > 1e-9 * horizon.max(1.0) || k.grid()[0] != 0.0 {
            return Err(CliError::Config(format!("control CSV covers [{}, {}], horizon is {horizon}", k.grid()[0], k.horizon())));
        }
        return Ok(k);
    }
    match (&c.values, c.value) {
        (Some(_), Some(_)) => Err(CliError::Config("[control] takes either `value` or `values`, not both".into())),
        (Some(v), None) => {
            if c.pieces.is_some_and(|p| p != v.len()) {
                return Err(CliError::Config("[control] `pieces` disagrees with the length of `values`".into()));
            }
            Ok(Control::new(refldp::controls::uniform_grid(horizon, v.len().max(1)), v.clone())?)
        }
        (None, v) => Ok(Control::constant(horizon, c.pieces.unwrap_or(1), v.unwrap_or(0.0))?),
    }
}
