//! TOML run and benchmark configuration files.
//!
//! A run file has an `[objective]` table, a `[bo]` table mirroring
//! [`BoConfig`] and an optional `[output]` table. A benchmark file adds a
//! `[bench]` table describing the grid. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bo::BoConfig;
use crate::design::Domain;
use crate::error::{BoError, Result};
use crate::kernel::{KernelFamily, KernelSpec};
use crate::objectives::{builtin, load_table, tabular_objective, Objective};
use crate::schedule::ScheduleMode;

fn default_noise_sd() -> f64 {
    0.01
}

fn default_true() -> bool {
    true
}

fn default_table_lengthscale() -> f64 {
    0.2
}

fn default_table_noise() -> f64 {
    1e-4
}

/// Objective backed by the GP posterior mean of a data table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSource {
    pub path: PathBuf,
    /// Drop the last coordinate column (simplex compositions).
    #[serde(default)]
    pub drop_last: bool,
    #[serde(default = "default_family")]
    pub kernel: KernelFamily,
    /// Length-scale as a fraction of each axis width of the data box.
    #[serde(default = "default_table_lengthscale")]
    pub lengthscale: f64,
    #[serde(default = "default_one")]
    pub signal_variance: f64,
    #[serde(default = "default_table_noise")]
    pub noise_variance: f64,
    /// Domain bounds; defaults to the bounding box of the data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<f64>>,
}

fn default_family() -> KernelFamily {
    KernelFamily::Matern52
}

fn default_one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSpec {
    /// Registered benchmark name, or `tabular` together with `table`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default = "default_noise_sd")]
    pub noise_sd: f64,
    /// Pass the noise level to the optimizer as a known quantity.
    #[serde(default = "default_true")]
    pub noise_known: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<TableSource>,
}

impl Default for ObjectiveSpec {
    fn default() -> Self {
        ObjectiveSpec {
            name: None,
            dim: None,
            noise_sd: default_noise_sd(),
            noise_known: true,
            table: None,
        }
    }
}

impl ObjectiveSpec {
    pub fn named(name: &str, dim: Option<usize>) -> Self {
        ObjectiveSpec {
            name: Some(name.to_string()),
            dim,
            ..Default::default()
        }
    }

    /// Build the objective. Relative table paths resolve against `base_dir`.
    pub fn build(&self, base_dir: Option<&Path>) -> Result<Objective> {
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(BoError::config("objective.noise_sd", "must be nonnegative"));
        }
        let obj = match (&self.name, &self.table) {
            (_, Some(t)) => {
                let path = match base_dir {
                    Some(b) if t.path.is_relative() => b.join(&t.path),
                    _ => t.path.clone(),
                };
                let table = load_table(&path, t.drop_last)?;
                let domain = match (&t.lower, &t.upper) {
                    (Some(l), Some(u)) => Some(
                        Domain::new(l.clone(), u.clone()).map_err(|e| BoError::config("objective.table", e.to_string()))?,
                    ),
                    (None, None) => None,
                    _ => return Err(BoError::config("objective.table", "give both `lower` and `upper` or neither")),
                };
                let bbox = match &domain {
                    Some(d) => d.clone(),
                    None => table.bounding_box()?,
                };
                let ls: Vec<f64> = (0..bbox.dim()).map(|j| t.lengthscale * bbox.width(j).max(1e-12)).collect();
                let spec = KernelSpec::new(t.kernel, ls, t.signal_variance)
                    .map_err(|e| BoError::config("objective.table", e.to_string()))?;
                tabular_objective(&table, &spec, t.noise_variance, domain)?
            }
            (Some(name), None) => builtin(name, self.dim).map_err(|e| match e {
                BoError::Usage(m) | BoError::Domain(m) => BoError::config("objective.name", m),
                other => other,
            })?,
            (None, None) => return Err(BoError::config("objective.name", "is required")),
        };
        obj.with_noise(self.noise_sd)
    }

    /// Noise variance the optimizer may assume.
    pub fn known_noise_variance(&self) -> Option<f64> {
        (self.noise_known && self.noise_sd > 0.0).then_some(self.noise_sd * self.noise_sd)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    #[serde(default)]
    pub objective: ObjectiveSpec,
    pub bo: BoConfig,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_modes() -> Vec<ScheduleMode> {
    vec![ScheduleMode::Fixed { alpha: 1.0 }, ScheduleMode::Adaptive]
}

fn default_gs() -> Vec<f64> {
    vec![0.0, 1.0, 2.0]
}

fn default_seeds() -> usize {
    5
}

/// Grid of a benchmark sweep. The first schedule mode is the baseline of the
/// paired comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSpec {
    pub objectives: Vec<ObjectiveSpec>,
    #[serde(default = "default_gs")]
    pub g: Vec<f64>,
    #[serde(default = "default_modes")]
    pub modes: Vec<ScheduleMode>,
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_true")]
    pub parallel: bool,
    #[serde(default = "default_true")]
    pub write_traces: bool,
    /// Record wall-clock time in the aggregate; off keeps it reproducible.
    #[serde(default)]
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfigFile {
    pub bench: BenchSpec,
    pub bo: BoConfig,
    #[serde(default)]
    pub output: OutputSpec,
}

fn parse_err(e: toml::de::Error) -> BoError {
    let field = e
        .message()
        .split('`')
        .nth(1)
        .map(str::to_string)
        .unwrap_or_else(|| "document".into());
    BoError::config(field, e.to_string().trim().to_string())
}

impl RunConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let c: RunConfigFile = toml::from_str(text).map_err(parse_err)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BoError::config("config", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.objective.name.is_none() && self.objective.table.is_none() {
            return Err(BoError::config("objective.name", "is required"));
        }
        self.bo.validate()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Optimizer settings with the objective's known noise filled in.
    pub fn effective_bo(&self) -> BoConfig {
        let mut c = self.bo.clone();
        if c.noise_variance.is_none() {
            c.noise_variance = self.objective.known_noise_variance();
        }
        c
    }
}

impl BenchConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let c: BenchConfigFile = toml::from_str(text).map_err(parse_err)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BoError::config("config", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let b = &self.bench;
        if b.objectives.is_empty() {
            return Err(BoError::config("bench.objectives", "must not be empty"));
        }
        if b.objectives.iter().any(|o| o.name.is_none() && o.table.is_none()) {
            return Err(BoError::config("bench.objectives.name", "is required"));
        }
        if b.g.is_empty() || b.g.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
            return Err(BoError::config("bench.g", "must be a nonempty list of nonnegative numbers"));
        }
        if b.modes.is_empty() {
            return Err(BoError::config("bench.modes", "must not be empty"));
        }
        if b.seeds == 0 {
            return Err(BoError::config("bench.seeds", "must be at least 1"));
        }
        self.bo.validate()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}
