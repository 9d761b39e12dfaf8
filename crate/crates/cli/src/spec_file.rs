//! JSON group description read by `compute` and `simulate`.

use std::path::Path;

use contagion_core::{ContagionMatrix, DefaultFamily, GroupSpec, SimulationSpec};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpecFile {
    pub leader_survival: f64,
    pub members: Vec<MemberEntry>,
    pub contagion: ContagionEntry,
    #[serde(default)]
    pub delta_mode: DeltaMode,
    #[serde(default)]
    pub simulation: Option<SimulationBlock>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemberEntry {
    pub default_prob: f64,
    #[serde(default)]
    pub early_default_prob: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ContagionEntry {
    Uniform { uniform: f64 },
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeltaMode {
    #[default]
    None,
    Delayed,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationBlock {
    #[serde(default = "unit_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub trials: Option<u64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub distribution: DefaultFamily,
    /// Contagion window cut-off, required when `delta_mode` is `"delayed"`.
    #[serde(default)]
    pub delay: Option<f64>,
}

fn unit_horizon() -> f64 {
    1.0
}

impl GroupSpecFile {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Input(msg) => CliError::Input(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Input(e.to_string()))
    }

    pub fn n(&self) -> usize {
        self.members.len()
    }

    /// Validated group, with early-default probabilities only in delayed mode.
    pub fn group(&self) -> Result<GroupSpec, CliError> {
        let n = self.n();
        let contagion = match &self.contagion {
            ContagionEntry::Uniform { uniform } => ContagionMatrix::uniform(n, *uniform),
            ContagionEntry::Matrix(rows) => ContagionMatrix::from_rows(rows.clone())?,
        };
        let member_default = self.members.iter().map(|m| m.default_prob).collect();
        let mut spec = GroupSpec::new(self.leader_survival, member_default, contagion);
        if self.delta_mode == DeltaMode::Delayed {
            let early = self
                .members
                .iter()
                .enumerate()
                .map(|(i, m)| {
                    m.early_default_prob.ok_or_else(|| {
                        CliError::Input(format!(
                            "members[{i}]: early_default_prob is required when delta_mode is \"delayed\""
                        ))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            spec = spec.with_early_default(early);
        }
        spec.validate()?;
        Ok(spec)
    }

    /// Simulation for this group; flags override the file's trials and seed.
    pub fn simulation(
        &self,
        trials: Option<u64>,
        seed: Option<u64>,
    ) -> Result<SimulationSpec, CliError> {
        let spec = self.group()?;
        let block = self.simulation.clone().unwrap_or(SimulationBlock {
            horizon: unit_horizon(),
            trials: None,
            seed: None,
            distribution: DefaultFamily::default(),
            delay: None,
        });
        let trials = trials.or(block.trials).ok_or_else(|| {
            CliError::Input(
                "number of trials missing: pass --trials or set simulation.trials".into(),
            )
        })?;
        let seed = seed.or(block.seed).ok_or_else(|| {
            CliError::Input("seed missing: pass --seed or set simulation.seed".into())
        })?;
        let delay = match self.delta_mode {
            DeltaMode::None => None,
            DeltaMode::Delayed => Some(block.delay.ok_or_else(|| {
                CliError::Input(
                    "simulation.delay is required when delta_mode is \"delayed\"".into(),
                )
            })?),
        };
        let sim = SimulationSpec::calibrated_with(
            &spec,
            block.distribution,
            block.horizon,
            trials,
            seed,
            delay,
        )?;
        sim.validate()?;
        Ok(sim)
    }
}
