//! Mission configuration files: one JSON document naming the command, the
//! world, the symbolic domain, the knowledge file, the navigation policy,
//! and the supervision thresholds. Relative paths resolve against the
//! directory containing the configuration file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{self, Domain};
use crate::knowledge::{self, KnowledgeBase};
use crate::perception::NoiseConfig;
use crate::replan::ReplanConfig;
use crate::rl::Policy;
use crate::semantic::{MissionCommand, SemanticError};
use crate::world::{FaultKind, WorldConfig};

pub const DEFAULT_STEP_BUDGET: u64 = 2000;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FaultSpec {
    pub kind: String,
    pub magnitude: f64,
    pub start_step: u64,
    pub end_step: u64,
}

impl FaultSpec {
    pub fn kind_parsed(&self) -> Option<FaultKind> {
        Some(match self.kind.as_str() {
            "speed_degradation" => FaultKind::SpeedDegradation,
            "lateral_push" => FaultKind::LateralPush,
            "obstacle_spawn" => FaultKind::ObstacleSpawn,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MissionConfig {
    pub command: String,
    pub world: PathBuf,
    pub domain: PathBuf,
    pub knowledge: PathBuf,
    pub policy: PathBuf,
    #[serde(default)]
    pub replanner: ReplanConfig,
    #[serde(default = "default_budget")]
    pub step_budget: u64,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub faults: Vec<FaultSpec>,
}

fn default_budget() -> u64 {
    DEFAULT_STEP_BUDGET
}

#[derive(Debug, Error)]
pub enum MissionConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error(transparent)]
    Command(#[from] SemanticError),
    #[error("unknown fault kind `{0}`")]
    UnknownFault(String),
}

/// A mission configuration with every referenced file loaded and parsed.
#[derive(Clone, Debug)]
pub struct LoadedMission {
    pub command: MissionCommand,
    pub command_text: String,
    pub world: WorldConfig,
    pub domain: Domain,
    pub knowledge: KnowledgeBase,
    pub policy: Policy,
    pub replanner: ReplanConfig,
    pub step_budget: u64,
    pub noise: NoiseConfig,
    pub faults: Vec<FaultSpec>,
}

fn read(path: &Path) -> Result<String, MissionConfigError> {
    fs::read_to_string(path)
        .map_err(|source| MissionConfigError::Io { path: path.to_path_buf(), source })
}

impl MissionConfig {
    pub fn load(path: &Path) -> Result<LoadedMission, MissionConfigError> {
        let text = read(path)?;
        let cfg: MissionConfig =
            serde_json::from_str(&text).map_err(|e| MissionConfigError::Parse {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        cfg.load_from(base)
    }

    /// Loads every referenced file, resolving relative paths against `base`.
    pub fn load_from(&self, base: &Path) -> Result<LoadedMission, MissionConfigError> {
        let resolve = |p: &Path| -> PathBuf {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        let world_path = resolve(&self.world);
        let world = WorldConfig::from_json(&read(&world_path)?).map_err(|e| {
            MissionConfigError::Parse { path: world_path.clone(), message: e.to_string() }
        })?;
        let domain_path = resolve(&self.domain);
        let domain = domain::parse_domain(&read(&domain_path)?).map_err(|e| {
            MissionConfigError::Parse { path: domain_path.clone(), message: e.to_string() }
        })?;
        let kb_path = resolve(&self.knowledge);
        let knowledge = knowledge::parse_knowledge_xml(&read(&kb_path)?).map_err(|e| {
            MissionConfigError::Parse { path: kb_path.clone(), message: e.to_string() }
        })?;
        let policy_path = resolve(&self.policy);
        let policy = Policy::from_json(&read(&policy_path)?).map_err(|e| {
            MissionConfigError::Parse { path: policy_path.clone(), message: e.to_string() }
        })?;
        for f in &self.faults {
            if f.kind_parsed().is_none() {
                return Err(MissionConfigError::UnknownFault(f.kind.clone()));
            }
        }
        Ok(LoadedMission {
            command: MissionCommand::parse(&self.command)?,
            command_text: self.command.clone(),
            world,
            domain,
            knowledge,
            policy,
            replanner: self.replanner,
            step_budget: self.step_budget,
            noise: self.noise,
            faults: self.faults.clone(),
        })
    }
}
