//! Run configuration: one JSON document with world, roadmap, prediction,
//! planner and experiment sections.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::digest::config_hash;
use crate::error::{Error, Result};
use crate::planner::{EscapeConfig, Pipeline};
use crate::prediction::PredictionConfig;
use crate::roadmap::RoadmapConfig;
use crate::world::WorldConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// 8 obstacles, dense graph.
    A,
    /// 8 obstacles, sparse graph.
    B,
    /// 16 obstacles, dense graph.
    C,
}

impl Scenario {
    pub fn obstacle_count(self) -> usize {
        match self {
            Self::A | Self::B => 8,
            Self::C => 16,
        }
    }

    pub fn roadmap(self) -> RoadmapConfig {
        match self {
            Self::A | Self::C => RoadmapConfig::DENSE,
            Self::B => RoadmapConfig::SPARSE,
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" => Ok(Self::A),
            "b" => Ok(Self::B),
            "c" => Ok(Self::C),
            other => Err(Error::Config(format!("unknown scenario '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorKind {
    /// Constant-velocity extrapolation.
    Baseline,
    /// Ground truth from the simulation log.
    Oracle,
    /// Models loaded from `experiment.model`.
    Trained,
}

impl std::str::FromStr for PredictorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Self::Baseline),
            "oracle" => Ok(Self::Oracle),
            "trained" => Ok(Self::Trained),
            other => Err(Error::Config(format!("unknown predictor '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub escape: EscapeConfig,
    /// Edges the agent may traverse per target before the episode aborts.
    pub step_budget: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self { escape: EscapeConfig::default(), step_budget: 5000 }
    }
}

fn default_targets() -> usize {
    200
}

fn default_r_values() -> Vec<f64> {
    vec![0.0, 1.0, 10.0, 100.0]
}

fn default_repeats() -> usize {
    1
}

fn default_pipeline() -> Pipeline {
    Pipeline::Regression
}

fn default_predictor() -> PredictorKind {
    PredictorKind::Oracle
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSection {
    pub master_seed: u64,
    #[serde(default)]
    pub scenario: Option<Scenario>,
    #[serde(default = "default_targets")]
    pub targets: usize,
    #[serde(default = "default_r_values")]
    pub r_values: Vec<f64>,
    #[serde(default = "default_pipeline")]
    pub pipeline: Pipeline,
    #[serde(default = "default_predictor")]
    pub predictor: PredictorKind,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub world: WorldConfig,
    #[serde(default)]
    pub roadmap: RoadmapConfig,
    #[serde(default)]
    pub prediction: PredictionConfig,
    #[serde(default)]
    pub planner: PlannerConfig,
    pub experiment: ExperimentSection,
}

impl ExperimentConfig {
    /// Defaults for `scenario` with the given seed.
    pub fn scenario(scenario: Scenario, master_seed: u64) -> Self {
        let mut cfg = Self {
            world: WorldConfig::default(),
            roadmap: RoadmapConfig::default(),
            prediction: PredictionConfig::default(),
            planner: PlannerConfig::default(),
            experiment: ExperimentSection {
                master_seed,
                scenario: Some(scenario),
                targets: default_targets(),
                r_values: default_r_values(),
                pipeline: default_pipeline(),
                predictor: default_predictor(),
                repeats: default_repeats(),
                model: None,
            },
        };
        cfg.apply_scenario(scenario);
        cfg
    }

    /// Sets obstacle count and graph to the scenario's values.
    pub fn apply_scenario(&mut self, scenario: Scenario) {
        self.experiment.scenario = Some(scenario);
        self.world.obstacle_count = scenario.obstacle_count();
        self.roadmap = scenario.roadmap();
    }

    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.roadmap.validate()?;
        self.prediction.validate()?;
        self.planner.escape.validate()?;
        if let Some(s) = self.experiment.scenario {
            if self.world.obstacle_count != s.obstacle_count() || self.roadmap != s.roadmap() {
                return Err(Error::Config(format!("world/roadmap sections disagree with scenario {s:?}")));
            }
        }
        let e = &self.experiment;
        if e.targets == 0 || e.repeats == 0 || self.planner.step_budget == 0 {
            return Err(Error::Config("targets, repeats and step_budget must be positive".into()));
        }
        if e.r_values.is_empty() {
            return Err(Error::Config("r_values must not be empty".into()));
        }
        if e.r_values.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::Config("r_values must be finite and non-negative".into()));
        }
        if e.predictor == PredictorKind::Trained && e.model.is_none() {
            return Err(Error::Config("predictor 'trained' needs experiment.model".into()));
        }
        Ok(())
    }

    pub fn hash(&self) -> Result<String> {
        config_hash(self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}
