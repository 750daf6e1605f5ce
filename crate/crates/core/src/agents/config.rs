use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nnkit::{Activation, OptimizerKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Dvqn,
    Dqn,
    Ddqn,
}

impl AgentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::Dvqn => "dvqn",
            AgentKind::Dqn => "dqn",
            AgentKind::Ddqn => "ddqn",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dvqn" => Ok(AgentKind::Dvqn),
            "dqn" => Ok(AgentKind::Dqn),
            "ddqn" => Ok(AgentKind::Ddqn),
            _ => Err(Error::Config(format!("unknown agent `{s}` (expected dvqn, dqn or ddqn)"))),
        }
    }
}

/// Linear exploration decay, applied per environment step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay: f64,
}

impl EpsilonSchedule {
    pub const BASELINE: EpsilonSchedule = EpsilonSchedule {
        start: 1.0,
        end: 0.01,
        decay: 0.001,
    };

    pub fn value(&self, env_steps: u64) -> f64 {
        (self.start - self.decay * env_steps as f64).max(self.end)
    }
}

/// When gradient updates happen during training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateSchedule {
    /// One update after every environment step once the buffer holds a batch.
    PerStep,
    /// `updates_per_episode` updates after each finished episode.
    PerEpisode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub kind: AgentKind,
    pub gamma: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub activation: Activation,
    /// Weight on the autoencoder terms (reconstruction + KL).
    pub c1: f64,
    /// Weight on the Q-learning term.
    pub c2: f64,
    pub epsilon: Option<EpsilonSchedule>,
    /// Environment frames between online-to-target copies (Double DQN).
    pub target_sync_frames: Option<u64>,
    pub latent_dim: usize,
    /// Width of the layer that feeds the mean and log-variance heads.
    pub intermediate_dim: usize,
    /// Width of the first encoder layer.
    pub feature_dim: usize,
    /// Hidden width of the decoder and Q-head.
    pub head_hidden: usize,
    /// Hidden layer widths of the baseline Q-network.
    pub hidden: Vec<usize>,
    pub update_schedule: UpdateSchedule,
    pub updates_per_episode: usize,
    pub replay_capacity: usize,
    pub huber_delta: f64,
    /// Divide control-task observations by fixed per-dimension scales.
    pub normalize_observations: bool,
}

impl AgentConfig {
    pub fn defaults(kind: AgentKind) -> Self {
        let base = AgentConfig {
            kind,
            gamma: 0.95,
            learning_rate: 0.003,
            batch_size: 32,
            optimizer: OptimizerKind::Adam,
            activation: Activation::Relu,
            c1: 1.0,
            c2: 1.0,
            epsilon: Some(EpsilonSchedule::BASELINE),
            target_sync_frames: None,
            latent_dim: 2,
            intermediate_dim: 128,
            feature_dim: 64,
            head_hidden: 64,
            hidden: vec![64, 64],
            update_schedule: UpdateSchedule::PerStep,
            updates_per_episode: 1,
            replay_capacity: 100_000,
            huber_delta: 1.0,
            normalize_observations: true,
        };
        match kind {
            AgentKind::Dqn => base,
            AgentKind::Ddqn => AgentConfig {
                target_sync_frames: Some(32_000),
                ..base
            },
            AgentKind::Dvqn => AgentConfig {
                learning_rate: 0.000025,
                batch_size: 128,
                optimizer: OptimizerKind::RmsProp,
                activation: Activation::ELU,
                epsilon: None,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma {} outside [0, 1]", self.gamma));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate {} must be positive", self.learning_rate));
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return bad("batch_size must be positive and fit in the replay capacity".into());
        }
        if self.latent_dim == 0 || self.intermediate_dim == 0 || self.feature_dim == 0 || self.head_hidden == 0 {
            return bad("layer widths must be positive".into());
        }
        if self.hidden.contains(&0) {
            return bad("baseline hidden widths must be positive".into());
        }
        if self.update_schedule == UpdateSchedule::PerEpisode && self.updates_per_episode == 0 {
            return bad("updates_per_episode must be positive".into());
        }
        self.activation.validate()?;
        match (self.kind, &self.epsilon) {
            (AgentKind::Dvqn, Some(_)) => return bad("dvqn explores through its latent; no epsilon schedule".into()),
            (AgentKind::Dvqn, None) => {
                if self.c1 < 0.0 || self.c2 < 0.0 || (self.c1 == 0.0 && self.c2 == 0.0) {
                    return bad("loss weights c1, c2 must be non-negative and not both zero".into());
                }
            }
            (_, None) => return bad(format!("{} needs an epsilon schedule", self.kind)),
            (_, Some(e)) => {
                if !(0.0 <= e.end && e.end <= e.start && e.start <= 1.0 && e.decay >= 0.0) {
                    return bad(format!("invalid epsilon schedule {e:?}"));
                }
            }
        }
        match (self.kind, self.target_sync_frames) {
            (AgentKind::Ddqn, None | Some(0)) => bad("ddqn needs a positive target_sync_frames".into()),
            (AgentKind::Dvqn | AgentKind::Dqn, Some(_)) => bad(format!("{} has no target network", self.kind)),
            _ => Ok(()),
        }
    }
}
