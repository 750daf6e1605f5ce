use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agents::{AgentConfig, AgentKind, EpsilonSchedule, UpdateSchedule};
use crate::envs::EnvId;
use crate::error::{Error, Result};
use crate::nnkit::{Activation, OptimizerKind};

/// Replay capacity restored by fidelity mode.
pub const FIDELITY_REPLAY_CAPACITY: usize = 1_000_000;

/// Experiment file as written by users (TOML). Every key is checked; unknown keys
/// are rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub env: Option<EnvId>,
    pub agent: Option<AgentKind>,
    pub episodes: Option<usize>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    /// One update per episode and a 1m replay memory.
    pub fidelity_mode: Option<bool>,
    pub parallelism: Option<usize>,
    #[serde(default)]
    pub overrides: AgentOverrides,
}

/// Optional replacements for the per-agent defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentOverrides {
    pub gamma: Option<f64>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub optimizer: Option<OptimizerKind>,
    pub activation: Option<Activation>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub epsilon: Option<EpsilonSchedule>,
    pub target_sync_frames: Option<u64>,
    pub latent_dim: Option<usize>,
    pub intermediate_dim: Option<usize>,
    pub feature_dim: Option<usize>,
    pub head_hidden: Option<usize>,
    pub hidden: Option<Vec<usize>>,
    pub update_schedule: Option<UpdateSchedule>,
    pub updates_per_episode: Option<usize>,
    pub replay_capacity: Option<usize>,
    pub huber_delta: Option<f64>,
    pub normalize_observations: Option<bool>,
}

impl AgentOverrides {
    pub fn apply(&self, mut c: AgentConfig) -> AgentConfig {
        macro_rules! set {
            ($($f:ident),*) => {$( if let Some(v) = &self.$f { c.$f = v.clone(); } )*};
        }
        set!(
            gamma,
            learning_rate,
            batch_size,
            optimizer,
            activation,
            c1,
            c2,
            latent_dim,
            intermediate_dim,
            feature_dim,
            head_hidden,
            hidden,
            update_schedule,
            updates_per_episode,
            replay_capacity,
            huber_delta,
            normalize_observations
        );
        if let Some(e) = self.epsilon {
            c.epsilon = Some(e);
        }
        if let Some(t) = self.target_sync_frames {
            c.target_sync_frames = Some(t);
        }
        c
    }
}

/// Fully resolved experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub env: EnvId,
    pub agent: AgentConfig,
    pub episodes: usize,
    pub trials: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub fidelity_mode: bool,
    pub parallelism: usize,
}

pub const DEFAULT_TRIALS: usize = 5;

impl ExperimentConfig {
    /// Defaults for `(env, agent)`: Table-style hyperparameters, 5 trials.
    pub fn new(env: EnvId, kind: AgentKind, episodes: usize) -> Self {
        ExperimentConfig {
            env,
            agent: AgentConfig::defaults(kind),
            episodes,
            trials: DEFAULT_TRIALS,
            seed: 0,
            out_dir: PathBuf::from("runs").join(format!("{env}-{kind}")),
            fidelity_mode: false,
            parallelism: 1,
        }
    }

    pub fn from_file(file: &ExperimentFile) -> Result<Self> {
        let env = file.env.ok_or_else(|| Error::Config("missing `env`".into()))?;
        let kind = file.agent.ok_or_else(|| Error::Config("missing `agent`".into()))?;
        let episodes = file.episodes.ok_or_else(|| Error::Config("missing `episodes`".into()))?;
        let mut cfg = ExperimentConfig::new(env, kind, episodes);
        if let Some(t) = file.trials {
            cfg.trials = t;
        }
        if let Some(s) = file.seed {
            cfg.seed = s;
        }
        if let Some(d) = &file.out_dir {
            cfg.out_dir = d.clone();
        }
        if let Some(p) = file.parallelism {
            cfg.parallelism = p;
        }
        if file.fidelity_mode == Some(true) {
            cfg = cfg.with_fidelity_mode();
        }
        cfg.agent = file.overrides.apply(cfg.agent);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse_toml(text: &str) -> Result<Self> {
        let file: ExperimentFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_file(&file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Literal one-update-per-episode schedule with the full 1m replay memory.
    pub fn with_fidelity_mode(mut self) -> Self {
        self.fidelity_mode = true;
        self.agent.update_schedule = UpdateSchedule::PerEpisode;
        self.agent.updates_per_episode = 1;
        self.agent.replay_capacity = FIDELITY_REPLAY_CAPACITY;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::Config("episodes must be positive".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be positive".into()));
        }
        if self.parallelism == 0 {
            return Err(Error::Config("parallelism must be positive".into()));
        }
        self.agent.validate()
    }

    /// Hash of everything that influences results (output location excluded).
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        c.parallelism = 0;
        crate::digest::sha256_hex(serde_json::to_string(&c).expect("config serializes").as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_and_overrides() {
        let c = ExperimentConfig::parse_toml(
            r#"
            env = "cartpole"
            agent = "dvqn"
            episodes = 10
            seed = 3

            [overrides]
            c1 = 0.5
            latent_dim = 3
            activation = { kind = "elu", alpha = 1.0 }
            "#,
        )
        .unwrap();
        assert_eq!(c.env, EnvId::CartPole);
        assert_eq!(c.trials, DEFAULT_TRIALS);
        assert_eq!(c.agent.c1, 0.5);
        assert_eq!(c.agent.latent_dim, 3);
        assert_eq!(c.agent.learning_rate, 0.000025);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let top = ExperimentConfig::parse_toml("env = \"cartpole\"\nagent = \"dqn\"\nepisodes = 1\nbogus = 1\n");
        assert!(matches!(top, Err(Error::Config(_))));
        let nested =
            ExperimentConfig::parse_toml("env = \"cartpole\"\nagent = \"dqn\"\nepisodes = 1\n[overrides]\nlr = 0.1\n");
        assert!(matches!(nested, Err(Error::Config(_))));
        let bad_env = ExperimentConfig::parse_toml("env = \"pong\"\nagent = \"dqn\"\nepisodes = 1\n");
        assert!(matches!(bad_env, Err(Error::Config(_))));
        let zero = ExperimentConfig::parse_toml("env = \"cartpole\"\nagent = \"dqn\"\nepisodes = 0\n");
        assert!(matches!(zero, Err(Error::Config(_))));
    }

    #[test]
    fn fidelity_mode_restores_literal_schedule() {
        let c = ExperimentConfig::parse_toml(
            "env = \"acrobot\"\nagent = \"dvqn\"\nepisodes = 3000\nfidelity_mode = true\n",
        )
        .unwrap();
        assert_eq!(c.agent.update_schedule, UpdateSchedule::PerEpisode);
        assert_eq!(c.agent.replay_capacity, 1_000_000);
    }

    #[test]
    fn digest_ignores_output_location() {
        let a = ExperimentConfig::new(EnvId::CartPole, AgentKind::Dqn, 5);
        let mut b = a.clone();
        b.out_dir = "elsewhere".into();
        b.parallelism = 4;
        assert_eq!(a.digest(), b.digest());
        b.seed = 1;
        assert_ne!(a.digest(), b.digest());
    }
}
