//! The variational Q-network agent and the DQN / Double-DQN baselines.

pub mod baseline;
pub mod config;
pub mod dvqn;
pub mod normalize;
pub mod q_target;

pub use baseline::{act_baseline, epsilon_greedy, train_step_q, BaselineAgent};
pub use config::{AgentConfig, AgentKind, EpsilonSchedule, UpdateSchedule};
pub use dvqn::{
    kl_divergence, sample_latent, total_loss, train_step_dvqn, vae_loss, ActMode, DvqnModel, GaussianLatent,
    LossBreakdown,
};
pub use normalize::ObsScaler;
pub use q_target::{bootstrap_target, max_target};

use crate::digest::sha256_hex;
use crate::envs::EnvId;
use crate::error::{Error, Result};
use crate::nnkit::{Checkpoint, Network, Optimizer, Rng};
use crate::replay::ReplayBuffer;

/// Loss reported by one gradient update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum UpdateLoss {
    Dvqn(LossBreakdown),
    Q(f64),
}

impl UpdateLoss {
    pub fn total(&self) -> f64 {
        match self {
            UpdateLoss::Dvqn(l) => l.total,
            UpdateLoss::Q(q) => *q,
        }
    }
}

#[derive(Clone, Debug)]
enum Inner {
    Dvqn { model: DvqnModel, optimizer: Optimizer },
    Baseline(BaselineAgent),
}

/// An agent bound to one environment's observation/action spaces.
#[derive(Clone, Debug)]
pub struct Agent {
    config: AgentConfig,
    env: EnvId,
    scaler: ObsScaler,
    inner: Inner,
}

impl Agent {
    pub fn new(config: AgentConfig, env: EnvId, obs_dim: usize, action_count: usize, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let scaler = ObsScaler::for_env(env, config.normalize_observations);
        let inner = match config.kind {
            AgentKind::Dvqn => Inner::Dvqn {
                model: DvqnModel::new(obs_dim, action_count, &config, rng)?,
                optimizer: Optimizer::new(config.optimizer, config.learning_rate),
            },
            AgentKind::Dqn | AgentKind::Ddqn => {
                Inner::Baseline(BaselineAgent::new(obs_dim, action_count, &config, rng)?)
            }
        };
        Ok(Agent {
            config,
            env,
            scaler,
            inner,
        })
    }

    pub fn kind(&self) -> AgentKind {
        self.config.kind
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn env(&self) -> EnvId {
        self.env
    }

    pub fn scaler(&self) -> &ObsScaler {
        &self.scaler
    }

    pub fn dvqn_model(&self) -> Option<&DvqnModel> {
        match &self.inner {
            Inner::Dvqn { model, .. } => Some(model),
            Inner::Baseline(_) => None,
        }
    }

    pub fn baseline(&self) -> Option<&BaselineAgent> {
        match &self.inner {
            Inner::Baseline(b) => Some(b),
            Inner::Dvqn { .. } => None,
        }
    }

    /// Current exploration rate (baselines only).
    pub fn epsilon(&self) -> Option<f64> {
        match &self.inner {
            Inner::Baseline(b) => Some(b.epsilon(&self.config)),
            Inner::Dvqn { .. } => None,
        }
    }

    /// Action during training: latent sampling for DVQN, epsilon-greedy otherwise.
    pub fn act_train(&self, obs: &[f64], rng: &mut Rng) -> Result<usize> {
        let x = self.scaler.apply(obs);
        match &self.inner {
            Inner::Dvqn { model, .. } => model.act(&x, ActMode::Stochastic, rng),
            Inner::Baseline(b) => act_baseline(&b.online, &x, b.epsilon(&self.config), rng),
        }
    }

    /// Action for evaluation: latent mean for DVQN, greedy otherwise.
    pub fn act_eval(&self, obs: &[f64], rng: &mut Rng) -> Result<usize> {
        let x = self.scaler.apply(obs);
        match &self.inner {
            Inner::Dvqn { model, .. } => model.act(&x, ActMode::Deterministic, rng),
            Inner::Baseline(b) => act_baseline(&b.online, &x, 0.0, rng),
        }
    }

    /// Latent distribution of an observation (DVQN only).
    pub fn encode(&self, obs: &[f64]) -> Result<GaussianLatent> {
        let model = self
            .dvqn_model()
            .ok_or_else(|| Error::Usage(format!("{} agents have no latent space", self.kind())))?;
        model.encode(&self.scaler.apply(obs))
    }

    pub fn on_env_step(&mut self) {
        if let Inner::Baseline(b) = &mut self.inner {
            b.on_env_step(&self.config);
        }
    }

    pub fn train_step(&mut self, buffer: &ReplayBuffer, rng: &mut Rng) -> Result<UpdateLoss> {
        match &mut self.inner {
            Inner::Dvqn { model, optimizer } => {
                train_step_dvqn(model, buffer, optimizer, &self.config, &self.scaler, rng).map(UpdateLoss::Dvqn)
            }
            Inner::Baseline(b) => b.train_step(buffer, &self.config, &self.scaler, rng).map(UpdateLoss::Q),
        }
    }

    fn network(&self) -> &dyn Network {
        match &self.inner {
            Inner::Dvqn { model, .. } => model,
            Inner::Baseline(b) => &b.online,
        }
    }

    fn network_mut(&mut self) -> &mut dyn Network {
        match &mut self.inner {
            Inner::Dvqn { model, .. } => model,
            Inner::Baseline(b) => &mut b.online,
        }
    }

    pub fn config_json(&self) -> String {
        serde_json::to_string(&self.config).expect("config serializes")
    }

    pub fn config_digest(&self) -> String {
        sha256_hex(self.config_json().as_bytes())
    }

    /// Online parameters plus the metadata needed to rebuild the agent.
    pub fn to_checkpoint(&self, obs_dim: usize, action_count: usize) -> Checkpoint {
        Checkpoint {
            params: self.network().snapshot(),
            meta: vec![
                ("agent".into(), self.kind().to_string()),
                ("env".into(), self.env.to_string()),
                ("config_digest".into(), self.config_digest()),
                ("obs_dim".into(), obs_dim.to_string()),
                ("action_count".into(), action_count.to_string()),
                ("config".into(), self.config_json()),
            ],
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let meta = |k: &str| {
            ck.meta(k)
                .ok_or_else(|| Error::Format(format!("checkpoint lacks `{k}` metadata")))
        };
        let config: AgentConfig =
            serde_json::from_str(meta("config")?).map_err(|e| Error::Format(format!("checkpoint config: {e}")))?;
        let env: EnvId = meta("env")?.parse()?;
        let parse = |k: &str| -> Result<usize> {
            meta(k)?
                .parse()
                .map_err(|_| Error::Format(format!("checkpoint `{k}` is not an integer")))
        };
        let mut agent = Agent::new(config, env, parse("obs_dim")?, parse("action_count")?, &mut Rng::new(0))?;
        if agent.config_digest() != meta("config_digest")? {
            return Err(Error::Format("config digest mismatch".into()));
        }
        agent.network_mut().load(&ck.params)?;
        if let Inner::Baseline(b) = &mut agent.inner {
            if let Some(t) = b.target.as_mut() {
                t.clone_from(&b.online);
            }
        }
        Ok(agent)
    }
}
