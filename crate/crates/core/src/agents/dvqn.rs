//! The variational Q-network: encoder to a diagonal Gaussian latent, with a
//! decoder and a Q-head both reading the reparameterized sample.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::config::AgentConfig;
use super::normalize::ObsScaler;
use super::q_target::bootstrap_target;
use crate::error::{Error, Result};
use crate::nnkit::{argmax, Activation, DenseLayer, Mlp, Network, Optimizer, ParamTensor, Rng, Tape, Var};
use crate::replay::ReplayBuffer;

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianLatent {
    pub mu: Vec<f64>,
    pub logvar: Vec<f64>,
}

impl GaussianLatent {
    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn sigma(&self) -> Vec<f64> {
        self.logvar.iter().map(|lv| (0.5 * lv).exp()).collect()
    }
}

/// `z = mu + exp(logvar / 2) * eps`; `None` means `eps = 0`, i.e. `z = mu`.
pub fn sample_latent(g: &GaussianLatent, eps: Option<&[f64]>) -> Result<Vec<f64>> {
    match eps {
        None => Ok(g.mu.clone()),
        Some(e) if e.len() != g.dim() => Err(Error::Shape(format!(
            "noise length {} for latent dimension {}",
            e.len(),
            g.dim()
        ))),
        Some(e) => Ok(g
            .mu
            .iter()
            .zip(&g.logvar)
            .zip(e)
            .map(|((m, lv), e)| m + (0.5 * lv).exp() * e)
            .collect()),
    }
}

/// `KL(N(mu, exp(logvar)) || N(0, I))` in closed form.
pub fn kl_divergence(g: &GaussianLatent) -> f64 {
    g.mu
        .iter()
        .zip(&g.logvar)
        .map(|(m, lv)| -0.5 * (1.0 + lv - m * m - lv.exp()))
        .sum()
}

/// Reconstruction error and KL for one observation.
pub fn vae_loss(s: &[f64], s_hat: &[f64], g: &GaussianLatent) -> Result<(f64, f64)> {
    Ok((crate::nnkit::mse(s, s_hat)?, kl_divergence(g)))
}

/// Per-update loss terms of the joint objective.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub recon: f64,
    pub kl: f64,
    pub q: f64,
    pub total: f64,
    pub c1: f64,
    pub c2: f64,
}

impl LossBreakdown {
    pub fn is_finite(&self) -> bool {
        [self.recon, self.kl, self.q, self.total].iter().all(|v| v.is_finite())
    }
}

/// `total = c1 * (recon + kl) + c2 * q`.
pub fn total_loss(recon: f64, kl: f64, q: f64, c1: f64, c2: f64) -> LossBreakdown {
    LossBreakdown {
        recon,
        kl,
        q,
        total: c1 * (recon + kl) + c2 * q,
        c1,
        c2,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActMode {
    /// Sample `eps ~ N(0, I)`; the only exploration the agent uses.
    Stochastic,
    /// `eps = 0`.
    Deterministic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DvqnModel {
    pub encoder: Mlp,
    pub mu_head: DenseLayer,
    pub logvar_head: DenseLayer,
    pub decoder: Mlp,
    pub q_head: Mlp,
}

/// Tape handles for one batched forward pass.
#[derive(Clone, Copy, Debug)]
pub struct DvqnTrace {
    pub mu: Var,
    pub logvar: Var,
    pub z: Var,
    pub reconstruction: Var,
    pub q: Var,
}

impl DvqnModel {
    pub fn new(obs_dim: usize, action_count: usize, cfg: &AgentConfig, rng: &mut Rng) -> Result<Self> {
        let act = cfg.activation;
        let d = cfg.latent_dim;
        let h = cfg.intermediate_dim;
        Ok(DvqnModel {
            encoder: Mlp::init("encoder", &[obs_dim, cfg.feature_dim, h], act, act, rng)?,
            mu_head: DenseLayer::glorot("mu", h, d, Activation::Identity, rng),
            logvar_head: DenseLayer::glorot("logvar", h, d, Activation::Identity, rng),
            decoder: Mlp::init("decoder", &[d, cfg.head_hidden, obs_dim], act, Activation::Identity, rng)?,
            q_head: Mlp::init("q", &[d, cfg.head_hidden, action_count], act, Activation::Identity, rng)?,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.encoder.inputs()
    }

    pub fn latent_dim(&self) -> usize {
        self.mu_head.outputs()
    }

    pub fn action_count(&self) -> usize {
        self.q_head.outputs()
    }

    pub fn encode(&self, s: &[f64]) -> Result<GaussianLatent> {
        let h = self.encoder.forward(s)?;
        Ok(GaussianLatent {
            mu: self.mu_head.forward(&h)?,
            logvar: self.logvar_head.forward(&h)?,
        })
    }

    pub fn decode(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.decoder.forward(z)
    }

    pub fn q_values(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.q_head.forward(z)
    }

    /// Greedy action on the Q-values of a latent sample; ties go to the lowest index.
    pub fn act(&self, s: &[f64], mode: ActMode, rng: &mut Rng) -> Result<usize> {
        let g = self.encode(s)?;
        let z = match mode {
            ActMode::Deterministic => sample_latent(&g, None)?,
            ActMode::Stochastic => {
                let eps: Vec<f64> = (0..g.dim()).map(|_| rng.normal()).collect();
                sample_latent(&g, Some(&eps))?
            }
        };
        Ok(argmax(&self.q_values(&z)?))
    }

    /// Means of the latent for a batch of inputs.
    pub fn encode_mean_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let h = self.encoder.forward_batch(x)?;
        self.mu_head.forward_batch(h.view())
    }

    /// Q-values at the latent mean (no sampling).
    pub fn q_at_mean_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let mu = self.encode_mean_batch(x)?;
        self.q_head.forward_batch(mu.view())
    }

    /// Records the full network on `tape` with latent noise `eps` (`[batch x d]`).
    pub fn record(&self, tape: &mut Tape, x: Var, eps: Array2<f64>) -> DvqnTrace {
        let h = self.encoder.record(tape, x);
        let mu = self.mu_head.record(tape, h);
        let logvar = self.logvar_head.record(tape, h);
        let z = tape.reparameterize(mu, logvar, eps);
        let reconstruction = self.decoder.record(tape, z);
        let q = self.q_head.record(tape, z);
        DvqnTrace {
            mu,
            logvar,
            z,
            reconstruction,
            q,
        }
    }
}

impl Network for DvqnModel {
    fn params(&self) -> Vec<&ParamTensor> {
        let mut v: Vec<&ParamTensor> = self.encoder.params().collect();
        v.extend(self.mu_head.params());
        v.extend(self.logvar_head.params());
        v.extend(self.decoder.params());
        v.extend(self.q_head.params());
        v
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut v: Vec<&mut ParamTensor> = self.encoder.params_mut().collect();
        v.extend(self.mu_head.params_mut());
        v.extend(self.logvar_head.params_mut());
        v.extend(self.decoder.params_mut());
        v.extend(self.q_head.params_mut());
        v
    }
}

/// A scaled mini-batch ready for the joint loss.
#[derive(Clone, Debug)]
pub struct DvqnBatch {
    pub states: Array2<f64>,
    pub actions: Vec<usize>,
    pub targets: Array2<f64>,
    pub eps: Array2<f64>,
}

/// Q-learning targets `r + gamma * Q(z', argmax Q(z', .))` with `z'` the latent
/// mean of `s'`, selection and evaluation both by the current parameters.
pub fn dvqn_targets(
    model: &DvqnModel,
    next_states: ArrayView2<'_, f64>,
    rewards: &[f64],
    dones: &[bool],
    gamma: f64,
) -> Result<Vec<f64>> {
    let q_next = model.q_at_mean_batch(next_states)?;
    Ok(q_next
        .rows()
        .into_iter()
        .zip(rewards.iter().zip(dones))
        .map(|(row, (&r, &done))| {
            let q = row.as_slice().expect("standard layout");
            bootstrap_target(r, gamma, done, q, q)
        })
        .collect())
}

/// Records the joint objective for `batch`; returns the total and its parts.
pub fn record_dvqn_loss(
    model: &DvqnModel,
    tape: &mut Tape,
    batch: &DvqnBatch,
    c1: f64,
    c2: f64,
) -> (Var, [Var; 3]) {
    let x = tape.constant("states", batch.states.clone());
    let trace = model.record(tape, x, batch.eps.clone());
    let recon = tape.mse(trace.reconstruction, x);
    let kl = tape.kl_standard_normal(trace.mu, trace.logvar);
    let q_taken = tape.gather(trace.q, batch.actions.clone());
    let y = tape.constant("q_targets", batch.targets.clone());
    let q = tape.mse(q_taken, y);
    let total = tape.weighted_sum(&[(recon, c1), (kl, c1), (q, c2)]);
    (total, [recon, kl, q])
}

/// Samples a batch, computes targets and draws latent noise.
pub fn build_dvqn_batch(
    model: &DvqnModel,
    buffer: &ReplayBuffer,
    cfg: &AgentConfig,
    scaler: &ObsScaler,
    rng: &mut Rng,
) -> Result<DvqnBatch> {
    let sample = buffer.sample(cfg.batch_size, rng)?;
    let dim = model.obs_dim();
    let states = scaler.batch(sample.iter().map(|t| t.state.as_slice()), dim);
    let next = scaler.batch(sample.iter().map(|t| t.next_state.as_slice()), dim);
    let rewards: Vec<f64> = sample.iter().map(|t| t.reward).collect();
    let dones: Vec<bool> = sample.iter().map(|t| t.done).collect();
    let targets = dvqn_targets(model, next.view(), &rewards, &dones, cfg.gamma)?;
    let n = sample.len();
    let eps = Array2::from_shape_simple_fn((n, model.latent_dim()), || rng.normal());
    Ok(DvqnBatch {
        states,
        actions: sample.iter().map(|t| t.action).collect(),
        targets: Array2::from_shape_vec((n, 1), targets).expect("one target per row"),
        eps,
    })
}

/// One joint update: a single backward pass over the combined loss and one
/// optimizer step over every parameter.
pub fn train_step_dvqn(
    model: &mut DvqnModel,
    buffer: &ReplayBuffer,
    optimizer: &mut Optimizer,
    cfg: &AgentConfig,
    scaler: &ObsScaler,
    rng: &mut Rng,
) -> Result<LossBreakdown> {
    let batch = build_dvqn_batch(model, buffer, cfg, scaler, rng)?;
    let mut tape = Tape::new();
    let (total, [recon, kl, q]) = record_dvqn_loss(model, &mut tape, &batch, cfg.c1, cfg.c2);
    let breakdown = LossBreakdown {
        recon: tape.scalar(recon),
        kl: tape.scalar(kl),
        q: tape.scalar(q),
        total: tape.scalar(total),
        c1: cfg.c1,
        c2: cfg.c2,
    };
    if !breakdown.is_finite() {
        return Err(Error::NonFinite {
            node: "dvqn.total_loss".into(),
        });
    }
    let grads = tape.backward(total)?;
    optimizer.step(model.params_mut(), &grads)?;
    Ok(breakdown)
}
