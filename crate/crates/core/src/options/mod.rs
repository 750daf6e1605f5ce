//! Latent-space analysis: embedding collection, clustering, projection and
//! option initiation/termination specs derived from the clusters.

mod kmeans;
mod pca;
mod spec;

use serde::{Deserialize, Serialize};

pub use kmeans::{choose_k, inertia, kmeans, kmeans_with, nearest, silhouette, sq_dist, ClusterModel, KmeansParams};
pub use pca::{pca_project, symmetric_eigen, Projection};
pub use spec::{
    assign_option, derive_options, label_purity, replay_terminations, OptionExport, OptionSpec, Termination,
    TerminationReason, EXPORT_FORMAT_VERSION,
};

use crate::agents::Agent;
use crate::envs::{make_env, EnvId};
use crate::error::{Error, Result};
use crate::nnkit::Rng;

/// One visited state: its latent mean, Q-values at the mean, and the reward and
/// done flag of the step taken from it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub mu: Vec<f64>,
    pub q: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub episode: usize,
    pub step: usize,
    pub env_label: Option<u8>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub env: EnvId,
    pub checkpoint_digest: Option<String>,
    pub seed: u64,
    pub episodes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentDataset {
    pub records: Vec<EmbeddingRecord>,
    pub latent_dim: usize,
    pub meta: DatasetMeta,
}

impl LatentDataset {
    pub fn points(&self) -> Vec<Vec<f64>> {
        self.records.iter().map(|r| r.mu.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records grouped by episode, each in step order.
    pub fn episodes(&self) -> Vec<&[EmbeddingRecord]> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.records.len() {
            if i == self.records.len() || self.records[i].episode != self.records[start].episode {
                out.push(&self.records[start..i]);
                start = i;
            }
        }
        out
    }
}

/// Rolls out `episodes` deterministic (latent-mean) episodes and records every
/// visited state. The environment is built from `seed`.
pub fn collect_embeddings(agent: &Agent, env_id: EnvId, episodes: usize, seed: u64) -> Result<LatentDataset> {
    if agent.dvqn_model().is_none() {
        return Err(Error::Usage(format!(
            "{} checkpoints have no latent space; options need a dvqn agent",
            agent.kind()
        )));
    }
    if agent.env() != env_id {
        return Err(Error::Usage(format!(
            "agent was trained on {} but embeddings were requested for {env_id}",
            agent.env()
        )));
    }
    let mut env = make_env(env_id, seed);
    let model = agent.dvqn_model().expect("checked above");
    let mut rng = Rng::new(seed).derive("collect");
    let mut records = Vec::new();
    for episode in 0..episodes {
        let mut obs = env.reset();
        let mut step = 0;
        loop {
            let label = env.label();
            let latent = agent.encode(&obs)?;
            let q = model.q_values(&latent.mu)?;
            let action = agent.act_eval(&obs, &mut rng)?;
            let s = env.step(action)?;
            records.push(EmbeddingRecord {
                mu: latent.mu,
                q,
                reward: s.reward,
                done: s.done,
                episode,
                step,
                env_label: label,
            });
            step += 1;
            obs = s.observation;
            if s.done {
                break;
            }
        }
    }
    Ok(LatentDataset {
        records,
        latent_dim: agent.config().latent_dim,
        meta: DatasetMeta {
            env: env_id,
            checkpoint_digest: None,
            seed,
            episodes,
        },
    })
}
