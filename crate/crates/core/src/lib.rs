//! Deep variational Q-networks: a Q-learning agent whose latent space is trained
//! as a variational autoencoder, DQN/Double-DQN baselines, four small benchmark
//! environments, and a pipeline that clusters the learned latent space into
//! option initiation/termination rules.

pub mod agents;
pub mod digest;
pub mod envs;
pub mod error;
pub mod harness;
pub mod nnkit;
pub mod options;
pub mod replay;

pub use error::{Error, Result};
