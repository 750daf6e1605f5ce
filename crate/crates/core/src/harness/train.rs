use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::metrics::{self, MetricsRow, RowWriter};
use crate::agents::{Agent, UpdateLoss, UpdateSchedule};
use crate::envs::{make_env, EnvId, Environment};
use crate::error::{Error, Result};
use crate::nnkit::{Checkpoint, Rng};
use crate::replay::{ReplayBuffer, Transition};

/// Episodes averaged for the headline "final performance" numbers.
pub const FINAL_WINDOW: usize = 100;

/// Callback invoked after every finished episode.
pub type Observer<'a> = &'a (dyn Fn(&MetricsRow) + Sync);

/// Independent random streams of one trial.
pub struct TrialStreams {
    pub env_seed: u64,
    pub init: Rng,
    pub act: Rng,
    pub train: Rng,
}

impl TrialStreams {
    pub fn new(base_seed: u64, trial: usize) -> Self {
        let root = Rng::new(base_seed).derive_indexed("trial", trial as u64);
        TrialStreams {
            env_seed: root.derive("env").next_u64(),
            init: root.derive("init"),
            act: root.derive("act"),
            train: root.derive("train"),
        }
    }
}

/// Result of training one trial in memory.
#[derive(Debug)]
pub struct TrialOutcome {
    pub trial: usize,
    pub rows: Vec<MetricsRow>,
    pub agent: Agent,
    pub obs_dim: usize,
    pub action_count: usize,
    /// Set when a numerical failure ended the trial early.
    pub aborted: Option<String>,
}

impl TrialOutcome {
    pub fn returns(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.episode_return).collect()
    }

    pub fn checkpoint(&self) -> Checkpoint {
        self.agent.to_checkpoint(self.obs_dim, self.action_count)
    }
}

#[derive(Default)]
struct LossMeans {
    n: usize,
    recon: f64,
    kl: f64,
    q: f64,
    total: f64,
}

impl LossMeans {
    fn add(&mut self, l: &UpdateLoss) {
        self.n += 1;
        match l {
            UpdateLoss::Dvqn(b) => {
                self.recon += b.recon;
                self.kl += b.kl;
                self.q += b.q;
                self.total += b.total;
            }
            UpdateLoss::Q(q) => {
                self.q += q;
                self.total += q;
            }
        }
    }

    fn fill(&self, row: &mut MetricsRow, dvqn: bool) {
        if self.n == 0 {
            return;
        }
        let n = self.n as f64;
        if dvqn {
            row.recon = Some(self.recon / n);
            row.kl = Some(self.kl / n);
        }
        row.q_loss = Some(self.q / n);
        row.total_loss = Some(self.total / n);
    }
}

/// Trains one trial; rows go to `sink` as they are produced.
pub fn train_trial(
    cfg: &ExperimentConfig,
    trial: usize,
    mut sink: Option<&mut RowWriter>,
    observer: Option<Observer<'_>>,
) -> Result<TrialOutcome> {
    cfg.validate()?;
    let mut streams = TrialStreams::new(cfg.seed, trial);
    let mut env = make_env(cfg.env, streams.env_seed);
    let (obs_dim, action_count) = (env.obs_dim(), env.action_count());
    let mut agent = Agent::new(cfg.agent.clone(), cfg.env, obs_dim, action_count, &mut streams.init)?;
    let mut buffer = ReplayBuffer::new(cfg.agent.replay_capacity)?;
    let batch = cfg.agent.batch_size;
    let dvqn = agent.dvqn_model().is_some();
    let mut rows = Vec::with_capacity(cfg.episodes);
    let mut aborted = None;

    for episode in 0..cfg.episodes {
        let mut obs = env.reset();
        let mut ret = 0.0;
        let mut steps = 0;
        let mut losses = LossMeans::default();
        let mut failure = None;
        let mut update = |agent: &mut Agent, buffer: &ReplayBuffer, losses: &mut LossMeans| -> Result<bool> {
            match agent.train_step(buffer, &mut streams.train) {
                Ok(l) => {
                    losses.add(&l);
                    Ok(true)
                }
                Err(e) if e.is_numerical() => {
                    failure = Some(e.to_string());
                    Ok(false)
                }
                Err(e) => Err(e),
            }
        };
        loop {
            let action = agent.act_train(&obs, &mut streams.act)?;
            let step = env.step(action)?;
            ret += step.reward;
            steps += 1;
            buffer.push(Transition {
                state: std::mem::take(&mut obs),
                action,
                reward: step.reward,
                next_state: step.observation.clone(),
                done: step.done,
            });
            agent.on_env_step();
            obs = step.observation;
            if cfg.agent.update_schedule == UpdateSchedule::PerStep
                && buffer.len() >= batch
                && !update(&mut agent, &buffer, &mut losses)?
            {
                break;
            }
            if step.done {
                break;
            }
        }
        if cfg.agent.update_schedule == UpdateSchedule::PerEpisode && buffer.len() >= batch {
            for _ in 0..cfg.agent.updates_per_episode {
                if !update(&mut agent, &buffer, &mut losses)? {
                    break;
                }
            }
        }
        let mut row = MetricsRow {
            trial,
            episode,
            episode_return: ret,
            steps,
            recon: None,
            kl: None,
            q_loss: None,
            total_loss: None,
            epsilon: agent.epsilon(),
        };
        if failure.is_some() {
            row.recon = dvqn.then_some(f64::NAN);
            row.kl = dvqn.then_some(f64::NAN);
            row.q_loss = Some(f64::NAN);
            row.total_loss = Some(f64::NAN);
        } else {
            losses.fill(&mut row, dvqn);
        }
        if let Some(w) = sink.as_deref_mut() {
            w.write(&row)?;
        }
        if let Some(f) = observer {
            f(&row);
        }
        rows.push(row);
        if let Some(msg) = failure {
            aborted = Some(format!("episode {episode}: {msg}"));
            break;
        }
    }
    Ok(TrialOutcome {
        trial,
        rows,
        agent,
        obs_dim,
        action_count,
        aborted,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial: usize,
    pub episodes_completed: usize,
    pub final_mean_return: f64,
    pub final_mean_steps: f64,
    pub aborted: Option<String>,
    pub checkpoint: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub env: EnvId,
    pub agent: String,
    pub episodes: usize,
    pub trials: usize,
    pub seed: u64,
    pub fidelity_mode: bool,
    pub config_digest: String,
    pub final_window: usize,
    /// Mean and sample standard deviation across trials of the final-window return.
    pub final_return_mean: f64,
    pub final_return_std: f64,
    pub wall_clock_secs: f64,
    pub trial_summaries: Vec<TrialSummary>,
}

impl RunSummary {
    pub fn aborted_trials(&self) -> Vec<usize> {
        self.trial_summaries
            .iter()
            .filter(|t| t.aborted.is_some())
            .map(|t| t.trial)
            .collect()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }
}

/// Mean of the last `window` values (all values if there are fewer).
pub fn final_window_mean(values: &[f64], window: usize) -> f64 {
    let tail = &values[values.len().saturating_sub(window)..];
    if tail.is_empty() {
        return f64::NAN;
    }
    tail.iter().sum::<f64>() / tail.len() as f64
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

pub fn checkpoint_path(out_dir: &Path, trial: usize) -> PathBuf {
    out_dir.join(format!("trial_{trial}.ckpt"))
}

fn part_path(out_dir: &Path, trial: usize) -> PathBuf {
    out_dir.join(format!("metrics.trial_{trial}.part"))
}

fn run_one_to_disk(cfg: &ExperimentConfig, trial: usize, observer: Option<Observer<'_>>) -> Result<TrialSummary> {
    let part = part_path(&cfg.out_dir, trial);
    let mut writer = RowWriter::create(&part)?;
    let outcome = train_trial(cfg, trial, Some(&mut writer), observer)?;
    let ck_path = checkpoint_path(&cfg.out_dir, trial);
    outcome.checkpoint().save(&ck_path)?;
    let returns = outcome.returns();
    let steps: Vec<f64> = outcome.rows.iter().map(|r| r.steps as f64).collect();
    Ok(TrialSummary {
        trial,
        episodes_completed: outcome.rows.len(),
        final_mean_return: final_window_mean(&returns, FINAL_WINDOW),
        final_mean_steps: final_window_mean(&steps, FINAL_WINDOW),
        aborted: outcome.aborted,
        checkpoint: ck_path,
    })
}

/// Runs every trial of every experiment. Trials are independent jobs spread over
/// `parallelism` worker threads; outputs depend only on the configs.
pub fn run_matrix(
    configs: &[ExperimentConfig],
    parallelism: usize,
    observer: Option<Observer<'_>>,
) -> Result<Vec<RunSummary>> {
    for c in configs {
        c.validate()?;
        std::fs::create_dir_all(&c.out_dir).map_err(|e| Error::io(&c.out_dir, e))?;
    }
    let jobs: Vec<(usize, usize)> = configs
        .iter()
        .enumerate()
        .flat_map(|(i, c)| (0..c.trials).map(move |t| (i, t)))
        .collect();
    let started = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<(usize, Result<TrialSummary>, f64)> = pool.install(|| {
        jobs.par_iter()
            .map(|&(i, t)| {
                let r = run_one_to_disk(&configs[i], t, observer);
                (i, r, started.elapsed().as_secs_f64())
            })
            .collect()
    });

    let mut per_config: Vec<Vec<TrialSummary>> = vec![Vec::new(); configs.len()];
    let mut wall = vec![0.0f64; configs.len()];
    for (i, r, t) in results {
        per_config[i].push(r?);
        wall[i] = wall[i].max(t);
    }
    let mut out = Vec::with_capacity(configs.len());
    for (i, (cfg, trials)) in configs.iter().zip(per_config).enumerate() {
        let mut rows = Vec::new();
        for t in 0..cfg.trials {
            let part = part_path(&cfg.out_dir, t);
            rows.extend(metrics::read_part(&part)?);
        }
        metrics::write_csv(&cfg.out_dir.join("metrics.csv"), &rows)?;
        for t in 0..cfg.trials {
            let part = part_path(&cfg.out_dir, t);
            std::fs::remove_file(&part).map_err(|e| Error::io(&part, e))?;
        }
        let finals: Vec<f64> = trials.iter().map(|t| t.final_mean_return).collect();
        let (mean, std) = mean_std(&finals);
        let summary = RunSummary {
            env: cfg.env,
            agent: cfg.agent.kind.to_string(),
            episodes: cfg.episodes,
            trials: cfg.trials,
            seed: cfg.seed,
            fidelity_mode: cfg.fidelity_mode,
            config_digest: cfg.digest(),
            final_window: FINAL_WINDOW,
            final_return_mean: mean,
            final_return_std: std,
            wall_clock_secs: wall[i],
            trial_summaries: trials,
        };
        let path = cfg.out_dir.join("summary.json");
        let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
        std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
        out.push(summary);
    }
    Ok(out)
}

/// Trains all trials of one experiment and writes `metrics.csv`, one checkpoint
/// per trial and `summary.json` under `out_dir`.
pub fn run_training(cfg: &ExperimentConfig, observer: Option<Observer<'_>>) -> Result<RunSummary> {
    run_matrix(std::slice::from_ref(cfg), cfg.parallelism, observer).map(|mut v| v.remove(0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub env: EnvId,
    pub episodes: usize,
    pub returns: Vec<f64>,
    pub steps: Vec<usize>,
    pub mean_return: f64,
    pub std_return: f64,
}

/// Greedy (latent-mean) rollouts of a trained agent.
pub fn evaluate(agent: &Agent, env: &mut dyn Environment, episodes: usize, rng: &mut Rng) -> Result<EvalSummary> {
    if agent.env() != env.id() {
        return Err(Error::Usage(format!(
            "agent was trained on {} but evaluation env is {}",
            agent.env(),
            env.id()
        )));
    }
    let mut returns = Vec::with_capacity(episodes);
    let mut steps = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut obs = env.reset();
        let mut ret = 0.0;
        loop {
            let s = env.step(agent.act_eval(&obs, rng)?)?;
            ret += s.reward;
            obs = s.observation;
            if s.done {
                steps.push(s.steps_elapsed);
                break;
            }
        }
        returns.push(ret);
    }
    let (mean_return, std_return) = mean_std(&returns);
    Ok(EvalSummary {
        env: env.id(),
        episodes,
        returns,
        steps,
        mean_return,
        std_return,
    })
}
