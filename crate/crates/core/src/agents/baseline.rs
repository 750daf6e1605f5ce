//! DQN and Double-DQN: a ReLU network mapping observations straight to Q-values,
//! epsilon-greedy exploration, Huber loss.

use ndarray::Array2;

use super::config::{AgentConfig, AgentKind};
use super::normalize::ObsScaler;
use super::q_target::bootstrap_target;
use crate::error::{Error, Result};
use crate::nnkit::{argmax, Activation, Mlp, Optimizer, Rng, Tape};
use crate::replay::ReplayBuffer;

pub fn baseline_network(obs_dim: usize, action_count: usize, cfg: &AgentConfig, rng: &mut Rng) -> Result<Mlp> {
    let mut sizes = vec![obs_dim];
    sizes.extend(&cfg.hidden);
    sizes.push(action_count);
    Mlp::init("qnet", &sizes, cfg.activation, Activation::Identity, rng)
}

/// With probability `epsilon` a uniform random action, otherwise greedy on `q`.
pub fn epsilon_greedy(q: &[f64], epsilon: f64, rng: &mut Rng) -> usize {
    if rng.uniform() < epsilon {
        rng.below(q.len())
    } else {
        argmax(q)
    }
}

/// `act_baseline`: epsilon-greedy on `Q(s)`.
pub fn act_baseline(net: &Mlp, s: &[f64], epsilon: f64, rng: &mut Rng) -> Result<usize> {
    Ok(epsilon_greedy(&net.forward(s)?, epsilon, rng))
}

/// One Huber-loss Adam update. With `target = None` the bootstrap uses the online
/// network's max (DQN); with a target network the online argmax is evaluated by
/// the target (Double DQN).
pub fn train_step_q(
    online: &mut Mlp,
    target: Option<&Mlp>,
    buffer: &ReplayBuffer,
    optimizer: &mut Optimizer,
    cfg: &AgentConfig,
    scaler: &ObsScaler,
    rng: &mut Rng,
) -> Result<f64> {
    let sample = buffer.sample(cfg.batch_size, rng)?;
    let dim = online.inputs();
    let states = scaler.batch(sample.iter().map(|t| t.state.as_slice()), dim);
    let next = scaler.batch(sample.iter().map(|t| t.next_state.as_slice()), dim);
    let q_online_next = online.forward_batch(next.view())?;
    let q_eval_next = match target {
        Some(t) => t.forward_batch(next.view())?,
        None => q_online_next.clone(),
    };
    let targets: Vec<f64> = sample
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let sel = q_online_next.row(i);
            let ev = q_eval_next.row(i);
            bootstrap_target(
                t.reward,
                cfg.gamma,
                t.done,
                sel.as_slice().expect("standard layout"),
                ev.as_slice().expect("standard layout"),
            )
        })
        .collect();

    let mut tape = Tape::new();
    let x = tape.constant("states", states);
    let q = online.record(&mut tape, x);
    let taken = tape.gather(q, sample.iter().map(|t| t.action).collect());
    let y = tape.constant("q_targets", Array2::from_shape_vec((targets.len(), 1), targets).expect("column"));
    let loss = tape.huber(taken, y, cfg.huber_delta);
    let value = tape.scalar(loss);
    if !value.is_finite() {
        return Err(Error::NonFinite {
            node: "q.huber_loss".into(),
        });
    }
    let grads = tape.backward(loss)?;
    optimizer.step(online.params_mut(), &grads)?;
    Ok(value)
}

/// Online network, optional target copy, and the exploration/sync counters.
#[derive(Clone, Debug)]
pub struct BaselineAgent {
    pub online: Mlp,
    pub target: Option<Mlp>,
    optimizer: Optimizer,
    env_steps: u64,
}

impl BaselineAgent {
    pub fn new(obs_dim: usize, action_count: usize, cfg: &AgentConfig, rng: &mut Rng) -> Result<Self> {
        let online = baseline_network(obs_dim, action_count, cfg, rng)?;
        let target = (cfg.kind == AgentKind::Ddqn).then(|| online.clone());
        Ok(BaselineAgent {
            online,
            target,
            optimizer: Optimizer::new(cfg.optimizer, cfg.learning_rate),
            env_steps: 0,
        })
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    pub fn epsilon(&self, cfg: &AgentConfig) -> f64 {
        cfg.epsilon.map_or(0.0, |e| e.value(self.env_steps))
    }

    /// Advances the frame counter; copies online into target every
    /// `target_sync_frames` frames.
    pub fn on_env_step(&mut self, cfg: &AgentConfig) {
        self.env_steps += 1;
        if let (Some(target), Some(every)) = (self.target.as_mut(), cfg.target_sync_frames) {
            if self.env_steps.is_multiple_of(every) {
                target.clone_from(&self.online);
            }
        }
    }

    pub fn train_step(&mut self, buffer: &ReplayBuffer, cfg: &AgentConfig, scaler: &ObsScaler, rng: &mut Rng) -> Result<f64> {
        train_step_q(&mut self.online, self.target.as_ref(), buffer, &mut self.optimizer, cfg, scaler, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnkit::{finite_difference_check, Network, ParamTensor};
    use crate::replay::Transition;

    fn buffer(n: usize) -> ReplayBuffer {
        let mut rng = Rng::new(77);
        let mut b = ReplayBuffer::new(500).unwrap();
        for i in 0..n {
            b.push(Transition {
                state: (0..4).map(|_| rng.uniform_range(-1.0, 1.0)).collect(),
                action: rng.below(2),
                reward: if i % 7 == 0 { -1.0 } else { 1.0 },
                next_state: (0..4).map(|_| rng.uniform_range(-1.0, 1.0)).collect(),
                done: i % 7 == 0,
            });
        }
        b
    }

    #[test]
    fn pure_random_regime_is_uniform() {
        let mut rng = Rng::new(3);
        let mut counts = [0usize; 3];
        for _ in 0..10_000 {
            counts[epsilon_greedy(&[0.0, 5.0, 1.0], 1.0, &mut rng)] += 1;
        }
        for c in counts {
            let f = c as f64 / 10_000.0;
            assert!((f - 1.0 / 3.0).abs() / (1.0 / 3.0) < 0.05, "{counts:?}");
        }
    }

    #[test]
    fn greedy_regime() {
        let mut rng = Rng::new(3);
        for _ in 0..100 {
            assert_eq!(epsilon_greedy(&[0.0, 5.0, 1.0], 0.0, &mut rng), 1);
        }
    }

    #[test]
    fn ddqn_with_synced_target_matches_dqn() {
        let cfg = AgentConfig::defaults(AgentKind::Dqn);
        let net = baseline_network(4, 2, &cfg, &mut Rng::new(1)).unwrap();
        let b = buffer(100);
        let mut dqn = net.clone();
        let mut ddqn = net.clone();
        let target = net.clone();
        let mut o1 = Optimizer::new(cfg.optimizer, cfg.learning_rate);
        let mut o2 = Optimizer::new(cfg.optimizer, cfg.learning_rate);
        let s = ObsScaler::identity();
        let l1 = train_step_q(&mut dqn, None, &b, &mut o1, &cfg, &s, &mut Rng::new(9)).unwrap();
        let l2 = train_step_q(&mut ddqn, Some(&target), &b, &mut o2, &cfg, &s, &mut Rng::new(9)).unwrap();
        assert_eq!(l1.to_bits(), l2.to_bits());
        assert_eq!(dqn, ddqn);
    }

    #[test]
    fn target_sync_every_32k_frames() {
        let cfg = AgentConfig::defaults(AgentKind::Ddqn);
        let mut agent = BaselineAgent::new(4, 2, &cfg, &mut Rng::new(0)).unwrap();
        let b = buffer(100);
        let s = ObsScaler::identity();
        let mut rng = Rng::new(1);
        for frame in 1..=32_000u64 {
            if frame % 4_000 == 0 {
                agent.train_step(&b, &cfg, &s, &mut rng).unwrap();
            }
            if frame == 31_999 {
                assert_ne!(agent.target.as_ref().unwrap(), &agent.online);
            }
            agent.on_env_step(&cfg);
        }
        assert_eq!(agent.env_steps(), 32_000);
        let target = agent.target.as_ref().unwrap();
        for (a, b) in target.params().zip(agent.online.params()) {
            assert!(a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn huber_q_gradients_match_finite_differences() {
        let cfg = AgentConfig {
            hidden: vec![5, 4],
            ..AgentConfig::defaults(AgentKind::Dqn)
        };
        let mut net = baseline_network(4, 2, &cfg, &mut Rng::new(2)).unwrap();
        let b = buffer(40);
        let sample: Vec<Transition> = b.sample(16, &mut Rng::new(3)).unwrap().into_iter().cloned().collect();
        let states = ObsScaler::identity().batch(sample.iter().map(|t| t.state.as_slice()), 4);
        let targets = Array2::from_shape_fn((16, 1), |(i, _)| sample[i].reward * 0.5);
        let actions: Vec<usize> = sample.iter().map(|t| t.action).collect();
        let loss_of = |net: &Mlp| {
            let mut t = Tape::new();
            let x = t.constant("s", states.clone());
            let q = net.record(&mut t, x);
            let g = t.gather(q, actions.clone());
            let y = t.constant("y", targets.clone());
            let l = t.huber(g, y, 1.0);
            (t, l)
        };
        let (tape, l) = loss_of(&net);
        let grads = tape.backward(l).unwrap();
        let mut params: Vec<ParamTensor> = net.snapshot();
        let err = finite_difference_check(
            |p| {
                net.load(p)?;
                let (t, l) = loss_of(&net);
                Ok(t.scalar(l))
            },
            &mut params,
            &grads,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-4, "{err}");
    }
}
