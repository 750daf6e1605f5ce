use super::{check_action, step_after_done, EnvId, Environment, StepResult};
use crate::error::Result;
use crate::nnkit::Rng;

pub const GRAVITY: f64 = 9.8;
pub const CART_MASS: f64 = 1.0;
pub const POLE_MASS: f64 = 0.1;
/// Half the pole length.
pub const POLE_HALF_LENGTH: f64 = 0.5;
pub const FORCE: f64 = 10.0;
pub const TAU: f64 = 0.02;
pub const X_LIMIT: f64 = 2.4;
pub const THETA_LIMIT: f64 = 12.0 * 2.0 * std::f64::consts::PI / 360.0;
pub const MAX_STEPS: usize = 200;
/// Poles within this angle of upright are labelled "center".
pub const CENTER_BAND: f64 = 2.0 * std::f64::consts::PI / 180.0;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CartPoleState {
    pub x: f64,
    pub x_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
}

impl CartPoleState {
    pub fn to_vec(self) -> Vec<f64> {
        vec![self.x, self.x_dot, self.theta, self.theta_dot]
    }

    /// One explicit-Euler step under the given action (0 pushes left, 1 right).
    pub fn integrate(self, action: usize) -> CartPoleState {
        let force = if action == 1 { FORCE } else { -FORCE };
        let total_mass = CART_MASS + POLE_MASS;
        let pole_mass_length = POLE_MASS * POLE_HALF_LENGTH;
        let (sin, cos) = self.theta.sin_cos();
        let temp = (force + pole_mass_length * self.theta_dot * self.theta_dot * sin) / total_mass;
        let theta_acc = (GRAVITY * sin - cos * temp)
            / (POLE_HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * cos * cos / total_mass));
        let x_acc = temp - pole_mass_length * theta_acc * cos / total_mass;
        CartPoleState {
            x: self.x + TAU * self.x_dot,
            x_dot: self.x_dot + TAU * x_acc,
            theta: self.theta + TAU * self.theta_dot,
            theta_dot: self.theta_dot + TAU * theta_acc,
        }
    }

    pub fn failed(&self) -> bool {
        self.x.abs() > X_LIMIT || self.theta.abs() > THETA_LIMIT
    }
}

/// Cart-pole balancing: +1 per surviving step, -1 when the pole or cart leaves
/// its limits, episode capped at 200 steps.
#[derive(Clone, Debug)]
pub struct CartPole {
    state: CartPoleState,
    steps: usize,
    done: bool,
    rng: Rng,
}

impl CartPole {
    pub fn new(seed: u64) -> Self {
        CartPole {
            state: CartPoleState::default(),
            steps: 0,
            done: true,
            rng: Rng::new(seed),
        }
    }

    pub fn state(&self) -> CartPoleState {
        self.state
    }

    /// Starts an episode from an explicit state.
    pub fn reset_to(&mut self, state: CartPoleState) -> Vec<f64> {
        self.state = state;
        self.steps = 0;
        self.done = false;
        state.to_vec()
    }
}

/// Angle bucket: 0 left, 1 center, 2 right.
pub fn angle_label(theta: f64) -> u8 {
    if theta.abs() < CENTER_BAND {
        1
    } else if theta < 0.0 {
        0
    } else {
        2
    }
}

impl Environment for CartPole {
    fn id(&self) -> EnvId {
        EnvId::CartPole
    }

    fn obs_dim(&self) -> usize {
        4
    }

    fn action_count(&self) -> usize {
        2
    }

    fn max_steps(&self) -> usize {
        MAX_STEPS
    }

    fn reset(&mut self) -> Vec<f64> {
        let mut u = || self.rng.uniform_range(-0.05, 0.05);
        let state = CartPoleState {
            x: u(),
            x_dot: u(),
            theta: u(),
            theta_dot: u(),
        };
        self.reset_to(state)
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        if self.done {
            return Err(step_after_done());
        }
        check_action(action, 2)?;
        self.state = self.state.integrate(action);
        self.steps += 1;
        let (reward, done) = if self.state.failed() {
            (-1.0, true)
        } else {
            (1.0, self.steps >= MAX_STEPS)
        };
        self.done = done;
        Ok(StepResult {
            observation: self.state.to_vec(),
            reward,
            done,
            steps_elapsed: self.steps,
        })
    }

    fn label(&self) -> Option<u8> {
        Some(angle_label(self.state.theta))
    }
}
