use std::f64::consts::PI;

use super::{check_action, step_after_done, EnvId, Environment, StepResult};
use crate::error::Result;
use crate::nnkit::Rng;

pub const LINK_LENGTH_1: f64 = 1.0;
pub const LINK_MASS_1: f64 = 1.0;
pub const LINK_MASS_2: f64 = 1.0;
pub const LINK_COM_1: f64 = 0.5;
pub const LINK_COM_2: f64 = 0.5;
pub const LINK_MOI: f64 = 1.0;
pub const GRAVITY: f64 = 9.8;
pub const DT: f64 = 0.2;
pub const MAX_VEL_1: f64 = 4.0 * PI;
pub const MAX_VEL_2: f64 = 9.0 * PI;
pub const MAX_STEPS: usize = 500;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AcrobotState {
    pub theta1: f64,
    pub theta2: f64,
    pub omega1: f64,
    pub omega2: f64,
}

impl AcrobotState {
    pub fn observation(&self) -> Vec<f64> {
        vec![
            self.theta1.cos(),
            self.theta1.sin(),
            self.theta2.cos(),
            self.theta2.sin(),
            self.omega1,
            self.omega2,
        ]
    }

    /// Free end above the bar: `-cos(t1) - cos(t1 + t2) > 1`.
    pub fn reached_goal(&self) -> bool {
        -self.theta1.cos() - (self.theta1 + self.theta2).cos() > 1.0
    }

    /// One RK4 step of length `DT` with constant torque, then angle wrapping and
    /// velocity clamping.
    pub fn integrate(self, torque: f64) -> AcrobotState {
        let y0 = [self.theta1, self.theta2, self.omega1, self.omega2];
        let k1 = derivatives(y0, torque);
        let k2 = derivatives(axpy(y0, DT / 2.0, k1), torque);
        let k3 = derivatives(axpy(y0, DT / 2.0, k2), torque);
        let k4 = derivatives(axpy(y0, DT, k3), torque);
        let mut y = [0.0; 4];
        for i in 0..4 {
            y[i] = y0[i] + DT / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        AcrobotState {
            theta1: wrap(y[0]),
            theta2: wrap(y[1]),
            omega1: y[2].clamp(-MAX_VEL_1, MAX_VEL_1),
            omega2: y[3].clamp(-MAX_VEL_2, MAX_VEL_2),
        }
    }
}

fn axpy(y: [f64; 4], a: f64, k: [f64; 4]) -> [f64; 4] {
    [y[0] + a * k[0], y[1] + a * k[1], y[2] + a * k[2], y[3] + a * k[3]]
}

/// Time derivative of `[theta1, theta2, omega1, omega2]` for the underactuated
/// two-link arm with torque applied at the middle joint.
fn derivatives(s: [f64; 4], torque: f64) -> [f64; 4] {
    let (m1, m2) = (LINK_MASS_1, LINK_MASS_2);
    let l1 = LINK_LENGTH_1;
    let (lc1, lc2) = (LINK_COM_1, LINK_COM_2);
    let (i1, i2) = (LINK_MOI, LINK_MOI);
    let g = GRAVITY;
    let [theta1, theta2, dtheta1, dtheta2] = s;

    let d1 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * theta2.cos()) + i1 + i2;
    let d2 = m2 * (lc2 * lc2 + l1 * lc2 * theta2.cos()) + i2;
    let phi2 = m2 * lc2 * g * (theta1 + theta2 - PI / 2.0).cos();
    let phi1 = -m2 * l1 * lc2 * dtheta2 * dtheta2 * theta2.sin()
        - 2.0 * m2 * l1 * lc2 * dtheta2 * dtheta1 * theta2.sin()
        + (m1 * lc1 + m2 * l1) * g * (theta1 - PI / 2.0).cos()
        + phi2;
    let ddtheta2 = (torque + d2 / d1 * phi1 - m2 * l1 * lc2 * dtheta1 * dtheta1 * theta2.sin() - phi2)
        / (m2 * lc2 * lc2 + i2 - d2 * d2 / d1);
    let ddtheta1 = -(d2 * ddtheta2 + phi1) / d1;
    [dtheta1, dtheta2, ddtheta1, ddtheta2]
}

fn wrap(mut x: f64) -> f64 {
    let span = 2.0 * PI;
    while x > PI {
        x -= span;
    }
    while x < -PI {
        x += span;
    }
    x
}

/// Swing-up task: -1 per step until the tip clears the bar (reward 0 on that
/// step), episode capped at 500 steps.
#[derive(Clone, Debug)]
pub struct Acrobot {
    state: AcrobotState,
    steps: usize,
    done: bool,
    rng: Rng,
}

impl Acrobot {
    pub fn new(seed: u64) -> Self {
        Acrobot {
            state: AcrobotState::default(),
            steps: 0,
            done: true,
            rng: Rng::new(seed),
        }
    }

    pub fn state(&self) -> AcrobotState {
        self.state
    }

    pub fn reset_to(&mut self, state: AcrobotState) -> Vec<f64> {
        self.state = state;
        self.steps = 0;
        self.done = false;
        state.observation()
    }
}

impl Environment for Acrobot {
    fn id(&self) -> EnvId {
        EnvId::Acrobot
    }

    fn obs_dim(&self) -> usize {
        6
    }

    fn action_count(&self) -> usize {
        3
    }

    fn max_steps(&self) -> usize {
        MAX_STEPS
    }

    fn reset(&mut self) -> Vec<f64> {
        let mut u = || self.rng.uniform_range(-0.1, 0.1);
        let state = AcrobotState {
            theta1: u(),
            theta2: u(),
            omega1: u(),
            omega2: u(),
        };
        self.reset_to(state)
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        if self.done {
            return Err(step_after_done());
        }
        check_action(action, 3)?;
        self.state = self.state.integrate(action as f64 - 1.0);
        self.steps += 1;
        let goal = self.state.reached_goal();
        self.done = goal || self.steps >= MAX_STEPS;
        Ok(StepResult {
            observation: self.state.observation(),
            reward: if goal { 0.0 } else { -1.0 },
            done: self.done,
            steps_elapsed: self.steps,
        })
    }

    fn label(&self) -> Option<u8> {
        // quadrant of the first link
        let t = self.state.theta1;
        Some(((t + PI) / (PI / 2.0)).floor().clamp(0.0, 3.0) as u8)
    }
}
