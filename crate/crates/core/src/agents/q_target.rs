use crate::nnkit::argmax;

/// `r` for terminal transitions, else `r + gamma * q_eval[argmax q_select]`.
///
/// Passing the same Q-vector twice gives the max-target of plain Q-learning;
/// separate vectors give the Double-DQN estimator.
pub fn bootstrap_target(reward: f64, gamma: f64, done: bool, q_select: &[f64], q_eval: &[f64]) -> f64 {
    if done {
        reward
    } else {
        reward + gamma * q_eval[argmax(q_select)]
    }
}

/// `r + gamma * max q` (or `r` when done).
pub fn max_target(reward: f64, gamma: f64, done: bool, q: &[f64]) -> f64 {
    if done {
        reward
    } else {
        reward + gamma * q.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}
