use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::tensor::{GradientStore, ParamTensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    RmsProp,
    Adam,
}

pub const RMSPROP_DECAY: f64 = 0.99;
pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const OPT_EPSILON: f64 = 1e-8;

#[derive(Clone, Debug)]
enum Moments {
    RmsProp {
        decay: f64,
        eps: f64,
        sq_avg: BTreeMap<String, Vec<f64>>,
    },
    Adam {
        beta1: f64,
        beta2: f64,
        eps: f64,
        first: BTreeMap<String, Vec<f64>>,
        second: BTreeMap<String, Vec<f64>>,
        step: u64,
    },
}

/// Per-parameter optimizer state. Moment buffers are created lazily (zeroed) the
/// first time a parameter is updated.
#[derive(Clone, Debug)]
pub struct Optimizer {
    learning_rate: f64,
    moments: Moments,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Self {
        match kind {
            OptimizerKind::RmsProp => Self::rmsprop(learning_rate, RMSPROP_DECAY, OPT_EPSILON),
            OptimizerKind::Adam => Self::adam(learning_rate, ADAM_BETA1, ADAM_BETA2, OPT_EPSILON),
        }
    }

    pub fn rmsprop(learning_rate: f64, decay: f64, eps: f64) -> Self {
        Optimizer {
            learning_rate,
            moments: Moments::RmsProp {
                decay,
                eps,
                sq_avg: BTreeMap::new(),
            },
        }
    }

    pub fn adam(learning_rate: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Optimizer {
            learning_rate,
            moments: Moments::Adam {
                beta1,
                beta2,
                eps,
                first: BTreeMap::new(),
                second: BTreeMap::new(),
                step: 0,
            },
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        match self.moments {
            Moments::RmsProp { .. } => OptimizerKind::RmsProp,
            Moments::Adam { .. } => OptimizerKind::Adam,
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    /// Number of Adam updates applied so far (always 0 for RMSProp).
    pub fn step_count(&self) -> u64 {
        match self.moments {
            Moments::Adam { step, .. } => step,
            Moments::RmsProp { .. } => 0,
        }
    }

    /// Squared-gradient average (RMSProp) or second moment (Adam) for `name`.
    pub fn second_moment(&self, name: &str) -> Option<&[f64]> {
        match &self.moments {
            Moments::RmsProp { sq_avg, .. } => sq_avg.get(name).map(Vec::as_slice),
            Moments::Adam { second, .. } => second.get(name).map(Vec::as_slice),
        }
    }

    /// Applies one update to every parameter in `params`. All gradients are
    /// validated before any parameter is touched.
    pub fn step<'a>(
        &mut self,
        params: impl IntoIterator<Item = &'a mut ParamTensor>,
        grads: &GradientStore,
    ) -> Result<()> {
        let params: Vec<&mut ParamTensor> = params.into_iter().collect();
        for p in &params {
            match grads.get(p.name()) {
                None => return Err(Error::Shape(format!("no gradient for `{}`", p.name()))),
                Some(g) if g.len() != p.len() => {
                    return Err(Error::Shape(format!(
                        "gradient for `{}` has {} entries, parameter has {}",
                        p.name(),
                        g.len(),
                        p.len()
                    )))
                }
                Some(_) => {}
            }
        }
        let lr = self.learning_rate;
        match &mut self.moments {
            Moments::RmsProp { decay, eps, sq_avg } => {
                for p in params {
                    let g = grads.get(p.name()).expect("validated");
                    let s = sq_avg
                        .entry(p.name().to_owned())
                        .or_insert_with(|| vec![0.0; g.len()]);
                    rmsprop_update(p.values_mut(), g, s, lr, *decay, *eps);
                }
            }
            Moments::Adam {
                beta1,
                beta2,
                eps,
                first,
                second,
                step,
            } => {
                *step += 1;
                let c1 = 1.0 - beta1.powi(*step as i32);
                let c2 = 1.0 - beta2.powi(*step as i32);
                for p in params {
                    let g = grads.get(p.name()).expect("validated");
                    let m = first
                        .entry(p.name().to_owned())
                        .or_insert_with(|| vec![0.0; g.len()]);
                    let v = second
                        .entry(p.name().to_owned())
                        .or_insert_with(|| vec![0.0; g.len()]);
                    for i in 0..g.len() {
                        m[i] = *beta1 * m[i] + (1.0 - *beta1) * g[i];
                        v[i] = *beta2 * v[i] + (1.0 - *beta2) * g[i] * g[i];
                        let m_hat = m[i] / c1;
                        let v_hat = v[i] / c2;
                        p.values_mut()[i] -= lr * m_hat / (v_hat.sqrt() + *eps);
                    }
                }
            }
        }
        Ok(())
    }
}

fn rmsprop_update(p: &mut [f64], g: &[f64], s: &mut [f64], lr: f64, decay: f64, eps: f64) {
    for i in 0..p.len() {
        s[i] = decay * s[i] + (1.0 - decay) * g[i] * g[i];
        p[i] -= lr * g[i] / (s[i].sqrt() + eps);
    }
}

/// `rmsprop_step` in function form.
pub fn rmsprop_step<'a>(
    params: impl IntoIterator<Item = &'a mut ParamTensor>,
    grads: &GradientStore,
    state: &mut Optimizer,
) -> Result<()> {
    if state.kind() != OptimizerKind::RmsProp {
        return Err(Error::Usage("rmsprop_step with Adam state".into()));
    }
    state.step(params, grads)
}

/// `adam_step` in function form.
pub fn adam_step<'a>(
    params: impl IntoIterator<Item = &'a mut ParamTensor>,
    grads: &GradientStore,
    state: &mut Optimizer,
) -> Result<()> {
    if state.kind() != OptimizerKind::Adam {
        return Err(Error::Usage("adam_step with RMSProp state".into()));
    }
    state.step(params, grads)
}
