use std::f64::consts::PI;

use ndarray::Array2;

use crate::envs::EnvId;

/// Fixed per-dimension divisors for the control tasks; grid observations are
/// already in `{0, 1}` and pass through.
pub fn observation_scales(env: EnvId) -> Option<Vec<f64>> {
    match env {
        EnvId::CartPole => Some(vec![2.4, 5.0, 0.21, 5.0]),
        EnvId::Acrobot => Some(vec![1.0, 1.0, 1.0, 1.0, 4.0 * PI, 9.0 * PI]),
        EnvId::Crossing | EnvId::FourRooms => None,
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct ObsScaler {
    divisors: Option<Vec<f64>>,
}

impl ObsScaler {
    pub fn for_env(env: EnvId, enabled: bool) -> Self {
        ObsScaler {
            divisors: if enabled { observation_scales(env) } else { None },
        }
    }

    pub fn identity() -> Self {
        Self::default()
    }

    pub fn apply(&self, obs: &[f64]) -> Vec<f64> {
        match &self.divisors {
            Some(d) => obs.iter().zip(d).map(|(o, s)| o / s).collect(),
            None => obs.to_vec(),
        }
    }

    /// Stacks scaled observations into a `[rows x dim]` matrix.
    pub fn batch<'a>(&self, rows: impl ExactSizeIterator<Item = &'a [f64]>, dim: usize) -> Array2<f64> {
        let n = rows.len();
        let mut flat = Vec::with_capacity(n * dim);
        for r in rows {
            match &self.divisors {
                Some(d) => flat.extend(r.iter().zip(d).map(|(o, s)| o / s)),
                None => flat.extend_from_slice(r),
            }
        }
        Array2::from_shape_vec((n, dim), flat).expect("every row has `dim` entries")
    }
}
