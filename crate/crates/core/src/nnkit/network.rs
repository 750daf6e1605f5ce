use super::layer::{DenseLayer, Mlp};
use super::tensor::ParamTensor;
use crate::error::{Error, Result};

/// Anything that owns an ordered set of named parameters.
pub trait Network {
    fn params(&self) -> Vec<&ParamTensor>;
    fn params_mut(&mut self) -> Vec<&mut ParamTensor>;

    fn snapshot(&self) -> Vec<ParamTensor> {
        self.params().into_iter().cloned().collect()
    }

    /// Overwrites every parameter from `source`, matched by name and shape.
    fn load(&mut self, source: &[ParamTensor]) -> Result<()> {
        for p in self.params_mut() {
            let src = source
                .iter()
                .find(|s| s.name() == p.name())
                .ok_or_else(|| Error::Format(format!("missing parameter `{}`", p.name())))?;
            if src.shape() != p.shape() {
                return Err(Error::Shape(format!(
                    "`{}`: stored shape {:?}, network expects {:?}",
                    p.name(),
                    src.shape(),
                    p.shape()
                )));
            }
            p.values_mut().copy_from_slice(src.values());
        }
        Ok(())
    }

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}

impl Network for DenseLayer {
    fn params(&self) -> Vec<&ParamTensor> {
        DenseLayer::params(self).to_vec()
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let [w, b] = DenseLayer::params_mut(self);
        vec![w, b]
    }
}

impl Network for Mlp {
    fn params(&self) -> Vec<&ParamTensor> {
        Mlp::params(self).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        Mlp::params_mut(self).collect()
    }
}
