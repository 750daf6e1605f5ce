use ndarray::{Array2, ArrayView2};

use super::activation::Activation;
use super::rng::Rng;
use super::tape::{Tape, Var};
use super::tensor::ParamTensor;
use crate::error::{Error, Result};

/// Fully connected layer `y = act(W x + b)` with `W` stored `[out x in]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    pub weights: ParamTensor,
    pub bias: ParamTensor,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(weights: ParamTensor, bias: ParamTensor, activation: Activation) -> Result<Self> {
        let (rows, _) = weights_dims(&weights)?;
        if bias.shape() != [rows] {
            return Err(Error::Shape(format!(
                "{}: bias shape {:?} for {} weight rows",
                bias.name(),
                bias.shape(),
                rows
            )));
        }
        activation.validate()?;
        Ok(DenseLayer {
            weights,
            bias,
            activation,
        })
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero bias.
    pub fn glorot(name: &str, inputs: usize, outputs: usize, activation: Activation, rng: &mut Rng) -> Self {
        let limit = glorot_limit(inputs, outputs);
        let values = (0..inputs * outputs)
            .map(|_| rng.uniform_range(-limit, limit))
            .collect();
        DenseLayer {
            weights: ParamTensor::new(format!("{name}.w"), vec![outputs, inputs], values)
                .expect("finite by construction"),
            bias: ParamTensor::zeros(format!("{name}.b"), vec![outputs]),
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weights.shape()[0]
    }

    /// Single-vector forward pass.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.inputs() {
            return Err(Error::Shape(format!(
                "{}: input length {} for {} weight columns",
                self.weights.name(),
                x.len(),
                self.inputs()
            )));
        }
        let w = self.weights.values();
        let n = self.inputs();
        Ok(self
            .bias
            .values()
            .iter()
            .enumerate()
            .map(|(r, b)| {
                let row = &w[r * n..(r + 1) * n];
                let dot: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
                self.activation.apply(dot + b)
            })
            .collect())
    }

    /// Row-batched forward pass (`x` is `[batch x in]`).
    pub fn forward_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.inputs() {
            return Err(Error::Shape(format!(
                "{}: batch has {} columns for {} weight columns",
                self.weights.name(),
                x.ncols(),
                self.inputs()
            )));
        }
        let mut y = x.dot(&self.weights.view2().t());
        y += &self.bias.view2().row(0);
        let act = self.activation;
        if act != Activation::Identity {
            y.mapv_inplace(|v| act.apply(v));
        }
        Ok(y)
    }

    /// Records this layer on `tape`.
    pub fn record(&self, tape: &mut Tape, x: Var) -> Var {
        let w = tape.param(&self.weights);
        let b = tape.param(&self.bias);
        let pre = tape.linear(x, w, b);
        if self.activation == Activation::Identity {
            pre
        } else {
            tape.activation(pre, self.activation)
        }
    }

    pub fn params(&self) -> [&ParamTensor; 2] {
        [&self.weights, &self.bias]
    }

    pub fn params_mut(&mut self) -> [&mut ParamTensor; 2] {
        [&mut self.weights, &mut self.bias]
    }
}

fn weights_dims(w: &ParamTensor) -> Result<(usize, usize)> {
    match w.shape() {
        [r, c] if *r > 0 && *c > 0 => Ok((*r, *c)),
        s => Err(Error::Shape(format!("{}: weights must be 2-D, got {s:?}", w.name()))),
    }
}

pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// `dense_forward` in function form.
pub fn dense_forward(layer: &DenseLayer, x: &[f64]) -> Result<Vec<f64>> {
    layer.forward(x)
}

/// A stack of dense layers applied in order.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
}

impl Mlp {
    /// Glorot-initialized stack over `sizes` (`sizes[0]` inputs, then one entry per layer).
    /// Hidden layers use `hidden`, the last layer uses `output`.
    pub fn init(name: &str, sizes: &[usize], hidden: Activation, output: Activation, rng: &mut Rng) -> Result<Self> {
        init_params(name, sizes, hidden, output, rng).map(|layers| Mlp { layers })
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn outputs(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut h = self.layers[0].forward(x)?;
        for l in &self.layers[1..] {
            h = l.forward(&h)?;
        }
        Ok(h)
    }

    pub fn forward_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let mut h = self.layers[0].forward_batch(x)?;
        for l in &self.layers[1..] {
            h = l.forward_batch(h.view())?;
        }
        Ok(h)
    }

    pub fn record(&self, tape: &mut Tape, x: Var) -> Var {
        self.layers.iter().fold(x, |h, l| l.record(tape, h))
    }

    pub fn params(&self) -> impl Iterator<Item = &ParamTensor> {
        self.layers.iter().flat_map(|l| l.params())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut ParamTensor> {
        self.layers.iter_mut().flat_map(|l| l.params_mut())
    }
}

/// Glorot-uniform layers with zero biases for the given layer sizes.
pub fn init_params(
    name: &str,
    sizes: &[usize],
    hidden: Activation,
    output: Activation,
    rng: &mut Rng,
) -> Result<Vec<DenseLayer>> {
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(Error::Shape(format!("{name}: invalid layer sizes {sizes:?}")));
    }
    hidden.validate()?;
    output.validate()?;
    let n = sizes.len() - 1;
    Ok(sizes
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let act = if i + 1 == n { output } else { hidden };
            DenseLayer::glorot(&format!("{name}.{i}"), w[0], w[1], act, rng)
        })
        .collect())
}

/// Row-wise argmax with ties resolved to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
