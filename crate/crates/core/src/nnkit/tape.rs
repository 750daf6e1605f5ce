//! Reverse-mode differentiation over a recorded forward trace.
//!
//! Every value on the tape is a row-batched matrix (`[batch x features]`); scalar
//! losses are `1 x 1`. Nodes are appended in evaluation order, so a single reverse
//! sweep visits each node after all of its consumers.

use ndarray::{Array2, Axis, Zip};

use super::activation::Activation;
use super::tensor::{GradientStore, ParamTensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Constant,
    Param(String),
    Linear { x: Var, w: Var, b: Var },
    Act { x: Var, kind: Activation },
    Reparam { mu: Var, logvar: Var, eps: Array2<f64> },
    Gather { x: Var, index: Vec<usize> },
    Mse { a: Var, b: Var },
    Huber { a: Var, b: Var, delta: f64 },
    Kl { mu: Var, logvar: Var },
    Weighted(Vec<(Var, f64)>),
}

#[derive(Debug)]
struct Node {
    label: String,
    value: Array2<f64>,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, label: String, value: Array2<f64>, op: Op) -> Var {
        self.nodes.push(Node { label, value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A value that receives no gradient (inputs, targets).
    pub fn constant(&mut self, label: &str, value: Array2<f64>) -> Var {
        self.push(label.to_owned(), value, Op::Constant)
    }

    /// A trainable parameter; its gradient is reported under the tensor's name.
    pub fn param(&mut self, p: &ParamTensor) -> Var {
        self.push(p.name().to_owned(), p.to_array2(), Op::Param(p.name().to_owned()))
    }

    /// `x W^T + b` with `W` stored `[out x in]` and `b` a `1 x out` row.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Var {
        let xv = &self.nodes[x.0].value;
        let wv = &self.nodes[w.0].value;
        let mut y = xv.dot(&wv.t());
        y += &self.nodes[b.0].value.row(0);
        let label = format!("linear({})", self.nodes[w.0].label);
        self.push(label, y, Op::Linear { x, w, b })
    }

    pub fn activation(&mut self, x: Var, kind: Activation) -> Var {
        let y = self.nodes[x.0].value.mapv(|v| kind.apply(v));
        let label = format!("{kind:?}({})", self.nodes[x.0].label);
        self.push(label, y, Op::Act { x, kind })
    }

    /// `mu + exp(logvar / 2) * eps` with `eps` held constant.
    pub fn reparameterize(&mut self, mu: Var, logvar: Var, eps: Array2<f64>) -> Var {
        let mut z = self.nodes[logvar.0].value.mapv(|lv| (0.5 * lv).exp());
        z *= &eps;
        z += &self.nodes[mu.0].value;
        self.push("reparameterize".into(), z, Op::Reparam { mu, logvar, eps })
    }

    /// Picks column `index[i]` from row `i`, producing a `[batch x 1]` column.
    pub fn gather(&mut self, x: Var, index: Vec<usize>) -> Var {
        let xv = &self.nodes[x.0].value;
        let y = Array2::from_shape_fn((xv.nrows(), 1), |(i, _)| xv[[i, index[i]]]);
        self.push("gather".into(), y, Op::Gather { x, index })
    }

    /// Mean over all elements of `(a - b)^2`.
    pub fn mse(&mut self, a: Var, b: Var) -> Var {
        let av = &self.nodes[a.0].value;
        let bv = &self.nodes[b.0].value;
        let n = av.len() as f64;
        let s = Zip::from(av).and(bv).fold(0.0, |acc, x, y| acc + (x - y) * (x - y));
        self.push("mse".into(), Array2::from_elem((1, 1), s / n), Op::Mse { a, b })
    }

    /// Mean over all elements of `huber(a - b, delta)`.
    pub fn huber(&mut self, a: Var, b: Var, delta: f64) -> Var {
        let av = &self.nodes[a.0].value;
        let bv = &self.nodes[b.0].value;
        let n = av.len() as f64;
        let s = Zip::from(av)
            .and(bv)
            .fold(0.0, |acc, x, y| acc + super::loss::huber(x - y, delta));
        self.push("huber".into(), Array2::from_elem((1, 1), s / n), Op::Huber { a, b, delta })
    }

    /// Batch mean of `KL(N(mu, exp(logvar)) || N(0, I))`.
    pub fn kl_standard_normal(&mut self, mu: Var, logvar: Var) -> Var {
        let m = &self.nodes[mu.0].value;
        let lv = &self.nodes[logvar.0].value;
        let rows = m.nrows() as f64;
        let s = Zip::from(m)
            .and(lv)
            .fold(0.0, |acc, &mu, &lv| acc - 0.5 * (1.0 + lv - mu * mu - lv.exp()));
        self.push("kl".into(), Array2::from_elem((1, 1), s / rows), Op::Kl { mu, logvar })
    }

    /// `sum_k c_k * L_k` over scalar nodes.
    pub fn weighted_sum(&mut self, terms: &[(Var, f64)]) -> Var {
        let s = terms
            .iter()
            .fold(0.0, |acc, (v, c)| acc + c * self.nodes[v.0].value[[0, 0]]);
        self.push("weighted_sum".into(), Array2::from_elem((1, 1), s), Op::Weighted(terms.to_vec()))
    }

    /// Gradients of a scalar node with respect to every parameter on the tape.
    pub fn backward(&self, loss: Var) -> Result<GradientStore> {
        let shape = self.nodes[loss.0].value.dim();
        if shape != (1, 1) {
            return Err(Error::Shape(format!(
                "backward needs a scalar, `{}` is {shape:?}",
                self.nodes[loss.0].label
            )));
        }
        self.backward_with_seed(loss, Array2::ones((1, 1)))
    }

    /// Reverse sweep from `out` seeded with `seed` (same shape as `out`).
    ///
    /// Parameters the seed does not reach receive an all-zero entry so that every
    /// parameter on the tape has exactly one gradient.
    pub fn backward_with_seed(&self, out: Var, seed: Array2<f64>) -> Result<GradientStore> {
        if seed.dim() != self.nodes[out.0].value.dim() {
            return Err(Error::Shape("seed gradient shape differs from output".into()));
        }
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; out.0 + 1];
        grads[out.0] = Some(seed);
        let mut store = GradientStore::new();

        for i in (0..=out.0).rev() {
            let node = &self.nodes[i];
            let Some(g) = grads[i].take() else {
                if let Op::Param(name) = &node.op {
                    store.accumulate(name, &vec![0.0; node.value.len()])?;
                }
                continue;
            };
            if !node.value.iter().all(|v| v.is_finite()) || !g.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite {
                    node: node.label.clone(),
                });
            }
            match &node.op {
                Op::Constant => {}
                Op::Param(name) => {
                    let g = g.as_standard_layout();
                    store.accumulate(name, g.as_slice().expect("standard layout"))?;
                }
                Op::Linear { x, w, b } => {
                    let xv = &self.nodes[x.0].value;
                    let wv = &self.nodes[w.0].value;
                    add(&mut grads, *x, g.dot(wv));
                    add(&mut grads, *w, g.t().dot(xv));
                    add(&mut grads, *b, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                }
                Op::Act { x, kind } => {
                    let kind = *kind;
                    let mut dx = g;
                    Zip::from(&mut dx)
                        .and(&self.nodes[x.0].value)
                        .and(&node.value)
                        .for_each(|d, &xi, &yi| *d *= kind.derivative(xi, yi));
                    add(&mut grads, *x, dx);
                }
                Op::Reparam { mu, logvar, eps } => {
                    let mut dlv = self.nodes[logvar.0].value.mapv(|lv| 0.5 * (0.5 * lv).exp());
                    dlv *= eps;
                    dlv *= &g;
                    add(&mut grads, *logvar, dlv);
                    add(&mut grads, *mu, g);
                }
                Op::Gather { x, index } => {
                    let xv = &self.nodes[x.0].value;
                    let mut dx = Array2::zeros(xv.dim());
                    for (r, &c) in index.iter().enumerate() {
                        dx[[r, c]] = g[[r, 0]];
                    }
                    add(&mut grads, *x, dx);
                }
                Op::Mse { a, b } => {
                    let av = &self.nodes[a.0].value;
                    let bv = &self.nodes[b.0].value;
                    let scale = 2.0 * g[[0, 0]] / av.len() as f64;
                    let da = (av - bv) * scale;
                    if self.receives_grad(*b) {
                        add(&mut grads, *b, -&da);
                    }
                    add(&mut grads, *a, da);
                }
                Op::Huber { a, b, delta } => {
                    let av = &self.nodes[a.0].value;
                    let bv = &self.nodes[b.0].value;
                    let scale = g[[0, 0]] / av.len() as f64;
                    let delta = *delta;
                    let da = Zip::from(av)
                        .and(bv)
                        .map_collect(|x, y| (x - y).clamp(-delta, delta) * scale);
                    if self.receives_grad(*b) {
                        add(&mut grads, *b, -&da);
                    }
                    add(&mut grads, *a, da);
                }
                Op::Kl { mu, logvar } => {
                    let m = &self.nodes[mu.0].value;
                    let lv = &self.nodes[logvar.0].value;
                    let scale = g[[0, 0]] / m.nrows() as f64;
                    add(&mut grads, *mu, m * scale);
                    add(&mut grads, *logvar, lv.mapv(|l| 0.5 * (l.exp() - 1.0) * scale));
                }
                Op::Weighted(terms) => {
                    for (v, c) in terms {
                        add(&mut grads, *v, Array2::from_elem((1, 1), c * g[[0, 0]]));
                    }
                }
            }
        }
        // Parameters recorded after `out` cannot influence it.
        for node in &self.nodes[out.0 + 1..] {
            if let Op::Param(name) = &node.op {
                store.accumulate(name, &vec![0.0; node.value.len()])?;
            }
        }
        Ok(store)
    }

    fn receives_grad(&self, v: Var) -> bool {
        !matches!(self.nodes[v.0].op, Op::Constant)
    }
}

fn add(grads: &mut [Option<Array2<f64>>], v: Var, g: Array2<f64>) {
    match &mut grads[v.0] {
        Some(acc) => *acc += &g,
        slot @ None => *slot = Some(g),
    }
}
