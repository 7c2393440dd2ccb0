//! Fully connected networks with batched forward and reverse passes.
//!
//! Batches are column-major matrices with one sample per column.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DMatrixView};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => math::sigmoid(x),
        }
    }

    /// Derivative expressed through the activation output `y`.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

/// Dense layer `y = act(W x + b)`; `w` is column-major `out × in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub act: Activation,
}

impl Dense {
    pub fn weights(&self) -> DMatrixView<'_, f64> {
        DMatrixView::from_slice(&self.w, self.n_out, self.n_in)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Activations kept from a forward pass: `outputs[0]` is the input,
/// `outputs[i + 1]` the output of layer `i`.
#[derive(Debug, Clone)]
pub struct Trace {
    pub outputs: Vec<DMatrix<f64>>,
}

impl Trace {
    pub fn output(&self) -> &DMatrix<f64> {
        self.outputs.last().expect("trace holds the input")
    }
}

/// Gradients with the same layout as the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Mlp {
    /// Uniform fan-in initialisation `U(−√(6/n_in), √(6/n_in))`, zero biases.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], acts: &[Activation], rng: &mut R) -> Self {
        assert_eq!(widths.len(), acts.len() + 1, "one activation per layer");
        let layers = widths
            .windows(2)
            .zip(acts)
            .map(|(wd, &act)| {
                let bound = math::sqrt(6.0 / wd[0] as f64);
                Dense {
                    n_in: wd[0],
                    n_out: wd[1],
                    w: (0..wd[0] * wd[1]).map(|_| rng.random_range(-bound..bound)).collect(),
                    b: alloc::vec![0.0; wd[1]],
                    act,
                }
            })
            .collect();
        Self { layers }
    }

    pub fn zeros(widths: &[usize], acts: &[Activation]) -> Self {
        let layers = widths
            .windows(2)
            .zip(acts)
            .map(|(wd, &act)| Dense {
                n_in: wd[0],
                n_out: wd[1],
                w: alloc::vec![0.0; wd[0] * wd[1]],
                b: alloc::vec![0.0; wd[1]],
                act,
            })
            .collect();
        Self { layers }
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut v = alloc::vec![self.layers[0].n_in];
        v.extend(self.layers.iter().map(|l| l.n_out));
        v
    }

    pub fn n_in(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn n_out(&self) -> usize {
        self.layers.last().map(|l| l.n_out).unwrap_or(0)
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn forward(&self, x: DMatrix<f64>) -> Trace {
        assert_eq!(x.nrows(), self.n_in(), "input width mismatch");
        let mut outputs = Vec::with_capacity(self.layers.len() + 1);
        outputs.push(x);
        for l in &self.layers {
            let prev = outputs.last().unwrap();
            let mut y = l.weights() * prev;
            for mut col in y.column_iter_mut() {
                for (v, b) in col.iter_mut().zip(&l.b) {
                    *v = l.act.apply(*v + b);
                }
            }
            outputs.push(y);
        }
        Trace { outputs }
    }

    /// Output only.
    pub fn apply(&self, x: DMatrix<f64>) -> DMatrix<f64> {
        self.forward(x).outputs.pop().unwrap()
    }

    /// Reverse pass from `d_out = ∂L/∂output`. Returns parameter gradients
    /// and `∂L/∂input`.
    pub fn backward(&self, trace: &Trace, d_out: DMatrix<f64>) -> (Vec<LayerGrad>, DMatrix<f64>) {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = d_out;
        for (i, l) in self.layers.iter().enumerate().rev() {
            let y = &trace.outputs[i + 1];
            if l.act != Activation::Identity {
                for (d, &yv) in delta.iter_mut().zip(y.iter()) {
                    *d *= l.act.derivative_from_output(yv);
                }
            }
            let x = &trace.outputs[i];
            let gw = &delta * x.transpose();
            let gb: Vec<f64> = delta.row_iter().map(|r| r.sum()).collect();
            let d_in = l.weights().transpose() * &delta;
            grads.push(LayerGrad {
                w: gw.as_slice().to_vec(),
                b: gb,
            });
            delta = d_in;
        }
        grads.reverse();
        (grads, delta)
    }

    /// Mutable views of every parameter tensor, in a fixed order.
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = Vec::with_capacity(2 * self.layers.len());
        for l in &mut self.layers {
            v.push(l.w.as_mut_slice());
            v.push(l.b.as_mut_slice());
        }
        v
    }

    pub fn tensor_lens(&self) -> Vec<usize> {
        self.layers.iter().flat_map(|l| [l.w.len(), l.b.len()]).collect()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.w.iter().chain(&l.b).copied())
            .collect()
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params(), "parameter count mismatch");
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.w.len();
            l.w.copy_from_slice(&flat[off..off + nw]);
            off += nw;
            let nb = l.b.len();
            l.b.copy_from_slice(&flat[off..off + nb]);
            off += nb;
        }
    }
}

/// Flattens layer gradients in the order of [`Mlp::tensors_mut`].
pub fn flatten_grads(g: &[LayerGrad]) -> Vec<&[f64]> {
    g.iter().flat_map(|l| [l.w.as_slice(), l.b.as_slice()]).collect()
}
