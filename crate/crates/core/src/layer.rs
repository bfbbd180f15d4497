//! Dense layers with bias and manual backpropagation, shared by the
//! autoencoder and the encoder stack an OC-NN model can carry.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{glorot_from, Activation, Matrix, SeededRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// `out × in`
    pub weights: Matrix<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

/// Values kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct LayerCache {
    pub pre: Matrix<f64>,
    pub out: Matrix<f64>,
}

#[derive(Debug, Clone)]
pub struct LayerGrad {
    pub weights: Matrix<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn new(weights: Matrix<f64>, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::invalid(
                "bias",
                format!("{} entries for a layer with {} outputs", bias.len(), weights.rows()),
            ));
        }
        if !activation.is_valid() {
            return Err(Error::invalid("activation", format!("{activation:?}")));
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    /// Glorot-uniform weights, zero bias.
    pub fn init(inputs: usize, outputs: usize, activation: Activation, rng: &mut SeededRng) -> Result<Self> {
        let weights = glorot_from(outputs, inputs, 1.0, rng)?;
        Self::new(weights, vec![0.0; outputs], activation)
    }

    pub fn inputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.rows()
    }

    pub fn n_params(&self) -> usize {
        self.weights.rows() * self.weights.cols() + self.bias.len()
    }

    pub fn forward(&self, input: &Matrix<f64>) -> LayerCache {
        let mut pre = input.mul_nt_kernel(&self.weights);
        for r in 0..pre.rows() {
            for (z, b) in pre.row_mut(r).iter_mut().zip(&self.bias) {
                *z += b;
            }
        }
        let out = pre.map(|z| self.activation.eval(z));
        LayerCache { pre, out }
    }

    /// Given `d_out = ∂L/∂out`, returns parameter gradients and `∂L/∂input`.
    pub fn backward(&self, input: &Matrix<f64>, cache: &LayerCache, d_out: &Matrix<f64>) -> (LayerGrad, Matrix<f64>) {
        let mut d_pre = d_out.clone();
        for (d, &z) in d_pre.as_mut_slice().iter_mut().zip(cache.pre.as_slice()) {
            *d *= self.activation.derivative(z);
        }
        let weights = d_pre.mul_tn_kernel(input);
        let mut bias = vec![0.0; self.outputs()];
        for row in d_pre.iter_rows() {
            for (b, d) in bias.iter_mut().zip(row) {
                *b += d;
            }
        }
        let d_input = d_pre.mul_kernel(&self.weights);
        (LayerGrad { weights, bias }, d_input)
    }

    pub(crate) fn apply_update(&mut self, grad: &LayerGrad, lr: f64) {
        self.weights.axpy(-lr, &grad.weights);
        for (b, g) in self.bias.iter_mut().zip(&grad.bias) {
            *b -= lr * g;
        }
    }

    pub(crate) fn write_params(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self.weights.as_slice());
        out.extend_from_slice(&self.bias);
    }

    pub(crate) fn read_params(&mut self, src: &[f64]) -> usize {
        let nw = self.weights.rows() * self.weights.cols();
        self.weights.as_mut_slice().copy_from_slice(&src[..nw]);
        let nb = self.bias.len();
        self.bias.copy_from_slice(&src[nw..nw + nb]);
        nw + nb
    }
}

impl LayerGrad {
    pub(crate) fn write(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self.weights.as_slice());
        out.extend_from_slice(&self.bias);
    }

    pub(crate) fn zeros_like(layer: &DenseLayer) -> Self {
        Self {
            weights: Matrix::zeros(layer.outputs(), layer.inputs()),
            bias: vec![0.0; layer.outputs()],
        }
    }

    /// `self = decay * self + other` (momentum accumulation).
    pub(crate) fn accumulate(&mut self, decay: f64, other: &LayerGrad) {
        for (a, &b) in self.weights.as_mut_slice().iter_mut().zip(other.weights.as_slice()) {
            *a = decay * *a + b;
        }
        for (a, &b) in self.bias.iter_mut().zip(&other.bias) {
            *a = decay * *a + b;
        }
    }
}

/// Runs `input` through `layers`, returning one cache per layer.
pub fn forward_stack(layers: &[DenseLayer], input: &Matrix<f64>) -> Vec<LayerCache> {
    let mut caches: Vec<LayerCache> = Vec::with_capacity(layers.len());
    for layer in layers {
        let src = caches.last().map_or(input, |c| &c.out);
        let cache = layer.forward(src);
        caches.push(cache);
    }
    caches
}

/// Output of `layers` on `input` (the input itself for an empty stack).
pub fn stack_output(layers: &[DenseLayer], input: &Matrix<f64>) -> Matrix<f64> {
    let mut current = input.clone();
    for layer in layers {
        current = layer.forward(&current).out;
    }
    current
}

/// Backpropagates `d_out` through a stack whose forward pass produced
/// `caches` from `input`. Returns per-layer gradients and `∂L/∂input`.
pub fn backward_stack(
    layers: &[DenseLayer],
    input: &Matrix<f64>,
    caches: &[LayerCache],
    d_out: Matrix<f64>,
) -> (Vec<LayerGrad>, Matrix<f64>) {
    let mut grads = Vec::with_capacity(layers.len());
    let mut d = d_out;
    for i in (0..layers.len()).rev() {
        let src = if i == 0 { input } else { &caches[i - 1].out };
        let (g, d_in) = layers[i].backward(src, &caches[i], &d);
        grads.push(g);
        d = d_in;
    }
    grads.reverse();
    (grads, d)
}

/// Checks that consecutive layers chain and returns `(input, output)` widths.
pub fn check_chain(layers: &[DenseLayer]) -> Result<Option<(usize, usize)>> {
    for pair in layers.windows(2) {
        if pair[0].outputs() != pair[1].inputs() {
            return Err(Error::DimensionMismatch {
                op: "layer chain",
                left_rows: pair[0].outputs(),
                left_cols: pair[0].inputs(),
                right_rows: pair[1].outputs(),
                right_cols: pair[1].inputs(),
            });
        }
    }
    Ok(layers.first().zip(layers.last()).map(|(a, b)| (a.inputs(), b.outputs())))
}
