//! Dense autoencoder trained on mean squared reconstruction error.
//!
//! The encoder doubles as a feature extractor for OC-NN, and the per-row
//! reconstruction error is itself a baseline anomaly score.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::layer::{backward_stack, check_chain, forward_stack, stack_output, DenseLayer, LayerGrad};
use crate::numerics::{Activation, Matrix, SeededRng, Stream};

/// Layer widths from the input down to the code, e.g. `[64, 32, 16]`; the
/// decoder mirrors them back up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeArch {
    pub sizes: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
}

impl AeArch {
    /// Leaky-ReLU (α = 0.1) hidden layers with a linear reconstruction.
    pub fn new(sizes: Vec<usize>) -> Self {
        Self {
            sizes,
            hidden_activation: Activation::LEAKY,
            output_activation: Activation::Linear,
        }
    }

    pub fn linear(sizes: Vec<usize>) -> Self {
        Self {
            sizes,
            hidden_activation: Activation::Linear,
            output_activation: Activation::Linear,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.sizes.len() < 2 || self.sizes.contains(&0) {
            return Err(Error::invalid(
                "arch",
                format!("need at least input and code widths, all positive; got {:?}", self.sizes),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// `None` trains full-batch.
    pub batch_size: Option<usize>,
    pub momentum: f64,
    pub seed: u64,
}

impl Default for AeConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            learning_rate: 0.01,
            batch_size: Some(32),
            momentum: 0.9,
            seed: 0,
        }
    }
}

impl AeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs", "must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::invalid("learning_rate", format!("must lie in (0, 1], got {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("momentum", format!("must lie in [0, 1), got {}", self.momentum)));
        }
        if self.batch_size == Some(0) {
            return Err(Error::invalid("batch_size", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderModel {
    pub encoder: Vec<DenseLayer>,
    pub decoder: Vec<DenseLayer>,
}

impl AutoencoderModel {
    pub fn new(encoder: Vec<DenseLayer>, decoder: Vec<DenseLayer>) -> Result<Self> {
        let (input, code) = check_chain(&encoder)?.ok_or(Error::Empty("encoder layers"))?;
        let (code_in, output) = check_chain(&decoder)?.ok_or(Error::Empty("decoder layers"))?;
        if code != code_in || output != input {
            return Err(Error::DimensionMismatch {
                op: "autoencoder",
                left_rows: input,
                left_cols: code,
                right_rows: code_in,
                right_cols: output,
            });
        }
        Ok(Self { encoder, decoder })
    }

    pub fn init(arch: &AeArch, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = SeededRng::new(seed, Stream::AutoencoderInit);
        let sizes = &arch.sizes;
        let mut encoder = Vec::new();
        for w in sizes.windows(2) {
            encoder.push(DenseLayer::init(w[0], w[1], arch.hidden_activation, &mut rng)?);
        }
        let mut decoder = Vec::new();
        let rev: Vec<usize> = sizes.iter().rev().copied().collect();
        for (i, w) in rev.windows(2).enumerate() {
            let act = if i + 2 == rev.len() {
                arch.output_activation
            } else {
                arch.hidden_activation
            };
            decoder.push(DenseLayer::init(w[0], w[1], act, &mut rng)?);
        }
        Self::new(encoder, decoder)
    }

    pub fn input_dim(&self) -> usize {
        self.encoder[0].inputs()
    }

    pub fn code_dim(&self) -> usize {
        self.encoder[self.encoder.len() - 1].outputs()
    }

    fn layers(&self) -> impl Iterator<Item = &DenseLayer> {
        self.encoder.iter().chain(&self.decoder)
    }

    /// All weights and biases, encoder first, layer by layer.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in self.layers() {
            l.write_params(&mut out);
        }
        out
    }

    pub fn set_params(&mut self, src: &[f64]) {
        let mut at = 0;
        for l in self.encoder.iter_mut().chain(self.decoder.iter_mut()) {
            at += l.read_params(&src[at..]);
        }
    }

    fn check_input(&self, data: &Dataset) -> Result<()> {
        if data.n_cols() != self.input_dim() && !data.is_empty() {
            return Err(Error::DimensionMismatch {
                op: "autoencoder input",
                left_rows: data.n_rows(),
                left_cols: data.n_cols(),
                right_rows: 1,
                right_cols: self.input_dim(),
            });
        }
        Ok(())
    }

    fn reconstruct(&self, x: &Matrix<f64>) -> Matrix<f64> {
        stack_output(&self.decoder, &stack_output(&self.encoder, x))
    }
}

fn empty_input(data: &Dataset, cols: usize) -> Option<Matrix<f64>> {
    data.is_empty().then(|| Matrix::zeros(0, cols))
}

/// Encoder forward pass, `N × code_dim`.
pub fn encode(model: &AutoencoderModel, data: &Dataset) -> Result<Matrix<f64>> {
    model.check_input(data)?;
    if let Some(m) = empty_input(data, model.code_dim()) {
        return Ok(m);
    }
    Ok(stack_output(&model.encoder, data.x()))
}

/// Squared L2 distance between each row and its reconstruction.
pub fn reconstruction_errors(model: &AutoencoderModel, data: &Dataset) -> Result<Vec<f64>> {
    model.check_input(data)?;
    if data.is_empty() {
        return Ok(Vec::new());
    }
    let recon = model.reconstruct(data.x());
    Ok(data
        .x()
        .iter_rows()
        .zip(recon.iter_rows())
        .map(|(a, b)| a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum())
        .collect())
}

/// Mean over rows and features of the squared reconstruction error.
pub fn mse_loss(model: &AutoencoderModel, x: &Matrix<f64>) -> f64 {
    let recon = model.reconstruct(x);
    let sq: f64 = x
        .as_slice()
        .iter()
        .zip(recon.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    sq / (x.rows() * x.cols()) as f64
}

/// Loss and per-layer gradients (encoder layers first).
fn loss_and_grads(model: &AutoencoderModel, x: &Matrix<f64>) -> (f64, Vec<LayerGrad>) {
    let enc = forward_stack(&model.encoder, x);
    let code = &enc[enc.len() - 1].out;
    let dec = forward_stack(&model.decoder, code);
    let recon = &dec[dec.len() - 1].out;
    let scale = 2.0 / (x.rows() * x.cols()) as f64;
    let mut loss = 0.0;
    let mut d = Vec::with_capacity(x.rows() * x.cols());
    for (&r, &t) in recon.as_slice().iter().zip(x.as_slice()) {
        loss += (r - t) * (r - t);
        d.push(scale * (r - t));
    }
    let d_recon = Matrix::from_parts(x.rows(), x.cols(), d);
    let (dec_grads, d_code) = backward_stack(&model.decoder, code, &dec, d_recon);
    let (mut grads, _) = backward_stack(&model.encoder, x, &enc, d_code);
    grads.extend(dec_grads);
    (loss / (x.rows() * x.cols()) as f64, grads)
}

/// Analytic gradient of [`mse_loss`], flattened in [`AutoencoderModel::params`] order.
pub fn mse_gradient(model: &AutoencoderModel, x: &Matrix<f64>) -> Vec<f64> {
    let (_, grads) = loss_and_grads(model, x);
    let mut out = Vec::new();
    for g in &grads {
        g.write(&mut out);
    }
    out
}

#[derive(Debug, Clone)]
pub struct AeTrainOutput {
    pub model: AutoencoderModel,
    /// Mean mini-batch loss of each epoch.
    pub loss_curve: Vec<f64>,
}

/// Mini-batch SGD with optional momentum on the reconstruction MSE. Batch
/// order is reshuffled every epoch from the seed's shuffle stream.
pub fn ae_train(data: &Dataset, arch: &AeArch, cfg: &AeConfig) -> Result<AeTrainOutput> {
    cfg.validate()?;
    arch.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("training data"));
    }
    if data.n_cols() != arch.sizes[0] {
        return Err(Error::DimensionMismatch {
            op: "ae_train",
            left_rows: data.n_rows(),
            left_cols: data.n_cols(),
            right_rows: 1,
            right_cols: arch.sizes[0],
        });
    }
    let mut model = AutoencoderModel::init(arch, cfg.seed)?;
    let mut rng = SeededRng::new(cfg.seed, Stream::AutoencoderShuffle);
    let n = data.n_rows();
    let batch = cfg.batch_size.unwrap_or(n).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut velocity: Vec<LayerGrad> = model.layers().map(LayerGrad::zeros_like).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            let xb = data.x().select_rows(chunk);
            let (loss, grads) = loss_and_grads(&model, &xb);
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    stage: "autoencoder epoch",
                    index: epoch + 1,
                    history: Vec::new(),
                });
            }
            epoch_loss += loss * chunk.len() as f64;
            for (v, g) in velocity.iter_mut().zip(&grads) {
                v.accumulate(cfg.momentum, g);
            }
            let n_enc = model.encoder.len();
            for (i, v) in velocity.iter().enumerate() {
                if i < n_enc {
                    model.encoder[i].apply_update(v, cfg.learning_rate);
                } else {
                    model.decoder[i - n_enc].apply_update(v, cfg.learning_rate);
                }
            }
        }
        let mean = epoch_loss / n as f64;
        if !mean.is_finite() || !model.params().iter().all(|p| p.is_finite()) {
            return Err(Error::Divergence {
                stage: "autoencoder epoch",
                index: epoch + 1,
                history: Vec::new(),
            });
        }
        curve.push(mean);
    }
    Ok(AeTrainOutput {
        model,
        loss_curve: curve,
    })
}
