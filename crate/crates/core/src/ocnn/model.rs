use serde::{Deserialize, Serialize};

use crate::autoencoder::AutoencoderModel;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::layer::{backward_stack, check_chain, forward_stack, stack_output, DenseLayer, LayerCache, LayerGrad};
use crate::numerics::{dot, glorot_from, Activation, Matrix, SeededRng, Stream};
use crate::quantile;

/// Architecture and objective settings for a new model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcnnArch {
    pub nu: f64,
    pub hidden: usize,
    pub activation: Activation,
    /// Multiplier on the Glorot bound of the hidden weights.
    pub hidden_gain: f64,
    /// Multiplier on the Glorot bound of the output weights.
    pub output_gain: f64,
    /// Width of an optional dense layer (leaky ReLU, with bias) in front of
    /// the hidden weights.
    pub extra_layer: Option<usize>,
    pub train_hidden: bool,
    pub train_encoder: bool,
    /// Include trainable encoder weights in the Frobenius penalty.
    pub regularize_encoder: bool,
}

impl Default for OcnnArch {
    fn default() -> Self {
        Self {
            nu: 0.1,
            hidden: 32,
            activation: Activation::Sigmoid,
            hidden_gain: 1.0,
            output_gain: 1.0,
            extra_layer: None,
            train_hidden: true,
            train_encoder: true,
            regularize_encoder: true,
        }
    }
}

impl OcnnArch {
    /// Hidden width by input size: 128 units for 512-wide inputs, 32 otherwise.
    pub fn for_input_dim(dim: usize) -> Self {
        Self {
            hidden: if dim >= 512 { 128 } else { 32 },
            ..Self::default()
        }
    }

    /// Settings used for the isotropic Gaussian benchmark: min-max scaled
    /// inputs, sigmoid units started in saturation (hidden gain 16) and a
    /// small output layer (gain 0.1) so early updates set its direction.
    pub fn saturated(nu: f64, hidden: usize) -> Self {
        Self {
            nu,
            hidden,
            hidden_gain: 16.0,
            output_gain: 0.1,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_nu(self.nu)?;
        if self.hidden == 0 {
            return Err(Error::invalid("hidden", "must be at least 1"));
        }
        if self.extra_layer == Some(0) {
            return Err(Error::invalid("extra_layer", "must be positive when present"));
        }
        if !self.activation.is_valid() {
            return Err(Error::invalid("activation", format!("{:?}", self.activation)));
        }
        for (name, g) in [("hidden_gain", self.hidden_gain), ("output_gain", self.output_gain)] {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::invalid(name, format!("must be positive, got {g}")));
            }
        }
        Ok(())
    }
}

pub(crate) fn check_nu(nu: f64) -> Result<()> {
    if nu > 0.0 && nu < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("nu", format!("must lie in (0, 1), got {nu}")))
    }
}

/// One-class network `ŷ(x) = ⟨w, g(V · enc(x))⟩` with bias `r`.
///
/// The scoring path has no bias vectors; only the optional encoder stack in
/// front of `V` carries them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcnnModel {
    pub encoder: Vec<DenseLayer>,
    /// `V`, `hidden × input`
    pub hidden: Matrix<f64>,
    /// `w`
    pub output: Vec<f64>,
    pub r: f64,
    pub nu: f64,
    pub activation: Activation,
    pub train_hidden: bool,
    pub train_encoder: bool,
    pub regularize_encoder: bool,
}

impl OcnnModel {
    /// Fresh model for `input_dim` features. When `encoder` is given its
    /// layers are copied in front of `V` (after which they are independent
    /// of the autoencoder).
    pub fn init(arch: &OcnnArch, input_dim: usize, encoder: Option<&AutoencoderModel>, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = SeededRng::new(seed, Stream::OcnnInit);
        let mut layers = Vec::new();
        if let Some(ae) = encoder {
            if ae.input_dim() != input_dim {
                return Err(Error::DimensionMismatch {
                    op: "encoder input",
                    left_rows: 1,
                    left_cols: input_dim,
                    right_rows: 1,
                    right_cols: ae.input_dim(),
                });
            }
            layers.extend(ae.encoder.iter().cloned());
        }
        let mut width = layers.last().map_or(input_dim, DenseLayer::outputs);
        if let Some(extra) = arch.extra_layer {
            layers.push(DenseLayer::init(width, extra, Activation::LEAKY, &mut rng)?);
            width = extra;
        }
        let hidden = glorot_from(arch.hidden, width, arch.hidden_gain, &mut rng)?;
        let output = glorot_from::<f64>(1, arch.hidden, arch.output_gain, &mut rng)?.into_values();
        let model = Self {
            encoder: layers,
            hidden,
            output,
            r: 0.0,
            nu: arch.nu,
            activation: arch.activation,
            train_hidden: arch.train_hidden,
            train_encoder: arch.train_encoder,
            regularize_encoder: arch.regularize_encoder,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        check_nu(self.nu)?;
        let chain = check_chain(&self.encoder)?;
        if let Some((_, out)) = chain {
            if out != self.hidden.cols() {
                return Err(Error::DimensionMismatch {
                    op: "encoder to hidden",
                    left_rows: 1,
                    left_cols: out,
                    right_rows: self.hidden.rows(),
                    right_cols: self.hidden.cols(),
                });
            }
        }
        if self.output.len() != self.hidden.rows() {
            return Err(Error::invalid(
                "output",
                format!("{} output weights for {} hidden units", self.output.len(), self.hidden.rows()),
            ));
        }
        if !self.r.is_finite() || !self.output.iter().all(|w| w.is_finite()) {
            return Err(Error::NonFinite("model parameters".into()));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.first().map_or(self.hidden.cols(), DenseLayer::inputs)
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden.rows()
    }

    pub(crate) fn encoder_trainable(&self) -> bool {
        self.train_encoder && !self.encoder.is_empty()
    }

    fn check_input(&self, data: &Dataset) -> Result<()> {
        if data.n_cols() != self.input_dim() && !data.is_empty() {
            return Err(Error::DimensionMismatch {
                op: "ocnn input",
                left_rows: data.n_rows(),
                left_cols: data.n_cols(),
                right_rows: 1,
                right_cols: self.input_dim(),
            });
        }
        Ok(())
    }

    pub(crate) fn scores_of(&self, x: &Matrix<f64>) -> Vec<f64> {
        let features = stack_output(&self.encoder, x);
        let pre = features.mul_nt_kernel(&self.hidden);
        pre.iter_rows()
            .map(|u| u.iter().zip(&self.output).map(|(&z, w)| w * self.activation.eval(z)).sum())
            .collect()
    }

    /// `½‖w‖² + ½‖V‖²_F (+ ½Σ‖Wₗ‖²_F)` over the weights being trained.
    pub fn regularizer(&self) -> f64 {
        let mut reg = 0.5 * dot(&self.output, &self.output);
        if self.train_hidden {
            reg += 0.5 * self.hidden.frobenius_sq();
        }
        if self.encoder_trainable() && self.regularize_encoder {
            reg += 0.5 * self.encoder.iter().map(|l| l.weights.frobenius_sq()).sum::<f64>();
        }
        reg
    }

    /// Trainable parameters flattened: encoder layers (weights then bias,
    /// when trainable), then `V` (when trainable), then `w`.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        if self.encoder_trainable() {
            for l in &self.encoder {
                l.write_params(&mut out);
            }
        }
        if self.train_hidden {
            out.extend_from_slice(self.hidden.as_slice());
        }
        out.extend_from_slice(&self.output);
        out
    }

    pub fn set_params(&mut self, src: &[f64]) {
        let mut at = 0;
        if self.encoder_trainable() {
            for l in &mut self.encoder {
                at += l.read_params(&src[at..]);
            }
        }
        if self.train_hidden {
            let n = self.hidden.rows() * self.hidden.cols();
            self.hidden.as_mut_slice().copy_from_slice(&src[at..at + n]);
            at += n;
        }
        let h = self.output.len();
        self.output.copy_from_slice(&src[at..at + h]);
    }
}

/// `ŷₙ = ⟨w, g(V xₙ)⟩`, after the encoder stack when present.
pub fn forward_scores(model: &OcnnModel, data: &Dataset) -> Result<Vec<f64>> {
    model.check_input(data)?;
    if data.is_empty() {
        return Ok(Vec::new());
    }
    Ok(model.scores_of(data.x()))
}

/// Full objective at bias `r`:
/// `regularizer + (1/ν)(1/N) Σ max(0, r − ŷₙ) − r`.
pub fn ocnn_objective(model: &OcnnModel, data: &Dataset, r: f64) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("objective needs at least one row"));
    }
    let scores = forward_scores(model, data)?;
    Ok(model.regularizer() + quantile::r_objective(&scores, model.nu, r)?)
}

/// Per-instance raw and decision scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    pub raw: Vec<f64>,
    /// `raw − r`; non-negative means normal.
    pub decision: Vec<f64>,
    pub labels: Option<Vec<u8>>,
}

impl ScoreSet {
    pub fn from_decision(raw: Vec<f64>, decision: Vec<f64>, labels: Option<Vec<u8>>) -> Self {
        Self { raw, decision, labels }
    }

    /// 1 for anomalous (`S < 0`), 0 for normal (`S ≥ 0`).
    pub fn predictions(&self) -> Vec<u8> {
        self.decision.iter().map(|&s| u8::from(s < 0.0)).collect()
    }

    /// Orientation consumed by ranking metrics: higher is more anomalous.
    pub fn anomaly_scores(&self) -> Vec<f64> {
        self.decision.iter().map(|s| -s).collect()
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }
}

/// Scores `data` and applies the sign rule `Sₙ = ŷₙ − r ≥ 0 ⇒ normal`.
pub fn decide(model: &OcnnModel, data: &Dataset) -> Result<ScoreSet> {
    let raw = forward_scores(model, data)?;
    let decision = raw.iter().map(|y| y - model.r).collect();
    Ok(ScoreSet {
        raw,
        decision,
        labels: data.labels().map(<[u8]>::to_vec),
    })
}

/// Gradient pieces of the (w, V)-subproblem for one batch.
pub(crate) struct BatchGrad {
    pub loss: f64,
    pub encoder: Vec<LayerGrad>,
    pub hidden: Option<Matrix<f64>>,
    pub output: Vec<f64>,
}

/// Subproblem loss on the batch `x` with bias held at `r`:
/// `regularizer + (1/(ν|B|)) Σ max(0, r − ŷₙ)`, and its subgradient. The
/// hinge contributes nothing when `r − ŷₙ ≤ 0`, including at the kink.
pub(crate) fn batch_grad(model: &OcnnModel, x: &Matrix<f64>, r: f64) -> BatchGrad {
    let n = x.rows();
    let train_enc = model.encoder_trainable();
    let caches: Vec<LayerCache> = if train_enc {
        forward_stack(&model.encoder, x)
    } else {
        Vec::new()
    };
    let frozen_features;
    let features: &Matrix<f64> = if train_enc {
        &caches[caches.len() - 1].out
    } else {
        frozen_features = stack_output(&model.encoder, x);
        &frozen_features
    };
    let pre = features.mul_nt_kernel(&model.hidden);
    let h = model.hidden_dim();
    let g = model.activation;
    let coeff = -1.0 / (model.nu * n as f64);

    let mut hinge = 0.0;
    let mut active = Vec::new();
    for (i, u) in pre.iter_rows().enumerate() {
        let y: f64 = u.iter().zip(&model.output).map(|(&z, w)| w * g.eval(z)).sum();
        let margin = r - y;
        if margin > 0.0 {
            hinge += margin;
            active.push(i);
        }
    }
    let loss = model.regularizer() + hinge / (model.nu * n as f64);

    // w: w + Σ cₙ g(uₙ) over active rows
    let mut d_output = model.output.clone();
    let mut d_pre = Matrix::zeros(active.len(), h);
    for (k, &i) in active.iter().enumerate() {
        let u = pre.row(i);
        let dst = d_pre.row_mut(k);
        for j in 0..h {
            d_output[j] += coeff * g.eval(u[j]);
            dst[j] = coeff * model.output[j] * g.derivative(u[j]);
        }
    }

    let need_features_grad = train_enc;
    let active_features = features.select_rows(&active);
    let d_hidden = model.train_hidden.then(|| {
        let mut d = d_pre.mul_tn_kernel(&active_features);
        d.axpy(1.0, &model.hidden);
        d
    });

    let mut encoder_grads = Vec::new();
    if need_features_grad {
        let mut d_features = Matrix::zeros(n, features.cols());
        let d_active = d_pre.mul_kernel(&model.hidden);
        for (k, &i) in active.iter().enumerate() {
            d_features.row_mut(i).copy_from_slice(d_active.row(k));
        }
        let (mut grads, _) = backward_stack(&model.encoder, x, &caches, d_features);
        if model.regularize_encoder {
            for (g, l) in grads.iter_mut().zip(&model.encoder) {
                g.weights.axpy(1.0, &l.weights);
            }
        }
        encoder_grads = grads;
    }

    BatchGrad {
        loss,
        encoder: encoder_grads,
        hidden: d_hidden,
        output: d_output,
    }
}

/// Subproblem objective with `r` fixed, over all rows of `x`.
pub fn wv_objective(model: &OcnnModel, x: &Matrix<f64>, r: f64) -> f64 {
    let scores = model.scores_of(x);
    let hinge: f64 = scores.iter().map(|y| (r - y).max(0.0)).sum();
    model.regularizer() + hinge / (model.nu * x.rows() as f64)
}

/// Analytic subgradient of [`wv_objective`] in [`OcnnModel::params`] order.
pub fn wv_gradient(model: &OcnnModel, x: &Matrix<f64>, r: f64) -> Vec<f64> {
    let g = batch_grad(model, x, r);
    let mut out = Vec::new();
    for l in &g.encoder {
        l.write(&mut out);
    }
    if let Some(h) = &g.hidden {
        out.extend_from_slice(h.as_slice());
    }
    out.extend_from_slice(&g.output);
    out
}

impl OcnnModel {
    pub(crate) fn apply_grad(&mut self, g: &BatchGrad, lr: f64) {
        for (layer, grad) in self.encoder.iter_mut().zip(&g.encoder) {
            layer.apply_update(grad, lr);
        }
        if let Some(h) = &g.hidden {
            self.hidden.axpy(-lr, h);
        }
        for (w, d) in self.output.iter_mut().zip(&g.output) {
            *w -= lr * d;
        }
    }

    pub(crate) fn params_finite(&self) -> bool {
        self.hidden.all_finite()
            && self.output.iter().all(|w| w.is_finite())
            && self.encoder.iter().all(|l| l.weights.all_finite() && l.bias.iter().all(|b| b.is_finite()))
    }
}
