//! Fit and score any supported detector behind one interface, with the
//! preprocessing and decision threshold stored alongside the model.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autoencoder::{ae_train, encode, reconstruction_errors, AeArch, AeConfig, AutoencoderModel};
use crate::baselines::{
    default_bandwidth_grid, frozen_hidden_default, iforest_fit, iforest_score_all, kde_fit, kde_score_all,
    IsolationForestModel, KdeModel, DEFAULT_FOLDS, DEFAULT_SUBSAMPLE, DEFAULT_TREES, FROZEN_GAIN,
};
use crate::data::{Dataset, FittedScaler, MinMaxRecord, Scaling};
use crate::error::{Error, Result};
use crate::layer::DenseLayer;
use crate::numerics::{Activation, Matrix};
use crate::ocnn::{decide, train_model, HistoryRow, OcnnArch, OcnnModel, ScoreSet, TrainConfig};
use crate::quantile::nu_quantile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Ocnn,
    FrozenOcsvm,
    Kde,
    Iforest,
    AeRecon,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Ocnn, Method::FrozenOcsvm, Method::Kde, Method::Iforest, Method::AeRecon];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ocnn => "ocnn",
            Method::FrozenOcsvm => "frozen-ocsvm",
            Method::Kde => "kde",
            Method::Iforest => "iforest",
            Method::AeRecon => "ae-recon",
        }
    }

    /// The native score and how the decision score is derived from it.
    pub fn orientation(self) -> &'static str {
        match self {
            Method::Ocnn | Method::FrozenOcsvm => "-(yhat - r)",
            Method::Kde => "-(log_density - t)",
            Method::Iforest => "isolation_score + t",
            Method::AeRecon => "reconstruction_error + t",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid("method", format!("unknown method `{s}`")))
    }
}

/// Autoencoder pre-training: `code_sizes` are the widths after the input,
/// ending with the code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeSettings {
    pub code_sizes: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: Option<usize>,
    pub momentum: f64,
}

impl Default for AeSettings {
    fn default() -> Self {
        Self {
            code_sizes: vec![32, 16],
            epochs: 50,
            learning_rate: 0.01,
            batch_size: Some(32),
            momentum: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub method: Method,
    pub scale: Scaling,
    pub nu: f64,
    /// `None` picks by input width.
    pub hidden: Option<usize>,
    pub activation: Activation,
    pub hidden_gain: f64,
    pub output_gain: f64,
    pub extra_layer: Option<usize>,
    pub train_encoder: bool,
    pub regularize_encoder: bool,
    /// Append an affine layer mapping the training codes onto `[0, 1]`.
    pub rescale_code: bool,
    /// Pre-train an autoencoder and place its encoder in front of the
    /// network (required for `ae-recon`, optional for `ocnn`).
    pub autoencoder: Option<AeSettings>,
    pub train: TrainConfig,
    pub kde_folds: usize,
    pub trees: usize,
    pub subsample: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let arch = OcnnArch::saturated(0.1, 32);
        Self {
            method: Method::Ocnn,
            scale: Scaling::MinMax,
            nu: arch.nu,
            hidden: None,
            activation: arch.activation,
            hidden_gain: arch.hidden_gain,
            output_gain: arch.output_gain,
            extra_layer: None,
            train_encoder: true,
            regularize_encoder: true,
            rescale_code: true,
            autoencoder: None,
            train: TrainConfig::default(),
            kde_folds: DEFAULT_FOLDS,
            trees: DEFAULT_TREES,
            subsample: DEFAULT_SUBSAMPLE,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return Err(Error::invalid("nu", format!("must lie in (0, 1), got {}", self.nu)));
        }
        if self.hidden == Some(0) {
            return Err(Error::invalid("hidden", "must be at least 1"));
        }
        self.train.validate()?;
        if let Some(ae) = &self.autoencoder {
            if ae.code_sizes.is_empty() || ae.code_sizes.contains(&0) {
                return Err(Error::invalid("autoencoder.code_sizes", "need at least one positive width"));
            }
            self.ae_config(ae).validate()?;
        }
        if self.trees == 0 {
            return Err(Error::invalid("trees", "must be at least 1"));
        }
        if self.subsample < 2 {
            return Err(Error::invalid("subsample", "must be at least 2"));
        }
        if self.kde_folds < 2 {
            return Err(Error::invalid("kde_folds", "must be at least 2"));
        }
        Ok(())
    }

    fn ae_config(&self, ae: &AeSettings) -> AeConfig {
        AeConfig {
            epochs: ae.epochs,
            learning_rate: ae.learning_rate,
            batch_size: ae.batch_size,
            momentum: ae.momentum,
            seed: self.train.seed,
        }
    }

    fn arch(&self, features: usize) -> OcnnArch {
        OcnnArch {
            nu: self.nu,
            hidden: self.hidden.unwrap_or_else(|| OcnnArch::for_input_dim(features).hidden),
            activation: self.activation,
            hidden_gain: self.hidden_gain,
            output_gain: self.output_gain,
            extra_layer: self.extra_layer,
            train_hidden: true,
            train_encoder: self.train_encoder,
            regularize_encoder: self.regularize_encoder,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Detector {
    Ocnn(OcnnModel),
    Kde(KdeModel),
    IsolationForest(IsolationForestModel),
    AeRecon(AutoencoderModel),
}

pub const DOCUMENT_FORMAT: &str = "ocnn-model";
pub const DOCUMENT_VERSION: u32 = 1;

/// Everything needed to score new data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format: String,
    pub version: u32,
    pub method: Method,
    pub scaler: FittedScaler,
    /// Subtracted from the normality score to give the decision score.
    pub threshold: f64,
    pub detector: Detector,
}

impl ModelDocument {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let head: serde_json::Value = serde_json::from_str(text)?;
        let format = head.get("format").and_then(|v| v.as_str());
        if format != Some(DOCUMENT_FORMAT) {
            return Err(Error::Format(format!("expected format `{DOCUMENT_FORMAT}`, found {format:?}")));
        }
        let version = head.get("version").and_then(|v| v.as_u64());
        if version != Some(u64::from(DOCUMENT_VERSION)) {
            return Err(Error::Format(format!("unsupported version {version:?}")));
        }
        Ok(serde_json::from_value(head)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Debug, Clone)]
pub struct Fitted {
    pub document: ModelDocument,
    /// Outer-iteration history for the network methods, empty otherwise.
    pub history: Vec<HistoryRow>,
}

/// Higher means more normal.
fn normality(detector: &Detector, data: &Dataset) -> Result<(Vec<f64>, Vec<f64>)> {
    Ok(match detector {
        Detector::Ocnn(m) => {
            let s = decide(m, data)?;
            (s.raw.clone(), s.raw)
        }
        Detector::Kde(m) => {
            let raw = kde_score_all(m, data)?;
            (raw.clone(), raw)
        }
        Detector::IsolationForest(m) => {
            let raw = iforest_score_all(m, data)?;
            let n = raw.iter().map(|s| -s).collect();
            (raw, n)
        }
        Detector::AeRecon(m) => {
            let raw = reconstruction_errors(m, data)?;
            let n = raw.iter().map(|s| -s).collect();
            (raw, n)
        }
    })
}

/// Linear layer computing `(z − min) / (max − min)` per coordinate, with
/// constant coordinates sent to 0.
fn minmax_layer(record: &MinMaxRecord) -> Result<DenseLayer> {
    let k = record.mins.len();
    let mut weights = Matrix::zeros(k, k);
    let mut bias = vec![0.0; k];
    for j in 0..k {
        let span = record.maxs[j] - record.mins[j];
        if span > 0.0 {
            weights.set(j, j, 1.0 / span);
            bias[j] = -record.mins[j] / span;
        }
    }
    DenseLayer::new(weights, bias, Activation::Linear)
}

fn pretrain(train: &Dataset, cfg: &PipelineConfig, ae: &AeSettings) -> Result<AutoencoderModel> {
    let mut sizes = vec![train.n_cols()];
    sizes.extend(&ae.code_sizes);
    Ok(ae_train(train, &AeArch::new(sizes), &cfg.ae_config(ae))?.model)
}

/// Fits `cfg.method` on `train` (preprocessed by `cfg.scale`). Threshold
/// for the non-network methods is the ν-quantile of the training normality
/// scores, mirroring how the network's bias is set.
pub fn fit(train: &Dataset, cfg: &PipelineConfig) -> Result<Fitted> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training data"));
    }
    let scaler = cfg.scale.fit(train)?;
    let x = scaler.apply(train)?;
    let seed = cfg.train.seed;
    let mut history = Vec::new();
    let detector = match cfg.method {
        Method::Ocnn => {
            let mut encoder = cfg.autoencoder.as_ref().map(|ae| pretrain(&x, cfg, ae)).transpose()?;
            if let (Some(ae), true) = (encoder.as_mut(), cfg.rescale_code) {
                let codes = Dataset::unlabeled(encode(ae, &x)?);
                ae.encoder.push(minmax_layer(&MinMaxRecord::fit(&codes)?)?);
            }
            let features = encoder.as_ref().map_or(x.n_cols(), AutoencoderModel::code_dim);
            let model = OcnnModel::init(&cfg.arch(features), x.n_cols(), encoder.as_ref(), seed)?;
            let out = train_model(model, &x, &cfg.train)?;
            history = out.history;
            Detector::Ocnn(out.model)
        }
        Method::FrozenOcsvm => {
            let arch = OcnnArch {
                hidden: cfg.hidden.unwrap_or_else(|| frozen_hidden_default(x.n_cols())),
                hidden_gain: FROZEN_GAIN,
                output_gain: 1.0,
                train_hidden: false,
                extra_layer: None,
                ..cfg.arch(x.n_cols())
            };
            let model = OcnnModel::init(&arch, x.n_cols(), None, seed)?;
            let out = train_model(model, &x, &cfg.train)?;
            history = out.history;
            Detector::Ocnn(out.model)
        }
        Method::Kde => Detector::Kde(kde_fit(&x, &default_bandwidth_grid(), cfg.kde_folds, seed)?),
        Method::Iforest => Detector::IsolationForest(iforest_fit(&x, cfg.trees, cfg.subsample, seed)?),
        Method::AeRecon => {
            let ae = cfg.autoencoder.clone().unwrap_or_default();
            Detector::AeRecon(pretrain(&x, cfg, &ae)?)
        }
    };
    let threshold = match &detector {
        Detector::Ocnn(m) => m.r,
        other => nu_quantile(&normality(other, &x)?.1, cfg.nu)?.r,
    };
    Ok(Fitted {
        document: ModelDocument {
            format: DOCUMENT_FORMAT.into(),
            version: DOCUMENT_VERSION,
            method: cfg.method,
            scaler,
            threshold,
            detector,
        },
        history,
    })
}

/// Raw native scores and decision scores (`normality − threshold`, so
/// `≥ 0` means normal) for every row of `data`.
pub fn score(doc: &ModelDocument, data: &Dataset) -> Result<ScoreSet> {
    let labels = data.labels().map(<[u8]>::to_vec);
    if data.is_empty() {
        return Ok(ScoreSet::from_decision(Vec::new(), Vec::new(), labels));
    }
    let x = doc.scaler.apply(data)?;
    let (raw, normal) = normality(&doc.detector, &x)?;
    let decision = normal.iter().map(|n| n - doc.threshold).collect();
    Ok(ScoreSet::from_decision(raw, decision, labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_synthetic, SyntheticSpec};

    fn small() -> (Dataset, Dataset) {
        let spec = SyntheticSpec { n_normal: 60, n_anomalous: 6, dim: 8, ..SyntheticSpec::default() };
        gen_synthetic(&spec, 3).unwrap()
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("svm".parse::<Method>().is_err());
    }

    #[test]
    fn every_method_fits_and_round_trips() {
        let (train, test) = small();
        for method in Method::ALL {
            let cfg = PipelineConfig {
                method,
                trees: 20,
                train: TrainConfig { max_outer_iters: 3, ..TrainConfig::default() },
                autoencoder: (method == Method::AeRecon).then(|| AeSettings { epochs: 3, code_sizes: vec![4], ..AeSettings::default() }),
                ..PipelineConfig::default()
            };
            let fitted = fit(&train, &cfg).unwrap();
            let text = fitted.document.to_json().unwrap();
            let back = ModelDocument::from_json(&text).unwrap();
            assert_eq!(back, fitted.document, "{method}");
            let a = score(&fitted.document, &test).unwrap();
            let b = score(&back, &test).unwrap();
            assert_eq!(a, b);
            let on_train = score(&fitted.document, &train).unwrap();
            let below = on_train.decision.iter().filter(|&&s| s < 0.0).count() as f64 / 60.0;
            assert!((below - cfg.nu).abs() <= 1.0 / 60.0 + 1e-12, "{method}: {below}");
        }
    }

    #[test]
    fn rejects_foreign_documents() {
        assert!(matches!(ModelDocument::from_json("{\"format\":\"x\",\"version\":1}"), Err(Error::Format(_))));
        assert!(matches!(
            ModelDocument::from_json("{\"format\":\"ocnn-model\",\"version\":9}"),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn frozen_marks_hidden_untrainable() {
        let (train, _) = small();
        let cfg = PipelineConfig { method: Method::FrozenOcsvm, ..PipelineConfig::default() };
        match fit(&train, &cfg).unwrap().document.detector {
            Detector::Ocnn(m) => assert!(!m.train_hidden),
            other => panic!("unexpected {other:?}"),
        }
    }
}
