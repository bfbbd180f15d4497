use std::path::Path;

use ocnn_core::data::{Scaling, SyntheticSpec};
use ocnn_core::pipeline::{AeSettings, Method, PipelineConfig};
use ocnn_core::{Activation, Error, Result};
use serde::{Deserialize, Serialize};

/// Flat key/value run manifest. Every key is optional; flags override it
/// and built-in defaults fill whatever is left.
///
/// ```toml
/// method = "ocnn"          # ocnn | frozen-ocsvm | kde | iforest | ae-recon
/// nu = 0.1
/// hidden = 32              # default: 128 for 512-wide inputs, else 32
/// activation = "sigmoid"   # linear | sigmoid | relu | leaky_relu[:alpha]
/// hidden_gain = 16.0
/// output_gain = 0.1
/// extra_layer = 0          # width of an optional layer before V, 0 = none
/// scale = "minmax"         # none | minmax | l1gcn
/// lr = 0.001
/// inner_epochs = 10
/// max_iters = 50
/// tol = 1e-4
/// batch = 0                # 0 = full batch
/// seed = 0
/// ae_codes = [32, 16]      # autoencoder widths after the input; [] = none
/// epochs = 50              # autoencoder epochs
/// ae_lr = 0.01
/// train_encoder = true
/// regularize_encoder = true
/// rescale_code = true
/// trees = 100
/// subsample = 256
/// kde_folds = 5
/// n_normal = 190
/// n_anomalous = 10
/// dim = 512
/// sigma_normal = 2.0
/// sigma_anomalous = 10.0
/// bins = 20
/// label_col = "label"
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub method: Option<String>,
    pub nu: Option<f64>,
    pub hidden: Option<usize>,
    pub activation: Option<String>,
    pub hidden_gain: Option<f64>,
    pub output_gain: Option<f64>,
    pub extra_layer: Option<usize>,
    pub scale: Option<String>,
    pub lr: Option<f64>,
    pub inner_epochs: Option<usize>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub batch: Option<usize>,
    pub seed: Option<u64>,
    pub ae_codes: Option<Vec<usize>>,
    pub epochs: Option<usize>,
    pub ae_lr: Option<f64>,
    pub train_encoder: Option<bool>,
    pub regularize_encoder: Option<bool>,
    pub rescale_code: Option<bool>,
    pub trees: Option<usize>,
    pub subsample: Option<usize>,
    pub kde_folds: Option<usize>,
    pub n_normal: Option<usize>,
    pub n_anomalous: Option<usize>,
    pub dim: Option<usize>,
    pub sigma_normal: Option<f64>,
    pub sigma_anomalous: Option<f64>,
    pub bins: Option<usize>,
    pub label_col: Option<String>,
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($field:ident),+ $(,)?) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field.clone(); } )+
    };
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        toml::from_str(&text).map_err(|e| Error::InvalidParameter {
            name: "config",
            reason: format!("{}: {}", path.display(), e.message()),
        })
    }

    /// Values from `top` win.
    pub fn overlay(mut self, top: &FileConfig) -> Self {
        overlay!(
            self, top, method, nu, hidden, activation, hidden_gain, output_gain, extra_layer, scale, lr,
            inner_epochs, max_iters, tol, batch, seed, ae_codes, epochs, ae_lr, train_encoder,
            regularize_encoder, rescale_code, trees, subsample, kde_folds, n_normal, n_anomalous, dim,
            sigma_normal, sigma_anomalous, bins, label_col,
        );
        self
    }

    /// Canonical text of the effective settings, for digests.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn bins(&self) -> Result<usize> {
        let bins = self.bins.unwrap_or(ocnn_core::eval::DEFAULT_BINS);
        if bins == 0 {
            return Err(invalid("bins", "must be at least 1"));
        }
        Ok(bins)
    }

    pub fn synthetic(&self) -> Result<SyntheticSpec> {
        let d = SyntheticSpec::default();
        let spec = SyntheticSpec {
            n_normal: self.n_normal.unwrap_or(d.n_normal),
            n_anomalous: self.n_anomalous.unwrap_or(d.n_anomalous),
            dim: self.dim.unwrap_or(d.dim),
            sigma_normal: self.sigma_normal.unwrap_or(d.sigma_normal),
            sigma_anomalous: self.sigma_anomalous.unwrap_or(d.sigma_anomalous),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn pipeline(&self) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::default();
        if let Some(m) = &self.method {
            cfg.method = m.parse::<Method>()?;
        }
        if let Some(s) = &self.scale {
            cfg.scale = Scaling::parse(s).ok_or_else(|| invalid("scale", format!("unknown scaling `{s}`")))?;
        }
        if let Some(a) = &self.activation {
            cfg.activation =
                Activation::parse(a).ok_or_else(|| invalid("activation", format!("unknown activation `{a}`")))?;
        }
        cfg.nu = self.nu.unwrap_or(cfg.nu);
        cfg.hidden = self.hidden.or(cfg.hidden);
        cfg.hidden_gain = self.hidden_gain.unwrap_or(cfg.hidden_gain);
        cfg.output_gain = self.output_gain.unwrap_or(cfg.output_gain);
        cfg.extra_layer = self.extra_layer.filter(|&w| w > 0);
        cfg.train_encoder = self.train_encoder.unwrap_or(cfg.train_encoder);
        cfg.regularize_encoder = self.regularize_encoder.unwrap_or(cfg.regularize_encoder);
        cfg.rescale_code = self.rescale_code.unwrap_or(cfg.rescale_code);
        cfg.trees = self.trees.unwrap_or(cfg.trees);
        cfg.subsample = self.subsample.unwrap_or(cfg.subsample);
        cfg.kde_folds = self.kde_folds.unwrap_or(cfg.kde_folds);

        let t = &mut cfg.train;
        t.learning_rate = self.lr.unwrap_or(t.learning_rate);
        t.inner_epochs = self.inner_epochs.unwrap_or(t.inner_epochs);
        t.max_outer_iters = self.max_iters.unwrap_or(t.max_outer_iters);
        t.tol = self.tol.unwrap_or(t.tol);
        t.batch_size = self.batch.filter(|&b| b > 0);
        t.seed = self.seed();

        let codes = self.ae_codes.clone().unwrap_or_default();
        if !codes.is_empty() || cfg.method == Method::AeRecon {
            let d = AeSettings::default();
            cfg.autoencoder = Some(AeSettings {
                code_sizes: if codes.is_empty() { d.code_sizes } else { codes },
                epochs: self.epochs.unwrap_or(d.epochs),
                learning_rate: self.ae_lr.unwrap_or(d.learning_rate),
                ..d
            });
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
