use std::io::Write;

use serde::{Deserialize, Serialize};

use super::model::{batch_grad, check_nu, OcnnArch, OcnnModel};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, SeededRng, Stream};
use crate::quantile::{self, QuantileSolution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Passes over the data per outer iteration.
    pub inner_epochs: usize,
    pub max_outer_iters: usize,
    pub tol: f64,
    /// `None` runs full-batch descent.
    pub batch_size: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            inner_epochs: 10,
            max_outer_iters: 50,
            tol: 1e-4,
            batch_size: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate", format!("must be positive, got {}", self.learning_rate)));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::invalid("tol", format!("must be positive, got {}", self.tol)));
        }
        if self.max_outer_iters == 0 {
            return Err(Error::invalid("max_outer_iters", "must be at least 1"));
        }
        if self.batch_size == Some(0) {
            return Err(Error::invalid("batch_size", "must be at least 1"));
        }
        Ok(())
    }
}

/// One outer iteration. Row 0 describes the initial weights with `r⁰`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub iteration: usize,
    /// Full objective after the r-update.
    pub objective: f64,
    /// Full objective after the (w, V) step, still at the previous `r`.
    pub objective_before_r: Option<f64>,
    pub r: f64,
    pub fraction_below: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: OcnnModel,
    pub history: Vec<HistoryRow>,
    pub converged: bool,
}

/// Bias update: the ν-quantile of the current scores.
pub fn r_step(scores: &[f64], nu: f64) -> Result<f64> {
    Ok(quantile::nu_quantile(scores, nu)?.r)
}

/// `cfg.inner_epochs` passes of subgradient descent on the (w, V)
/// subproblem with `r` held fixed. Batches are reshuffled every epoch from
/// the seed's shuffle stream.
pub fn wv_step(model: &OcnnModel, data: &Dataset, r: f64, cfg: &TrainConfig) -> Result<OcnnModel> {
    cfg.validate()?;
    model.validate()?;
    if data.n_cols() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            op: "wv_step input",
            left_rows: data.n_rows(),
            left_cols: data.n_cols(),
            right_rows: 1,
            right_cols: model.input_dim(),
        });
    }
    if data.is_empty() {
        return Err(Error::Empty("wv_step needs at least one row"));
    }
    if !r.is_finite() {
        return Err(Error::NonFinite("r".into()));
    }
    let mut out = model.clone();
    let mut rng = SeededRng::new(cfg.seed, Stream::OcnnShuffle);
    descend(&mut out, data.x(), r, cfg, &mut rng)?;
    Ok(out)
}

fn descend(model: &mut OcnnModel, x: &Matrix<f64>, r: f64, cfg: &TrainConfig, rng: &mut SeededRng) -> Result<()> {
    let n = x.rows();
    let batch = cfg.batch_size.unwrap_or(n).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..cfg.inner_epochs {
        if batch < n {
            rng.shuffle(&mut order);
        }
        for chunk in order.chunks(batch) {
            let g = if batch == n {
                batch_grad(model, x, r)
            } else {
                batch_grad(model, &x.select_rows(chunk), r)
            };
            if !g.loss.is_finite() {
                return Err(diverged("inner epoch", epoch + 1));
            }
            model.apply_grad(&g, cfg.learning_rate);
        }
        if !model.params_finite() {
            return Err(diverged("inner epoch", epoch + 1));
        }
    }
    Ok(())
}

fn diverged(stage: &'static str, index: usize) -> Error {
    Error::Divergence {
        stage,
        index,
        history: Vec::new(),
    }
}

fn with_history(err: Error, history: &[HistoryRow]) -> Error {
    match err {
        Error::Divergence { stage, index, .. } => Error::Divergence {
            stage,
            index,
            history: history.to_vec(),
        },
        other => other,
    }
}

/// Initializes a model from `arch` and trains it.
pub fn train(data: &Dataset, arch: &OcnnArch, cfg: &TrainConfig) -> Result<TrainOutput> {
    let model = OcnnModel::init(arch, data.n_cols(), None, cfg.seed)?;
    train_model(model, data, cfg)
}

/// Alternating minimization from a prepared model: `r⁰` is the ν-quantile
/// of the initial scores, then each outer iteration runs [`wv_step`] at the
/// current `r` followed by [`r_step`], until the relative objective change
/// drops to `cfg.tol` or `cfg.max_outer_iters` is reached.
pub fn train_model(mut model: OcnnModel, data: &Dataset, cfg: &TrainConfig) -> Result<TrainOutput> {
    cfg.validate()?;
    model.validate()?;
    check_nu(model.nu)?;
    if data.n_rows() < 2 {
        return Err(Error::invalid("data", format!("training needs at least 2 rows, got {}", data.n_rows())));
    }
    if data.n_cols() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            op: "training input",
            left_rows: data.n_rows(),
            left_cols: data.n_cols(),
            right_rows: 1,
            right_cols: model.input_dim(),
        });
    }
    let x = data.x();
    let mut rng = SeededRng::new(cfg.seed, Stream::OcnnShuffle);
    let mut history = Vec::new();

    let scores = model.scores_of(x);
    let QuantileSolution { r, objective_value, fraction_below } = quantile::nu_quantile(&scores, model.nu)
        .map_err(|e| match e {
            Error::NonFinite(_) => diverged("outer iteration", 0),
            other => other,
        })?;
    model.r = r;
    let mut previous = model.regularizer() + objective_value;
    history.push(HistoryRow {
        iteration: 0,
        objective: previous,
        objective_before_r: None,
        r,
        fraction_below,
    });

    let mut converged = false;
    for it in 1..=cfg.max_outer_iters {
        let r = model.r;
        descend(&mut model, x, r, cfg, &mut rng).map_err(|e| with_history(e, &history))?;
        let scores = model.scores_of(x);
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(with_history(diverged("outer iteration", it), &history));
        }
        let reg = model.regularizer();
        let before = reg + quantile::r_objective_unchecked(&scores, model.nu, model.r);
        let sol = quantile::nu_quantile(&scores, model.nu)?;
        let objective = reg + sol.objective_value;
        if !objective.is_finite() {
            return Err(with_history(diverged("outer iteration", it), &history));
        }
        debug_assert!(objective <= before + 1e-9 * before.abs().max(1.0));
        model.r = sol.r;
        history.push(HistoryRow {
            iteration: it,
            objective,
            objective_before_r: Some(before),
            r: sol.r,
            fraction_below: sol.fraction_below,
        });
        if (objective - previous).abs() <= cfg.tol * previous.abs().max(1.0) {
            converged = true;
            break;
        }
        previous = objective;
    }
    Ok(TrainOutput {
        model,
        history,
        converged,
    })
}

/// Writes the history as `iteration,objective,r,fraction_below,objective_before_r`.
pub fn write_history<W: Write>(out: W, history: &[HistoryRow]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "objective", "r", "fraction_below", "objective_before_r"])?;
    for row in history {
        w.write_record([
            row.iteration.to_string(),
            row.objective.to_string(),
            row.r.to_string(),
            row.fraction_below.to_string(),
            row.objective_before_r.map_or_else(String::new, |v| v.to_string()),
        ])?;
    }
    w.flush()
}
