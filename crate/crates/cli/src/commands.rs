use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ocnn_core::data::{gen_synthetic, load_delimited, write_delimited, Dataset};
use ocnn_core::eval::{self, config_digest, evaluate, multi_seed_eval_par, EvalReport, SeedSummary};
use ocnn_core::ocnn::{write_history, HistoryRow};
use ocnn_core::pipeline::{fit, score, Method, ModelDocument};
use ocnn_core::quantile::{nu_quantile, r_objective};
use ocnn_core::{Error, Matrix, Result, ScoreSet};
use serde::Serialize;

use crate::config::{invalid, FileConfig};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(io_err(path))
}

/// Label column to split off: the configured one, else a header cell named
/// `label` when present.
fn label_column(path: &Path, cfg: &FileConfig) -> Result<Option<String>> {
    if let Some(name) = &cfg.label_col {
        return Ok(Some(name.clone()));
    }
    let file = File::open(path).map_err(io_err(path))?;
    let mut header = String::new();
    BufReader::new(file).read_line(&mut header).map_err(io_err(path))?;
    Ok(header.trim_end().split(',').any(|c| c.trim() == "label").then(|| "label".to_string()))
}

pub fn read_data(path: &Path, cfg: &FileConfig) -> Result<Dataset> {
    let label = label_column(path, cfg)?;
    load_delimited(path, true, label.as_deref())
}

pub fn synth(cfg: &FileConfig, out_dir: &Path) -> Result<()> {
    let spec = cfg.synthetic()?;
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let (train, test) = gen_synthetic(&spec, cfg.seed())?;
    for (name, data) in [("train.csv", &train), ("test.csv", &test)] {
        let path = out_dir.join(name);
        let mut w = create(&path)?;
        write_delimited(&mut w, data).map_err(io_err(&path))?;
        w.flush().map_err(io_err(&path))?;
    }
    println!(
        "train {}x{} and test {}x{} written to {} (seed {})",
        train.n_rows(),
        train.n_cols(),
        test.n_rows(),
        test.n_cols(),
        out_dir.display(),
        cfg.seed()
    );
    Ok(())
}

pub fn default_history_path(model: &Path) -> PathBuf {
    model.with_extension("history.csv")
}

fn save_history(path: &Path, history: &[HistoryRow]) -> Result<()> {
    let mut w = create(path)?;
    write_history(&mut w, history).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn train(cfg: &FileConfig, input: &Path, model_out: &Path, history_out: &Path) -> Result<()> {
    let pipeline = cfg.pipeline()?;
    let data = read_data(input, cfg)?;
    let fitted = match fit(&data, &pipeline) {
        Ok(f) => f,
        Err(Error::Divergence { stage, index, history }) => {
            save_history(history_out, &history)?;
            return Err(Error::Divergence { stage, index, history });
        }
        Err(e) => return Err(e),
    };
    fitted.document.save(model_out)?;
    let is_network = matches!(pipeline.method, Method::Ocnn | Method::FrozenOcsvm);
    if is_network {
        save_history(history_out, &fitted.history)?;
    }
    println!(
        "{} trained on {}x{}; threshold {}; model written to {}",
        pipeline.method,
        data.n_rows(),
        data.n_cols(),
        fitted.document.threshold,
        model_out.display()
    );
    if is_network {
        println!("history ({} iterations) written to {}", fitted.history.len().saturating_sub(1), history_out.display());
    }
    Ok(())
}

fn write_scores<W: Write>(out: W, scores: &ScoreSet) -> std::io::Result<()> {
    let mut w = BufWriter::new(out);
    let labeled = scores.labels.is_some();
    write!(w, "raw,decision,prediction")?;
    if labeled {
        write!(w, ",label")?;
    }
    writeln!(w)?;
    let predictions = scores.predictions();
    for i in 0..scores.len() {
        write!(w, "{},{},{}", scores.raw[i], scores.decision[i], predictions[i])?;
        if let Some(l) = &scores.labels {
            write!(w, ",{}", l[i])?;
        }
        writeln!(w)?;
    }
    w.flush()
}

pub fn score_cmd(cfg: &FileConfig, model: &Path, input: &Path, out: &Path) -> Result<()> {
    let doc = ModelDocument::load(model)?;
    let data = read_data(input, cfg)?;
    let scores = score(&doc, &data)?;
    let file = File::create(out).map_err(io_err(out))?;
    write_scores(file, &scores).map_err(io_err(out))?;
    let anomalous = scores.predictions().iter().filter(|&&p| p == 1).count();
    println!("{} rows scored, {} flagged anomalous; written to {}", scores.len(), anomalous, out.display());
    Ok(())
}

/// Reads a score table back; requires the `decision` and `label` columns.
pub fn read_scores(path: &Path) -> Result<ScoreSet> {
    let cfg = FileConfig {
        label_col: Some("label".into()),
        ..FileConfig::default()
    };
    let data = read_data(path, &cfg)?;
    let names = data.feature_names().unwrap_or_default();
    let col = |name: &str| {
        names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| invalid("scores", format!("{} has no `{name}` column", path.display())))
    };
    let (raw, decision) = (col("raw")?, col("decision")?);
    let x: &Matrix<f64> = data.x();
    Ok(ScoreSet::from_decision(
        x.iter_rows().map(|r| r[raw]).collect(),
        x.iter_rows().map(|r| r[decision]).collect(),
        data.labels().map(<[u8]>::to_vec),
    ))
}

#[derive(Serialize)]
struct MultiSeedDocument {
    method: String,
    orientation: String,
    config_digest: String,
    multi_seed: SeedSummary,
    reports: Vec<EvalReport>,
}

pub fn eval_scores(cfg: &FileConfig, input: &Path, out: &Path, histogram_out: Option<&Path>) -> Result<()> {
    let scores = read_scores(input)?;
    let digest = config_digest(&cfg.canonical());
    let mut report = evaluate(&scores, cfg.bins()?, cfg.seed, digest)?;
    if let Some(m) = &cfg.method {
        report.orientation = m.parse::<Method>()?.orientation().to_string();
    }
    write_text(out, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    if let Some(path) = histogram_out {
        let mut w = create(path)?;
        eval::write_histogram(&mut w, &report.histogram).map_err(io_err(path))?;
        w.flush().map_err(io_err(path))?;
    }
    println!(
        "AUC {:.6} over {} normal / {} anomalous; all anomalies negative: {}",
        report.auc, report.n_normal, report.n_anomalous, report.anomalies_all_negative
    );
    Ok(())
}

/// Full synthetic pipeline per seed: generate, fit on the normal split,
/// score the pooled data.
pub fn eval_seeds(cfg: &FileConfig, seeds: &[u64], out: &Path) -> Result<()> {
    let spec = cfg.synthetic()?;
    let base = cfg.pipeline()?;
    let bins = cfg.bins()?;
    let digest = config_digest(&cfg.canonical());
    let runner = |seed: u64| -> Result<EvalReport> {
        let (train, test) = gen_synthetic(&spec, seed)?;
        let mut p = base.clone();
        p.train.seed = seed;
        let fitted = fit(&train, &p)?;
        let scores = score(&fitted.document, &train.concat(&test)?)?;
        let mut r = evaluate(&scores, bins, Some(seed), digest.clone())?;
        r.orientation = p.method.orientation().to_string();
        Ok(r)
    };
    let result = multi_seed_eval_par(runner, seeds)?;
    let doc = MultiSeedDocument {
        method: base.method.to_string(),
        orientation: base.method.orientation().to_string(),
        config_digest: digest,
        multi_seed: result.summary,
        reports: result.reports,
    };
    write_text(out, &(serde_json::to_string_pretty(&doc)? + "\n"))?;
    println!(
        "{} over {} seeds: mean AUC {:.6}, std {:.6}",
        doc.method,
        seeds.len(),
        doc.multi_seed.mean_auc,
        doc.multi_seed.std_auc
    );
    Ok(())
}

/// `a..b` (inclusive) or a comma list.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let bad = || invalid("seeds", format!("expected `a..b` or a comma list, got `{text}`"));
    if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if b < a {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    text.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
}

/// The nine-point example: scores 1..9, ν = 0.33.
pub const EXAMPLE_TABLE: [(f64, f64); 9] = [
    (1.0, -1.00),
    (2.0, -1.67),
    (3.0, -1.99),
    (4.0, -1.98),
    (5.0, -1.63),
    (6.0, -0.94),
    (7.0, 0.07),
    (8.0, 1.43),
    (9.0, 3.12),
];

/// Prints one line per row; returns whether every row passed.
pub fn table_check(tol: f64) -> Result<bool> {
    if !(tol >= 0.0 && tol.is_finite()) {
        return Err(invalid("tol", format!("must be non-negative, got {tol}")));
    }
    let scores: Vec<f64> = (1..=9).map(f64::from).collect();
    let nu = 0.33;
    let mut all = true;
    for (r, printed) in EXAMPLE_TABLE {
        let f = r_objective(&scores, nu, r)?;
        let pass = (f - printed).abs() <= tol;
        all &= pass;
        println!(
            "r={r} f={f:.6} expected={printed:.2} diff={:.2e} {}",
            (f - printed).abs(),
            if pass { "PASS" } else { "FAIL" }
        );
    }
    let q = nu_quantile(&scores, nu)?;
    let pass = q.r == 3.0;
    all &= pass;
    println!("quantile r={} f={:.6} {}", q.r, q.objective_value, if pass { "PASS" } else { "FAIL" });
    Ok(all)
}
