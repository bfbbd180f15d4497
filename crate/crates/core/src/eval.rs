//! Ranking metrics, score histograms and run reports.

use std::cmp::Ordering;
use std::io::Write;

use num_traits::Float;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::ANOMALOUS;
use crate::error::{Error, Result};
use crate::ocnn::ScoreSet;

fn class_counts(labels: &[u8]) -> (usize, usize) {
    let anomalous = labels.iter().filter(|&&l| l == ANOMALOUS).count();
    (labels.len() - anomalous, anomalous)
}

/// Area under the ROC curve for `scores` where higher means more anomalous:
/// the probability that an anomaly outscores a normal point, ties counted
/// one half. Computed from midranks.
pub fn roc_auc<T: Float>(scores: &[T], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::invalid(
            "labels",
            format!("{} labels for {} scores", labels.len(), scores.len()),
        ));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("score".into()));
    }
    let (n_normal, n_anomalous) = class_counts(labels);
    if n_normal == 0 || n_anomalous == 0 {
        return Err(Error::invalid("labels", "both classes must be present"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));
    // ranks doubled so midranks stay integral
    let mut rank_sum2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let mid2 = (i + 1 + j) as u128;
        let anomalies = order[i..j].iter().filter(|&&k| labels[k] == ANOMALOUS).count() as u128;
        rank_sum2 += mid2 * anomalies;
        i = j;
    }
    let na = n_anomalous as u128;
    let u2 = rank_sum2 - na * (na + 1);
    Ok(u2 as f64 / (2.0 * n_anomalous as f64 * n_normal as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count_normal: usize,
    pub count_anomalous: usize,
}

/// Equal-width bins over `[min, max]`, the maximum landing in the last bin.
/// Unlabeled scores are counted as normal.
pub fn histogram(scores: &[f64], labels: Option<&[u8]>, bins: usize) -> Result<Vec<HistogramBin>> {
    if bins == 0 {
        return Err(Error::invalid("bins", "must be at least 1"));
    }
    if scores.is_empty() {
        return Err(Error::Empty("histogram needs scores"));
    }
    if let Some(l) = labels {
        if l.len() != scores.len() {
            return Err(Error::invalid("labels", format!("{} labels for {} scores", l.len(), scores.len())));
        }
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("score".into()));
    }
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|b| HistogramBin {
            lo: lo + width * b as f64,
            hi: if b + 1 == bins { hi } else { lo + width * (b + 1) as f64 },
            count_normal: 0,
            count_anomalous: 0,
        })
        .collect();
    for (i, &s) in scores.iter().enumerate() {
        let b = if width > 0.0 {
            (((s - lo) / width) as usize).min(bins - 1)
        } else {
            0
        };
        if labels.is_some_and(|l| l[i] == ANOMALOUS) {
            out[b].count_anomalous += 1;
        } else {
            out[b].count_normal += 1;
        }
    }
    Ok(out)
}

pub fn write_histogram<W: Write>(out: W, bins: &[HistogramBin]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bin_lo", "bin_hi", "count_normal", "count_anomalous"])?;
    for b in bins {
        w.write_record([
            b.lo.to_string(),
            b.hi.to_string(),
            b.count_normal.to_string(),
            b.count_anomalous.to_string(),
        ])?;
    }
    w.flush()
}

/// Hex SHA-256 of a configuration's canonical text.
pub fn config_digest(canonical: &str) -> String {
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seeds: Vec<u64>,
    pub aucs: Vec<f64>,
    pub mean_auc: f64,
    /// Population standard deviation.
    pub std_auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub auc: f64,
    pub n_normal: usize,
    pub n_anomalous: usize,
    /// Which quantity the AUC ranked by, higher meaning more anomalous.
    pub orientation: String,
    pub histogram: Vec<HistogramBin>,
    /// Every labeled anomaly has a negative decision score.
    pub anomalies_all_negative: bool,
    pub seed: Option<u64>,
    pub config_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multi_seed: Option<SeedSummary>,
}

pub const DEFAULT_BINS: usize = 20;

/// Report for a labeled score set. The AUC ranks by `−S`.
pub fn evaluate(scores: &ScoreSet, bins: usize, seed: Option<u64>, config_digest: String) -> Result<EvalReport> {
    let labels = scores
        .labels
        .as_deref()
        .ok_or_else(|| Error::invalid("labels", "evaluation needs labeled scores"))?;
    let auc = roc_auc(&scores.anomaly_scores(), labels)?;
    let (n_normal, n_anomalous) = class_counts(labels);
    let histogram = histogram(&scores.decision, Some(labels), bins)?;
    let anomalies_all_negative = scores
        .decision
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l == ANOMALOUS)
        .all(|(&s, _)| s < 0.0);
    Ok(EvalReport {
        auc,
        n_normal,
        n_anomalous,
        orientation: "negated decision score".into(),
        histogram,
        anomalies_all_negative,
        seed,
        config_digest,
        multi_seed: None,
    })
}

#[derive(Debug, Clone)]
pub struct MultiSeedResult {
    pub summary: SeedSummary,
    pub reports: Vec<EvalReport>,
}

fn summarize(seeds: &[u64], reports: Vec<EvalReport>) -> MultiSeedResult {
    let aucs: Vec<f64> = reports.iter().map(|r| r.auc).collect();
    let n = aucs.len() as f64;
    let mean = aucs.iter().sum::<f64>() / n;
    let var = aucs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    MultiSeedResult {
        summary: SeedSummary {
            seeds: seeds.to_vec(),
            aucs,
            mean_auc: mean,
            std_auc: var.sqrt(),
        },
        reports,
    }
}

fn check_seeds(seeds: &[u64]) -> Result<()> {
    if seeds.len() < 2 {
        return Err(Error::invalid("seeds", format!("need at least 2 seeds, got {}", seeds.len())));
    }
    Ok(())
}

/// Runs `runner` once per seed, in order, and aggregates the AUCs.
pub fn multi_seed_eval<F>(runner: F, seeds: &[u64]) -> Result<MultiSeedResult>
where
    F: Fn(u64) -> Result<EvalReport>,
{
    check_seeds(seeds)?;
    let reports = seeds
        .iter()
        .map(|&s| runner(s).map_err(|e| Error::Seed { seed: s, source: Box::new(e) }))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(seeds, reports))
}

/// As [`multi_seed_eval`] with seeds run concurrently; results are merged
/// in seed order, so the output matches the sequential version.
pub fn multi_seed_eval_par<F>(runner: F, seeds: &[u64]) -> Result<MultiSeedResult>
where
    F: Fn(u64) -> Result<EvalReport> + Sync,
{
    check_seeds(seeds)?;
    let results: Vec<Result<EvalReport>> = seeds
        .par_iter()
        .map(|&s| runner(s).map_err(|e| Error::Seed { seed: s, source: Box::new(e) }))
        .collect();
    let reports = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(summarize(seeds, reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{SeededRng, Stream};
    use proptest::prelude::*;

    fn pairwise(scores: &[f64], labels: &[u8]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &a) in scores.iter().enumerate() {
            for (j, &b) in scores.iter().enumerate() {
                if labels[i] == 1 && labels[j] == 0 {
                    pairs += 1.0;
                    if a > b {
                        wins += 1.0;
                    } else if a == b {
                        wins += 0.5;
                    }
                }
            }
        }
        wins / pairs
    }

    fn report(auc: f64) -> EvalReport {
        EvalReport {
            auc,
            n_normal: 1,
            n_anomalous: 1,
            orientation: String::new(),
            histogram: Vec::new(),
            anomalies_all_negative: true,
            seed: None,
            config_digest: String::new(),
            multi_seed: None,
        }
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.5; 6], &[1, 0, 1, 0, 0, 0]).unwrap(), 0.5);
        assert!(roc_auc(&[0.1, 0.2], &[0, 0]).is_err());
        assert!(roc_auc(&[0.1], &[0, 1]).is_err());
    }

    #[test]
    fn auc_matches_pairwise() {
        let mut rng = SeededRng::new(1, Stream::Test);
        for _ in 0..20 {
            let scores: Vec<f64> = (0..50).map(|_| (rng.uniform(0.0, 5.0)).round()).collect();
            let mut labels: Vec<u8> = (0..50).map(|_| rng.below(2) as u8).collect();
            labels[0] = 0;
            labels[1] = 1;
            let a = roc_auc(&scores, &labels).unwrap();
            assert!((a - pairwise(&scores, &labels)).abs() <= 1e-12);
        }
    }

    #[test]
    fn histogram_examples() {
        let one = histogram(&[1.0, 2.0, 3.0], Some(&[0, 1, 0]), 1).unwrap();
        assert_eq!((one[0].count_normal, one[0].count_anomalous), (2, 1));
        let two = histogram(&[0.0, 1.0], None, 2).unwrap();
        assert_eq!(two[0].count_normal, 1);
        assert_eq!(two[1].count_normal, 1);
        assert_eq!(two[1].hi, 1.0);
        let flat = histogram(&[2.0, 2.0], None, 3).unwrap();
        assert_eq!(flat[0].count_normal, 2);
        assert!(histogram(&[], None, 3).is_err());
        assert!(histogram(&[1.0], None, 0).is_err());
    }

    #[test]
    fn seed_aggregation() {
        let r = multi_seed_eval(|_| Ok(report(1.0)), &[1, 2, 3]).unwrap();
        assert_eq!((r.summary.mean_auc, r.summary.std_auc), (1.0, 0.0));
        let r = multi_seed_eval(|s| Ok(report(if s == 1 { 0.8 } else { 1.0 })), &[1, 2]).unwrap();
        assert!((r.summary.mean_auc - 0.9).abs() < 1e-15);
        assert!((r.summary.std_auc - 0.1).abs() < 1e-15);
        let par = multi_seed_eval_par(|s| Ok(report(s as f64 / 10.0)), &[3, 1, 2]).unwrap();
        assert_eq!(par.summary.aucs, vec![0.3, 0.1, 0.2]);
        assert!(multi_seed_eval(|_| Ok(report(1.0)), &[1]).is_err());
        let err = multi_seed_eval(|s| if s == 7 { Err(Error::Empty("x")) } else { Ok(report(1.0)) }, &[1, 7]).unwrap_err();
        assert!(matches!(err, Error::Seed { seed: 7, .. }));
    }

    #[test]
    fn digest_tracks_text() {
        assert_ne!(config_digest("nu = 0.1"), config_digest("nu = 0.2"));
        assert_eq!(config_digest("a").len(), 64);
    }

    proptest! {
        #[test]
        fn antisymmetric(pairs in prop::collection::vec((-5i32..5, 0u8..2), 2..60)) {
            let scores: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
            let mut labels: Vec<u8> = pairs.iter().map(|p| p.1).collect();
            labels[0] = 0;
            labels[1] = 1;
            let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
            let sum = roc_auc(&scores, &labels).unwrap() + roc_auc(&neg, &labels).unwrap();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn monotone_invariant(pairs in prop::collection::vec((-3.0f64..3.0, 0u8..2), 2..60)) {
            let scores: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let mut labels: Vec<u8> = pairs.iter().map(|p| p.1).collect();
            labels[0] = 0;
            labels[1] = 1;
            let warped: Vec<f64> = scores.iter().map(|s| s.exp()).collect();
            prop_assert_eq!(roc_auc(&scores, &labels).unwrap(), roc_auc(&warped, &labels).unwrap());
        }

        #[test]
        fn histogram_conserves(scores in prop::collection::vec(-100.0f64..100.0, 1..80), bins in 1usize..12) {
            let labels: Vec<u8> = (0..scores.len()).map(|i| (i % 3 == 0) as u8).collect();
            let h = histogram(&scores, Some(&labels), bins).unwrap();
            let normal: usize = h.iter().map(|b| b.count_normal).sum();
            let anomalous: usize = h.iter().map(|b| b.count_anomalous).sum();
            prop_assert_eq!(normal + anomalous, scores.len());
            prop_assert_eq!(anomalous, labels.iter().filter(|&&l| l == 1).count());
        }
    }
}
