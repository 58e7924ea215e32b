//! Classification metrics, bootstrap intervals and test-split evaluation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::anogan::{score_sample, AnomalyConfig, ScoredSample};
use crate::data::Dataset;
use crate::error::{ensure_arg, Result};
use crate::gan::GanModel;
use crate::rng::{indexed_stream, stream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn tally(predicted: &[bool], actual: &[bool]) -> Result<Self> {
        ensure_arg!(predicted.len() == actual.len(), "prediction and label counts differ");
        let mut c = Self::default();
        for (&p, &a) in predicted.iter().zip(actual) {
            match (p, a) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// `(precision, recall, F1)`, each 0 when its denominator is 0.
pub fn precision_recall_f1(c: &ConfusionCounts) -> (f64, f64, f64) {
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    (ratio(c.tp, c.tp + c.fp), ratio(c.tp, c.tp + c.fn_), ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub low: f64,
    pub high: f64,
    pub mean: f64,
}

/// Percentile bootstrap interval for the mean of `values`.
pub fn bootstrap_ci(values: &[f64], n_resamples: usize, level: f64, seed: u64) -> Result<ConfidenceInterval> {
    ensure_arg!(!values.is_empty(), "bootstrap needs at least one value");
    ensure_arg!(n_resamples >= 1, "bootstrap needs at least one resample");
    ensure_arg!(level > 0.0 && level < 1.0, "confidence level must lie in (0, 1)");
    let n = values.len();
    // Averaging offsets from the first value keeps constant inputs exact.
    let origin = values[0];
    let mean_of = |it: &mut dyn Iterator<Item = f64>| origin + it.map(|v| v - origin).sum::<f64>() / n as f64;
    let mean = mean_of(&mut values.iter().copied());
    let mut rng = stream(seed, Stream::Bootstrap);
    let mut means: Vec<f64> =
        (0..n_resamples).map(|_| mean_of(&mut (0..n).map(|_| values[rng.random_range(0..n)]))).collect();
    means.sort_by(f64::total_cmp);
    let quantile = |q: f64| {
        let pos = q * (means.len() - 1) as f64;
        let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
        means[lo] + (pos - lo as f64) * (means[hi] - means[lo])
    };
    let tail = (1.0 - level) / 2.0;
    Ok(ConfidenceInterval { low: quantile(tail).min(mean), high: quantile(1.0 - tail).max(mean), mean })
}

/// Scores every row; row `r` uses its own stream keyed by `r.id`, so results
/// do not depend on row order.
pub fn score_rows(model: &GanModel, data: &Dataset, cfg: &AnomalyConfig) -> Result<Vec<ScoredSample>> {
    data.rows
        .iter()
        .map(|r| {
            let mut rng = indexed_stream(cfg.seed, Stream::Scoring, r.id);
            let mut s = score_sample(model, &r.features, cfg, &mut rng)?;
            s.label = Some(r.label);
            Ok(s)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEvaluation {
    pub counts: ConfusionCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RunEvaluation {
    pub fn from_counts(counts: ConfusionCounts) -> Self {
        let (precision, recall, f1) = precision_recall_f1(&counts);
        Self { counts, precision, recall, f1 }
    }
}

/// Applies `threshold` to already scored samples, filling in `predicted`.
pub fn apply_threshold(samples: &mut [ScoredSample], threshold: f64) -> Result<RunEvaluation> {
    let mut predicted = Vec::with_capacity(samples.len());
    let mut actual = Vec::with_capacity(samples.len());
    for s in samples.iter_mut() {
        let p = s.score >= threshold;
        s.predicted = Some(p);
        predicted.push(p);
        actual.push(s.label.unwrap_or(false));
    }
    Ok(RunEvaluation::from_counts(ConfusionCounts::tally(&predicted, &actual)?))
}

/// Classifies every test row and tallies the outcome.
pub fn evaluate_run(
    model: &GanModel,
    test: &Dataset,
    threshold: f64,
    cfg: &AnomalyConfig,
) -> Result<(RunEvaluation, Vec<ScoredSample>)> {
    ensure_arg!(!test.is_empty(), "test split is empty");
    let mut samples = score_rows(model, test, cfg)?;
    let eval = apply_threshold(&mut samples, threshold)?;
    Ok((eval, samples))
}
