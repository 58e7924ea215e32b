#![allow(dead_code)]

use qanogan::anogan::{calibrate_threshold, AnomalyConfig};
use qanogan::data::{make_splits, synth_dataset, Dataset, Normalization, SplitSpec, SynthSpec};
use qanogan::eval::{evaluate_run, score_rows, RunEvaluation};
use qanogan::gan::{
    train, CriticConfig, GanModel, GeneratorConfig, GeneratorKind, GradientMode, ModelConfig, TrainConfig,
};
use qanogan::Result;

/// Normalized train / calibration / test splits.
pub struct Prepared {
    pub train: Dataset,
    pub calibration: Dataset,
    pub test: Dataset,
}

pub fn prepare(data: &Dataset, seed: u64) -> Result<Prepared> {
    let splits = make_splits(data, &SplitSpec { seed, ..Default::default() })?;
    let norm = Normalization::fit(&splits.train)?;
    Ok(Prepared {
        train: norm.apply(&splits.train)?,
        calibration: norm.apply(&splits.calibration)?,
        test: norm.apply(&splits.test)?,
    })
}

/// Synthetic benchmark: 2000 normal and 200 anomalous rows in 6 features.
pub fn desk_data(seed: u64) -> Result<Prepared> {
    let data =
        synth_dataset(&SynthSpec { n_normal: 2000, n_anomalous: 200, dim: 6, seed, ..Default::default() })?;
    prepare(&data, seed)
}

pub fn desk_generator(variant: GeneratorKind) -> GeneratorConfig {
    GeneratorConfig {
        variant,
        latent_dim: 6,
        data_dim: 6,
        use_upscaling: true,
        depth: 1,
        ..Default::default()
    }
}

pub struct RunOutcome {
    pub calibration_f1: f64,
    pub test: RunEvaluation,
}

/// Train, calibrate on the calibration split, evaluate on the test split.
pub fn run_pipeline(
    prepared: &Prepared,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    anomaly_cfg: &AnomalyConfig,
) -> Result<RunOutcome> {
    let mut model = GanModel::new(model_cfg, train_cfg.seed)?;
    train(&mut model, &prepared.train, train_cfg, |_, _| Ok(()))?;
    let cal = score_rows(&model, &prepared.calibration, anomaly_cfg)?;
    let scores: Vec<f64> = cal.iter().map(|s| s.score).collect();
    let labels: Vec<bool> = cal.iter().map(|s| s.label.unwrap_or(false)).collect();
    let c = calibrate_threshold(&scores, &labels)?;
    let (test, _) = evaluate_run(&model, &prepared.test, c.threshold, anomaly_cfg)?;
    Ok(RunOutcome { calibration_f1: c.f1, test })
}

/// Desk-scale run with reference hyperparameters and 300 generator
/// iterations; `shots` switches training and scoring to sampled readout.
pub fn desk_run(seed: u64, variant: GeneratorKind, shots: Option<usize>) -> Result<RunOutcome> {
    let prepared = desk_data(seed)?;
    let mode = if shots.is_some() { GradientMode::ParamShift } else { GradientMode::ForwardDiff };
    let model_cfg = ModelConfig { generator: desk_generator(variant), critic: CriticConfig::default() };
    let train_cfg =
        TrainConfig { generator_iters: 300, shots, gradient_mode: mode, seed, ..Default::default() };
    let anomaly_cfg = AnomalyConfig { shots, gradient_mode: mode, seed, ..Default::default() };
    run_pipeline(&prepared, &model_cfg, &train_cfg, &anomaly_cfg)
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}
