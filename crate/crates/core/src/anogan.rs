//! Anomaly scoring by generator inversion.
//!
//! Each sample is scored by searching for the latent vector whose generated
//! sample best explains it. The score combines the L1 residual with the
//! critic discrepancy; samples scoring at or above a calibrated threshold are
//! flagged anomalous.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_arg, Result};
use crate::gan::{gradient_settings, sample_latent, GanModel, GradientMode, GradientSettings};
use crate::nn::{AdamConfig, AdamState, DenseNetwork};
use crate::qsim::{Wrt, DEFAULT_FD_STEP};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnomalyConfig {
    /// Weight between residual and critic terms; must be positive.
    pub alpha: f64,
    pub latent_iters: usize,
    pub adam: AdamConfig,
    /// Independent latent initializations; the best result is kept.
    pub restarts: usize,
    pub shots: Option<usize>,
    pub gradient_mode: GradientMode,
    pub fd_step: f64,
    pub seed: u64,
}

impl Default for AnomalyConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            latent_iters: 500,
            adam: AdamConfig::default(),
            restarts: 1,
            shots: None,
            gradient_mode: GradientMode::ForwardDiff,
            fd_step: DEFAULT_FD_STEP,
            seed: 0,
        }
    }
}

impl AnomalyConfig {
    pub fn validate(&self) -> Result<()> {
        ensure_arg!(self.alpha > 0.0 && self.alpha.is_finite(), "alpha must be positive");
        ensure_arg!(self.restarts >= 1, "restarts must be at least 1");
        self.adam.validate()?;
        self.gradient_settings().map(|_| ())
    }

    pub fn gradient_settings(&self) -> Result<GradientSettings> {
        gradient_settings(self.shots, self.gradient_mode, self.fd_step)
    }
}

/// One scored input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSample {
    pub x: Vec<f64>,
    pub z_opt: Vec<f64>,
    pub residual_loss: f64,
    pub discrimination_loss: f64,
    pub score: f64,
    pub predicted: Option<bool>,
    pub label: Option<bool>,
}

/// `||x - x_g||_1`.
pub fn residual_loss(x: &[f64], x_g: &[f64]) -> Result<f64> {
    ensure_arg!(x.len() == x_g.len(), "sample has {} features, generated sample has {}", x.len(), x_g.len());
    Ok(x.iter().zip(x_g).map(|(a, b)| (a - b).abs()).sum())
}

/// `|D(x) - D(x_g)|`.
pub fn discrimination_loss(critic: &DenseNetwork, x: &[f64], x_g: &[f64]) -> Result<f64> {
    Ok((critic.predict(x)?[0] - critic.predict(x_g)?[0]).abs())
}

/// `L_R / alpha + alpha * L_D`.
pub fn anomaly_score(residual: f64, discrimination: f64, alpha: f64) -> Result<f64> {
    ensure_arg!(alpha > 0.0, "alpha must be positive, got {alpha}");
    Ok(residual / alpha + alpha * discrimination)
}

/// Outcome of the latent search for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentFit {
    pub z_opt: Vec<f64>,
    pub residual_loss: f64,
    pub discrimination_loss: f64,
    pub score: f64,
    /// Score at every visited latent, one trace per restart, starting with
    /// the initial draw.
    pub traces: Vec<Vec<f64>>,
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Adam descent of the anomaly score over the latent vector, keeping the
/// best latent seen across all iterations and restarts.
pub fn optimize_latent<R: Rng + ?Sized>(
    model: &GanModel,
    x: &[f64],
    cfg: &AnomalyConfig,
    rng: &mut R,
) -> Result<LatentFit> {
    cfg.validate()?;
    ensure_arg!(
        x.len() == model.data_dim(),
        "sample has {} features, model expects {}",
        x.len(),
        model.data_dim()
    );
    let settings = cfg.gradient_settings()?;
    let alpha = cfg.alpha;
    let d_real = model.critic.predict(x)?[0];
    let mut best: Option<LatentFit> = None;
    let mut traces = Vec::with_capacity(cfg.restarts);

    for _ in 0..cfg.restarts {
        let mut z = sample_latent(model.generator.kind(), model.latent_dim(), 1, rng)?.remove(0);
        let mut adam = AdamState::new(cfg.adam, z.len());
        let mut trace = Vec::with_capacity(cfg.latent_iters + 1);
        for it in 0..=cfg.latent_iters {
            let pass = model.generator.forward(&z, settings.readout, rng)?;
            let (d_fake, cache) = model.critic.forward(&pass.output)?;
            let l_r = residual_loss(x, &pass.output)?;
            let l_d = (d_real - d_fake[0]).abs();
            let score = anomaly_score(l_r, l_d, alpha)?;
            trace.push(score);
            if best.as_ref().is_none_or(|b| score < b.score) {
                best = Some(LatentFit {
                    z_opt: z.clone(),
                    residual_loss: l_r,
                    discrimination_loss: l_d,
                    score,
                    traces: Vec::new(),
                });
            }
            if it == cfg.latent_iters {
                break;
            }
            let s_d = sign(d_real - d_fake[0]);
            let (_, dd_dx) = model.critic.backward(&cache, &[1.0])?;
            let upstream: Vec<f64> = x
                .iter()
                .zip(&pass.output)
                .zip(&dd_dx)
                .map(|((xi, gi), di)| -sign(xi - gi) / alpha - alpha * s_d * di)
                .collect();
            let grad = model.generator.pullback(&z, &pass, &upstream, &settings, Wrt::Latent, rng)?.latent;
            adam.step(&mut z, &grad)?;
        }
        traces.push(trace);
    }
    let mut fit = best.expect("at least one restart");
    fit.traces = traces;
    Ok(fit)
}

/// Scores `x` without assigning a verdict.
pub fn score_sample<R: Rng + ?Sized>(
    model: &GanModel,
    x: &[f64],
    cfg: &AnomalyConfig,
    rng: &mut R,
) -> Result<ScoredSample> {
    let fit = optimize_latent(model, x, cfg, rng)?;
    Ok(ScoredSample {
        x: x.to_vec(),
        z_opt: fit.z_opt,
        residual_loss: fit.residual_loss,
        discrimination_loss: fit.discrimination_loss,
        score: fit.score,
        predicted: None,
        label: None,
    })
}

/// Scores `x` and flags it anomalous when the score reaches `threshold`.
pub fn classify<R: Rng + ?Sized>(
    model: &GanModel,
    x: &[f64],
    threshold: f64,
    cfg: &AnomalyConfig,
    rng: &mut R,
) -> Result<ScoredSample> {
    let mut s = score_sample(model, x, cfg, rng)?;
    s.predicted = Some(s.score >= threshold);
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub threshold: f64,
    /// F1 on the calibration data at `threshold`.
    pub f1: f64,
}

/// Exhaustive F1-maximizing threshold.
///
/// Candidates are the smallest score (everything flagged) and every midpoint
/// between consecutive distinct scores. Ties keep the lowest threshold.
pub fn calibrate_threshold(scores: &[f64], labels: &[bool]) -> Result<Calibration> {
    ensure_arg!(scores.len() == labels.len(), "scores and labels differ in length");
    ensure_arg!(scores.iter().all(|s| s.is_finite()), "scores must be finite");
    let n_pos = labels.iter().filter(|&&l| l).count();
    ensure_arg!(n_pos > 0 && n_pos < labels.len(), "calibration needs both anomalous and normal samples");
    let mut pairs: Vec<(f64, bool)> = scores.iter().copied().zip(labels.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Everything flagged, then raise the cut past one distinct value at a time.
    let (mut tp, mut fp) = (n_pos, labels.len() - n_pos);
    let f1 = |tp: usize, fp: usize| {
        crate::eval::precision_recall_f1(&crate::eval::ConfusionCounts { tp, fp, fn_: n_pos - tp, tn: 0 }).2
    };
    let mut best = Calibration { threshold: pairs[0].0, f1: f1(tp, fp) };
    let mut i = 0;
    while i < pairs.len() {
        let v = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == v {
            if pairs[i].1 {
                tp -= 1;
            } else {
                fp -= 1;
            }
            i += 1;
        }
        if i == pairs.len() {
            break;
        }
        let score = f1(tp, fp);
        if score > best.f1 {
            best = Calibration { threshold: 0.5 * (v + pairs[i].0), f1: score };
        }
    }
    Ok(best)
}
