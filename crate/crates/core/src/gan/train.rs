use std::time::Instant;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::model::{sample_latent, GanModel};
use super::TrainConfig;
use crate::data::Dataset;
use crate::error::{ensure_arg, Error, Result};
use crate::rng::{stream, Stream, StreamRng};

/// Random streams consumed by training.
#[derive(Debug, Clone)]
pub struct TrainRngs {
    /// Real-data minibatch indices.
    pub minibatch: StreamRng,
    /// Latent vectors and interpolation weights.
    pub latent: StreamRng,
    /// Measurement outcomes.
    pub shots: StreamRng,
}

impl TrainRngs {
    pub fn new(seed: u64) -> Self {
        Self {
            minibatch: stream(seed, Stream::Minibatch),
            latent: stream(seed, Stream::Latent),
            shots: stream(seed, Stream::Shots),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticStepStats {
    /// Critic loss before the update.
    pub loss: f64,
    /// `mean D(x) - mean D(G(z))` before the update.
    pub wasserstein: f64,
}

/// One generator iteration of the training loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    /// One-based generator iteration.
    pub iteration: usize,
    /// Mean over the iteration's critic steps.
    pub critic_loss: f64,
    pub generator_loss: f64,
    /// Mean over the iteration's critic steps.
    pub wasserstein: f64,
    /// Seconds since training started.
    pub wall_time: f64,
}

/// One Adam update of the critic; the generator is untouched.
pub fn train_critic_step(
    model: &mut GanModel,
    real_batch: &[Vec<f64>],
    cfg: &TrainConfig,
    rngs: &mut TrainRngs,
) -> Result<CriticStepStats> {
    let settings = cfg.gradient_settings()?;
    let m = real_batch.len();
    ensure_arg!(m >= 1, "critic batch is empty");
    let latents = sample_latent(model.generator.kind(), model.latent_dim(), m, &mut rngs.latent)?;
    let eps: Vec<f64> = (0..m).map(|_| rngs.latent.random::<f64>()).collect();
    let (loss, wasserstein, grads) = model.critic_objective(
        real_batch,
        &latents,
        &eps,
        cfg.lambda,
        settings.readout,
        &mut rngs.shots,
        true,
    )?;
    let grads = grads.expect("gradient requested").flatten();
    let mut params = model.critic.params();
    model.optimizers(&cfg.adam).critic.step(&mut params, &grads)?;
    model.critic.set_params(&params)?;
    model.critic_steps += 1;
    Ok(CriticStepStats { loss, wasserstein })
}

/// One Adam update of the generator on a fresh latent batch; the critic is
/// untouched. Returns the generator loss before the update.
pub fn train_generator_step(model: &mut GanModel, cfg: &TrainConfig, rngs: &mut TrainRngs) -> Result<f64> {
    let settings = cfg.gradient_settings()?;
    let latents =
        sample_latent(model.generator.kind(), model.latent_dim(), cfg.batch_size, &mut rngs.latent)?;
    let (loss, grad) = model.generator_loss_and_gradient(&latents, &settings, &mut rngs.shots)?;

    let mut core = model.generator.core_params();
    let mut upscale = model.generator.upscale.as_ref().map(|u| u.params());
    let opt = model.optimizers(&cfg.adam);
    if !core.is_empty() {
        opt.core.step(&mut core, &grad.core)?;
    }
    if let Some(p) = upscale.as_mut() {
        opt.upscale.step(p, &grad.upscale)?;
    }
    model.generator.set_core_params(&core)?;
    if let (Some(up), Some(p)) = (model.generator.upscale.as_mut(), upscale) {
        up.set_params(&p)?;
    }
    model.generator_steps += 1;
    Ok(loss)
}

fn minibatch(data: &Dataset, m: usize, rng: &mut StreamRng) -> Vec<Vec<f64>> {
    let n = data.len();
    if m <= n {
        index::sample(rng, n, m).into_iter().map(|i| data.rows[i].features.clone()).collect()
    } else {
        (0..m).map(|_| data.rows[rng.random_range(0..n)].features.clone()).collect()
    }
}

/// Runs `cfg.generator_iters` generator iterations, each preceded by
/// `cfg.n_critic` critic iterations. `on_iteration` sees the model after
/// every generator update and may abort training by returning an error.
pub fn train<F>(
    model: &mut GanModel,
    data: &Dataset,
    cfg: &TrainConfig,
    mut on_iteration: F,
) -> Result<Vec<LossRecord>>
where
    F: FnMut(&GanModel, &LossRecord) -> Result<()>,
{
    cfg.validate()?;
    if data.rows.iter().any(|r| r.label) {
        return Err(Error::contract(format!("training data contains {} anomalous rows", data.n_anomalous())));
    }
    ensure_arg!(!data.is_empty() || cfg.generator_iters == 0, "training data is empty");
    ensure_arg!(
        data.dim() == model.data_dim(),
        "data has {} features, model expects {}",
        data.dim(),
        model.data_dim()
    );

    let start = Instant::now();
    let mut rngs = TrainRngs::new(cfg.seed);
    let mut history = Vec::with_capacity(cfg.generator_iters);
    for it in 1..=cfg.generator_iters {
        let (mut c_loss, mut w) = (0.0, 0.0);
        for _ in 0..cfg.n_critic {
            let batch = minibatch(data, cfg.batch_size, &mut rngs.minibatch);
            let s = train_critic_step(model, &batch, cfg, &mut rngs)?;
            c_loss += s.loss / cfg.n_critic as f64;
            w += s.wasserstein / cfg.n_critic as f64;
        }
        let g_loss = train_generator_step(model, cfg, &mut rngs)?;
        let record = LossRecord {
            iteration: it,
            critic_loss: c_loss,
            generator_loss: g_loss,
            wasserstein: w,
            wall_time: start.elapsed().as_secs_f64(),
        };
        on_iteration(model, &record)?;
        history.push(record);
    }
    Ok(history)
}
