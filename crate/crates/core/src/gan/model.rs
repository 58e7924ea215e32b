use std::f64::consts::PI;

use rand::Rng;

use super::{GeneratorConfig, GeneratorKind, GradientMode, ModelConfig};
use crate::error::{ensure_arg, Error, Result};
use crate::nn::{Activation, AdamConfig, AdamState, DenseNetwork, ForwardCache, Gradients};
use crate::qsim::{
    build_ansatz, circuit_expectations, identity_block_init, jacobian_forward_diff, jacobian_param_shift,
    random_init, Ansatz, InitStrategy, Readout, Wrt,
};
use crate::rng::{indexed_stream, Stream};

/// How generator expectations and their derivatives are evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientSettings {
    pub readout: Readout,
    pub mode: GradientMode,
    pub fd_step: f64,
}

impl Default for GradientSettings {
    fn default() -> Self {
        Self {
            readout: Readout::Analytic,
            mode: GradientMode::ForwardDiff,
            fd_step: crate::qsim::DEFAULT_FD_STEP,
        }
    }
}

/// `m` latent vectors: `U(0, 1)` for the classical generator, `U(-pi, pi)`
/// angles for the quantum one.
pub fn sample_latent<R: Rng + ?Sized>(
    kind: GeneratorKind,
    dim: usize,
    m: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    ensure_arg!(m >= 1, "latent batch size must be at least 1");
    Ok((0..m)
        .map(|_| {
            (0..dim)
                .map(|_| match kind {
                    GeneratorKind::Classical => rng.random::<f64>(),
                    GeneratorKind::Quantum => rng.random_range(-PI..PI),
                })
                .collect()
        })
        .collect())
}

/// The part of the generator in front of the upscaling layer.
#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorCore {
    /// Pauli-Z expectations of a parameterized circuit applied to `R_x(z)`.
    Quantum { ansatz: Ansatz, theta: Vec<f64> },
    /// Leaky-ReLU dense body; `None` passes the latent vector through.
    Classical { body: Option<DenseNetwork> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub latent_dim: usize,
    pub core: GeneratorCore,
    pub upscale: Option<DenseNetwork>,
}

/// Intermediate values of one generator evaluation.
#[derive(Debug, Clone)]
pub struct GeneratorPass {
    pub core_out: Vec<f64>,
    pub output: Vec<f64>,
    body_cache: Option<ForwardCache>,
    up_cache: Option<ForwardCache>,
}

/// Gradients of a scalar through the generator. Empty vectors mark groups
/// that do not exist or were not requested.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GeneratorGradient {
    /// Circuit angles or classical body parameters.
    pub core: Vec<f64>,
    pub upscale: Vec<f64>,
    pub latent: Vec<f64>,
}

impl Generator {
    pub fn kind(&self) -> GeneratorKind {
        match self.core {
            GeneratorCore::Quantum { .. } => GeneratorKind::Quantum,
            GeneratorCore::Classical { .. } => GeneratorKind::Classical,
        }
    }

    pub fn out_dim(&self) -> usize {
        match (&self.upscale, &self.core) {
            (Some(up), _) => up.out_dim(),
            (None, GeneratorCore::Classical { body: Some(b) }) => b.out_dim(),
            (None, _) => self.latent_dim,
        }
    }

    pub fn core_params(&self) -> Vec<f64> {
        match &self.core {
            GeneratorCore::Quantum { theta, .. } => theta.clone(),
            GeneratorCore::Classical { body: Some(b) } => b.params(),
            GeneratorCore::Classical { body: None } => Vec::new(),
        }
    }

    pub fn set_core_params(&mut self, params: &[f64]) -> Result<()> {
        match &mut self.core {
            GeneratorCore::Quantum { theta, .. } => {
                ensure_arg!(params.len() == theta.len(), "expected {} angles", theta.len());
                theta.copy_from_slice(params);
                Ok(())
            }
            GeneratorCore::Classical { body: Some(b) } => b.set_params(params),
            GeneratorCore::Classical { body: None } => {
                ensure_arg!(params.is_empty(), "generator has no core parameters");
                Ok(())
            }
        }
    }

    pub fn forward<R: Rng + ?Sized>(
        &self,
        z: &[f64],
        readout: Readout,
        rng: &mut R,
    ) -> Result<GeneratorPass> {
        ensure_arg!(
            z.len() == self.latent_dim,
            "latent vector has length {}, generator expects {}",
            z.len(),
            self.latent_dim
        );
        let (core_out, body_cache) = match &self.core {
            GeneratorCore::Quantum { ansatz, theta } => {
                (circuit_expectations(ansatz, theta, z, readout, rng)?, None)
            }
            GeneratorCore::Classical { body: Some(b) } => {
                let (out, cache) = b.forward(z)?;
                (out, Some(cache))
            }
            GeneratorCore::Classical { body: None } => (z.to_vec(), None),
        };
        let (output, up_cache) = match &self.upscale {
            Some(up) => {
                let (out, cache) = up.forward(&core_out)?;
                (out, Some(cache))
            }
            None => (core_out.clone(), None),
        };
        Ok(GeneratorPass { core_out, output, body_cache, up_cache })
    }

    pub fn generate<R: Rng + ?Sized>(&self, z: &[f64], readout: Readout, rng: &mut R) -> Result<Vec<f64>> {
        Ok(self.forward(z, readout, rng)?.output)
    }

    /// Pulls `upstream = dL/dx_g` back to the parameters (`wrt = Params`) or
    /// to the latent vector (`wrt = Latent`).
    ///
    /// Circuit derivatives come from an explicit Jacobian: forward differences
    /// of analytic expectations, or parameter shift with `settings.readout`.
    pub fn pullback<R: Rng + ?Sized>(
        &self,
        z: &[f64],
        pass: &GeneratorPass,
        upstream: &[f64],
        settings: &GradientSettings,
        wrt: Wrt,
        rng: &mut R,
    ) -> Result<GeneratorGradient> {
        let mut out = GeneratorGradient::default();
        let beta = match (&self.upscale, &pass.up_cache) {
            (Some(up), Some(cache)) => {
                let (g, beta) = up.backward(cache, upstream)?;
                if wrt == Wrt::Params {
                    out.upscale = g.flatten();
                }
                beta
            }
            (None, None) => upstream.to_vec(),
            _ => return Err(Error::contract("generator pass does not match generator")),
        };
        match (&self.core, wrt) {
            (GeneratorCore::Quantum { ansatz, theta }, _) => {
                let jac = match settings.mode {
                    GradientMode::ForwardDiff => {
                        jacobian_forward_diff(ansatz, theta, z, settings.fd_step, wrt)?
                    }
                    GradientMode::ParamShift => {
                        jacobian_param_shift(ansatz, theta, z, settings.readout, wrt, rng)?
                    }
                };
                let g = jac.vjp(&beta);
                match wrt {
                    Wrt::Params => out.core = g,
                    Wrt::Latent => out.latent = g,
                }
            }
            (GeneratorCore::Classical { body: Some(b) }, _) => {
                let cache = pass
                    .body_cache
                    .as_ref()
                    .ok_or_else(|| Error::contract("generator pass does not match generator"))?;
                let (g, dz) = b.backward(cache, &beta)?;
                match wrt {
                    Wrt::Params => out.core = g.flatten(),
                    Wrt::Latent => out.latent = dz,
                }
            }
            (GeneratorCore::Classical { body: None }, Wrt::Latent) => out.latent = beta,
            (GeneratorCore::Classical { body: None }, Wrt::Params) => {}
        }
        Ok(out)
    }
}

/// Adam moments for the three parameter groups.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Optimizers {
    pub critic: AdamState,
    pub core: AdamState,
    pub upscale: AdamState,
}

/// Generator, critic and their optimizer state.
#[derive(Debug, Clone)]
pub struct GanModel {
    pub config: ModelConfig,
    pub seed: u64,
    pub generator: Generator,
    pub critic: DenseNetwork,
    pub generator_steps: u64,
    pub critic_steps: u64,
    optimizers: Option<Optimizers>,
}

impl PartialEq for GanModel {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.seed == other.seed
            && self.generator == other.generator
            && self.critic == other.critic
            && self.generator_steps == other.generator_steps
            && self.critic_steps == other.critic_steps
    }
}

impl GanModel {
    /// Freshly initialized model. Circuit bases, circuit angles and each
    /// network draw from separate streams of `seed`.
    pub fn new(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let g = &config.generator;
        let core = build_core(g, seed)?;
        let upscale = if g.use_upscaling {
            Some(DenseNetwork::glorot(
                &[g.core_out_dim(), g.data_dim],
                &[Activation::Sigmoid],
                &mut indexed_stream(seed, Stream::Init, 2),
            )?)
        } else {
            None
        };
        let mut dims = vec![g.data_dim];
        dims.extend(&config.critic.hidden);
        dims.push(1);
        let mut acts = vec![config.critic.activation; config.critic.hidden.len()];
        acts.push(Activation::Identity);
        let critic = DenseNetwork::glorot(&dims, &acts, &mut indexed_stream(seed, Stream::Init, 3))?;
        Ok(Self::from_parts(
            config.clone(),
            seed,
            Generator { latent_dim: g.latent_dim, core, upscale },
            critic,
        ))
    }

    /// Assembles a model from existing parts; optimizer state starts fresh.
    pub fn from_parts(config: ModelConfig, seed: u64, generator: Generator, critic: DenseNetwork) -> Self {
        Self { config, seed, generator, critic, generator_steps: 0, critic_steps: 0, optimizers: None }
    }

    pub fn data_dim(&self) -> usize {
        self.critic.in_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.generator.latent_dim
    }

    pub(crate) fn optimizers(&mut self, adam: &AdamConfig) -> &mut Optimizers {
        let sizes = (
            self.critic.param_count(),
            self.generator.core_params().len(),
            self.generator.upscale.as_ref().map_or(0, DenseNetwork::param_count),
        );
        let stale = match &self.optimizers {
            Some(o) => o.critic.config != *adam || (o.critic.len(), o.core.len(), o.upscale.len()) != sizes,
            None => true,
        };
        if stale {
            self.optimizers = Some(Optimizers {
                critic: AdamState::new(*adam, sizes.0),
                core: AdamState::new(*adam, sizes.1),
                upscale: AdamState::new(*adam, sizes.2),
            });
        }
        self.optimizers.as_mut().expect("initialized above")
    }

    /// Mean critic loss and the Wasserstein estimate `mean D(x) - mean D(G(z))`,
    /// optionally with the critic-parameter gradient.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn critic_objective<R: Rng + ?Sized>(
        &self,
        real: &[Vec<f64>],
        latents: &[Vec<f64>],
        eps: &[f64],
        lambda: f64,
        readout: Readout,
        rng: &mut R,
        want_grad: bool,
    ) -> Result<(f64, f64, Option<Gradients>)> {
        let m = real.len();
        ensure_arg!(m >= 1, "critic batch is empty");
        ensure_arg!(
            latents.len() == m && eps.len() == m,
            "critic batch sizes differ: {m} real, {} latent, {} interpolation weights",
            latents.len(),
            eps.len()
        );
        let scale = 1.0 / m as f64;
        let mut grads = want_grad.then(|| Gradients::zeros_like(&self.critic));
        let (mut loss, mut w) = (0.0, 0.0);
        for ((x, z), &e) in real.iter().zip(latents).zip(eps) {
            let xg = self.generator.generate(z, readout, rng)?;
            ensure_arg!(
                x.len() == xg.len(),
                "real sample has {} features, generator emits {}",
                x.len(),
                xg.len()
            );
            let (d_fake, c_fake) = self.critic.forward(&xg)?;
            let (d_real, c_real) = self.critic.forward(x)?;
            let x_hat: Vec<f64> = x.iter().zip(&xg).map(|(a, b)| a + e * (b - a)).collect();
            let (penalty, g_pen) = if lambda > 0.0 || want_grad {
                self.critic.gradient_norm_penalty(&x_hat, 1.0)?
            } else {
                (0.0, Gradients::zeros_like(&self.critic))
            };
            loss += scale * (d_fake[0] - d_real[0] + lambda * penalty);
            w += scale * (d_real[0] - d_fake[0]);
            if let Some(g) = grads.as_mut() {
                g.add_scaled(&self.critic.backward(&c_fake, &[1.0])?.0, scale);
                g.add_scaled(&self.critic.backward(&c_real, &[1.0])?.0, -scale);
                g.add_scaled(&g_pen, lambda * scale);
            }
        }
        Ok((loss, w, grads))
    }

    /// Critic loss, Wasserstein estimate and the critic-parameter gradient.
    #[allow(clippy::too_many_arguments)]
    pub fn critic_loss_and_gradient<R: Rng + ?Sized>(
        &self,
        real: &[Vec<f64>],
        latents: &[Vec<f64>],
        eps: &[f64],
        lambda: f64,
        readout: Readout,
        rng: &mut R,
    ) -> Result<(f64, f64, Gradients)> {
        let (loss, w, g) = self.critic_objective(real, latents, eps, lambda, readout, rng, true)?;
        Ok((loss, w, g.expect("gradient requested")))
    }

    /// `-mean D(G(z))` and its gradient with respect to the
    /// generator parameters. Both groups are evaluated at the same point.
    pub fn generator_loss_and_gradient<R: Rng + ?Sized>(
        &self,
        latents: &[Vec<f64>],
        settings: &GradientSettings,
        rng: &mut R,
    ) -> Result<(f64, GeneratorGradient)> {
        self.generator_objective(latents, settings, rng, true)
    }

    fn generator_objective<R: Rng + ?Sized>(
        &self,
        latents: &[Vec<f64>],
        settings: &GradientSettings,
        rng: &mut R,
        want_grad: bool,
    ) -> Result<(f64, GeneratorGradient)> {
        let m = latents.len();
        ensure_arg!(m >= 1, "generator batch is empty");
        let scale = 1.0 / m as f64;
        let mut loss = 0.0;
        let mut total = GeneratorGradient {
            core: vec![0.0; self.generator.core_params().len()],
            upscale: vec![0.0; self.generator.upscale.as_ref().map_or(0, DenseNetwork::param_count)],
            latent: Vec::new(),
        };
        for z in latents {
            let pass = self.generator.forward(z, settings.readout, rng)?;
            let (d, cache) = self.critic.forward(&pass.output)?;
            loss -= scale * d[0];
            if want_grad {
                let (_, dx) = self.critic.backward(&cache, &[-scale])?;
                let g = self.generator.pullback(z, &pass, &dx, settings, Wrt::Params, rng)?;
                for (t, v) in total.core.iter_mut().zip(&g.core) {
                    *t += v;
                }
                for (t, v) in total.upscale.iter_mut().zip(&g.upscale) {
                    *t += v;
                }
            }
        }
        Ok((loss, total))
    }
}

fn build_core(g: &GeneratorConfig, seed: u64) -> Result<GeneratorCore> {
    Ok(match g.variant {
        GeneratorKind::Quantum => {
            let ansatz = build_ansatz(g.circuit, g.latent_dim, g.depth, seed)?;
            let (ansatz, theta) = match g.init {
                InitStrategy::Random => {
                    let theta = random_init(&ansatz, seed);
                    (ansatz, theta)
                }
                InitStrategy::IdentityBlock => identity_block_init(&ansatz, seed)?,
            };
            GeneratorCore::Quantum { ansatz, theta }
        }
        GeneratorKind::Classical if g.body.is_empty() => GeneratorCore::Classical { body: None },
        GeneratorKind::Classical => {
            let mut dims = vec![g.latent_dim];
            dims.extend(&g.body);
            let acts = vec![Activation::LeakyRelu; g.body.len()];
            let body = DenseNetwork::glorot(&dims, &acts, &mut indexed_stream(seed, Stream::Init, 1))?;
            GeneratorCore::Classical { body: Some(body) }
        }
    })
}

/// `(||grad D(x_hat)|| - 1)^2` at `x_hat = x + eps (x_gen - x)`.
pub fn gradient_penalty(critic: &DenseNetwork, x_real: &[f64], x_gen: &[f64], eps: f64) -> Result<f64> {
    ensure_arg!(
        x_real.len() == x_gen.len(),
        "real and generated samples differ in length: {} vs {}",
        x_real.len(),
        x_gen.len()
    );
    let x_hat: Vec<f64> = x_real.iter().zip(x_gen).map(|(a, b)| a + eps * (b - a)).collect();
    let v = critic.input_gradient(&x_hat)?;
    let norm = v.iter().map(|g| g * g).sum::<f64>().sqrt();
    Ok((norm - 1.0).powi(2))
}

/// Batch mean of `D(G(z)) - D(x) + lambda * penalty`.
#[allow(clippy::too_many_arguments)]
pub fn critic_loss<R: Rng + ?Sized>(
    model: &GanModel,
    real: &[Vec<f64>],
    latents: &[Vec<f64>],
    eps: &[f64],
    lambda: f64,
    readout: Readout,
    rng: &mut R,
) -> Result<f64> {
    Ok(model.critic_objective(real, latents, eps, lambda, readout, rng, false)?.0)
}

/// `-mean D(G(z))` over the latent batch.
pub fn generator_loss<R: Rng + ?Sized>(
    model: &GanModel,
    latents: &[Vec<f64>],
    readout: Readout,
    rng: &mut R,
) -> Result<f64> {
    let settings = GradientSettings { readout, ..Default::default() };
    Ok(model.generator_objective(latents, &settings, rng, false)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gan::{CriticConfig, GeneratorConfig};
    use crate::nn::DenseLayer;
    use crate::rng::stream;

    pub(crate) fn linear_critic(w: &[f64], b: f64) -> DenseNetwork {
        DenseNetwork::from_layers(vec![DenseLayer {
            in_dim: w.len(),
            out_dim: 1,
            weights: w.to_vec(),
            bias: vec![b],
            activation: Activation::Identity,
        }])
        .unwrap()
    }

    fn quantum_config(n: usize, depth: usize, upscale: bool) -> ModelConfig {
        ModelConfig {
            generator: GeneratorConfig {
                latent_dim: n,
                data_dim: if upscale { n + 1 } else { n },
                use_upscaling: upscale,
                depth,
                ..Default::default()
            },
            critic: CriticConfig::default(),
        }
    }

    #[test]
    fn latent_ranges_and_determinism() {
        let mut rng = stream(1, Stream::Latent);
        let q = sample_latent(GeneratorKind::Quantum, 3, 200, &mut rng).unwrap();
        assert!(q.iter().flatten().all(|v| (-PI..PI).contains(v) && *v != -PI));
        let c = sample_latent(GeneratorKind::Classical, 3, 200, &mut rng).unwrap();
        assert!(c.iter().flatten().all(|v| (0.0..1.0).contains(v)));
        let a = sample_latent(GeneratorKind::Quantum, 2, 5, &mut stream(4, Stream::Latent)).unwrap();
        let b = sample_latent(GeneratorKind::Quantum, 2, 5, &mut stream(4, Stream::Latent)).unwrap();
        assert_eq!(a, b);
        assert!(sample_latent(GeneratorKind::Quantum, 2, 0, &mut rng).is_err());
    }

    #[test]
    fn upscaled_output_in_unit_interval() {
        let model = GanModel::new(&quantum_config(3, 2, true), 5).unwrap();
        let mut rng = stream(0, Stream::Latent);
        for z in sample_latent(GeneratorKind::Quantum, 3, 20, &mut rng).unwrap() {
            let x = model.generator.generate(&z, Readout::Analytic, &mut rng).unwrap();
            assert_eq!(x.len(), 4);
            assert!(x.iter().all(|v| *v > 0.0 && *v < 1.0));
        }
    }

    #[test]
    fn identity_block_generator_is_upscaled_cosine() {
        let mut cfg = quantum_config(3, 2, true);
        cfg.generator.init = InitStrategy::IdentityBlock;
        let model = GanModel::new(&cfg, 11).unwrap();
        let z = [0.3, -1.2, 2.5];
        let mut rng = stream(0, Stream::Shots);
        let out = model.generator.generate(&z, Readout::Analytic, &mut rng).unwrap();
        let cos: Vec<f64> = z.iter().map(|v: &f64| v.cos()).collect();
        let want = model.generator.upscale.as_ref().unwrap().predict(&cos).unwrap();
        for (a, b) in out.iter().zip(&want) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn no_upscaling_outputs_expectations() {
        let model = GanModel::new(&quantum_config(6, 1, false), 2).unwrap();
        let mut rng = stream(0, Stream::Latent);
        let z = &sample_latent(GeneratorKind::Quantum, 6, 1, &mut rng).unwrap()[0];
        let x = model.generator.generate(z, Readout::Analytic, &mut rng).unwrap();
        assert_eq!(x.len(), 6);
        assert!(x.iter().all(|v| (-1.0..=1.0).contains(v)));
        assert!(model.generator.generate(&z[..5], Readout::Analytic, &mut rng).is_err());
    }

    #[test]
    fn penalty_examples() {
        let x = [0.2, 0.7];
        let g = [0.9, 0.1];
        assert!(gradient_penalty(&linear_critic(&[1.0, 0.0], 0.0), &x, &g, 0.3).unwrap() < 1e-15);
        assert_eq!(gradient_penalty(&linear_critic(&[0.0, 0.0], 2.0), &x, &g, 0.3).unwrap(), 1.0);
        assert_eq!(gradient_penalty(&linear_critic(&[2.0, 0.0], 0.0), &x, &g, 0.3).unwrap(), 1.0);
    }

    fn with_critic(cfg: &ModelConfig, critic: DenseNetwork) -> GanModel {
        let mut m = GanModel::new(cfg, 0).unwrap();
        m.critic = critic;
        m
    }

    #[test]
    fn critic_loss_examples() {
        let cfg = quantum_config(2, 1, false);
        let model = with_critic(&cfg, linear_critic(&[0.0, 0.0], 0.7));
        let real = vec![vec![0.1, 0.2], vec![0.5, 0.5]];
        let z = vec![vec![0.3, 0.4], vec![-1.0, 2.0]];
        let eps = vec![0.5, 0.25];
        let mut rng = stream(0, Stream::Shots);
        assert_eq!(critic_loss(&model, &real, &z, &eps, 0.0, Readout::Analytic, &mut rng).unwrap(), 0.0);
        assert_eq!(critic_loss(&model, &real, &z, &eps, 10.0, Readout::Analytic, &mut rng).unwrap(), 10.0);
        assert!(critic_loss(&model, &[], &[], &[], 10.0, Readout::Analytic, &mut rng).is_err());

        // D(x) = 3 x_1 - 4 x_2 + 1 has gradient norm 5, so the penalty is 16.
        let model = with_critic(&cfg, linear_critic(&[3.0, -4.0], 1.0));
        let x = vec![0.1, 0.2];
        let zs = vec![vec![0.3, 0.4]];
        let xg = model.generator.generate(&zs[0], Readout::Analytic, &mut rng).unwrap();
        let d = |v: &[f64]| 3.0 * v[0] - 4.0 * v[1] + 1.0;
        let want = d(&xg) - d(&x) + 2.0 * 16.0;
        let got = critic_loss(&model, &[x], &zs, &[0.4], 2.0, Readout::Analytic, &mut rng).unwrap();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn generator_loss_examples() {
        let cfg = quantum_config(2, 1, false);
        let mut rng = stream(0, Stream::Shots);
        let z = vec![vec![0.1, 0.2]];
        let model = with_critic(&cfg, linear_critic(&[0.0, 0.0], 1.5));
        assert_eq!(generator_loss(&model, &z, Readout::Analytic, &mut rng).unwrap(), -1.5);

        // Classical pass-through into a zero upscaling layer emits 0.5 everywhere.
        let cfg = ModelConfig {
            generator: GeneratorConfig {
                variant: GeneratorKind::Classical,
                latent_dim: 2,
                data_dim: 2,
                ..Default::default()
            },
            critic: CriticConfig::default(),
        };
        let mut model = with_critic(&cfg, linear_critic(&[1.0, 1.0], 0.0));
        let up = model.generator.upscale.as_mut().unwrap();
        up.set_params(&vec![0.0; up.param_count()]).unwrap();
        assert_eq!(generator_loss(&model, &z, Readout::Analytic, &mut rng).unwrap(), -1.0);
    }

    fn numeric_core_gradient(model: &GanModel, latents: &[Vec<f64>], h: f64) -> Vec<f64> {
        let mut rng = stream(0, Stream::Shots);
        let base = model.generator.core_params();
        (0..base.len())
            .map(|k| {
                let mut m = model.clone();
                let mut p = base.clone();
                p[k] += h;
                m.generator.set_core_params(&p).unwrap();
                let up = generator_loss(&m, latents, Readout::Analytic, &mut rng).unwrap();
                p[k] -= 2.0 * h;
                m.generator.set_core_params(&p).unwrap();
                let down = generator_loss(&m, latents, Readout::Analytic, &mut rng).unwrap();
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn hybrid_gradient_matches_finite_differences() {
        for (n, depth) in [(2, 1), (3, 2)] {
            let mut model = GanModel::new(&quantum_config(n, depth, true), 3).unwrap();
            model.critic = DenseNetwork::glorot(
                &[n + 1, 4, 1],
                &[Activation::LeakyRelu, Activation::Identity],
                &mut stream(9, Stream::Init),
            )
            .unwrap();
            let mut rng = stream(n as u64, Stream::Latent);
            let latents = sample_latent(GeneratorKind::Quantum, n, 4, &mut rng).unwrap();
            let settings = GradientSettings::default();
            let (_, g) = model.generator_loss_and_gradient(&latents, &settings, &mut rng).unwrap();
            let num = numeric_core_gradient(&model, &latents, 1e-5);
            for (a, b) in g.core.iter().zip(&num) {
                assert!((a - b).abs() < 1e-3, "{a} vs {b}");
            }
            let shift = GradientSettings { mode: GradientMode::ParamShift, ..settings };
            let (_, gs) = model.generator_loss_and_gradient(&latents, &shift, &mut rng).unwrap();
            for (a, b) in gs.core.iter().zip(&num) {
                assert!((a - b).abs() < 1e-6, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn classical_body_gradient_matches_finite_differences() {
        let cfg = ModelConfig {
            generator: GeneratorConfig {
                variant: GeneratorKind::Classical,
                latent_dim: 3,
                data_dim: 4,
                body: vec![3, 3],
                ..Default::default()
            },
            critic: CriticConfig::default(),
        };
        let model = GanModel::new(&cfg, 8).unwrap();
        let mut rng = stream(2, Stream::Latent);
        let latents = sample_latent(GeneratorKind::Classical, 3, 5, &mut rng).unwrap();
        let (_, g) =
            model.generator_loss_and_gradient(&latents, &GradientSettings::default(), &mut rng).unwrap();
        let num = numeric_core_gradient(&model, &latents, 1e-6);
        assert_eq!(g.core.len(), num.len());
        for (a, b) in g.core.iter().zip(&num) {
            assert!((a - b).abs() < 1e-7, "{a} vs {b}");
        }
    }

    #[test]
    fn latent_pullback_matches_finite_differences() {
        let model = GanModel::new(&quantum_config(3, 2, true), 4).unwrap();
        let mut rng = stream(0, Stream::Shots);
        let z = vec![0.4, -0.9, 1.7];
        let w = [0.3, -0.2, 0.5, 0.1];
        let f = |z: &[f64], rng: &mut crate::rng::StreamRng| -> f64 {
            let x = model.generator.generate(z, Readout::Analytic, rng).unwrap();
            x.iter().zip(&w).map(|(a, b)| a * b).sum()
        };
        let pass = model.generator.forward(&z, Readout::Analytic, &mut rng).unwrap();
        let g = model
            .generator
            .pullback(&z, &pass, &w, &GradientSettings::default(), Wrt::Latent, &mut rng)
            .unwrap();
        for k in 0..3 {
            let mut zp = z.clone();
            zp[k] += 1e-5;
            let mut zm = z.clone();
            zm[k] -= 1e-5;
            let num = (f(&zp, &mut rng) - f(&zm, &mut rng)) / 2e-5;
            assert!((g.latent[k] - num).abs() < 1e-3);
        }
    }
}
