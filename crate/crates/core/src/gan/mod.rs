//! Wasserstein GAN with gradient penalty: generator variants, critic,
//! losses and the alternating training loop.

mod checkpoint;
mod model;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_arg, Result};
use crate::nn::{Activation, AdamConfig};
use crate::qsim::{CircuitKind, InitStrategy, Readout, DEFAULT_FD_STEP};

pub use checkpoint::{load_model, save_model, ModelMeta, MODEL_FORMAT_VERSION};
pub use model::{
    critic_loss, generator_loss, gradient_penalty, sample_latent, GanModel, Generator, GeneratorCore,
    GeneratorGradient, GeneratorPass, GradientSettings,
};
pub use train::{train, train_critic_step, train_generator_step, CriticStepStats, LossRecord, TrainRngs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Classical,
    #[default]
    Quantum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    /// Forward differences of analytic expectations.
    #[default]
    ForwardDiff,
    /// Parameter shift; required when expectations are sampled.
    ParamShift,
}

/// Generator structure. Fields irrelevant to the chosen `variant` are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub variant: GeneratorKind,
    /// Latent dimension; the qubit count for the quantum variant.
    pub latent_dim: usize,
    /// Output (data) dimension.
    pub data_dim: usize,
    /// Append a dense sigmoid layer from the core output to `data_dim`.
    pub use_upscaling: bool,
    /// Hidden widths of the leaky-ReLU body of the classical variant. Empty
    /// means the latent vector feeds the upscaling layer directly.
    pub body: Vec<usize>,
    pub circuit: CircuitKind,
    pub depth: usize,
    pub init: InitStrategy,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            variant: GeneratorKind::Quantum,
            latent_dim: 6,
            data_dim: 6,
            use_upscaling: true,
            body: Vec::new(),
            circuit: CircuitKind::C1,
            depth: 1,
            init: InitStrategy::Random,
        }
    }
}

impl GeneratorConfig {
    /// Dimension of the part before the upscaling layer.
    pub fn core_out_dim(&self) -> usize {
        match self.variant {
            GeneratorKind::Quantum => self.latent_dim,
            GeneratorKind::Classical => self.body.last().copied().unwrap_or(self.latent_dim),
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_arg!(self.latent_dim >= 1, "latent_dim must be at least 1");
        ensure_arg!(self.data_dim >= 1, "data_dim must be at least 1");
        ensure_arg!(self.body.iter().all(|&w| w >= 1), "body widths must be at least 1");
        if self.variant == GeneratorKind::Quantum {
            ensure_arg!(self.depth >= 1, "circuit depth must be at least 1");
        }
        if !self.use_upscaling {
            ensure_arg!(
                self.core_out_dim() == self.data_dim,
                "without upscaling the generator core emits {} values but data_dim is {}",
                self.core_out_dim(),
                self.data_dim
            );
            ensure_arg!(
                self.variant == GeneratorKind::Quantum || !self.body.is_empty(),
                "a classical generator needs a body or an upscaling layer"
            );
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CriticConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for CriticConfig {
    fn default() -> Self {
        Self { hidden: vec![16, 8], activation: Activation::Identity }
    }
}

impl CriticConfig {
    /// The `[3, 3]` critic used with reduced feature sets.
    pub fn reduced() -> Self {
        Self { hidden: vec![3, 3], ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub generator: GeneratorConfig,
    pub critic: CriticConfig,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        ensure_arg!(self.critic.hidden.iter().all(|&w| w >= 1), "critic widths must be at least 1");
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    /// Gradient-penalty weight.
    pub lambda: f64,
    pub batch_size: usize,
    /// Critic updates per generator update.
    pub n_critic: usize,
    pub generator_iters: usize,
    /// Measurement shots per expectation; analytic expectations when absent.
    pub shots: Option<usize>,
    pub gradient_mode: GradientMode,
    pub fd_step: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            adam: AdamConfig::default(),
            lambda: 10.0,
            batch_size: 64,
            n_critic: 5,
            generator_iters: 2700,
            shots: None,
            gradient_mode: GradientMode::ForwardDiff,
            fd_step: DEFAULT_FD_STEP,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.adam.validate()?;
        ensure_arg!(self.lambda >= 0.0 && self.lambda.is_finite(), "lambda must be non-negative");
        ensure_arg!(self.batch_size >= 1, "batch_size must be at least 1");
        ensure_arg!(self.n_critic >= 1, "n_critic must be at least 1");
        gradient_settings(self.shots, self.gradient_mode, self.fd_step).map(|_| ())
    }

    pub fn gradient_settings(&self) -> Result<GradientSettings> {
        gradient_settings(self.shots, self.gradient_mode, self.fd_step)
    }
}

pub(crate) fn gradient_settings(
    shots: Option<usize>,
    mode: GradientMode,
    fd_step: f64,
) -> Result<GradientSettings> {
    ensure_arg!(fd_step > 0.0 && fd_step.is_finite(), "fd_step must be positive");
    let readout = match shots {
        None => Readout::Analytic,
        Some(s) => {
            ensure_arg!(s >= 1, "shots must be at least 1");
            ensure_arg!(
                mode == GradientMode::ParamShift,
                "sampled expectations need gradient_mode = \"param_shift\""
            );
            Readout::Shots(s)
        }
    };
    Ok(GradientSettings { readout, mode, fd_step })
}
