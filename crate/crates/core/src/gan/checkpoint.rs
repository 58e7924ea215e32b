//! Model checkpoints: a directory holding `model.json` (structure, circuit
//! layout, bases and angles) plus one network file per dense network.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{GanModel, Generator, GeneratorCore};
use super::ModelConfig;
use crate::error::{Error, Result};
use crate::nn::checkpoint as netfile;
use crate::qsim::Ansatz;

pub const MODEL_FORMAT_VERSION: u32 = 1;

const META_FILE: &str = "model.json";
const CRITIC_FILE: &str = "critic.qnn";
const UPSCALE_FILE: &str = "upscale.qnn";
const BODY_FILE: &str = "body.qnn";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub format_version: u32,
    pub config: ModelConfig,
    pub seed: u64,
    pub generator_steps: u64,
    pub critic_steps: u64,
    pub ansatz: Option<Ansatz>,
    pub theta: Option<Vec<f64>>,
}

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format { path: path.to_path_buf(), message: message.into() }
}

pub fn save_model(model: &GanModel, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let (ansatz, theta) = match &model.generator.core {
        GeneratorCore::Quantum { ansatz, theta } => (Some(ansatz.clone()), Some(theta.clone())),
        GeneratorCore::Classical { body } => {
            if let Some(b) = body {
                netfile::save(b, &dir.join(BODY_FILE))?;
            }
            (None, None)
        }
    };
    if let Some(up) = &model.generator.upscale {
        netfile::save(up, &dir.join(UPSCALE_FILE))?;
    }
    netfile::save(&model.critic, &dir.join(CRITIC_FILE))?;
    let meta = ModelMeta {
        format_version: MODEL_FORMAT_VERSION,
        config: model.config.clone(),
        seed: model.seed,
        generator_steps: model.generator_steps,
        critic_steps: model.critic_steps,
        ansatz,
        theta,
    };
    let path = dir.join(META_FILE);
    let text = serde_json::to_string_pretty(&meta).map_err(|e| format_err(&path, e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

pub fn load_model(dir: &Path) -> Result<GanModel> {
    let path = dir.join(META_FILE);
    let meta: ModelMeta =
        serde_json::from_str(&fs::read_to_string(&path)?).map_err(|e| format_err(&path, e.to_string()))?;
    if meta.format_version != MODEL_FORMAT_VERSION {
        return Err(format_err(&path, format!("unsupported version {}", meta.format_version)));
    }
    let g = &meta.config.generator;
    let core = match (meta.ansatz, meta.theta) {
        (Some(ansatz), Some(theta)) => {
            ansatz.layout.validate()?;
            if theta.len() != ansatz.n_params() || ansatz.bases.len() != ansatz.n_params() {
                return Err(format_err(&path, "circuit angles do not match the layout"));
            }
            GeneratorCore::Quantum { ansatz, theta }
        }
        (None, None) => {
            let body_path = dir.join(BODY_FILE);
            let body = if g.body.is_empty() { None } else { Some(netfile::load(&body_path)?) };
            GeneratorCore::Classical { body }
        }
        _ => return Err(format_err(&path, "circuit layout and angles must appear together")),
    };
    let upscale = if g.use_upscaling { Some(netfile::load(&dir.join(UPSCALE_FILE))?) } else { None };
    let critic = netfile::load(&dir.join(CRITIC_FILE))?;
    let generator = Generator { latent_dim: g.latent_dim, core, upscale };
    if generator.out_dim() != critic.in_dim() || critic.out_dim() != 1 {
        return Err(format_err(&path, "generator and critic dimensions disagree"));
    }
    let mut model = GanModel::from_parts(meta.config, meta.seed, generator, critic);
    model.generator_steps = meta.generator_steps;
    model.critic_steps = meta.critic_steps;
    Ok(model)
}
