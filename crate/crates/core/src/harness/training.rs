use serde::{Deserialize, Serialize};

use super::WorldSpec;
use crate::error::{Error, Result};
use crate::numerics::RngStream;
use crate::worldmodel::{train_mlp, AnyModel, ModelDocument, ModelMetadata, TrainConfig, TrainReport, Transition, WorldModel};

/// Dataset and optimizer settings for fitting an MLP to a reference world.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainModelConfig {
    pub world: WorldSpec,
    pub samples: usize,
    /// States and actions are drawn uniformly from these boxes.
    pub state_lo: Vec<f64>,
    pub state_hi: Vec<f64>,
    pub action_lo: Vec<f64>,
    pub action_hi: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub train: TrainConfig,
}

fn check_box(name: &str, dim: usize, lo: &[f64], hi: &[f64]) -> Result<()> {
    if lo.len() != dim || hi.len() != dim || lo.iter().zip(hi).any(|(l, h)| !(l <= h)) {
        return Err(Error::Config(format!("{name} bounds must have {dim} entries with lo <= hi")));
    }
    Ok(())
}

/// Samples transitions of the reference world and trains an MLP on them.
pub fn train_model(cfg: &TrainModelConfig) -> Result<(ModelDocument, TrainReport)> {
    let world: AnyModel<f64> = cfg.world.build()?;
    check_box("state", world.state_dim(), &cfg.state_lo, &cfg.state_hi)?;
    check_box("action", world.action_dim(), &cfg.action_lo, &cfg.action_hi)?;
    if cfg.samples == 0 {
        return Err(Error::Config("samples must be >= 1".into()));
    }
    let mut rng = RngStream::new(cfg.seed, 0);
    let mut draw = |lo: &[f64], hi: &[f64]| -> Vec<f64> {
        lo.iter().zip(hi).map(|(&l, &h)| rng.uniform_range(l, h)).collect()
    };
    let data: Vec<Transition<f64>> = (0..cfg.samples)
        .map(|_| {
            let state = draw(&cfg.state_lo, &cfg.state_hi);
            let action = draw(&cfg.action_lo, &cfg.action_hi);
            let next = world.forward(&state, &action)?;
            Ok(Transition { state, action, next })
        })
        .collect::<Result<_>>()?;
    let (model, report) = train_mlp(&data, &cfg.train, &mut RngStream::new(cfg.seed, 1))?;
    let doc = AnyModel::Mlp(model).to_document(ModelMetadata {
        seed: Some(cfg.seed),
        training_loss: Some(report.heldout_mse),
    });
    Ok((doc, report))
}
