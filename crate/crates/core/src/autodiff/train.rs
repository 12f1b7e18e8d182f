//! Cross-entropy training of a complete program with Adam.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::params::ParamStore;
use super::tape::{Tape, Var};
use crate::data::{Label, Trajectory};
use crate::dsl::{Architecture, Compiled, DslError, OutVars};

const ADAM_B1: f64 = 0.9;
const ADAM_B2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("epochs must be ≥ 1")]
    ZeroEpochs,
    #[error("learning rate must be positive and finite, got {0}")]
    BadLearningRate(f64),
    #[error("batch size must be ≥ 1")]
    ZeroBatch,
    #[error("no training data")]
    EmptyData,
    #[error("loss became non-finite in epoch {epoch}; lower the learning rate or reinitialize")]
    Diverged { epoch: usize },
    #[error("label shape does not match the program output")]
    LabelShape,
    #[error(transparent)]
    Dsl(#[from] DslError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    /// Per-class loss weights; missing classes weigh 1.
    pub class_weights: Option<Vec<f64>>,
    pub seed: u64,
    /// Smooth-branch temperature β.
    pub beta: f64,
    /// Record the full training loss after every epoch.
    pub record_loss: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 15,
            lr: 0.001,
            batch_size: 50,
            class_weights: None,
            seed: 0,
            beta: 1.0,
            record_loss: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub epoch_losses: Vec<f64>,
}

/// Training examples handed to one gradient step.
pub type Batch<'a> = [&'a Trajectory];

fn class_weight(weights: Option<&[f64]>, y: usize) -> f64 {
    weights.and_then(|w| w.get(y)).copied().unwrap_or(1.0)
}

/// Records the batch loss on `tape` and returns it with its term count.
fn record_loss(
    prog: &Compiled,
    tape: &mut Tape,
    theta: &[f64],
    batch: &Batch,
    weights: Option<&[f64]>,
) -> Result<Var, TrainError> {
    let mut terms: Vec<Var> = Vec::new();
    for traj in batch {
        let dim = traj.features.len() / traj.len;
        match (prog.forward(tape, theta, &traj.features, dim), &traj.label) {
            (OutVars::Sequence(outs), Label::Frames(ys)) if outs.len() == ys.len() => {
                for (o, &y) in outs.into_iter().zip(ys) {
                    terms.push(tape.softmax_ce(o, y, class_weight(weights, y)));
                }
            }
            (OutVars::Vector(o), Label::Trajectory(y)) => {
                terms.push(tape.softmax_ce(o, *y, class_weight(weights, *y)));
            }
            _ => return Err(TrainError::LabelShape),
        }
    }
    let w = 1.0 / terms.len() as f64;
    let weighted: Vec<(Var, f64)> = terms.into_iter().map(|t| (t, w)).collect();
    Ok(tape.weighted_sum(&weighted))
}

fn check_batch(prog: &Compiled, batch: &Batch) -> Result<(), TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyData);
    }
    let dim = prog.signature().input.dim();
    for t in batch {
        if t.len == 0 || t.features.len() != t.len * dim {
            return Err(DslError::Input(format!("trajectory frames must have width {dim}")).into());
        }
        if t.features.iter().any(|v| !v.is_finite()) {
            return Err(DslError::NonFinite("input".into()).into());
        }
    }
    Ok(())
}

/// Mean cross-entropy over every labeled frame (or trajectory) of `batch`,
/// with gradients written into `params.grads()`.
pub fn forward_backward(
    arch: &Architecture,
    params: &mut ParamStore,
    batch: &Batch,
    class_weights: Option<&[f64]>,
    beta: f64,
) -> Result<f64, TrainError> {
    if !params.all_finite() {
        return Err(DslError::NonFinite("parameters".into()).into());
    }
    let prog = Compiled::new(arch, params, beta)?;
    check_batch(&prog, batch)?;
    let mut tape = Tape::new();
    params.zero_grads();
    let (theta, grads) = params.split_mut();
    let loss = record_loss(&prog, &mut tape, theta, batch, class_weights)?;
    let value = tape.value(loss)[0];
    if !value.is_finite() {
        return Err(TrainError::Diverged { epoch: 0 });
    }
    tape.backward(loss, 1.0, theta, grads);
    Ok(value)
}

/// Mean cross-entropy without gradients.
pub fn mean_loss(
    prog: &Compiled,
    params: &ParamStore,
    data: &Batch,
    class_weights: Option<&[f64]>,
) -> Result<f64, TrainError> {
    let mut tape = Tape::new();
    let loss = record_loss(prog, &mut tape, params.values(), data, class_weights)?;
    Ok(tape.value(loss)[0])
}

/// Adam on shuffled minibatches; `params` is updated in place.
pub fn train(
    arch: &Architecture,
    params: &mut ParamStore,
    data: &Batch,
    cfg: &TrainConfig,
) -> Result<TrainLog, TrainError> {
    if cfg.epochs == 0 {
        return Err(TrainError::ZeroEpochs);
    }
    if !(cfg.lr > 0.0 && cfg.lr.is_finite()) {
        return Err(TrainError::BadLearningRate(cfg.lr));
    }
    if cfg.batch_size == 0 {
        return Err(TrainError::ZeroBatch);
    }
    if !params.all_finite() {
        return Err(DslError::NonFinite("parameters".into()).into());
    }
    let prog = Compiled::new(arch, params, cfg.beta)?;
    check_batch(&prog, data)?;
    let weights = cfg.class_weights.as_deref();
    let n = params.len();
    let (mut m, mut v) = (vec![0.0; n], vec![0.0; n]);
    let mut step = 0i32;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut tape = Tape::new();
    let mut batch: Vec<&Trajectory> = Vec::with_capacity(cfg.batch_size);
    let mut log = TrainLog::default();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| data[i]));
            tape.clear();
            params.zero_grads();
            let (theta, grads) = params.split_mut();
            let loss = record_loss(&prog, &mut tape, theta, &batch, weights)?;
            if !tape.value(loss)[0].is_finite() {
                return Err(TrainError::Diverged { epoch });
            }
            tape.backward(loss, 1.0, theta, grads);
            step += 1;
            let c1 = 1.0 - ADAM_B1.powi(step);
            let c2 = 1.0 - ADAM_B2.powi(step);
            let g = params.grads().to_vec();
            let theta = params.values_mut();
            for i in 0..n {
                m[i] = ADAM_B1 * m[i] + (1.0 - ADAM_B1) * g[i];
                v[i] = ADAM_B2 * v[i] + (1.0 - ADAM_B2) * g[i] * g[i];
                theta[i] -= cfg.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + ADAM_EPS);
            }
        }
        if !params.all_finite() {
            return Err(TrainError::Diverged { epoch });
        }
        if cfg.record_loss {
            let l = mean_loss(&prog, params, data, weights)?;
            if !l.is_finite() {
                return Err(TrainError::Diverged { epoch });
            }
            log.epoch_losses.push(l);
        }
    }
    Ok(log)
}
