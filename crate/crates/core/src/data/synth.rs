//! Synthetic classification tasks labeled by a ground-truth program.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{DataError, Dataset, Label, Splits, Trajectory};
use crate::autodiff::ParamStore;
use crate::dsl::{evaluate, Architecture, DslError, Output, Task};
use crate::metrics::{argmax, f1_score, F1Mode};

/// How feature frames are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FrameDist {
    /// iid standard normal frames.
    StandardNormal,
    /// Gaussian random walk with the given step deviation, started at N(0, 1).
    RandomWalk { step: f64 },
}

#[derive(Debug, Clone)]
pub struct SyntheticTaskSpec {
    pub program: Architecture,
    pub params: ParamStore,
    pub label_dim: usize,
    /// Probability that a label is replaced by a different class.
    pub noise: f64,
    /// Inclusive range of trajectory lengths.
    pub len_range: (usize, usize),
    pub n_train: usize,
    pub n_valid: usize,
    pub n_test: usize,
    pub seed: u64,
    pub frames: FrameDist,
    pub beta: f64,
}

fn flip<R: Rng>(y: usize, k: usize, noise: f64, rng: &mut R) -> usize {
    if k < 2 || rng.gen::<f64>() >= noise {
        return y;
    }
    let other = rng.gen_range(0..k - 1);
    if other >= y {
        other + 1
    } else {
        other
    }
}

/// Samples a dataset and returns it with the generator's F1 on the noisy test
/// split (the best score a learned program can be expected to reach).
pub fn generate_synthetic(spec: &SyntheticTaskSpec) -> Result<(Dataset, f64), DataError> {
    if !(0.0..0.5).contains(&spec.noise) {
        return Err(DataError::Invalid(format!(
            "noise rate must be in [0, 0.5), got {}",
            spec.noise
        )));
    }
    let (lo, hi) = spec.len_range;
    if lo == 0 || hi < lo {
        return Err(DataError::Invalid(
            "trajectory lengths must satisfy 1 ≤ min ≤ max".into(),
        ));
    }
    if !spec.program.is_complete() {
        return Err(DslError::Incomplete.into());
    }
    spec.program.typecheck()?;
    let sig = spec.program.signature();
    let task = if sig.output.is_sequence() {
        Task::PerFrame
    } else {
        Task::PerTrajectory
    };
    if sig.output.dim() != spec.label_dim {
        return Err(DataError::Invalid(format!(
            "generator outputs {} logits for {} classes",
            sig.output.dim(),
            spec.label_dim
        )));
    }
    let d = sig.input.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let total = spec.n_train + spec.n_valid + spec.n_test;
    let mut trajs = Vec::with_capacity(total);
    let mut clean: Vec<usize> = Vec::new();
    for _ in 0..total {
        let len = rng.gen_range(lo..=hi);
        let mut frames: Vec<Vec<f64>> = Vec::with_capacity(len);
        for t in 0..len {
            let frame: Vec<f64> = (0..d)
                .map(|j| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    match spec.frames {
                        FrameDist::StandardNormal => z,
                        FrameDist::RandomWalk { step } if t > 0 => frames[t - 1][j] + step * z,
                        FrameDist::RandomWalk { .. } => z,
                    }
                })
                .collect();
            frames.push(frame);
        }
        let ys = match evaluate(&spec.program, &spec.params, &frames, spec.beta)? {
            Output::Sequence(out) => out.iter().map(|o| argmax(o)).collect::<Vec<_>>(),
            Output::Vector(o) => vec![argmax(&o)],
        };
        clean.extend(&ys);
        let noisy: Vec<usize> = ys
            .iter()
            .map(|&y| flip(y, spec.label_dim, spec.noise, &mut rng))
            .collect();
        let label = match task {
            Task::PerFrame => Label::Frames(noisy),
            Task::PerTrajectory => Label::Trajectory(noisy[0]),
        };
        trajs.push((Trajectory::new(&frames, label), ys));
    }
    if let Some(&first) = clean.first() {
        if clean.iter().all(|&y| y == first) {
            return Err(DataError::Degenerate(first));
        }
    }
    let splits = Splits {
        train: (0..spec.n_train).collect(),
        valid: (spec.n_train..spec.n_train + spec.n_valid).collect(),
        test: (spec.n_train + spec.n_valid..total).collect(),
    };
    let (mut preds, mut labels) = (Vec::new(), Vec::new());
    for &i in &splits.test {
        preds.extend(&trajs[i].1);
        labels.extend(trajs[i].0.targets());
    }
    let ceiling = f1_score(&preds, &labels, F1Mode::for_classes(spec.label_dim));
    let trajs = trajs.into_iter().map(|(t, _)| t).collect();
    let data = Dataset::new(trajs, splits, d, spec.label_dim, task)?;
    Ok((data, ceiling))
}
