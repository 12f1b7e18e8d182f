//! Labeled trajectories, JSON-lines ingestion, synthetic tasks and reports.

mod load;
mod report;
mod synth;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{DslError, Task};

pub use load::{load_dataset, write_dataset, LoadOptions, Manifest, SplitManifest};
pub use report::{evaluate_report, Report};
pub use synth::{generate_synthetic, FrameDist, SyntheticTaskSpec};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
    #[error("{0}")]
    Invalid(String),
    #[error("generator labels every frame with class {0}; try another seed")]
    Degenerate(usize),
    #[error(transparent)]
    Dsl(#[from] DslError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Trajectory(usize),
    Frames(Vec<usize>),
}

/// One sequence of feature frames stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub features: Vec<f64>,
    pub len: usize,
    pub label: Label,
}

impl Trajectory {
    pub fn new(frames: &[Vec<f64>], label: Label) -> Self {
        Trajectory {
            features: frames.iter().flatten().copied().collect(),
            len: frames.len(),
            label,
        }
    }

    pub fn dim(&self) -> usize {
        self.features.len() / self.len.max(1)
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.features[i * d..(i + 1) * d]
    }

    pub fn frames(&self) -> Vec<Vec<f64>> {
        self.features
            .chunks(self.dim())
            .map(<[f64]>::to_vec)
            .collect()
    }

    /// Labels as a slice: one entry per frame or a single entry.
    pub fn targets(&self) -> &[usize] {
        match &self.label {
            Label::Trajectory(y) => std::slice::from_ref(y),
            Label::Frames(ys) => ys,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    pub fn get(&self, s: Split) -> &[usize] {
        match s {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub trajectories: Vec<Trajectory>,
    pub splits: Splits,
    pub feature_dim: usize,
    pub label_dim: usize,
    pub task: Task,
}

impl Dataset {
    /// Validates the dataset invariants and assembles it.
    pub fn new(
        trajectories: Vec<Trajectory>,
        splits: Splits,
        feature_dim: usize,
        label_dim: usize,
        task: Task,
    ) -> Result<Self, DataError> {
        if feature_dim == 0 || label_dim == 0 {
            return Err(DataError::Invalid(
                "feature and label dims must be ≥ 1".into(),
            ));
        }
        for (i, t) in trajectories.iter().enumerate() {
            let line = i + 1;
            if t.len == 0 || t.features.len() != t.len * feature_dim {
                return Err(DataError::Line {
                    line,
                    msg: format!("frames must have dimension {feature_dim}"),
                });
            }
            match (&t.label, task) {
                (Label::Trajectory(_), Task::PerTrajectory) => {}
                (Label::Frames(ys), Task::PerFrame) if ys.len() == t.len => {}
                _ => {
                    return Err(DataError::Line {
                        line,
                        msg: format!("label shape does not fit a {task:?} task"),
                    })
                }
            }
            if let Some(&y) = t.targets().iter().find(|&&y| y >= label_dim) {
                return Err(DataError::Line {
                    line,
                    msg: format!("label {y} outside [0, {label_dim})"),
                });
            }
        }
        let n = trajectories.len();
        let mut seen = vec![false; n];
        for (name, idx) in [
            ("train", &splits.train),
            ("valid", &splits.valid),
            ("test", &splits.test),
        ] {
            if idx.is_empty() {
                return Err(DataError::Invalid(format!("{name} split is empty")));
            }
            for &i in idx {
                if i >= n {
                    return Err(DataError::Invalid(format!(
                        "{name} split references trajectory {i} of {n}"
                    )));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(DataError::Invalid(format!(
                        "trajectory {i} appears in more than one split"
                    )));
                }
            }
        }
        Ok(Dataset {
            trajectories,
            splits,
            feature_dim,
            label_dim,
            task,
        })
    }

    pub fn split(&self, s: Split) -> Vec<&Trajectory> {
        self.splits
            .get(s)
            .iter()
            .map(|&i| &self.trajectories[i])
            .collect()
    }

    pub fn max_seq_len(&self) -> usize {
        self.trajectories.iter().map(|t| t.len).max().unwrap_or(0)
    }
}
