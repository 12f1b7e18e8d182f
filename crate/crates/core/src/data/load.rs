//! JSON-lines trajectory files and their manifest sidecar.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, Label, Splits, Trajectory};
use crate::dsl::Task;

#[derive(Debug, Deserialize, Serialize)]
struct Line {
    features: Vec<Vec<f64>>,
    label: Label,
}

/// Trajectory indices per split, as stored in a manifest.
pub type SplitManifest = Splits;

/// Metadata written next to a data file as `<file>.manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub task: Task,
    pub feature_dim: usize,
    pub label_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub splits: Option<SplitManifest>,
    /// Text of the generating program, for synthetic data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_params: Option<crate::autodiff::ParamStore>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<f64>,
    /// Test-split F1 of the generator on the noisy labels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f1_ceiling: Option<f64>,
}

impl Manifest {
    pub fn path_for(data: &Path) -> PathBuf {
        let mut s = data.as_os_str().to_owned();
        s.push(".manifest.json");
        PathBuf::from(s)
    }

    pub fn read(path: &Path) -> Result<Manifest, DataError> {
        let text = fs::read_to_string(path).map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text)
            .map_err(|e| DataError::Invalid(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq)]
#[derive(Default)]
pub struct LoadOptions {
    /// Falls back to the manifest when unset.
    pub task: Option<Task>,
    /// Falls back to the manifest, then to 1 + the largest label seen.
    pub label_dim: Option<usize>,
    /// Seed of the 70/15/15 shuffle used when no splits are given.
    pub split_seed: u64,
    /// Cut per-frame trajectories into pieces of at most this many frames.
    pub segment_max_len: Option<usize>,
    pub splits: Option<Splits>,
}


fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn random_splits(n: usize, seed: u64) -> Splits {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (n as f64 * 0.70).round() as usize;
    let n_valid = (n as f64 * 0.15).round() as usize;
    let (train, rest) = idx.split_at(n_train.min(n));
    let (valid, test) = rest.split_at(n_valid.min(rest.len()));
    Splits {
        train: train.to_vec(),
        valid: valid.to_vec(),
        test: test.to_vec(),
    }
}

pub fn load_dataset(path: &Path, opts: &LoadOptions) -> Result<Dataset, DataError> {
    let manifest_path = Manifest::path_for(path);
    let manifest = if manifest_path.exists() {
        Some(Manifest::read(&manifest_path)?)
    } else {
        None
    };
    let task = opts
        .task
        .or(manifest.as_ref().map(|m| m.task))
        .ok_or_else(|| {
            DataError::Invalid("the task (per_frame or per_trajectory) is not declared".into())
        })?;
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut trajs: Vec<Trajectory> = Vec::new();
    let mut dim = manifest.as_ref().map(|m| m.feature_dim);
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: Line = serde_json::from_str(&line).map_err(|e| DataError::Line {
            line: line_no,
            msg: e.to_string(),
        })?;
        if raw.features.is_empty() {
            return Err(DataError::Line {
                line: line_no,
                msg: "trajectory has no frames".into(),
            });
        }
        let d = *dim.get_or_insert(raw.features[0].len());
        if let Some((t, f)) = raw.features.iter().enumerate().find(|(_, f)| f.len() != d) {
            return Err(DataError::Line {
                line: line_no,
                msg: format!(
                    "frame {t} has dimension {} but the dataset has {d}",
                    f.len()
                ),
            });
        }
        if raw.features.iter().flatten().any(|v| !v.is_finite()) {
            return Err(DataError::Line {
                line: line_no,
                msg: "non-finite feature value".into(),
            });
        }
        match (&raw.label, task) {
            (Label::Trajectory(_), Task::PerTrajectory) => {}
            (Label::Frames(ys), Task::PerFrame) if ys.len() == raw.features.len() => {}
            (Label::Frames(ys), Task::PerFrame) => {
                return Err(DataError::Line {
                    line: line_no,
                    msg: format!("{} labels for {} frames", ys.len(), raw.features.len()),
                })
            }
            _ => {
                return Err(DataError::Line {
                    line: line_no,
                    msg: format!("label shape does not fit a {task:?} task"),
                })
            }
        }
        if let Some(k) = opts.label_dim.or(manifest.as_ref().map(|m| m.label_dim)) {
            let t = Trajectory::new(&raw.features, raw.label.clone());
            if let Some(y) = t.targets().iter().find(|&&y| y >= k) {
                return Err(DataError::Line {
                    line: line_no,
                    msg: format!("label {y} outside [0, {k})"),
                });
            }
        }
        trajs.push(Trajectory::new(&raw.features, raw.label));
    }
    if trajs.is_empty() {
        return Err(DataError::Invalid(format!(
            "{} holds no trajectories",
            path.display()
        )));
    }
    let label_dim = opts
        .label_dim
        .or(manifest.as_ref().map(|m| m.label_dim))
        .unwrap_or_else(|| {
            trajs
                .iter()
                .flat_map(|t| t.targets().iter().copied())
                .max()
                .unwrap_or(0)
                + 1
        });
    let splits = opts
        .splits
        .clone()
        .or(manifest.and_then(|m| m.splits))
        .unwrap_or_else(|| random_splits(trajs.len(), opts.split_seed));
    let (trajs, splits) = match opts.segment_max_len {
        Some(0) => return Err(DataError::Invalid("segment_max_len must be ≥ 1".into())),
        Some(max) if task == Task::PerFrame => segment(trajs, &splits, max),
        _ => (trajs, splits),
    };
    Dataset::new(trajs, splits, dim.unwrap_or(0), label_dim, task)
}

/// Cuts trajectories into consecutive pieces of at most `max` frames; each
/// piece stays in its parent's split.
fn segment(trajs: Vec<Trajectory>, splits: &Splits, max: usize) -> (Vec<Trajectory>, Splits) {
    let mut pieces: Vec<Vec<usize>> = Vec::with_capacity(trajs.len());
    let mut out = Vec::new();
    for t in trajs {
        let d = t.dim();
        let Label::Frames(ys) = &t.label else {
            unreachable!("segmentation applies to per-frame labels")
        };
        let mut ids = Vec::new();
        for start in (0..t.len).step_by(max) {
            let end = (start + max).min(t.len);
            ids.push(out.len());
            out.push(Trajectory {
                features: t.features[start * d..end * d].to_vec(),
                len: end - start,
                label: Label::Frames(ys[start..end].to_vec()),
            });
        }
        pieces.push(ids);
    }
    let remap = |idx: &[usize]| -> Vec<usize> {
        idx.iter()
            .flat_map(|&i| pieces.get(i).cloned().unwrap_or_default())
            .collect()
    };
    let splits = Splits {
        train: remap(&splits.train),
        valid: remap(&splits.valid),
        test: remap(&splits.test),
    };
    (out, splits)
}

/// Writes `data` as JSON lines plus its manifest sidecar.
pub fn write_dataset(path: &Path, data: &Dataset, mut manifest: Manifest) -> Result<(), DataError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for t in &data.trajectories {
        let line = Line {
            features: t.frames(),
            label: t.label.clone(),
        };
        let text = serde_json::to_string(&line).expect("trajectories serialize");
        writeln!(w, "{text}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))?;
    manifest.task = data.task;
    manifest.feature_dim = data.feature_dim;
    manifest.label_dim = data.label_dim;
    manifest.splits = Some(data.splits.clone());
    let mpath = Manifest::path_for(path);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&mpath, text + "\n").map_err(io_err(&mpath))
}
