//! Classification metrics and the prediction error ζ.

use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamStore, Tape};
use crate::data::Trajectory;
use crate::dsl::{Architecture, Compiled, DslError, OutVars};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum F1Mode {
    /// F1 of class 1.
    BinaryPositive,
    /// Unweighted mean over the classes occurring in labels or predictions.
    Macro,
}

impl F1Mode {
    pub fn for_classes(k: usize) -> Self {
        if k == 2 {
            F1Mode::BinaryPositive
        } else {
            F1Mode::Macro
        }
    }
}

/// `counts[label][pred]`.
pub fn confusion(preds: &[usize], labels: &[usize], k: usize) -> Vec<Vec<usize>> {
    assert_eq!(preds.len(), labels.len());
    let mut m = vec![vec![0; k]; k];
    for (&p, &y) in preds.iter().zip(labels) {
        m[y][p] += 1;
    }
    m
}

fn class_f1(preds: &[usize], labels: &[usize], c: usize) -> f64 {
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (&p, &y) in preds.iter().zip(labels) {
        match (p == c, y == c) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            _ => {}
        }
    }
    let denom = 2 * tp + fp + fneg;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

pub fn f1_score(preds: &[usize], labels: &[usize], mode: F1Mode) -> f64 {
    assert_eq!(
        preds.len(),
        labels.len(),
        "prediction/label length mismatch"
    );
    match mode {
        F1Mode::BinaryPositive => class_f1(preds, labels, 1),
        F1Mode::Macro => {
            let mut classes: Vec<usize> = preds.iter().chain(labels).copied().collect();
            classes.sort_unstable();
            classes.dedup();
            if classes.is_empty() {
                return 0.0;
            }
            classes
                .iter()
                .map(|&c| class_f1(preds, labels, c))
                .sum::<f64>()
                / classes.len() as f64
        }
    }
}

pub fn accuracy(preds: &[usize], labels: &[usize]) -> f64 {
    assert_eq!(preds.len(), labels.len());
    if labels.is_empty() {
        return 0.0;
    }
    let hits = preds.iter().zip(labels).filter(|(p, y)| p == y).count();
    hits as f64 / labels.len() as f64
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Flattened (predictions, labels) of a program over `data`.
pub fn predict(
    arch: &Architecture,
    params: &ParamStore,
    data: &[&Trajectory],
    beta: f64,
) -> Result<(Vec<usize>, Vec<usize>), DslError> {
    if !params.all_finite() {
        return Err(DslError::NonFinite("parameters".into()));
    }
    let prog = Compiled::new(arch, params, beta)?;
    let dim = prog.signature().input.dim();
    let mut tape = Tape::new();
    let (mut preds, mut labels) = (Vec::new(), Vec::new());
    for t in data {
        if t.features.len() != t.len * dim || t.len == 0 {
            return Err(DslError::Input(format!("frames must have width {dim}")));
        }
        tape.clear();
        match prog.forward(&mut tape, params.values(), &t.features, dim) {
            OutVars::Vector(v) => preds.push(argmax(tape.value(v))),
            OutVars::Sequence(vs) => preds.extend(vs.iter().map(|&v| argmax(tape.value(v)))),
        }
        labels.extend_from_slice(t.targets());
        if preds.len() != labels.len() {
            return Err(DslError::Input(
                "label shape does not match the program output".into(),
            ));
        }
    }
    Ok((preds, labels))
}

/// `1 − F1` of the program's argmax predictions on `data`.
pub fn zeta(
    arch: &Architecture,
    params: &ParamStore,
    data: &[&Trajectory],
    label_dim: usize,
    beta: f64,
) -> Result<f64, DslError> {
    let (p, y) = predict(arch, params, data, beta)?;
    Ok(1.0 - f1_score(&p, &y, F1Mode::for_classes(label_dim)))
}
