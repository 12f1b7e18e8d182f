use serde::{Deserialize, Serialize};

use super::{Dataset, Split};
use crate::autodiff::ParamStore;
use crate::dsl::{Architecture, DslError};
use crate::metrics::{accuracy, f1_score, predict, F1Mode};

/// Test-split quality and size of a program.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub accuracy: f64,
    pub f1: f64,
    pub depth: usize,
    pub structural_cost: f64,
}

pub fn evaluate_report(
    arch: &Architecture,
    params: &ParamStore,
    data: &Dataset,
    beta: f64,
) -> Result<Report, DslError> {
    let (p, y) = predict(arch, params, &data.split(Split::Test), beta)?;
    Ok(Report {
        accuracy: accuracy(&p, &y),
        f1: f1_score(&p, &y, F1Mode::for_classes(data.label_dim)),
        depth: arch.depth(),
        structural_cost: arch.structural_cost(),
    })
}
