//! Central finite-difference checks of the analytic gradients.

use super::train::{forward_backward, mean_loss, Batch, TrainError};
use super::ParamStore;
use crate::dsl::{Architecture, Compiled};

/// Gradients smaller than this are compared in absolute terms.
pub const RELATIVE_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// Largest `|analytic − numeric| / max(|analytic|, |numeric|, RELATIVE_FLOOR)`.
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    pub checked: usize,
}

/// Compares the gradient of the mean loss on `batch` with central
/// differences of width `2·step` in every parameter.
pub fn gradcheck(
    arch: &Architecture,
    params: &ParamStore,
    batch: &Batch,
    beta: f64,
    step: f64,
) -> Result<GradCheck, TrainError> {
    let mut p = params.clone();
    forward_backward(arch, &mut p, batch, None, beta)?;
    let analytic = p.grads().to_vec();
    let prog = Compiled::new(arch, params, beta)?;
    let mut out = GradCheck {
        max_rel_err: 0.0,
        max_abs_err: 0.0,
        checked: analytic.len(),
    };
    for (i, &a) in analytic.iter().enumerate() {
        let x = p.values()[i];
        p.values_mut()[i] = x + step;
        let up = mean_loss(&prog, &p, batch, None)?;
        p.values_mut()[i] = x - step;
        let down = mean_loss(&prog, &p, batch, None)?;
        p.values_mut()[i] = x;
        let n = (up - down) / (2.0 * step);
        let abs = (a - n).abs();
        out.max_abs_err = out.max_abs_err.max(abs);
        out.max_rel_err = out
            .max_rel_err
            .max(abs / a.abs().max(n.abs()).max(RELATIVE_FLOOR));
    }
    Ok(out)
}
