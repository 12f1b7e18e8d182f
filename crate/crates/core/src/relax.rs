//! Neural relaxation of partial programs and the NEAR heuristic.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{train, Init, ParamStore, TrainConfig, TrainError};
use crate::data::{Dataset, Split};
use crate::dsl::{Architecture, Node};
use crate::metrics::zeta;

/// Capacity schedule for the neural modules that fill holes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxConfig {
    pub init_units: usize,
    pub min_units: usize,
    pub max_depth: usize,
}

/// `max(min, round(init · decay^depth))` with `decay = (min/init)^(1/max_depth)`.
pub fn units_for_depth(depth: usize, cfg: &RelaxConfig) -> usize {
    let (init, min) = (cfg.init_units.max(1), cfg.min_units.max(1));
    if cfg.max_depth == 0 || min >= init {
        return init.max(min);
    }
    let decay = (min as f64 / init as f64).powf(1.0 / cfg.max_depth as f64);
    let u = (init as f64 * decay.powi(depth.min(cfg.max_depth) as i32)).round() as usize;
    u.clamp(min, init)
}

/// Replaces every hole of `u` with the neural module its signature calls for.
pub fn relax(u: &Architecture, depth: usize, cfg: &RelaxConfig) -> Architecture {
    if u.is_complete() {
        return u.clone();
    }
    let units = units_for_depth(depth, cfg);
    u.map_holes(&mut |sig| Node::neural(sig, units).expect("well-formed signatures have a module"))
}

/// Parameters and validation error of a trained program.
#[derive(Debug, Clone)]
pub struct Fitted {
    pub arch: Architecture,
    pub params: ParamStore,
    pub zeta_val: f64,
    pub epochs: usize,
    pub diverged: bool,
}

/// Seed used to initialize and train `arch`; depends only on its structure.
pub fn training_seed(arch: &Architecture, base_seed: u64) -> u64 {
    let mut z = arch.structural_hash() ^ base_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Trains a complete program on the training split and scores it on the
/// validation split. A diverged run scores ζ = 1.
pub fn fit(
    arch: &Architecture,
    data: &Dataset,
    cfg: &TrainConfig,
    base_seed: u64,
) -> Result<Fitted, TrainError> {
    let seed = training_seed(arch, base_seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParamStore::init(arch, Init::Default, &mut rng);
    let cfg = TrainConfig {
        seed,
        record_loss: false,
        ..cfg.clone()
    };
    let train_set = data.split(Split::Train);
    match train(arch, &mut params, &train_set, &cfg) {
        Ok(_) => {}
        Err(TrainError::Diverged { epoch }) => {
            log::warn!(
                "training diverged in epoch {epoch} for {}; scoring it as ζ = 1",
                arch.canonical()
            );
            return Ok(Fitted {
                arch: arch.clone(),
                params,
                zeta_val: 1.0,
                epochs: cfg.epochs,
                diverged: true,
            });
        }
        Err(e) => return Err(e),
    }
    let z = zeta(
        arch,
        &params,
        &data.split(Split::Valid),
        data.label_dim,
        cfg.beta,
    )?;
    Ok(Fitted {
        arch: arch.clone(),
        params,
        zeta_val: z,
        epochs: cfg.epochs,
        diverged: false,
    })
}

/// h(u): validation error of the trained relaxation of `u`.
#[derive(Debug, Clone)]
pub struct HeuristicResult {
    pub h: f64,
    pub fitted: Fitted,
}

pub fn heuristic(
    u: &Architecture,
    depth: usize,
    data: &Dataset,
    relax_cfg: &RelaxConfig,
    train_cfg: &TrainConfig,
    seed: u64,
) -> Result<HeuristicResult, TrainError> {
    let fitted = fit(&relax(u, depth, relax_cfg), data, train_cfg, seed)?;
    Ok(HeuristicResult {
        h: fitted.zeta_val,
        fitted,
    })
}

/// A fully neural classifier: the start hole relaxed at depth 0.
pub fn rnn_baseline(
    start: crate::dsl::Signature,
    units: usize,
    data: &Dataset,
    train_cfg: &TrainConfig,
    seed: u64,
) -> Result<Fitted, TrainError> {
    let root = Node::neural(start, units).expect("well-formed start signature");
    let arch = Architecture::from_root(root).expect("a lone module is well-typed");
    fit(&arch, data, train_cfg, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{NeuralKind, Op, Signature};

    const BBALL: RelaxConfig = RelaxConfig {
        init_units: 16,
        min_units: 4,
        max_depth: 8,
    };

    #[test]
    fn unit_schedule_endpoints() {
        assert_eq!(units_for_depth(0, &BBALL), 16);
        assert_eq!(units_for_depth(8, &BBALL), 4);
        assert_eq!(units_for_depth(20, &BBALL), 4);
        let mut prev = usize::MAX;
        for d in 0..12 {
            let u = units_for_depth(d, &BBALL);
            assert!(u <= prev);
            prev = u;
        }
    }

    #[test]
    fn start_hole_becomes_seq2seq_module() {
        let u = Architecture::empty(Signature::seq_to_seq(19, 2));
        let r = relax(&u, 0, &BBALL);
        match &r.root().op {
            Op::Neural(spec) => {
                assert_eq!(spec.kind, NeuralKind::Seq2Seq);
                assert_eq!(spec.units, 16);
            }
            other => panic!("expected a neural module, got {other:?}"),
        }
        assert!(r.is_complete());
        assert!(r.typecheck().is_ok());
    }

    #[test]
    fn seeds_depend_on_structure_only() {
        let a = Architecture::empty(Signature::seq_to_seq(3, 2));
        let b = Architecture::empty(Signature::seq_to_seq(3, 2));
        assert_eq!(training_seed(&a, 7), training_seed(&b, 7));
        assert_ne!(training_seed(&a, 7), training_seed(&a, 8));
    }
}
