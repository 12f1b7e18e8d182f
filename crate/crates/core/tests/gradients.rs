use std::collections::BTreeSet;

use near_core::autodiff::{gradcheck, Init, ParamStore};
use near_core::data::{Label, Trajectory};
use near_core::dsl::{default_grammar, Grammar, NeuralKind, Op, Task};
use near_core::relax::{relax, RelaxConfig};
use near_core::toy::random_derivation;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grammars() -> [Grammar; 2] {
    let sel = [("Lo", vec![0, 1]), ("Hi", vec![1, 2])];
    [
        default_grammar(3, 3, &sel, Task::PerFrame).unwrap(),
        default_grammar(3, 3, &sel, Task::PerTrajectory).unwrap(),
    ]
}

fn batch(rng: &mut ChaCha8Rng, per_frame: bool) -> Vec<Trajectory> {
    (0..2)
        .map(|_| {
            let len = rng.gen_range(1..=13);
            let frames: Vec<Vec<f64>> = (0..len)
                .map(|_| (0..3).map(|_| rng.gen_range(-1.5..1.5)).collect())
                .collect();
            let label = if per_frame {
                Label::Frames((0..len).map(|_| rng.gen_range(0..3)).collect())
            } else {
                Label::Trajectory(rng.gen_range(0..3))
            };
            Trajectory::new(&frames, label)
        })
        .collect()
}

#[test]
fn central_differences_match_analytic_gradients() {
    let gs = grammars();
    let relax_cfg = RelaxConfig {
        init_units: 3,
        min_units: 2,
        max_depth: 6,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut seen = BTreeSet::new();
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let g = &gs[case % 2];
        let partial = random_derivation(g, 7, 0.2, &mut rng);
        let arch = relax(&partial, 1, &relax_cfg);
        for n in arch.nodes() {
            match &n.op {
                Op::Construct(p) => seen.insert(p.name()),
                Op::Neural(s) => seen.insert(match s.kind {
                    NeuralKind::Feedforward => "ff".to_string(),
                    _ => "rnn".to_string(),
                }),
                Op::Hole => unreachable!(),
            };
        }
        let params = ParamStore::init(&arch, Init::Gaussian(0.7), &mut rng);
        let data = batch(&mut rng, case % 2 == 0);
        let refs: Vec<&Trajectory> = data.iter().collect();
        let beta = rng.gen_range(0.5..3.0);
        let r = gradcheck(&arch, &params, &refs, beta, 1e-4).unwrap();
        worst = worst.max(r.max_rel_err);
    }
    assert!(worst <= 1e-3, "max relative error {worst}");
    for c in [
        "Input",
        "Const",
        "LoAffine",
        "HiAffine",
        "StateAffine",
        "Add",
        "Multiply",
        "IfThenElse",
        "Map",
        "MapPrefix",
        "Fold",
        "SlidingWindowAvg",
        "ff",
        "rnn",
    ] {
        assert!(seen.contains(c), "{c} never exercised: {seen:?}");
    }
}
