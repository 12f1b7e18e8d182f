use near_core::autodiff::{train, Init, ParamStore, TrainConfig};
use near_core::data::{evaluate_report, generate_synthetic, FrameDist, Split, SyntheticTaskSpec};
use near_core::dsl::{default_grammar, parse_program, Task};
use near_core::graph::{HeuristicKind, ProgramGraph, SearchConfig};
use near_core::relax::{fit, relax, RelaxConfig};
use near_core::search::{admissibility_probe, astar_near};
use near_core::toy::{
    random_derivation, random_grammar, toy_dataset, xor_benchmark, BenchmarkSize,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn separable_data_is_learned() {
    let g = default_grammar(3, 2, &[("Dist", vec![0, 1, 2])], Task::PerFrame).unwrap();
    let (arch, params) = parse_program(
        "map (fun x_t. DistAffine[[1, -2, 0.5], [-1, 2, -0.5]; 0.2, -0.2](x_t)) x",
        &g,
    )
    .unwrap();
    let (data, ceiling) = generate_synthetic(&SyntheticTaskSpec {
        program: arch.clone(),
        params: params.unwrap(),
        label_dim: 2,
        noise: 0.0,
        len_range: (5, 15),
        n_train: 120,
        n_valid: 30,
        n_test: 30,
        seed: 5,
        frames: FrameDist::StandardNormal,
        beta: 1.0,
    })
    .unwrap();
    assert_eq!(ceiling, 1.0);
    let cfg = TrainConfig {
        epochs: 30,
        lr: 0.05,
        batch_size: 20,
        record_loss: true,
        ..Default::default()
    };
    let mut p = ParamStore::init(&arch, Init::Default, &mut ChaCha8Rng::seed_from_u64(1));
    let log = train(&arch, &mut p, &data.split(Split::Train), &cfg).unwrap();
    assert_eq!(log.epoch_losses.len(), 30);
    assert!(log.epoch_losses[29] < 0.5 * log.epoch_losses[0]);
    let report = evaluate_report(&arch, &p, &data, 1.0).unwrap();
    assert!(report.f1 >= 0.95, "test F1 {}", report.f1);
}

#[test]
fn generator_refits_close_to_its_ceiling() {
    let size = BenchmarkSize {
        n_train: 200,
        n_valid: 50,
        n_test: 50,
        ..Default::default()
    };
    let b = xor_benchmark(size, 2).unwrap();
    let cfg = TrainConfig {
        epochs: 10,
        lr: 0.02,
        batch_size: 50,
        ..Default::default()
    };
    let f = fit(&b.generator, &b.data, &cfg, 0).unwrap();
    let report = evaluate_report(&b.generator, &f.params, &b.data, 1.0).unwrap();
    assert!(
        report.f1 >= 0.9 * b.ceiling,
        "F1 {} vs ceiling {}",
        report.f1,
        b.ceiling
    );
}

#[test]
fn probe_gaps_of_complete_nodes_are_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let data = toy_dataset(30, 15, 15, 6, 3);
    let cfg = SearchConfig {
        max_depth: 3,
        init_units: 4,
        min_units: 2,
        neural_epochs: 2,
        symbolic_epochs: 3,
        lr: 0.05,
        batch_size: 20,
        parallel: false,
        ..SearchConfig::default()
    };
    for _ in 0..4 {
        let g = random_grammar(8, &mut rng);
        let graph = ProgramGraph::new(&g, &data, cfg.clone(), HeuristicKind::Near).unwrap();
        let out = astar_near(&graph).unwrap();
        let report = admissibility_probe(&graph, &out.scored, 50, 0).unwrap();
        assert_eq!(report.entries.len(), out.scored.len());
        for (e, n) in report.entries.iter().zip(&out.scored) {
            assert!(e.exhaustive);
            if n.is_goal {
                assert_eq!(e.gap, 0.0);
            }
            assert!(e.gap <= report.epsilon_hat);
        }
        assert!(report.epsilon_hat >= 0.0);
        assert!(out.best.f <= graph.goal_path_cost(&out.best.state).unwrap() + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn zeta_lies_in_the_unit_interval(seed in any::<u64>()) {
        let data = toy_dataset(20, 10, 10, 5, seed % 7);
        let g = default_grammar(3, 2, &[("A", vec![0]), ("B", vec![1, 2])], Task::PerFrame).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let partial = random_derivation(&g, 6, 0.3, &mut rng);
        let arch = relax(&partial, 1, &RelaxConfig { init_units: 4, min_units: 2, max_depth: 6 });
        let cfg = TrainConfig { epochs: 2, lr: 0.02, batch_size: 10, ..Default::default() };
        let f = fit(&arch, &data, &cfg, seed).unwrap();
        prop_assert!((0.0..=1.0).contains(&f.zeta_val));
    }
}
