//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::path::Path;
use std::time::Instant;

use near_cli::{probe, run_once, Algorithm, RunConfig, RunResult};
use near_core::autodiff::{gradcheck, Init, ParamStore};
use near_core::data::{write_dataset, Dataset, Label, Manifest, Trajectory};
use near_core::dsl::{default_grammar, smooth_if, Architecture, Grammar, NeuralKind, Op, Task};
use near_core::graph::{exhaustive_goal_costs, HeuristicKind, ProgramGraph, SearchConfig};
use near_core::relax::{relax, RelaxConfig};
use near_core::search::{
    astar_near, enumerate, genetic, iddfs_near, mc_sample, mcts_uct, EnumerateConfig,
    GeneticConfig, McConfig, MctsConfig, RuleWeighting,
};
use near_core::toy::{
    random_derivation, random_grammar, toy_dataset, xor_benchmark, Benchmark, BenchmarkSize,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: [u64; 3] = [0, 1, 2];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

/// Shared state: goal costs checked from scratch (criterion 8) and IDDFS
/// histories (criterion 10).
#[derive(Default)]
struct Ledger {
    max_cost_error: f64,
    goals_checked: usize,
    fmin_histories: Vec<Vec<f64>>,
}

impl Ledger {
    /// Recomputes λ·s(α) + ζ on a fresh graph, retraining α.
    fn check_goal(
        &mut self,
        grammar: &Grammar,
        data: &Dataset,
        cfg: &SearchConfig,
        arch: &Architecture,
        cost: f64,
    ) {
        let fresh = ProgramGraph::new(grammar, data, cfg.clone(), HeuristicKind::Zero).unwrap();
        let z = fresh.evaluate_goal(arch).unwrap().zeta_val;
        let recomputed = cfg.lambda * arch.structural_cost() + z;
        self.max_cost_error = self.max_cost_error.max((recomputed - cost).abs());
        self.goals_checked += 1;
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn criterion_1() -> Verdict {
    let sel = [("Lo", vec![0, 1]), ("Hi", vec![1, 2])];
    let grammars = [
        default_grammar(3, 3, &sel, Task::PerFrame).unwrap(),
        default_grammar(3, 3, &sel, Task::PerTrajectory).unwrap(),
    ];
    let relax_cfg = RelaxConfig {
        init_units: 3,
        min_units: 2,
        max_depth: 6,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut seen = BTreeSet::new();
    let mut worst: f64 = 0.0;
    let (mut case, mut redrawn) = (0, 0);
    while case < 100 {
        let per_frame = case % 2 == 0;
        let arch = relax(
            &random_derivation(&grammars[case % 2], 7, 0.2, &mut rng),
            1,
            &relax_cfg,
        );
        let names: Vec<String> = arch
            .nodes()
            .iter()
            .filter_map(|n| match &n.op {
                Op::Construct(p) => Some(p.name()),
                Op::Neural(s) if s.kind == NeuralKind::Feedforward => Some("feedforward".into()),
                Op::Neural(_) => Some("recurrent".into()),
                Op::Hole => None,
            })
            .collect();
        let params = ParamStore::init(&arch, Init::Gaussian(0.7), &mut rng);
        let batch: Vec<Trajectory> = (0..2)
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
            .collect();
        let refs: Vec<&Trajectory> = batch.iter().collect();
        // Cases whose loss overflows are redrawn.
        match gradcheck(&arch, &params, &refs, rng.gen_range(0.5..3.0), 1e-4) {
            Ok(r) => {
                worst = worst.max(r.max_rel_err);
                seen.extend(names);
                case += 1;
            }
            Err(_) => redrawn += 1,
        }
    }
    let constructs = [
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
        "feedforward",
        "recurrent",
    ];
    let missing: Vec<&str> = constructs
        .iter()
        .copied()
        .filter(|c| !seen.contains(*c))
        .collect();
    verdict(
        worst <= 1e-3 && missing.is_empty(),
        format!("100 cases ({redrawn} redrawn), max relative error {worst:.2e}, constructs missing: {missing:?}"),
    )
}

fn toy_config() -> SearchConfig {
    SearchConfig {
        max_depth: 3,
        initial_depth: 1,
        init_units: 4,
        min_units: 2,
        neural_epochs: 2,
        symbolic_epochs: 3,
        lr: 0.05,
        batch_size: 20,
        frontier_size: None,
        parallel: false,
        ..SearchConfig::default()
    }
}

fn criterion_2(ledger: &mut Ledger) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut failures = Vec::new();
    for i in 0..20 {
        let g = random_grammar(8, &mut rng);
        let data = toy_dataset(30, 15, 15, 6, 1000 + i);
        let cfg = toy_config();
        let oracle = {
            let graph = ProgramGraph::new(&g, &data, cfg.clone(), HeuristicKind::Zero).unwrap();
            exhaustive_goal_costs(&graph).unwrap()[0].1
        };
        let graph = ProgramGraph::new(&g, &data, cfg.clone(), HeuristicKind::Zero).unwrap();
        let a = astar_near(&graph).unwrap();
        let d = iddfs_near(&graph).unwrap();
        if a.best.f.to_bits() != oracle.to_bits() {
            failures.push(format!("grammar {i}: A* {} vs {oracle}", a.best.f));
        }
        if d.best.f.to_bits() != oracle.to_bits() {
            failures.push(format!("grammar {i}: IDDFS {} vs {oracle}", d.best.f));
        }
        ledger.check_goal(&g, &data, &cfg, &a.best.state, a.best.f);
        ledger.check_goal(&g, &data, &cfg, &d.best.state, d.best.f);
        ledger.fmin_histories.push(d.fmin_history);
    }
    verdict(
        failures.is_empty(),
        format!("20 grammars, mismatches: {failures:?}"),
    )
}

fn write_toy_files(dir: &Path, data: &Dataset, seed: u64, lambda: f64) -> RunConfig {
    let path = dir.join("toy.jsonl");
    let manifest = Manifest {
        task: data.task,
        feature_dim: data.feature_dim,
        label_dim: data.label_dim,
        splits: None,
        generator: None,
        generator_params: None,
        noise: None,
        f1_ceiling: None,
    };
    write_dataset(&path, data, manifest).unwrap();
    let text = format!(
        "[run]\nalgorithm = \"astar-near\"\nseeds = [{seed}]\nlambda = [{lambda:?}]\noutput_dir = \"probe\"\n\
         [data]\npath = \"toy.jsonl\"\n\
         [grammar.selectors]\nFirst = [0]\nRest = [1, 2]\n\
         [graph]\nmax_depth = 4\ninit_units = 4\nmin_units = 2\nmax_children = 16\n\
         [training]\nneural_epochs = 2\nsymbolic_epochs = 3\nlr = 0.05\nbatch_size = 20\n\
         [near]\ninitial_depth = 2\n\
         [probe]\nn_samples = 40\nseed = {seed}\n"
    );
    let cfg_path = dir.join("probe.toml");
    std::fs::write(&cfg_path, text).unwrap();
    RunConfig::load(&cfg_path).unwrap()
}

fn criterion_3(ledger: &mut Ledger) -> Verdict {
    let mut lines = Vec::new();
    let mut pass = true;
    for seed in SEEDS {
        let dir = tempfile::tempdir().unwrap();
        let data = toy_dataset(40, 20, 20, 8, 300 + seed);
        let cfg = write_toy_files(dir.path(), &data, seed, 1.0);
        let probed = probe(&cfg, false).unwrap();
        let grammar = cfg
            .grammar(data.feature_dim, data.label_dim, data.task)
            .unwrap();
        let sc = cfg.search_config(1.0, seed, false);
        let oracle = {
            let graph =
                ProgramGraph::new(&grammar, &data, sc.clone(), HeuristicKind::Zero).unwrap();
            exhaustive_goal_costs(&graph).unwrap()[0].1
        };
        let run = run_once(
            &cfg,
            &grammar,
            &data,
            Algorithm::AstarNear,
            1.0,
            seed,
            false,
        )
        .unwrap();
        let eps = probed.report.epsilon_hat;
        let ok = run.path_cost <= oracle + eps + 1e-9;
        pass &= ok;
        lines.push(format!(
            "seed {seed}: cost {:.4} ≤ C* {oracle:.4} + ε̂ {eps:.4}: {ok}",
            run.path_cost
        ));
        ledger.check_goal(&grammar, &data, &sc, &run.arch, run.path_cost);
        let pruned = {
            let mut c = sc.clone();
            c.perf_mult = 0.975;
            c.depth_bias = 0.95;
            c
        };
        let graph =
            ProgramGraph::new(&grammar, &data, pruned.clone(), HeuristicKind::Near).unwrap();
        let d = iddfs_near(&graph).unwrap();
        ledger.check_goal(&grammar, &data, &pruned, &d.best.state, d.best.f);
        ledger.fmin_histories.push(d.fmin_history);
    }
    verdict(pass, lines.join("; "))
}

fn xor_config(dir: &Path, b: &Benchmark, seed: u64, lambdas: &[f64]) -> RunConfig {
    let path = dir.join("xor.jsonl");
    let manifest = Manifest {
        task: b.data.task,
        feature_dim: b.data.feature_dim,
        label_dim: b.data.label_dim,
        splits: None,
        generator: None,
        generator_params: None,
        noise: Some(0.05),
        f1_ceiling: Some(b.ceiling),
    };
    write_dataset(&path, &b.data, manifest).unwrap();
    let text = format!(
        "[run]\nalgorithm = \"astar-near\"\nseeds = [{seed}]\nlambda = {lambdas:?}\noutput_dir = \"out\"\n\
         [data]\npath = \"xor.jsonl\"\n\
         [grammar.selectors]\nA = [0, 1]\nB = [2, 3]\nC = [4, 5]\n\
         [graph]\nmax_depth = 6\n\
         [baselines]\nsamples_per_step = 30\nmax_programs = 400\n"
    );
    let p = dir.join("xor.toml");
    std::fs::write(&p, text).unwrap();
    RunConfig::load(&p).unwrap()
}

struct XorRuns {
    /// Per seed: (benchmark, config, runs at λ = 1, 4, 8).
    seeds: Vec<(Benchmark, RunConfig, Vec<RunResult>, tempfile::TempDir)>,
}

fn xor_runs(ledger: &mut Ledger) -> XorRuns {
    let mut seeds = Vec::new();
    for seed in SEEDS {
        let dir = tempfile::tempdir().unwrap();
        let b = xor_benchmark(BenchmarkSize::default(), seed).unwrap();
        let cfg = xor_config(dir.path(), &b, seed, &[1.0, 4.0, 8.0]);
        let mut runs = Vec::new();
        for &lambda in &cfg.run.lambda {
            let r = run_once(
                &cfg,
                &b.grammar,
                &b.data,
                Algorithm::AstarNear,
                lambda,
                seed,
                false,
            )
            .unwrap();
            ledger.check_goal(
                &b.grammar,
                &b.data,
                &cfg.search_config(lambda, seed, false),
                &r.arch,
                r.path_cost,
            );
            runs.push(r);
        }
        seeds.push((b, cfg, runs, dir));
    }
    XorRuns { seeds }
}

fn criterion_4(x: &XorRuns) -> Verdict {
    let mut good = 0;
    let mut lines = Vec::new();
    for (b, _, runs, _) in &x.seeds {
        let r = &runs[0];
        let ok = r.report.f1 >= 0.9 * b.ceiling;
        good += usize::from(ok);
        lines.push(format!(
            "seed {}: F1 {:.4} vs ceiling {:.4}",
            r.seed, r.report.f1, b.ceiling
        ));
    }
    verdict(good >= 2, format!("{good}/3 seeds ({})", lines.join("; ")))
}

fn criterion_5(x: &XorRuns, ledger: &mut Ledger) -> Verdict {
    let mut good = 0;
    let mut lines = Vec::new();
    for (b, cfg, runs, _) in &x.seeds {
        let a = &runs[0];
        let target = a.path_cost + 0.05;
        let a_needed = a
            .trace
            .first_at_most(target)
            .expect("final cost is in the trace")
            .programs_trained;
        let sc = cfg.search_config(1.0, a.seed, false);
        let graph =
            ProgramGraph::new(&b.grammar, &b.data, sc.clone(), HeuristicKind::Near).unwrap();
        let e = enumerate(&graph, cfg.enumerate_config()).unwrap();
        ledger.check_goal(&b.grammar, &b.data, &sc, &e.best, e.cost);
        let (ok, e_needed) = match e.trace.first_at_most(target) {
            Some(ev) => (
                2 * a_needed <= ev.programs_trained,
                ev.programs_trained.to_string(),
            ),
            None => (
                2 * a_needed <= cfg.baselines.max_programs,
                format!("> {}", cfg.baselines.max_programs),
            ),
        };
        good += usize::from(ok);
        lines.push(format!("seed {}: A* {a_needed} vs enum {e_needed}", a.seed));
    }
    verdict(good >= 2, format!("{good}/3 seeds ({})", lines.join("; ")))
}

fn criterion_6(x: &XorRuns) -> Verdict {
    let mean = |i: usize, f: &dyn Fn(&RunResult) -> f64| {
        x.seeds.iter().map(|s| f(&s.2[i])).sum::<f64>() / x.seeds.len() as f64
    };
    let depth: Vec<f64> = (0..3)
        .map(|i| mean(i, &|r| r.report.depth as f64))
        .collect();
    let f1: Vec<f64> = (0..3).map(|i| mean(i, &|r| r.report.f1)).collect();
    let ok = depth.windows(2).all(|w| w[1] <= w[0]) && f1.windows(2).all(|w| w[1] <= w[0]);
    verdict(
        ok,
        format!("λ = 1, 4, 8: mean depth {depth:?}, mean F1 {f1:.4?}"),
    )
}

fn criterion_7() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut violations = 0;
    for _ in 0..1000 {
        let mag = rng.gen_range(0.1..10.0);
        let c = if rng.gen_bool(0.5) { mag } else { -mag };
        let (a, b) = (rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0));
        let beta = rng.gen_range(0.01..20.0);
        let hard = if c > 0.0 { a } else { b };
        if (smooth_if(c, a, b, beta) - hard).abs()
            > (a - b).abs() * sigmoid(-beta * c.abs()) + 1e-12
        {
            violations += 1;
        }
    }
    verdict(
        violations == 0,
        format!("1000 cases, {violations} violations"),
    )
}

fn criterion_8(ledger: &Ledger) -> Verdict {
    verdict(
        ledger.max_cost_error <= 1e-9,
        format!(
            "{} goals, max |path cost − (λ·s + ζ)| = {:.2e}",
            ledger.goals_checked, ledger.max_cost_error
        ),
    )
}

fn criterion_9(x: &XorRuns) -> Verdict {
    let (b, cfg, _, _) = &x.seeds[0];
    let sc = cfg.search_config(1.0, 0, false);
    let fresh = || ProgramGraph::new(&b.grammar, &b.data, sc.clone(), HeuristicKind::Near).unwrap();
    let mut lines = Vec::new();
    let mut ok = true;
    let mut check = |name: &str, trained: usize, expected: usize| {
        ok &= trained == expected;
        lines.push(format!("{name} {trained}/{expected}"));
    };

    let graph = fresh();
    let out = mc_sample(
        &graph,
        McConfig {
            samples_per_step: 30,
            weighting: RuleWeighting::Proportional,
            seed: 0,
        },
    )
    .unwrap();
    let steps = out.trace.events.last().unwrap().nodes_expanded;
    check("mc", graph.programs_trained(), 30 * steps);

    let graph = fresh();
    let out = mcts_uct(
        &graph,
        MctsConfig {
            samples_per_step: 30,
            exploration_c: MctsConfig::DEFAULT_C,
            seed: 0,
        },
    )
    .unwrap();
    let steps = out.trace.events.last().unwrap().nodes_expanded;
    check("mcts", graph.programs_trained(), 30 * steps);

    // A small setting capped by total_evals and a large one capped by generations.
    for (name, pop, sel, gens, total, mutation, depth) in [
        ("genetic-small", 20, 10, 10, 10, 0.1, 6),
        ("genetic-large", 100, 50, 10, 1000, 0.01, 7),
    ] {
        let graph = fresh();
        let gc = GeneticConfig {
            pop_size: pop,
            selection_size: sel,
            generations: gens,
            total_evals: total,
            mutation_prob: mutation,
            enum_depth: depth,
            seed: 0,
        };
        genetic(&graph, gc).unwrap();
        check(
            name,
            graph.programs_trained(),
            total.min(pop + (gens - 1) * (pop - sel)),
        );
    }

    let graph = fresh();
    let total = graph.completions(&graph.root(), 0, 300).len();
    enumerate(&graph, EnumerateConfig { max_programs: 300 }).unwrap();
    check("enum", graph.programs_trained(), total.min(300));
    verdict(ok, lines.join(", "))
}

fn criterion_10(ledger: &Ledger) -> Verdict {
    let bad = ledger
        .fmin_histories
        .iter()
        .filter(|h| !h.windows(2).all(|w| w[1] <= w[0]))
        .count();
    verdict(
        bad == 0,
        format!(
            "{} IDDFS runs, {bad} with increasing f_min (oracle agreement is checked under criterion 2)",
            ledger.fmin_histories.len()
        ),
    )
}

fn main() {
    let mut ledger = Ledger::default();
    let mut results: Vec<(usize, Verdict, f64)> = Vec::new();
    let mut timed = |n: usize, f: &mut dyn FnMut() -> Verdict| {
        let t = Instant::now();
        let v = f();
        let secs = t.elapsed().as_secs_f64();
        println!(
            "criterion {n:>2}: {} ({secs:.1}s) {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
        results.push((n, v, secs));
    };
    timed(1, &mut criterion_1);
    timed(2, &mut || criterion_2(&mut ledger));
    timed(3, &mut || criterion_3(&mut ledger));
    let t = Instant::now();
    let xor = xor_runs(&mut ledger);
    println!(
        "(criterion-4 task: 9 A* runs in {:.1}s)",
        t.elapsed().as_secs_f64()
    );
    timed(4, &mut || criterion_4(&xor));
    timed(5, &mut || criterion_5(&xor, &mut ledger));
    timed(6, &mut || criterion_6(&xor));
    timed(7, &mut criterion_7);
    timed(8, &mut || criterion_8(&ledger));
    timed(9, &mut || criterion_9(&xor));
    timed(10, &mut || criterion_10(&ledger));
    let failed: Vec<usize> = results.iter().filter(|r| !r.1.pass).map(|r| r.0).collect();
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
