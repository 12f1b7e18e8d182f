use std::cell::Cell;

use near_core::data::Dataset;
use near_core::dsl::{Architecture, Grammar};
use near_core::graph::{exhaustive_goal_costs, HeuristicKind, ProgramGraph, SearchConfig};
use near_core::search::{
    astar, astar_near, enumerate, genetic, iddfs, iddfs_near, mc_sample, mcts_uct, Edge,
    EnumerateConfig, GeneticConfig, IddfsParams, McConfig, MctsConfig, RuleWeighting, SearchError,
    SearchSpace,
};
use near_core::toy::{random_grammar, toy_dataset};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

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
        parallel: false,
        ..SearchConfig::default()
    }
}

fn toy() -> (Vec<Grammar>, Dataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let gs = (0..6).map(|_| random_grammar(8, &mut rng)).collect();
    (gs, toy_dataset(30, 15, 15, 6, 8))
}

#[test]
fn zero_heuristic_searches_match_the_exhaustive_minimum() {
    let (gs, data) = toy();
    for g in &gs {
        let oracle = {
            let graph = ProgramGraph::new(g, &data, toy_config(), HeuristicKind::Zero).unwrap();
            exhaustive_goal_costs(&graph).unwrap()[0].1
        };
        let graph = ProgramGraph::new(g, &data, toy_config(), HeuristicKind::Zero).unwrap();
        let a = astar_near(&graph).unwrap();
        assert_eq!(a.best.f.to_bits(), oracle.to_bits());
        let i = iddfs_near(&graph).unwrap();
        assert_eq!(i.best.f.to_bits(), oracle.to_bits());
        assert!(i.fmin_history.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(*i.fmin_history.last().unwrap(), i.best.f);
    }
}

#[test]
fn children_respect_the_branching_cap_and_goal_costs() {
    let (gs, data) = toy();
    let mut cfg = toy_config();
    cfg.max_children = 2;
    cfg.lambda = 3.0;
    for g in &gs {
        let graph = ProgramGraph::new(g, &data, cfg.clone(), HeuristicKind::Near).unwrap();
        let out = astar_near(&graph).unwrap();
        for n in &out.scored {
            if n.is_goal {
                assert_eq!(n.h, 0.0);
                let z = graph.cached_goal(&n.state).unwrap().zeta_val;
                assert!((n.g - (3.0 * n.state.structural_cost() + z)).abs() <= 1e-9);
            } else {
                assert!(n.h >= 0.0 && n.h <= 1.0);
            }
            assert!((0.0..=1.0).contains(&(n.g - 3.0 * n.state.structural_cost())));
        }
        let root = graph.root();
        assert!(graph.children(&root, 0.0, 0).unwrap().len() <= 2);
        assert!(out.trace.is_monotone());
    }
}

#[test]
fn baselines_spend_exactly_their_budgets() {
    let (gs, data) = toy();
    let cfg = toy_config();
    let g = &gs[0];
    let fresh = || ProgramGraph::new(g, &data, cfg.clone(), HeuristicKind::Near).unwrap();

    let graph = fresh();
    let total = graph.completions(&graph.root(), 0, usize::MAX).len();
    let out = enumerate(&graph, EnumerateConfig { max_programs: 4 }).unwrap();
    assert_eq!(graph.programs_trained(), 4.min(total));
    let graph = fresh();
    enumerate(
        &graph,
        EnumerateConfig {
            max_programs: 10_000,
        },
    )
    .unwrap();
    assert_eq!(graph.programs_trained(), total);
    assert!(out.trace.is_monotone());

    for weighting in [
        RuleWeighting::Proportional,
        RuleWeighting::Inverse,
        RuleWeighting::Uniform,
    ] {
        let graph = fresh();
        let out = mc_sample(
            &graph,
            McConfig {
                samples_per_step: 5,
                weighting,
                seed: 2,
            },
        )
        .unwrap();
        let steps = out.trace.events.last().unwrap().nodes_expanded;
        assert_eq!(graph.programs_trained(), 5 * steps);
        assert_eq!(out.evaluations.len(), 5 * steps);
    }

    let graph = fresh();
    let out = mcts_uct(
        &graph,
        MctsConfig {
            samples_per_step: 4,
            exploration_c: MctsConfig::DEFAULT_C,
            seed: 3,
        },
    )
    .unwrap();
    let steps = out.trace.events.last().unwrap().nodes_expanded;
    assert_eq!(graph.programs_trained(), 4 * steps);

    let gcfg = GeneticConfig {
        pop_size: 6,
        selection_size: 2,
        generations: 4,
        total_evals: 100,
        mutation_prob: 0.3,
        enum_depth: 3,
        seed: 4,
    };
    let graph = fresh();
    let out = genetic(&graph, gcfg).unwrap();
    assert_eq!(gcfg.budget(), 6 + 3 * 4);
    assert_eq!(graph.programs_trained(), gcfg.budget());
    assert_eq!(out.evaluations.len(), gcfg.budget());
    let capped = GeneticConfig {
        total_evals: 9,
        ..gcfg
    };
    let graph = fresh();
    genetic(&graph, capped).unwrap();
    assert_eq!(graph.programs_trained(), 9);
}

/// Explicit tree: node ids index `EDGES`, each child listed with its edge cost.
struct Tree {
    /// `(children, is_goal)` per node; children are `(id, edge cost)`.
    nodes: Vec<(Vec<(usize, f64)>, bool)>,
    h: Vec<f64>,
    expansions: Cell<usize>,
}

impl Tree {
    /// Three levels below the root, branching 3, with goals at the leaves.
    fn three_level(seed: u64) -> Tree {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut nodes = vec![(Vec::new(), false)];
        let mut level = vec![0];
        for depth in 0..3 {
            let mut next = Vec::new();
            for &p in &level {
                for _ in 0..3 {
                    let id = nodes.len();
                    nodes.push((Vec::new(), depth == 2));
                    nodes[p].0.push((id, rng.gen_range(0.0..1.0)));
                    next.push(id);
                }
            }
            level = next;
        }
        let n = nodes.len();
        Tree {
            nodes,
            h: vec![0.0; n],
            expansions: Cell::new(0),
        }
    }

    fn cost_to_go(&self, u: usize) -> f64 {
        if self.nodes[u].1 {
            return 0.0;
        }
        self.nodes[u]
            .0
            .iter()
            .map(|&(c, w)| w + self.cost_to_go(c))
            .fold(f64::INFINITY, f64::min)
    }

    fn with_perfect_heuristic(mut self) -> Tree {
        self.h = (0..self.nodes.len()).map(|u| self.cost_to_go(u)).collect();
        self
    }
}

impl SearchSpace for Tree {
    type State = usize;

    fn root(&self) -> Result<Edge<usize>, SearchError> {
        Ok(Edge {
            state: 0,
            g: 0.0,
            h: self.h[0],
            is_goal: false,
        })
    }

    fn expand(&self, s: &usize, g: f64, _depth: usize) -> Result<Vec<Edge<usize>>, SearchError> {
        self.expansions.set(self.expansions.get() + 1);
        Ok(self.nodes[*s]
            .0
            .iter()
            .map(|&(c, w)| Edge {
                state: c,
                g: g + w,
                h: self.h[c],
                is_goal: self.nodes[c].1,
            })
            .collect())
    }

    fn programs_trained(&self) -> usize {
        0
    }
}

#[test]
fn perfect_heuristic_expands_only_the_optimal_path() {
    for seed in 0..20 {
        let t = Tree::three_level(seed).with_perfect_heuristic();
        let opt = t.cost_to_go(0);
        let out = astar(&t, None).unwrap();
        assert!((out.best.f - opt).abs() < 1e-12);
        assert_eq!(t.expansions.get(), 3);
    }
}

#[test]
fn zero_heuristic_tree_search_is_optimal() {
    for seed in 0..20 {
        let t = Tree::three_level(seed);
        let opt = t.cost_to_go(0);
        assert!((astar(&t, None).unwrap().best.f - opt).abs() < 1e-12);
        let params = IddfsParams {
            initial_depth: 1,
            max_depth: 3,
            perf_mult: 1.0,
            depth_bias: 1.0,
            frontier_size: None,
        };
        let out = iddfs(&t, params).unwrap();
        assert!((out.best.f - opt).abs() < 1e-12);
        assert!(out.fmin_history.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn genetic_offspring_stay_well_typed() {
    use near_core::search::{crossover, mutate};
    let (gs, data) = toy();
    let mut cfg = toy_config();
    cfg.max_depth = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for g in &gs {
        let graph = ProgramGraph::new(g, &data, cfg.clone(), HeuristicKind::Zero).unwrap();
        let pool: Vec<Architecture> = (0..8)
            .map(|_| graph.random_completion(&graph.root(), 0, &mut rng))
            .collect();
        for a in &pool {
            for b in &pool {
                let c = crossover(a, b, &mut rng);
                c.typecheck().unwrap();
                assert!(c.is_complete());
                assert_eq!(crossover(a, a, &mut rng), *a);
                let m = mutate(&graph, &c, &mut rng);
                m.typecheck().unwrap();
                assert!(m.is_complete());
            }
        }
    }
}
