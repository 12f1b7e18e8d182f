use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::mc::rollout;
use super::{BaselineOutcome, RuleWeighting, SearchError, Tracer};
use crate::dsl::Architecture;
use crate::graph::{GraphError, ProgramGraph};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MctsConfig {
    pub samples_per_step: usize,
    pub exploration_c: f64,
    pub seed: u64,
}

impl MctsConfig {
    pub const DEFAULT_C: f64 = std::f64::consts::SQRT_2;
}

#[derive(Debug, Default, Clone, Copy)]
struct Stats {
    visits: usize,
    value: f64,
}

impl Stats {
    fn mean(&self) -> f64 {
        self.value / self.visits as f64
    }
}

/// UCT score; unvisited children score +∞.
fn uct(child: Stats, parent_visits: usize, c: f64) -> f64 {
    if child.visits == 0 {
        return f64::INFINITY;
    }
    child.mean() + c * ((parent_visits.max(1) as f64).ln() / child.visits as f64).sqrt()
}

/// Node value `1 / (1 + path cost)`.
pub(crate) fn value_of(cost: f64) -> f64 {
    1.0 / (1.0 + cost)
}

/// Index of the child UCT selects; the first unvisited child wins ties.
pub(crate) fn select_child(children: &[(usize, f64)], parent_visits: usize, c: f64) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, &(visits, value)) in children.iter().enumerate() {
        let s = uct(Stats { visits, value }, parent_visits, c);
        if s > best_score {
            best = i;
            best_score = s;
        }
    }
    best
}

/// Monte Carlo tree search with UCT selection; after `samples_per_step`
/// iterations from the committed node it commits to the best-valued child.
pub fn mcts_uct(graph: &ProgramGraph, cfg: MctsConfig) -> Result<BaselineOutcome, SearchError> {
    if cfg.samples_per_step == 0 {
        return Err(SearchError::Invalid("samples_per_step must be ≥ 1".into()));
    }
    if !(cfg.exploration_c >= 0.0) {
        return Err(SearchError::Invalid("exploration_c must be ≥ 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let lambda = graph.config().lambda;
    let mut stats: HashMap<u64, Stats> = HashMap::new();
    let mut tracer = Tracer::new();
    let mut best: Option<(Architecture, f64)> = None;
    let mut evaluations = Vec::new();
    let (mut root, mut root_depth) = (graph.root(), 0usize);
    let mut steps = 0;
    while root.leftmost_hole().is_some() {
        for _ in 0..cfg.samples_per_step {
            // Selection and expansion.
            let mut path = vec![root.structural_hash()];
            let (mut node, mut depth) = (root.clone(), root_depth);
            while let Some((hole, _)) = node.leftmost_hole() {
                let parent_visits = stats.get(path.last().unwrap()).map_or(0, |s| s.visits);
                let kids: Vec<Architecture> = graph
                    .candidate_rules(&node, depth)
                    .into_iter()
                    .map(|r| node.expand(hole, graph.grammar().rule(r)))
                    .collect::<Result<_, _>>()
                    .map_err(GraphError::from)?;
                let scored: Vec<(usize, f64)> = kids
                    .iter()
                    .map(|k| {
                        let s = stats.get(&k.structural_hash()).copied().unwrap_or_default();
                        (s.visits, s.value)
                    })
                    .collect();
                let pick = select_child(&scored, parent_visits, cfg.exploration_c);
                let fresh = scored[pick].0 == 0;
                node = kids.into_iter().nth(pick).expect("index in range");
                depth += 1;
                path.push(node.structural_hash());
                if fresh {
                    break;
                }
            }
            // Rollout and backpropagation.
            let goal = rollout(graph, &node, depth, RuleWeighting::Uniform, &mut rng);
            let fitted = graph.evaluate_goal(&goal)?;
            let cost = lambda * goal.structural_cost() + fitted.zeta_val;
            evaluations.push((goal.structural_cost(), cost));
            if tracer.offer(cost, graph.programs_trained(), steps) {
                best = Some((goal, cost));
            }
            let v = value_of(cost);
            for key in path {
                let s = stats.entry(key).or_default();
                s.visits += 1;
                s.value += v;
            }
        }
        let (hole, _) = root.leftmost_hole().expect("loop condition");
        let mut choice: Option<(Architecture, f64)> = None;
        for r in graph.candidate_rules(&root, root_depth) {
            let k = root
                .expand(hole, graph.grammar().rule(r))
                .map_err(GraphError::from)?;
            if let Some(s) = stats.get(&k.structural_hash()).filter(|s| s.visits > 0) {
                if choice.as_ref().is_none_or(|c| s.mean() > c.1) {
                    choice = Some((k, s.mean()));
                }
            }
        }
        root = choice.expect("every iteration visits a child").0;
        root_depth += 1;
        steps += 1;
    }
    let (best, cost) = best.ok_or(SearchError::NoGoal)?;
    Ok(BaselineOutcome {
        best,
        cost,
        trace: tracer.finish(graph.programs_trained(), steps),
        evaluations,
    })
}
