use rand::distributions::WeightedIndex;
use rand::prelude::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BaselineOutcome, SearchError, Tracer};
use crate::dsl::{Architecture, RuleId};
use crate::graph::ProgramGraph;

/// How rollouts weight the rules applicable at a hole.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleWeighting {
    /// Probability proportional to s(r).
    Proportional,
    /// Probability proportional to 1/s(r).
    Inverse,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub samples_per_step: usize,
    pub weighting: RuleWeighting,
    pub seed: u64,
}

/// Picks one of `rules`; degenerate weights fall back to uniform.
pub(crate) fn pick_rule<R: Rng + ?Sized>(
    graph: &ProgramGraph,
    rules: &[RuleId],
    weighting: RuleWeighting,
    rng: &mut R,
) -> RuleId {
    let costs = rules.iter().map(|&r| graph.grammar().rule(r).cost);
    let weights: Vec<f64> = match weighting {
        RuleWeighting::Proportional => costs.collect(),
        RuleWeighting::Inverse => costs.map(|c| if c > 0.0 { 1.0 / c } else { 0.0 }).collect(),
        RuleWeighting::Uniform => vec![1.0; rules.len()],
    };
    match WeightedIndex::new(&weights) {
        Ok(dist) => rules[dist.sample(rng)],
        Err(_) => rules[rng.gen_range(0..rules.len())],
    }
}

pub(crate) fn rollout<R: Rng + ?Sized>(
    graph: &ProgramGraph,
    arch: &Architecture,
    depth: usize,
    weighting: RuleWeighting,
    rng: &mut R,
) -> Architecture {
    let (mut a, mut d) = (arch.clone(), depth);
    while let Some((hole, _)) = a.leftmost_hole() {
        let rules = graph.candidate_rules(&a, d);
        let rid = pick_rule(graph, &rules, weighting, rng);
        a = a
            .expand(hole, graph.grammar().rule(rid))
            .expect("candidate rules fit the hole");
        d += 1;
    }
    a
}

/// Monte Carlo sampling: at each step, draws rollouts from the current node
/// and commits to the child whose rollouts scored best on average.
pub fn mc_sample(graph: &ProgramGraph, cfg: McConfig) -> Result<BaselineOutcome, SearchError> {
    if cfg.samples_per_step == 0 {
        return Err(SearchError::Invalid("samples_per_step must be ≥ 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let lambda = graph.config().lambda;
    let mut tracer = Tracer::new();
    let mut best: Option<(Architecture, f64)> = None;
    let mut evaluations = Vec::new();
    let (mut node, mut depth) = (graph.root(), 0usize);
    let mut steps = 0;
    while let Some((hole, _)) = node.leftmost_hole() {
        let rules = graph.candidate_rules(&node, depth);
        let mut sums = vec![(0.0f64, 0usize); rules.len()];
        for _ in 0..cfg.samples_per_step {
            let picked = pick_rule(graph, &rules, cfg.weighting, &mut rng);
            let k = rules
                .iter()
                .position(|&r| r == picked)
                .expect("picked from rules");
            let child = node
                .expand(hole, graph.grammar().rule(rules[k]))
                .map_err(crate::graph::GraphError::from)?;
            let goal = rollout(graph, &child, depth + 1, cfg.weighting, &mut rng);
            let fitted = graph.evaluate_goal(&goal)?;
            let cost = lambda * goal.structural_cost() + fitted.zeta_val;
            evaluations.push((goal.structural_cost(), cost));
            sums[k].0 += cost;
            sums[k].1 += 1;
            if tracer.offer(cost, graph.programs_trained(), steps) {
                best = Some((goal, cost));
            }
        }
        let k = (0..rules.len())
            .filter(|&k| sums[k].1 > 0)
            .min_by(|&a, &b| {
                let ma = sums[a].0 / sums[a].1 as f64;
                let mb = sums[b].0 / sums[b].1 as f64;
                ma.total_cmp(&mb)
            })
            .expect("at least one child sampled");
        node = node
            .expand(hole, graph.grammar().rule(rules[k]))
            .map_err(crate::graph::GraphError::from)?;
        depth += 1;
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
