use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BaselineOutcome, SearchError, Tracer};
use crate::dsl::{Architecture, Node, Signature};
use crate::graph::ProgramGraph;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneticConfig {
    pub pop_size: usize,
    pub selection_size: usize,
    pub generations: usize,
    pub total_evals: usize,
    pub mutation_prob: f64,
    /// Derivation-step bound for the random initial population.
    pub enum_depth: usize,
    pub seed: u64,
}

impl GeneticConfig {
    /// Trainings performed: `min(total_evals, pop + (gens − 1)·(pop − sel))`.
    pub fn budget(&self) -> usize {
        let per_gen = self.pop_size - self.selection_size;
        self.total_evals
            .min(self.pop_size + self.generations.saturating_sub(1) * per_gen)
    }
}

type Path = Vec<usize>;

fn collect_paths(node: &Node, prefix: &mut Path, out: &mut Vec<(Path, Signature)>) {
    out.push((prefix.clone(), node.sig));
    for (i, c) in node.children.iter().enumerate() {
        prefix.push(i);
        collect_paths(c, prefix, out);
        prefix.pop();
    }
}

fn paths(arch: &Architecture) -> Vec<(Path, Signature)> {
    let mut out = Vec::new();
    collect_paths(arch.root(), &mut Vec::new(), &mut out);
    out
}

fn at<'n>(node: &'n Node, path: &[usize]) -> Option<&'n Node> {
    path.iter().try_fold(node, |n, &i| n.children.get(i))
}

fn replaced(node: &Node, path: &[usize], sub: &Node) -> Node {
    match path.split_first() {
        None => sub.clone(),
        Some((&i, rest)) => {
            let mut n = node.clone();
            n.children[i] = replaced(&node.children[i], rest, sub);
            n
        }
    }
}

fn steps(node: &Node) -> usize {
    usize::from(node.rule.is_some()) + node.children.iter().map(steps).sum::<usize>()
}

/// Swaps in the subtree of `b` at a position both parents share with the
/// same signature, so the offspring is well-typed by construction.
pub fn crossover<R: Rng + ?Sized>(a: &Architecture, b: &Architecture, rng: &mut R) -> Architecture {
    let common: Vec<Path> = paths(a)
        .into_iter()
        .filter(|(p, s)| !p.is_empty() && at(b.root(), p).is_some_and(|n| n.sig == *s))
        .map(|(p, _)| p)
        .collect();
    let Some(p) = common.choose(rng) else {
        return a.clone();
    };
    let donor = at(b.root(), p).expect("filtered above");
    Architecture::from_root(replaced(a.root(), p, donor))
        .expect("same-signature swap stays well-typed")
}

/// Random derivation of `sig` using at most `limit` steps.
fn grow<R: Rng + ?Sized>(
    graph: &ProgramGraph,
    sig: Signature,
    limit: usize,
    rng: &mut R,
) -> Option<Node> {
    let mut a = Architecture::from_root(Node::hole(sig)).ok()?;
    let mut d = 0;
    while let Some((hole, _)) = a.leftmost_hole() {
        let rules = graph.candidate_rules_within(&a, d, limit);
        let rid = *rules.choose(rng)?;
        a = a.expand(hole, graph.grammar().rule(rid)).ok()?;
        d += 1;
    }
    Some(a.root().clone())
}

/// Regrows a random subtree within the graph's depth bound.
pub fn mutate<R: Rng + ?Sized>(
    graph: &ProgramGraph,
    arch: &Architecture,
    rng: &mut R,
) -> Architecture {
    let all = paths(arch);
    let (p, sig) = all.choose(rng).expect("trees are nonempty").clone();
    let total = steps(arch.root());
    let sub = at(arch.root(), &p).expect("path from the tree");
    let budget = graph.config().max_depth.saturating_sub(total - steps(sub));
    match grow(graph, sig, budget, rng) {
        Some(n) => Architecture::from_root(replaced(arch.root(), &p, &n))
            .expect("regrown subtree has the replaced signature"),
        None => arch.clone(),
    }
}

struct Individual {
    arch: Architecture,
    cost: Option<f64>,
}

/// Genetic programming over complete architectures: truncation selection,
/// same-position subtree crossover and regrowth mutation.
pub fn genetic(graph: &ProgramGraph, cfg: GeneticConfig) -> Result<BaselineOutcome, SearchError> {
    if cfg.pop_size == 0 || cfg.selection_size == 0 || cfg.selection_size > cfg.pop_size {
        return Err(SearchError::Invalid(
            "need 1 ≤ selection_size ≤ pop_size".into(),
        ));
    }
    if cfg.generations == 0 || cfg.total_evals == 0 {
        return Err(SearchError::Invalid(
            "generations and total_evals must be ≥ 1".into(),
        ));
    }
    if !(0.0..=1.0).contains(&cfg.mutation_prob) {
        return Err(SearchError::Invalid(
            "mutation_prob must be in [0, 1]".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let lambda = graph.config().lambda;
    let start = graph.grammar().start();
    let init_limit = cfg
        .enum_depth
        .min(graph.config().max_depth)
        .max(graph.grammar().min_steps(start).unwrap_or(1));
    let mut pop: Vec<Individual> = (0..cfg.pop_size)
        .map(|_| {
            let root = grow(graph, start, init_limit, &mut rng).expect("start derives a program");
            Individual {
                arch: Architecture::from_root(root).expect("grown trees are well-typed"),
                cost: None,
            }
        })
        .collect();
    let mut tracer = Tracer::new();
    let mut best: Option<(Architecture, f64)> = None;
    let mut evaluations = Vec::new();
    let mut evals = 0;
    for gen in 0..cfg.generations {
        for ind in pop.iter_mut().filter(|i| i.cost.is_none()) {
            if evals == cfg.total_evals {
                break;
            }
            let fitted = graph.evaluate_goal(&ind.arch)?;
            evals += 1;
            let cost = lambda * ind.arch.structural_cost() + fitted.zeta_val;
            evaluations.push((ind.arch.structural_cost(), cost));
            ind.cost = Some(cost);
            if tracer.offer(cost, graph.programs_trained(), gen) {
                best = Some((ind.arch.clone(), cost));
            }
        }
        pop.retain(|i| i.cost.is_some());
        pop.sort_by(|a, b| a.cost.unwrap().total_cmp(&b.cost.unwrap()));
        if gen + 1 == cfg.generations || evals == cfg.total_evals {
            break;
        }
        pop.truncate(cfg.selection_size);
        let n_parents = pop.len();
        for _ in 0..cfg.pop_size - n_parents {
            let a = &pop[rng.gen_range(0..n_parents)].arch;
            let b = &pop[rng.gen_range(0..n_parents)].arch;
            let mut child = crossover(a, b, &mut rng);
            if steps(child.root()) > graph.config().max_depth {
                child = a.clone();
            }
            if rng.gen::<f64>() < cfg.mutation_prob {
                child = mutate(graph, &child, &mut rng);
            }
            pop.push(Individual {
                arch: child,
                cost: None,
            });
        }
    }
    let (best, cost) = best.ok_or(SearchError::NoGoal)?;
    Ok(BaselineOutcome {
        best,
        cost,
        trace: tracer.finish(graph.programs_trained(), cfg.generations),
        evaluations,
    })
}
