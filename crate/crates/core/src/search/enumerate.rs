use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{BaselineOutcome, SearchError, Tracer};
use crate::dsl::Architecture;
use crate::graph::ProgramGraph;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnumerateConfig {
    pub max_programs: usize,
}

/// Costs closer than this are one level for tie-breaking.
const COST_QUANTUM: f64 = 1e-9;

/// Lower bound on the structural cost of any completion of `arch`.
fn completion_bound(graph: &ProgramGraph, arch: &Architecture) -> f64 {
    arch.holes()
        .iter()
        .map(|(_, s)| graph.grammar().min_cost(*s).unwrap_or(f64::INFINITY))
        .fold(arch.structural_cost(), |a, c| a + c)
}

/// Trains complete programs in nondecreasing structural cost (shallower
/// first among equals) until `max_programs` have been trained.
pub fn enumerate(
    graph: &ProgramGraph,
    cfg: EnumerateConfig,
) -> Result<BaselineOutcome, SearchError> {
    if cfg.max_programs == 0 {
        return Err(SearchError::Invalid("max_programs must be ≥ 1".into()));
    }
    // Key: (cost level, complete after partial, tree depth, insertion order).
    type Key = Reverse<(i64, bool, usize, usize)>;
    let mut heap: BinaryHeap<(Key, usize)> = BinaryHeap::new();
    let mut arena: Vec<(Architecture, usize)> = Vec::new();
    let mut seq = 0usize;
    let mut push = |heap: &mut BinaryHeap<(Key, usize)>,
                    arena: &mut Vec<(Architecture, usize)>,
                    a: Architecture,
                    d: usize| {
        let level = (completion_bound(graph, &a) / COST_QUANTUM).round() as i64;
        let key = Reverse((level, a.is_complete(), a.depth(), seq));
        seq += 1;
        arena.push((a, d));
        heap.push((key, arena.len() - 1));
    };
    push(&mut heap, &mut arena, graph.root(), 0);
    let mut tracer = Tracer::new();
    let mut best: Option<(Architecture, f64)> = None;
    let mut trained = 0;
    let mut evaluations = Vec::new();
    let mut expanded = 0;
    let lambda = graph.config().lambda;
    while let Some((_, idx)) = heap.pop() {
        let (arch, depth) = arena[idx].clone();
        if arch.is_complete() {
            let fitted = graph.evaluate_goal(&arch)?;
            trained += 1;
            let cost = lambda * arch.structural_cost() + fitted.zeta_val;
            evaluations.push((arch.structural_cost(), cost));
            if tracer.offer(cost, graph.programs_trained(), expanded) {
                best = Some((arch, cost));
            }
            if trained == cfg.max_programs {
                break;
            }
            continue;
        }
        let (hole, _) = arch.leftmost_hole().expect("partial");
        expanded += 1;
        for rid in graph.candidate_rules(&arch, depth) {
            let child = arch
                .expand(hole, graph.grammar().rule(rid))
                .map_err(crate::graph::GraphError::from)?;
            push(&mut heap, &mut arena, child, depth + 1);
        }
    }
    let (best, cost) = best.ok_or(SearchError::NoGoal)?;
    Ok(BaselineOutcome {
        best,
        cost,
        trace: tracer.finish(graph.programs_trained(), expanded),
        evaluations,
    })
}
