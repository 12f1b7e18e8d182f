//! Search over the derivation graph: A*, iteratively deepened branch and
//! bound, and baselines (enumeration, Monte Carlo sampling, UCT, genetic).

mod astar;
mod enumerate;
mod genetic;
mod iddfs;
mod mc;
mod mcts;
mod multi;
mod probe;
mod trace;

use thiserror::Error;

use crate::dsl::Architecture;
use crate::graph::{GraphError, ProgramGraph};

pub use astar::astar;
pub use enumerate::{enumerate, EnumerateConfig};
pub use genetic::{crossover, genetic, mutate, GeneticConfig};
pub use iddfs::{iddfs, IddfsParams};
pub use mc::{mc_sample, McConfig, RuleWeighting};
pub use mcts::{mcts_uct, MctsConfig};
pub use multi::{median_trace, run_multi_seed, MeanStd, MultiSeedSummary, SeedRun, TraceAxis};
pub use probe::{admissibility_probe, ProbeEntry, ProbeReport};
pub use trace::{SearchTrace, TraceEvent, Tracer};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("search ended without reaching a goal")]
    NoGoal,
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// A successor produced by [`SearchSpace::expand`].
#[derive(Debug, Clone)]
pub struct Edge<S> {
    pub state: S,
    /// Path cost from the root.
    pub g: f64,
    pub h: f64,
    pub is_goal: bool,
}

/// A lazily materialized graph with nonnegative edge costs.
pub trait SearchSpace {
    type State: Clone;

    fn root(&self) -> Result<Edge<Self::State>, SearchError>;

    fn expand(
        &self,
        state: &Self::State,
        g: f64,
        depth: usize,
    ) -> Result<Vec<Edge<Self::State>>, SearchError>;

    /// Complete programs trained so far.
    fn programs_trained(&self) -> usize;
}

#[derive(Debug, Clone)]
pub struct SearchNode<S> {
    pub state: S,
    pub g: f64,
    pub h: f64,
    pub f: f64,
    pub depth: usize,
    pub id: usize,
    pub parent: Option<usize>,
    pub is_goal: bool,
}

impl<S> SearchNode<S> {
    fn from_edge(e: Edge<S>, depth: usize, id: usize, parent: Option<usize>) -> Self {
        SearchNode {
            f: e.g + e.h,
            state: e.state,
            g: e.g,
            h: e.h,
            depth,
            id,
            parent,
            is_goal: e.is_goal,
        }
    }
}

/// Result of one search run.
#[derive(Debug, Clone)]
pub struct Outcome<S> {
    pub best: SearchNode<S>,
    pub trace: SearchTrace,
    pub nodes_expanded: usize,
    /// Every node that received a score, root included.
    pub scored: Vec<SearchNode<S>>,
    /// Best goal cost at the end of each deepening iteration (IDDFS only).
    pub fmin_history: Vec<f64>,
}

impl SearchSpace for ProgramGraph<'_> {
    type State = Architecture;

    fn root(&self) -> Result<Edge<Architecture>, SearchError> {
        let arch = ProgramGraph::root(self);
        let h = self.heuristic(&arch, 0)?;
        Ok(Edge {
            state: arch,
            g: 0.0,
            h,
            is_goal: false,
        })
    }

    fn expand(
        &self,
        state: &Architecture,
        g: f64,
        depth: usize,
    ) -> Result<Vec<Edge<Architecture>>, SearchError> {
        Ok(self
            .children(state, g, depth)?
            .into_iter()
            .map(|c| Edge {
                state: c.arch,
                g: c.g,
                h: c.h,
                is_goal: c.is_goal,
            })
            .collect())
    }

    fn programs_trained(&self) -> usize {
        ProgramGraph::programs_trained(self)
    }
}

/// A* with the frontier cap from the graph's config.
pub fn astar_near(graph: &ProgramGraph) -> Result<Outcome<Architecture>, SearchError> {
    astar(graph, graph.config().frontier_size)
}

/// IDDFS with branch and bound, parameterized by the graph's config.
pub fn iddfs_near(graph: &ProgramGraph) -> Result<Outcome<Architecture>, SearchError> {
    let c = graph.config();
    iddfs(
        graph,
        IddfsParams {
            initial_depth: c.initial_depth,
            max_depth: c.max_depth,
            perf_mult: c.perf_mult,
            depth_bias: c.depth_bias,
            frontier_size: c.frontier_size,
        },
    )
}

/// Best goal found by a baseline.
#[derive(Debug, Clone)]
pub struct BaselineOutcome {
    pub best: Architecture,
    pub cost: f64,
    pub trace: SearchTrace,
    /// `(s(α), path cost)` of every goal evaluation, in order.
    pub evaluations: Vec<(f64, f64)>,
}

/// Priority-queue entry: lowest f first, then deeper, then oldest.
#[derive(Debug, Clone, Copy)]
struct Entry {
    f: f64,
    depth: usize,
    seq: usize,
    idx: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then(self.depth.cmp(&other.depth))
            .then(other.seq.cmp(&self.seq))
    }
}

/// Min-f priority queue over indices into a node arena.
#[derive(Debug, Default)]
struct Frontier {
    heap: std::collections::BinaryHeap<Entry>,
    seq: usize,
}

impl Frontier {
    fn push<S>(&mut self, n: &SearchNode<S>) {
        self.heap.push(Entry {
            f: n.f,
            depth: n.depth,
            seq: self.seq,
            idx: n.id,
        });
        self.seq += 1;
    }

    fn pop(&mut self) -> Option<usize> {
        self.heap.pop().map(|e| e.idx)
    }

    fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Drops the worst entries beyond `cap`.
    fn truncate(&mut self, cap: usize) {
        if self.heap.len() <= cap {
            return;
        }
        let mut v = std::mem::take(&mut self.heap).into_sorted_vec();
        // Ascending order puts the worst entries first.
        let drop = v.len() - cap;
        v.drain(..drop);
        self.heap = v.into();
    }
}
