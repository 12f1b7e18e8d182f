//! The derivation graph: nodes are partial architectures, internal edges apply
//! one rule to the leftmost hole, and goal edges end in complete programs
//! whose cost includes their trained validation error.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{TrainConfig, TrainError};
use crate::data::Dataset;
use crate::dsl::{Architecture, DslError, Grammar, RuleId};
use crate::relax::{fit, relax, Fitted, RelaxConfig};

/// Largest graph `exhaustive_goal_costs` agrees to enumerate.
pub const EXHAUSTIVE_LIMIT: usize = 200;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("cannot expand a complete architecture")]
    Complete,
    #[error("node depth {depth} has reached the bound {max}")]
    DepthExceeded { depth: usize, max: usize },
    #[error("the depth-bounded graph has more than {0} complete programs")]
    TooLarge(usize),
    #[error("invalid search config: {0}")]
    Config(String),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Dsl(#[from] DslError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Bound on derivation steps from the start symbol.
    pub max_depth: usize,
    pub max_children: usize,
    pub frontier_size: Option<usize>,
    /// Weight λ of structural cost against prediction error.
    pub lambda: f64,
    pub beta: f64,
    pub perf_mult: f64,
    pub depth_bias: f64,
    pub initial_depth: usize,
    pub init_units: usize,
    pub min_units: usize,
    pub neural_epochs: usize,
    pub symbolic_epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub class_weights: Option<Vec<f64>>,
    pub seed: u64,
    /// Train the children of one expansion on the rayon pool.
    pub parallel: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            max_depth: 8,
            max_children: 8,
            frontier_size: None,
            lambda: 1.0,
            beta: 1.0,
            perf_mult: 1.0,
            depth_bias: 1.0,
            initial_depth: 3,
            init_units: 16,
            min_units: 4,
            neural_epochs: 4,
            symbolic_epochs: 6,
            lr: 0.02,
            batch_size: 50,
            class_weights: None,
            seed: 0,
            parallel: true,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), GraphError> {
        let bad = |m: &str| Err(GraphError::Config(m.to_string()));
        if self.max_depth == 0 || self.max_children == 0 {
            return bad("max_depth and max_children must be ≥ 1");
        }
        if self.frontier_size == Some(0) {
            return bad("frontier_size must be ≥ 1");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be ≥ 0");
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad("beta must be > 0");
        }
        if !(self.perf_mult > 0.0 && self.perf_mult <= 1.0) {
            return bad("perf_mult must be in (0, 1]");
        }
        if !(self.depth_bias > 0.0 && self.depth_bias <= 1.0) {
            return bad("depth_bias must be in (0, 1]");
        }
        if self.initial_depth > self.max_depth {
            return bad("initial_depth must not exceed max_depth");
        }
        if self.init_units == 0 || self.min_units == 0 || self.min_units > self.init_units {
            return bad("units must satisfy 1 ≤ min_units ≤ init_units");
        }
        if self.neural_epochs == 0 || self.symbolic_epochs == 0 {
            return bad("epoch counts must be ≥ 1");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be > 0");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be ≥ 1");
        }
        Ok(())
    }

    pub fn relax_config(&self) -> RelaxConfig {
        RelaxConfig {
            init_units: self.init_units,
            min_units: self.min_units,
            max_depth: self.max_depth,
        }
    }

    pub fn train_config(&self, epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            lr: self.lr,
            batch_size: self.batch_size,
            class_weights: self.class_weights.clone(),
            seed: self.seed,
            beta: self.beta,
            record_loss: false,
        }
    }
}

pub type HeuristicFn = Arc<dyn Fn(&Architecture) -> f64 + Send + Sync>;

/// Source of h(u) for internal nodes.
#[derive(Clone)]
pub enum HeuristicKind {
    /// Validation error of the trained neural relaxation.
    Near,
    Zero,
    Custom(HeuristicFn),
}

impl std::fmt::Debug for HeuristicKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HeuristicKind::Near => f.write_str("Near"),
            HeuristicKind::Zero => f.write_str("Zero"),
            HeuristicKind::Custom(_) => f.write_str("Custom"),
        }
    }
}

/// A child produced by [`ProgramGraph::children`].
#[derive(Debug, Clone)]
pub struct Child {
    pub arch: Architecture,
    pub rule: RuleId,
    /// Path cost from the root.
    pub g: f64,
    pub h: f64,
    pub is_goal: bool,
}

pub struct ProgramGraph<'a> {
    grammar: &'a Grammar,
    data: &'a Dataset,
    cfg: SearchConfig,
    heuristic: HeuristicKind,
    h_cache: Mutex<HashMap<u64, f64>>,
    goal_cache: Mutex<HashMap<u64, Arc<Fitted>>>,
    programs_trained: AtomicUsize,
    heuristics_trained: AtomicUsize,
}

impl<'a> ProgramGraph<'a> {
    pub fn new(
        grammar: &'a Grammar,
        data: &'a Dataset,
        cfg: SearchConfig,
        heuristic: HeuristicKind,
    ) -> Result<Self, GraphError> {
        cfg.validate()?;
        let start = grammar.start();
        if start.input.dim() != data.feature_dim || start.output.dim() != data.label_dim {
            return Err(GraphError::Config(format!(
                "grammar start {start} does not fit data with {} features and {} classes",
                data.feature_dim, data.label_dim
            )));
        }
        if start.output.is_sequence() != (data.task == crate::dsl::Task::PerFrame) {
            return Err(GraphError::Config(
                "grammar start symbol and dataset task disagree".into(),
            ));
        }
        Ok(ProgramGraph {
            grammar,
            data,
            cfg,
            heuristic,
            h_cache: Mutex::new(HashMap::new()),
            goal_cache: Mutex::new(HashMap::new()),
            programs_trained: AtomicUsize::new(0),
            heuristics_trained: AtomicUsize::new(0),
        })
    }

    pub fn grammar(&self) -> &Grammar {
        self.grammar
    }

    pub fn data(&self) -> &Dataset {
        self.data
    }

    pub fn config(&self) -> &SearchConfig {
        &self.cfg
    }

    pub fn root(&self) -> Architecture {
        Architecture::empty(self.grammar.start())
    }

    /// Goal evaluations requested so far, memo hits included.
    pub fn programs_trained(&self) -> usize {
        self.programs_trained.load(Ordering::Relaxed)
    }

    /// Relaxations actually trained (memo hits excluded).
    pub fn heuristics_trained(&self) -> usize {
        self.heuristics_trained.load(Ordering::Relaxed)
    }

    /// Trains a complete program with the symbolic epoch budget; memoized.
    pub fn evaluate_goal(&self, arch: &Architecture) -> Result<Arc<Fitted>, GraphError> {
        if !arch.is_complete() {
            return Err(DslError::Incomplete.into());
        }
        self.programs_trained.fetch_add(1, Ordering::Relaxed);
        let key = arch.structural_hash();
        if let Some(f) = self.goal_cache.lock().expect("goal cache").get(&key) {
            return Ok(f.clone());
        }
        let fitted = Arc::new(fit(
            arch,
            self.data,
            &self.cfg.train_config(self.cfg.symbolic_epochs),
            self.cfg.seed,
        )?);
        self.goal_cache
            .lock()
            .expect("goal cache")
            .insert(key, fitted.clone());
        Ok(fitted)
    }

    /// Cached fit of a goal, if it has been evaluated.
    pub fn cached_goal(&self, arch: &Architecture) -> Option<Arc<Fitted>> {
        self.goal_cache
            .lock()
            .expect("goal cache")
            .get(&arch.structural_hash())
            .cloned()
    }

    /// h(u) for a partial architecture at derivation depth `depth`.
    pub fn heuristic(&self, arch: &Architecture, depth: usize) -> Result<f64, GraphError> {
        match &self.heuristic {
            HeuristicKind::Zero => Ok(0.0),
            HeuristicKind::Custom(f) => Ok(f(arch)),
            HeuristicKind::Near => {
                let key = arch.structural_hash();
                if let Some(&h) = self.h_cache.lock().expect("heuristic cache").get(&key) {
                    return Ok(h);
                }
                let relaxed = relax(arch, depth, &self.cfg.relax_config());
                let fitted = fit(
                    &relaxed,
                    self.data,
                    &self.cfg.train_config(self.cfg.neural_epochs),
                    self.cfg.seed,
                )?;
                self.heuristics_trained.fetch_add(1, Ordering::Relaxed);
                log::debug!("h = {:.4} for {}", fitted.zeta_val, arch.canonical());
                self.h_cache
                    .lock()
                    .expect("heuristic cache")
                    .insert(key, fitted.zeta_val);
                Ok(fitted.zeta_val)
            }
        }
    }

    /// Rules that may rewrite the leftmost hole of `arch` (at `depth` steps)
    /// such that a completion within `max_depth` remains possible, cheapest
    /// first and truncated to `max_children`.
    pub fn candidate_rules(&self, arch: &Architecture, depth: usize) -> Vec<RuleId> {
        self.candidate_rules_within(arch, depth, self.cfg.max_depth)
    }

    /// [`Self::candidate_rules`] under a different depth bound.
    pub fn candidate_rules_within(
        &self,
        arch: &Architecture,
        depth: usize,
        max_depth: usize,
    ) -> Vec<RuleId> {
        let Some((_, sig)) = arch.leftmost_hole() else {
            return Vec::new();
        };
        let holes = arch.holes();
        let rest: usize = holes[1..]
            .iter()
            .map(|(_, s)| self.grammar.min_steps(*s).unwrap_or(usize::MAX / 4))
            .sum();
        let mut out = Vec::new();
        for &rid in self.grammar.rules_for(sig) {
            let rule = self.grammar.rule(rid);
            let need: usize = rule
                .children()
                .iter()
                .map(|s| self.grammar.min_steps(*s).unwrap_or(usize::MAX / 4))
                .sum();
            if depth + 1 + rest + need <= max_depth {
                out.push(rid);
                if out.len() == self.cfg.max_children {
                    break;
                }
            }
        }
        out
    }

    /// Expands the leftmost hole of `arch`, whose path cost is `g`.
    pub fn children(
        &self,
        arch: &Architecture,
        g: f64,
        depth: usize,
    ) -> Result<Vec<Child>, GraphError> {
        let Some((hole, _)) = arch.leftmost_hole() else {
            return Err(GraphError::Complete);
        };
        if depth >= self.cfg.max_depth {
            return Err(GraphError::DepthExceeded {
                depth,
                max: self.cfg.max_depth,
            });
        }
        let rules = self.candidate_rules(arch, depth);
        let score = |rid: &RuleId| -> Result<Child, GraphError> {
            let rule = self.grammar.rule(*rid);
            let child = arch.expand(hole, rule)?;
            let g_int = g + self.cfg.lambda * rule.cost;
            if child.is_complete() {
                let fitted = self.evaluate_goal(&child)?;
                Ok(Child {
                    arch: child,
                    rule: *rid,
                    g: g_int + fitted.zeta_val,
                    h: 0.0,
                    is_goal: true,
                })
            } else {
                let h = self.heuristic(&child, depth + 1)?;
                Ok(Child {
                    arch: child,
                    rule: *rid,
                    g: g_int,
                    h,
                    is_goal: false,
                })
            }
        };
        if self.cfg.parallel && rules.len() > 1 {
            rules.par_iter().map(score).collect()
        } else {
            rules.iter().map(score).collect()
        }
    }

    /// Every complete architecture reachable from `arch` in this graph.
    /// Stops early once more than `limit` have been found.
    pub fn completions(
        &self,
        arch: &Architecture,
        depth: usize,
        limit: usize,
    ) -> Vec<Architecture> {
        let mut out = Vec::new();
        let mut stack = vec![(arch.clone(), depth)];
        while let Some((a, d)) = stack.pop() {
            let Some((hole, _)) = a.leftmost_hole() else {
                out.push(a);
                if out.len() > limit {
                    return out;
                }
                continue;
            };
            for rid in self.candidate_rules(&a, d).into_iter().rev() {
                let child = a
                    .expand(hole, self.grammar.rule(rid))
                    .expect("candidate rules fit the hole");
                stack.push((child, d + 1));
            }
        }
        out
    }

    /// Uniformly random completion of `arch` within the graph.
    pub fn random_completion<R: Rng + ?Sized>(
        &self,
        arch: &Architecture,
        depth: usize,
        rng: &mut R,
    ) -> Architecture {
        let (mut a, mut d) = (arch.clone(), depth);
        while let Some((hole, _)) = a.leftmost_hole() {
            let rules = self.candidate_rules(&a, d);
            let rid = rules[rng.gen_range(0..rules.len())];
            a = a
                .expand(hole, self.grammar.rule(rid))
                .expect("candidate rules fit the hole");
            d += 1;
        }
        a
    }

    /// λ·s(α) + ζ^val(α), recomputed from the architecture.
    pub fn goal_path_cost(&self, arch: &Architecture) -> Result<f64, GraphError> {
        let fitted = self.evaluate_goal(arch)?;
        Ok(self.cfg.lambda * arch.structural_cost() + fitted.zeta_val)
    }
}

/// Trains and scores every complete architecture of the depth-bounded graph,
/// returning `(α, path cost)` sorted by cost.
pub fn exhaustive_goal_costs(graph: &ProgramGraph) -> Result<Vec<(Architecture, f64)>, GraphError> {
    let goals = graph.completions(&graph.root(), 0, EXHAUSTIVE_LIMIT);
    if goals.len() > EXHAUSTIVE_LIMIT {
        return Err(GraphError::TooLarge(EXHAUSTIVE_LIMIT));
    }
    let fits: Vec<Arc<Fitted>> = if graph.cfg.parallel {
        goals
            .par_iter()
            .map(|a| graph.evaluate_goal(a))
            .collect::<Result<_, _>>()?
    } else {
        goals
            .iter()
            .map(|a| graph.evaluate_goal(a))
            .collect::<Result<_, _>>()?
    };
    let lambda = graph.cfg.lambda;
    let mut out: Vec<(Architecture, f64)> = goals
        .into_iter()
        .zip(fits)
        .map(|(a, f)| {
            let c = lambda * a.structural_cost() + f.zeta_val;
            (a, c)
        })
        .collect();
    out.sort_by(|a, b| a.1.total_cmp(&b.1));
    Ok(out)
}
