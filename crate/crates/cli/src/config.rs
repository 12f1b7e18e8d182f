//! TOML run configuration.
//!
//! Section and key names follow the hyperparameter columns used throughout
//! the search code (`max_depth`, `init_units`, `perf_mult`, `pop_size`, ...).
//! Every key has a default, so a config only needs `[run]`, `[data]` and the
//! grammar selectors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use near_core::data::LoadOptions;
use near_core::dsl::{Grammar, GrammarConfig, Task, DEFAULT_PENALTY};
use near_core::graph::SearchConfig;
use near_core::search::{EnumerateConfig, GeneticConfig, McConfig, MctsConfig, RuleWeighting};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "astar-near")]
    AstarNear,
    #[serde(rename = "iddfs-near")]
    IddfsNear,
    #[serde(rename = "enum")]
    Enumerate,
    #[serde(rename = "mc")]
    MonteCarlo,
    #[serde(rename = "mcts")]
    Mcts,
    #[serde(rename = "genetic")]
    Genetic,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::AstarNear => "astar-near",
            Algorithm::IddfsNear => "iddfs-near",
            Algorithm::Enumerate => "enum",
            Algorithm::MonteCarlo => "mc",
            Algorithm::Mcts => "mcts",
            Algorithm::Genetic => "genetic",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub algorithm: Algorithm,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Relative paths resolve against the config file's directory.
    pub output_dir: PathBuf,
    /// One summary per value.
    #[serde(default = "default_lambda")]
    pub lambda: Vec<f64>,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_lambda() -> Vec<f64> {
    vec![1.0]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub path: PathBuf,
    pub task: Option<Task>,
    pub label_dim: Option<usize>,
    #[serde(default)]
    pub split_seed: u64,
    pub segment_max_len: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrammarSection {
    /// Named feature subsets; each becomes an affine library function.
    pub selectors: BTreeMap<String, Vec<usize>>,
    /// Per-rule cost overrides keyed by rule name.
    #[serde(default)]
    pub costs: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraphSection {
    pub max_depth: usize,
    pub init_units: usize,
    pub min_units: usize,
    pub max_children: usize,
    pub penalty: f64,
    pub beta: f64,
}

impl Default for GraphSection {
    fn default() -> Self {
        let c = SearchConfig::default();
        GraphSection {
            max_depth: c.max_depth,
            init_units: c.init_units,
            min_units: c.min_units,
            max_children: c.max_children,
            penalty: DEFAULT_PENALTY,
            beta: c.beta,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSection {
    pub neural_epochs: usize,
    pub symbolic_epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub class_weights: Option<Vec<f64>>,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let c = SearchConfig::default();
        TrainingSection {
            neural_epochs: c.neural_epochs,
            symbolic_epochs: c.symbolic_epochs,
            lr: c.lr,
            batch_size: c.batch_size,
            class_weights: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NearSection {
    /// Omit for an unbounded frontier.
    pub frontier_size: Option<usize>,
    pub initial_depth: usize,
    pub depth_bias: f64,
    pub perf_mult: f64,
}

impl Default for NearSection {
    fn default() -> Self {
        let c = SearchConfig::default();
        NearSection {
            frontier_size: Some(400),
            initial_depth: c.initial_depth,
            depth_bias: c.depth_bias,
            perf_mult: c.perf_mult,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Proportional,
    Inverse,
    Uniform,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineSection {
    pub samples_per_step: usize,
    pub max_programs: usize,
    pub pop_size: usize,
    pub selection_size: usize,
    pub generations: usize,
    pub total_evals: usize,
    pub mutation_prob: f64,
    pub enum_depth: usize,
    pub mc_weighting: Weighting,
    pub exploration_c: f64,
}

impl Default for BaselineSection {
    fn default() -> Self {
        BaselineSection {
            samples_per_step: 150,
            max_programs: 1200,
            pop_size: 100,
            selection_size: 50,
            generations: 10,
            total_evals: 1000,
            mutation_prob: 0.01,
            enum_depth: 7,
            mc_weighting: Weighting::Proportional,
            exploration_c: MctsConfig::DEFAULT_C,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSection {
    /// Completions trained per probed node when they cannot all be enumerated.
    pub n_samples: usize,
    pub seed: u64,
    /// Probe only the goal nodes of the reference run.
    pub complete_only: bool,
}

impl Default for ProbeSection {
    fn default() -> Self {
        ProbeSection {
            n_samples: 20,
            seed: 0,
            complete_only: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub data: DataSection,
    pub grammar: GrammarSection,
    #[serde(default)]
    pub graph: GraphSection,
    #[serde(default)]
    pub training: TrainingSection,
    #[serde(default)]
    pub near: NearSection,
    #[serde(default)]
    pub baselines: BaselineSection,
    #[serde(default)]
    pub probe: ProbeSection,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn invalid(field: &str, msg: &str) -> CliError {
    CliError::Input(format!("{field}: {msg}"))
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let mut cfg: RunConfig =
            toml::from_str(text).map_err(|e| CliError::Input(format!("invalid config: {e}")))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn data_path(&self) -> PathBuf {
        self.resolve(&self.data.path)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.run.output_dir)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.run.seeds.is_empty() {
            return Err(invalid("run.seeds", "at least one seed is required"));
        }
        if self.run.lambda.is_empty() {
            return Err(invalid("run.lambda", "at least one value is required"));
        }
        if let Some(l) = self
            .run
            .lambda
            .iter()
            .find(|l| !(l.is_finite() && **l >= 0.0))
        {
            return Err(invalid(
                "run.lambda",
                &format!("{l} is not a finite value ≥ 0"),
            ));
        }
        if !self.data_path().is_file() {
            return Err(invalid(
                "data.path",
                &format!("{} does not exist", self.data_path().display()),
            ));
        }
        if self.grammar.selectors.is_empty() {
            return Err(invalid(
                "grammar.selectors",
                "at least one selector is required",
            ));
        }
        if !(self.graph.penalty.is_finite() && self.graph.penalty >= 0.0) {
            return Err(invalid("graph.penalty", "must be ≥ 0"));
        }
        if self.graph.min_units == 0 || self.graph.min_units > self.graph.init_units {
            return Err(invalid(
                "graph.min_units",
                "need 1 ≤ min_units ≤ init_units",
            ));
        }
        if self.training.neural_epochs == 0 || self.training.symbolic_epochs == 0 {
            return Err(invalid(
                "training",
                "neural_epochs and symbolic_epochs must be ≥ 1",
            ));
        }
        if self.near.initial_depth > self.graph.max_depth {
            return Err(invalid(
                "near.initial_depth",
                "must not exceed graph.max_depth",
            ));
        }
        let b = &self.baselines;
        match self.run.algorithm {
            Algorithm::MonteCarlo | Algorithm::Mcts if b.samples_per_step == 0 => {
                return Err(invalid("baselines.samples_per_step", "must be ≥ 1"));
            }
            Algorithm::Enumerate if b.max_programs == 0 => {
                return Err(invalid("baselines.max_programs", "must be ≥ 1"));
            }
            Algorithm::Genetic => {
                if b.selection_size == 0 || b.selection_size > b.pop_size {
                    return Err(invalid(
                        "baselines.selection_size",
                        "need 1 ≤ selection_size ≤ pop_size",
                    ));
                }
                if b.generations == 0 || b.total_evals == 0 {
                    return Err(invalid(
                        "baselines",
                        "generations and total_evals must be ≥ 1",
                    ));
                }
                if !(0.0..=1.0).contains(&b.mutation_prob) {
                    return Err(invalid("baselines.mutation_prob", "must be in [0, 1]"));
                }
            }
            Algorithm::Mcts if !(b.exploration_c >= 0.0) => {
                return Err(invalid("baselines.exploration_c", "must be ≥ 0"));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn load_options(&self) -> LoadOptions {
        LoadOptions {
            task: self.data.task,
            label_dim: self.data.label_dim,
            split_seed: self.data.split_seed,
            segment_max_len: self.data.segment_max_len,
            splits: None,
        }
    }

    pub fn grammar_config(
        &self,
        feature_dim: usize,
        label_dim: usize,
        task: Task,
    ) -> GrammarConfig {
        let mut gc = GrammarConfig::new(
            feature_dim,
            label_dim,
            task,
            self.grammar
                .selectors
                .iter()
                .map(|(n, i)| (n.clone(), i.clone()))
                .collect(),
        );
        gc.penalty = self.graph.penalty;
        gc.cost_overrides = self.grammar.costs.clone();
        gc
    }

    pub fn grammar(
        &self,
        feature_dim: usize,
        label_dim: usize,
        task: Task,
    ) -> Result<Grammar, CliError> {
        self.grammar_config(feature_dim, label_dim, task)
            .build()
            .map_err(|e| invalid("grammar", &e.to_string()))
    }

    pub fn search_config(&self, lambda: f64, seed: u64, parallel: bool) -> SearchConfig {
        SearchConfig {
            max_depth: self.graph.max_depth,
            max_children: self.graph.max_children,
            frontier_size: self.near.frontier_size,
            lambda,
            beta: self.graph.beta,
            perf_mult: self.near.perf_mult,
            depth_bias: self.near.depth_bias,
            initial_depth: self.near.initial_depth,
            init_units: self.graph.init_units,
            min_units: self.graph.min_units,
            neural_epochs: self.training.neural_epochs,
            symbolic_epochs: self.training.symbolic_epochs,
            lr: self.training.lr,
            batch_size: self.training.batch_size,
            class_weights: self.training.class_weights.clone(),
            seed,
            parallel,
        }
    }

    pub fn enumerate_config(&self) -> EnumerateConfig {
        EnumerateConfig {
            max_programs: self.baselines.max_programs,
        }
    }

    pub fn mc_config(&self, seed: u64) -> McConfig {
        McConfig {
            samples_per_step: self.baselines.samples_per_step,
            weighting: match self.baselines.mc_weighting {
                Weighting::Proportional => RuleWeighting::Proportional,
                Weighting::Inverse => RuleWeighting::Inverse,
                Weighting::Uniform => RuleWeighting::Uniform,
            },
            seed,
        }
    }

    pub fn mcts_config(&self, seed: u64) -> MctsConfig {
        MctsConfig {
            samples_per_step: self.baselines.samples_per_step,
            exploration_c: self.baselines.exploration_c,
            seed,
        }
    }

    pub fn genetic_config(&self, seed: u64) -> GeneticConfig {
        let b = &self.baselines;
        GeneticConfig {
            pop_size: b.pop_size,
            selection_size: b.selection_size,
            generations: b.generations,
            total_evals: b.total_evals,
            mutation_prob: b.mutation_prob,
            enum_depth: b.enum_depth,
            seed,
        }
    }
}
