//! `synthesize`, `gen-data`, `eval` and `probe`.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use near_core::autodiff::{Init, ParamStore};
use near_core::data::{
    evaluate_report, generate_synthetic, load_dataset, write_dataset, Dataset, FrameDist,
    LoadOptions, Manifest, Report, SyntheticTaskSpec,
};
use near_core::dsl::{parse_program, pretty_print, Architecture, Grammar, GrammarConfig, Task};
use near_core::graph::{HeuristicKind, ProgramGraph};
use near_core::search::{
    admissibility_probe, astar_near, enumerate, genetic, iddfs_near, mc_sample, mcts_uct,
    median_trace, BaselineOutcome, MeanStd, Outcome, ProbeReport, SearchNode, SearchTrace,
    TraceAxis,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{Algorithm, RunConfig};
use crate::CliError;

fn runtime<E: std::fmt::Display>(context: &Path) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{}: {e}", context.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("output types serialize");
    fs::write(path, text + "\n").map_err(runtime(path))
}

/// A program's parameters together with the grammar needed to parse its text.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProgramFile {
    pub grammar: GrammarConfig,
    pub beta: f64,
    pub params: ParamStore,
}

impl ProgramFile {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| {
            CliError::Input(format!("{}: invalid parameter file: {e}", path.display()))
        })
    }
}

/// Outcome of one search run, whatever the algorithm.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub algorithm: Algorithm,
    pub lambda: f64,
    pub seed: u64,
    pub arch: Architecture,
    pub params: ParamStore,
    pub path_cost: f64,
    pub report: Report,
    pub trace: SearchTrace,
    pub programs_trained: usize,
    /// Per-iteration best cost (iddfs-near only).
    pub fmin_history: Vec<f64>,
    /// Every scored node (astar-near and iddfs-near only).
    pub nodes: Vec<SearchNode<Architecture>>,
}

fn from_outcome(
    o: Outcome<Architecture>,
) -> (
    Architecture,
    f64,
    SearchTrace,
    Vec<f64>,
    Vec<SearchNode<Architecture>>,
) {
    (
        o.best.state.clone(),
        o.best.f,
        o.trace,
        o.fmin_history,
        o.scored,
    )
}

fn from_baseline(
    o: BaselineOutcome,
) -> (
    Architecture,
    f64,
    SearchTrace,
    Vec<f64>,
    Vec<SearchNode<Architecture>>,
) {
    (o.best, o.cost, o.trace, Vec::new(), Vec::new())
}

/// Runs `algorithm` once on a fresh graph.
pub fn run_once(
    cfg: &RunConfig,
    grammar: &Grammar,
    data: &Dataset,
    algorithm: Algorithm,
    lambda: f64,
    seed: u64,
    parallel: bool,
) -> Result<RunResult, CliError> {
    let sc = cfg.search_config(lambda, seed, parallel);
    let beta = sc.beta;
    let graph = ProgramGraph::new(grammar, data, sc, HeuristicKind::Near)?;
    let (arch, path_cost, trace, fmin_history, nodes) = match algorithm {
        Algorithm::AstarNear => from_outcome(astar_near(&graph)?),
        Algorithm::IddfsNear => from_outcome(iddfs_near(&graph)?),
        Algorithm::Enumerate => from_baseline(enumerate(&graph, cfg.enumerate_config())?),
        Algorithm::MonteCarlo => from_baseline(mc_sample(&graph, cfg.mc_config(seed))?),
        Algorithm::Mcts => from_baseline(mcts_uct(&graph, cfg.mcts_config(seed))?),
        Algorithm::Genetic => from_baseline(genetic(&graph, cfg.genetic_config(seed))?),
    };
    let programs_trained = graph.programs_trained();
    let fitted = graph
        .cached_goal(&arch)
        .ok_or_else(|| CliError::Runtime("returned program was never trained".into()))?;
    let report = evaluate_report(&arch, &fitted.params, data, beta)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(RunResult {
        algorithm,
        lambda,
        seed,
        params: fitted.params.clone(),
        arch,
        path_cost,
        report,
        trace,
        programs_trained,
        fmin_history,
        nodes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub program: String,
    pub path_cost: f64,
    pub programs_trained: usize,
    pub report: Report,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub algorithm: String,
    pub lambda: f64,
    pub accuracy: MeanStd,
    pub f1: MeanStd,
    pub depth: MeanStd,
    pub path_cost: MeanStd,
    pub runs: Vec<SeedSummary>,
    /// Median best path cost against complete programs trained.
    pub median_trace: Vec<(f64, f64)>,
}

fn summarize(algorithm: Algorithm, lambda: f64, runs: &[RunResult]) -> Summary {
    let col = |f: &dyn Fn(&RunResult) -> f64| MeanStd::of(&runs.iter().map(f).collect::<Vec<_>>());
    let traces: Vec<SearchTrace> = runs.iter().map(|r| r.trace.clone()).collect();
    Summary {
        algorithm: algorithm.name().to_string(),
        lambda,
        accuracy: col(&|r| r.report.accuracy),
        f1: col(&|r| r.report.f1),
        depth: col(&|r| r.report.depth as f64),
        path_cost: col(&|r| r.path_cost),
        runs: runs
            .iter()
            .map(|r| SeedSummary {
                seed: r.seed,
                program: pretty_print(&r.arch, None),
                path_cost: r.path_cost,
                programs_trained: r.programs_trained,
                report: r.report,
            })
            .collect(),
        median_trace: median_trace(&traces, TraceAxis::ProgramsTrained),
    }
}

fn load_data(cfg: &RunConfig) -> Result<(Dataset, Grammar), CliError> {
    let data = load_dataset(&cfg.data_path(), &cfg.load_options())?;
    let grammar = cfg.grammar(data.feature_dim, data.label_dim, data.task)?;
    Ok((data, grammar))
}

fn write_run(dir: &Path, cfg: &RunConfig, data: &Dataset, r: &RunResult) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(runtime(dir))?;
    let program = dir.join("program.txt");
    fs::write(&program, pretty_print(&r.arch, Some(&r.params)) + "\n")
        .map_err(runtime(&program))?;
    write_json(
        &dir.join("params.json"),
        &ProgramFile {
            grammar: cfg.grammar_config(data.feature_dim, data.label_dim, data.task),
            beta: cfg.graph.beta,
            params: r.params.clone(),
        },
    )?;
    let trace = dir.join("trace.csv");
    let f = fs::File::create(&trace).map_err(runtime(&trace))?;
    r.trace
        .write_csv(BufWriter::new(f))
        .map_err(runtime(&trace))
}

/// Directory of one λ value; a single λ writes straight into the output dir.
fn lambda_dir(cfg: &RunConfig, lambda: f64) -> PathBuf {
    if cfg.run.lambda.len() == 1 {
        cfg.output_dir()
    } else {
        cfg.output_dir().join(format!("lambda_{lambda}"))
    }
}

/// Runs the configured algorithm for every λ and seed and writes
/// `program.txt`, `params.json` and `trace.csv` per seed plus one
/// `summary.json` per λ.
pub fn synthesize(cfg: &RunConfig, parallel: bool) -> Result<Vec<Summary>, CliError> {
    let (data, grammar) = load_data(cfg)?;
    let mut out = Vec::new();
    for &lambda in &cfg.run.lambda {
        let dir = lambda_dir(cfg, lambda);
        let mut runs = Vec::new();
        for &seed in &cfg.run.seeds {
            let r = run_once(
                cfg,
                &grammar,
                &data,
                cfg.run.algorithm,
                lambda,
                seed,
                parallel,
            )?;
            log::info!(
                "λ={lambda} seed={seed}: cost {:.4}, test F1 {:.4}, {}",
                r.path_cost,
                r.report.f1,
                pretty_print(&r.arch, None)
            );
            write_run(&dir.join(format!("seed_{seed}")), cfg, &data, &r)?;
            runs.push(r);
        }
        let summary = summarize(cfg.run.algorithm, lambda, &runs);
        write_json(&dir.join("summary.json"), &summary)?;
        out.push(summary);
    }
    Ok(out)
}

/// Synthetic dataset description read by `gen-data`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    pub feature_dim: usize,
    pub label_dim: usize,
    #[serde(default = "per_frame")]
    pub task: Task,
    pub selectors: BTreeMap<String, Vec<usize>>,
    /// Generator text; parameters are drawn from N(0, init_std²) when the
    /// text does not carry them.
    pub program: String,
    #[serde(default = "one")]
    pub init_std: f64,
    #[serde(default)]
    pub noise: f64,
    pub min_len: usize,
    pub max_len: usize,
    pub n_train: usize,
    pub n_valid: usize,
    pub n_test: usize,
    #[serde(default)]
    pub seed: u64,
    /// Random-walk frames with this step deviation instead of iid frames.
    pub random_walk_step: Option<f64>,
    #[serde(default = "one")]
    pub beta: f64,
}

fn per_frame() -> Task {
    Task::PerFrame
}

fn one() -> f64 {
    1.0
}

impl DataSpec {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Input(format!("invalid data spec: {e}")))
    }

    fn grammar_config(&self) -> GrammarConfig {
        GrammarConfig::new(
            self.feature_dim,
            self.label_dim,
            self.task,
            self.selectors
                .iter()
                .map(|(n, i)| (n.clone(), i.clone()))
                .collect(),
        )
    }
}

/// Path of the generator program written next to a generated dataset.
pub fn generator_paths(out: &Path) -> (PathBuf, PathBuf) {
    let with = |suffix: &str| {
        let mut s = out.as_os_str().to_owned();
        s.push(suffix);
        PathBuf::from(s)
    };
    (with(".generator.txt"), with(".generator.params.json"))
}

/// Writes a JSON-lines dataset with its manifest, plus the generator program
/// and its parameter file. Returns the generator's F1 ceiling.
pub fn gen_data(spec: &DataSpec, out: &Path) -> Result<f64, CliError> {
    let gc = spec.grammar_config();
    let grammar = gc.build()?;
    let (program, params) = parse_program(&spec.program, &grammar)?;
    if !program.is_complete() {
        return Err(CliError::Input("the generator program has holes".into()));
    }
    let params = match params {
        Some(p) => p,
        None => {
            if !(spec.init_std > 0.0 && spec.init_std.is_finite()) {
                return Err(CliError::Input("init_std: must be > 0".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5eed);
            ParamStore::init(&program, Init::Gaussian(spec.init_std), &mut rng)
        }
    };
    let task_spec = SyntheticTaskSpec {
        program: program.clone(),
        params: params.clone(),
        label_dim: spec.label_dim,
        noise: spec.noise,
        len_range: (spec.min_len, spec.max_len),
        n_train: spec.n_train,
        n_valid: spec.n_valid,
        n_test: spec.n_test,
        seed: spec.seed,
        frames: match spec.random_walk_step {
            Some(step) => FrameDist::RandomWalk { step },
            None => FrameDist::StandardNormal,
        },
        beta: spec.beta,
    };
    let (data, ceiling) = generate_synthetic(&task_spec).map_err(|e| match e {
        near_core::data::DataError::Degenerate(_) => CliError::Runtime(e.to_string()),
        other => other.into(),
    })?;
    let text = pretty_print(&program, Some(&params));
    let manifest = Manifest {
        task: data.task,
        feature_dim: data.feature_dim,
        label_dim: data.label_dim,
        splits: None,
        generator: Some(text.clone()),
        generator_params: Some(params.clone()),
        noise: Some(spec.noise),
        f1_ceiling: Some(ceiling),
    };
    write_dataset(out, &data, manifest).map_err(|e| CliError::Runtime(e.to_string()))?;
    let (prog_path, params_path) = generator_paths(out);
    fs::write(&prog_path, text + "\n").map_err(runtime(&prog_path))?;
    write_json(
        &params_path,
        &ProgramFile {
            grammar: gc,
            beta: spec.beta,
            params,
        },
    )?;
    Ok(ceiling)
}

/// Test-split report of a program file with its parameter file.
pub fn eval(program: &Path, params: &Path, data: &Path) -> Result<Report, CliError> {
    let pf = ProgramFile::read(params)?;
    let grammar = pf.grammar.build()?;
    let text = fs::read_to_string(program)
        .map_err(|e| CliError::Input(format!("{}: {e}", program.display())))?;
    let (arch, _) = parse_program(text.trim(), &grammar)?;
    if !arch.is_complete() {
        return Err(CliError::Input("the program has holes".into()));
    }
    if !pf.params.matches(&arch) || !pf.params.all_finite() {
        return Err(CliError::Input(format!(
            "{}: parameters do not fit the program",
            params.display()
        )));
    }
    let opts = LoadOptions {
        task: Some(pf.grammar.task),
        label_dim: Some(pf.grammar.label_dim),
        ..LoadOptions::default()
    };
    let dataset = load_dataset(data, &opts)?;
    if dataset.feature_dim != pf.grammar.feature_dim {
        return Err(CliError::Input(format!(
            "data has {} features but the program expects {}",
            dataset.feature_dim, pf.grammar.feature_dim
        )));
    }
    evaluate_report(&arch, &pf.params, &dataset, pf.beta)
        .map_err(|e| CliError::Runtime(e.to_string()))
}

/// Contents of `probe.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeOutput {
    pub algorithm: String,
    pub lambda: f64,
    pub seed: u64,
    /// Path cost returned by the reference run.
    pub returned_cost: f64,
    pub report: ProbeReport,
}

/// Runs the reference search (iddfs-near when configured, astar-near
/// otherwise) for the first λ and seed, then probes every scored node.
pub fn probe(cfg: &RunConfig, parallel: bool) -> Result<ProbeOutput, CliError> {
    let (data, grammar) = load_data(cfg)?;
    let algorithm = match cfg.run.algorithm {
        Algorithm::IddfsNear => Algorithm::IddfsNear,
        _ => Algorithm::AstarNear,
    };
    let (lambda, seed) = (cfg.run.lambda[0], cfg.run.seeds[0]);
    let r = run_once(cfg, &grammar, &data, algorithm, lambda, seed, parallel)?;
    let nodes: Vec<SearchNode<Architecture>> = if cfg.probe.complete_only {
        r.nodes.into_iter().filter(|n| n.is_goal).collect()
    } else {
        r.nodes
    };
    if nodes.is_empty() {
        return Err(CliError::Runtime(
            "the reference run produced no nodes to probe".into(),
        ));
    }
    let graph = ProgramGraph::new(
        &grammar,
        &data,
        cfg.search_config(lambda, seed, parallel),
        HeuristicKind::Near,
    )?;
    let report = admissibility_probe(&graph, &nodes, cfg.probe.n_samples, cfg.probe.seed)?;
    let out = ProbeOutput {
        algorithm: algorithm.name().to_string(),
        lambda,
        seed,
        returned_cost: r.path_cost,
        report,
    };
    let dir = cfg.output_dir();
    fs::create_dir_all(&dir).map_err(runtime(&dir))?;
    write_json(&dir.join("probe.json"), &out)?;
    Ok(out)
}
