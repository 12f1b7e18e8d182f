use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use near_cli::commands::generator_paths;
use near_cli::{ProbeOutput, Summary};
use near_core::toy::XOR_PROGRAM;

fn near(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_near"))
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn spec(noise: f64, seed: u64) -> String {
    format!(
        "feature_dim = 6\nlabel_dim = 2\ntask = \"per_frame\"\nprogram = \"{XOR_PROGRAM}\"\n\
         noise = {noise}\nmin_len = 8\nmax_len = 12\nn_train = 60\nn_valid = 20\nn_test = 20\nseed = {seed}\n\
         [selectors]\nA = [0, 1]\nB = [2, 3]\nC = [4, 5]\n"
    )
}

fn gen(dir: &Path, name: &str, noise: f64, seed: u64) -> PathBuf {
    let s = dir.join(format!("{name}.toml"));
    fs::write(&s, spec(noise, seed)).unwrap();
    let out = dir.join(format!("{name}.jsonl"));
    let o = near(&[
        "gen-data",
        "--spec",
        s.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn config(dir: &Path, data: &Path, algorithm: &str, extra: &str) -> PathBuf {
    let c = dir.join(format!("{algorithm}.toml"));
    let text = format!(
        "[run]\nalgorithm = \"{algorithm}\"\nseeds = [0, 1]\noutput_dir = \"out_{algorithm}\"\n{extra}\n\
         [data]\npath = \"{}\"\n\
         [grammar.selectors]\nA = [0, 1]\nB = [2, 3]\nC = [4, 5]\n\
         [graph]\nmax_depth = 4\ninit_units = 4\nmin_units = 2\n\
         [training]\nneural_epochs = 2\nsymbolic_epochs = 3\nlr = 0.05\nbatch_size = 20\n\
         [baselines]\nsamples_per_step = 3\nmax_programs = 6\npop_size = 4\nselection_size = 2\ngenerations = 2\ntotal_evals = 10\nenum_depth = 4\n",
        data.file_name().unwrap().to_str().unwrap()
    );
    fs::write(&c, text).unwrap();
    c
}

fn eval_json(program: &Path, params: &Path, data: &Path) -> serde_json::Value {
    let o = near(&[
        "eval",
        "--program",
        program.to_str().unwrap(),
        "--params",
        params.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn gen_data_is_deterministic_and_its_ceiling_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen(dir.path(), "a", 0.1, 7);
    let b = gen(dir.path(), "b", 0.1, 7);
    let text = fs::read(&a).unwrap();
    assert_eq!(text, fs::read(&b).unwrap());
    assert_eq!(text.iter().filter(|&&c| c == b'\n').count(), 100);

    let manifest: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("a.jsonl.manifest.json")).unwrap(),
    )
    .unwrap();
    let (prog, params) = generator_paths(&a);
    let report = eval_json(&prog, &params, &a);
    assert_eq!(report["f1"], manifest["f1_ceiling"]);

    let clean = gen(dir.path(), "clean", 0.0, 3);
    let (prog, params) = generator_paths(&clean);
    assert_eq!(
        eval_json(&prog, &params, &clean)["f1"].as_f64().unwrap(),
        1.0
    );
}

#[test]
fn bad_inputs_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "d", 0.05, 1);
    let (prog, params) = generator_paths(&data);
    fs::write(dir.path().join("broken.json"), "{\"grammar\": 3").unwrap();
    let o = near(&[
        "eval",
        "--program",
        prog.to_str().unwrap(),
        "--params",
        dir.path().join("broken.json").to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("invalid parameter file"));

    fs::write(
        dir.path().join("bad.txt"),
        "map (fun x_t. NoSuchAffine(x_t)) x",
    )
    .unwrap();
    let o = near(&[
        "eval",
        "--program",
        dir.path().join("bad.txt").to_str().unwrap(),
        "--params",
        params.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);

    let c = config(dir.path(), &data, "beam-search", "");
    assert_eq!(
        code(&near(&["synthesize", "--config", c.to_str().unwrap()])),
        2
    );
    let missing = dir.path().join("nope.toml");
    assert_eq!(
        code(&near(&["probe", "--config", missing.to_str().unwrap()])),
        2
    );
}

#[test]
fn degenerate_generator_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("const.toml");
    let text = spec(0.0, 1).replace(XOR_PROGRAM, "map (fun x_t. c[1, 0]) x");
    fs::write(&s, text).unwrap();
    let out = dir.path().join("c.jsonl");
    let o = near(&[
        "gen-data",
        "--spec",
        s.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn synthesize_writes_reproducible_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "d", 0.05, 2);
    let c = config(dir.path(), &data, "astar-near", "");
    let o = near(&["synthesize", "--config", c.to_str().unwrap(), "--jobs", "1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out_astar-near");
    let first = fs::read_to_string(out.join("summary.json")).unwrap();
    let summary: Summary = serde_json::from_str(&first).unwrap();
    assert_eq!(summary.runs.len(), 2);
    for run in &summary.runs {
        let sd = out.join(format!("seed_{}", run.seed));
        let trace = fs::read_to_string(sd.join("trace.csv")).unwrap();
        assert!(trace.starts_with("wall_seconds,best_path_cost,programs_trained,nodes_expanded"));
        let report = eval_json(&sd.join("program.txt"), &sd.join("params.json"), &data);
        assert_eq!(report, serde_json::to_value(run.report).unwrap());
    }
    let o = near(&["synthesize", "--config", c.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read_to_string(out.join("summary.json")).unwrap(), first);
}

#[test]
fn every_algorithm_runs_and_lambda_sweeps_write_one_summary_each() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "d", 0.05, 4);
    for algo in ["iddfs-near", "enum", "mc", "mcts", "genetic"] {
        let c = config(dir.path(), &data, algo, "");
        let o = near(&["synthesize", "--config", c.to_str().unwrap()]);
        assert_eq!(
            code(&o),
            0,
            "{algo}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        let s: Summary = serde_json::from_str(
            &fs::read_to_string(dir.path().join(format!("out_{algo}/summary.json"))).unwrap(),
        )
        .unwrap();
        assert_eq!(s.algorithm, algo);
    }
    let c = config(dir.path(), &data, "astar-near", "lambda = [1.0, 4.0, 8.0]");
    let o = near(&["synthesize", "--config", c.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for l in ["1", "4", "8"] {
        let p = dir
            .path()
            .join(format!("out_astar-near/lambda_{l}/summary.json"));
        let s: Summary = serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap();
        assert_eq!(s.lambda.to_string(), l);
    }
}

#[test]
fn probe_of_goal_nodes_has_no_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "d", 0.05, 5);
    let c = config(
        dir.path(),
        &data,
        "astar-near",
        "[probe]\ncomplete_only = true\n",
    );
    let o = near(&["probe", "--config", c.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let p: ProbeOutput = serde_json::from_str(
        &fs::read_to_string(dir.path().join("out_astar-near/probe.json")).unwrap(),
    )
    .unwrap();
    assert!(!p.report.entries.is_empty());
    assert!(p.report.entries.iter().all(|e| e.gap == 0.0));
    assert_eq!(p.report.epsilon_hat, 0.0);
}
