//! Small random grammars, random derivations and a synthetic benchmark task.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Init, ParamStore};
use crate::data::{generate_synthetic, DataError, Dataset, FrameDist, SyntheticTaskSpec};
use crate::dsl::{
    default_grammar, parse_program, Architecture, DslError, Grammar, Production, RuleSpec,
    Selector, Signature, Task, STATE_SELECTOR,
};

/// Feature width of the toy grammars.
pub const TOY_FEATURES: usize = 3;
/// Classes of the toy grammars.
pub const TOY_CLASSES: usize = 2;

/// A random per-frame grammar over 3 features and 2 classes with at most
/// `max_rules` rules (at least 3) and costs drawn from `[0.005, 0.1)`.
pub fn random_grammar<R: Rng + ?Sized>(max_rules: usize, rng: &mut R) -> Grammar {
    let (d, k) = (TOY_FEATURES, TOY_CLASSES);
    let max_rules = max_rules.max(3);
    let s2s = Signature::seq_to_seq(d, k);
    let s2v = Signature::seq_to_vec(d, k);
    let v2v = Signature::vec_to_vec(d, k);
    let state = Signature::vec_to_vec(d + k, k);
    let leaves = [
        Production::Affine(Selector::new("First", &[0])),
        Production::Affine(Selector::new("Rest", &[1, 2])),
        Production::Affine(Selector::new("Dist", &[0, 1, 2])),
        Production::Const,
    ];
    loop {
        let mut specs: Vec<(Signature, Production)> = vec![(s2s, Production::Map)];
        let n_leaves = rng.gen_range(1..=3);
        for p in leaves.choose_multiple(rng, n_leaves) {
            specs.push((v2v, p.clone()));
        }
        if rng.gen_bool(0.5) {
            specs.push((s2s, Production::MapPrefix));
            if rng.gen_bool(0.5) {
                specs.push((s2v, Production::WindowAvg));
            } else {
                specs.push((s2v, Production::Fold));
                specs.push((
                    state,
                    Production::Affine(Selector::new(STATE_SELECTOR, &[d, d + 1])),
                ));
            }
        }
        let mut extras = vec![
            (v2v, Production::Add),
            (v2v, Production::Mul),
            (s2s, Production::IfThenElse),
        ];
        extras.shuffle(rng);
        for e in extras {
            if specs.len() < max_rules && rng.gen_bool(0.4) {
                specs.push(e);
            }
        }
        specs.truncate(max_rules);
        let specs = specs
            .into_iter()
            .map(|(lhs, production)| RuleSpec {
                lhs,
                production,
                cost: rng.gen_range(0.005..0.1),
            })
            .collect();
        if let Ok(g) = Grammar::new(s2s, specs) {
            return g;
        }
    }
}

/// A random leftmost derivation from the start symbol using at most `budget`
/// steps, every prefix of which can still be completed within `budget`.
/// After each step the derivation stops with probability `stop_prob`, so the
/// result may contain holes.
pub fn random_derivation<R: Rng + ?Sized>(
    grammar: &Grammar,
    budget: usize,
    stop_prob: f64,
    rng: &mut R,
) -> Architecture {
    let mut a = Architecture::empty(grammar.start());
    let mut used = 0;
    while let Some((hole, sig)) = a.leftmost_hole() {
        if used > 0 && rng.gen::<f64>() < stop_prob {
            break;
        }
        let others: usize = a
            .holes()
            .iter()
            .skip(1)
            .map(|(_, s)| grammar.min_steps(*s).unwrap_or(usize::MAX / 4))
            .sum();
        let feasible: Vec<_> = grammar
            .rules_for(sig)
            .iter()
            .copied()
            .filter(|&r| {
                let need: usize = grammar
                    .rule(r)
                    .children()
                    .iter()
                    .map(|c| grammar.min_steps(*c).unwrap_or(usize::MAX / 4))
                    .sum();
                used + 1 + need + others <= budget
            })
            .collect();
        let Some(&r) = feasible.choose(rng) else {
            break;
        };
        a = a
            .expand(hole, grammar.rule(r))
            .expect("rules_for matches the hole");
        used += 1;
    }
    a
}

/// Ground truth of [`xor_benchmark`]: the label is the exclusive or of the
/// signs of features 0 and 2.
pub const XOR_PROGRAM: &str = "map (fun x_t. if AAffine[[4, 0], [4, 0]; 0, 0](x_t) \
     then BAffine[[3, 0], [-3, 0]; 0, 0](x_t) else BAffine[[-3, 0], [3, 0]; 0, 0](x_t)) x";

/// Sizes and noise of a generated benchmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkSize {
    pub n_train: usize,
    pub n_valid: usize,
    pub n_test: usize,
    pub len: usize,
    pub noise: f64,
}

impl Default for BenchmarkSize {
    fn default() -> Self {
        BenchmarkSize {
            n_train: 500,
            n_valid: 100,
            n_test: 100,
            len: 25,
            noise: 0.05,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Benchmark {
    pub grammar: Grammar,
    pub generator: Architecture,
    pub data: Dataset,
    /// Generator F1 on the noisy test split.
    pub ceiling: f64,
}

/// The grammar used by [`xor_benchmark`]: 6 features in three named pairs
/// `A`, `B`, `C` and 2 classes.
pub fn benchmark_grammar() -> Grammar {
    default_grammar(
        6,
        2,
        &[("A", vec![0, 1]), ("B", vec![2, 3]), ("C", vec![4, 5])],
        Task::PerFrame,
    )
    .expect("fixed grammar is valid")
}

/// Per-frame task labeled by [`XOR_PROGRAM`] on standard normal frames.
pub fn xor_benchmark(size: BenchmarkSize, seed: u64) -> Result<Benchmark, DataError> {
    let grammar = benchmark_grammar();
    let (generator, params) = parse_program(XOR_PROGRAM, &grammar)?;
    let params = params.ok_or(DslError::Incomplete)?;
    let (data, ceiling) = generate_synthetic(&SyntheticTaskSpec {
        program: generator.clone(),
        params,
        label_dim: 2,
        noise: size.noise,
        len_range: (size.len, size.len),
        n_train: size.n_train,
        n_valid: size.n_valid,
        n_test: size.n_test,
        seed,
        frames: FrameDist::StandardNormal,
        beta: 1.0,
    })?;
    Ok(Benchmark {
        grammar,
        generator,
        data,
        ceiling,
    })
}

/// Small per-frame dataset over [`TOY_FEATURES`] features, labeled by a
/// random affine map with 10% label noise.
pub fn toy_dataset(
    n_train: usize,
    n_valid: usize,
    n_test: usize,
    len: usize,
    seed: u64,
) -> Dataset {
    let grammar = default_grammar(
        TOY_FEATURES,
        TOY_CLASSES,
        &[("Dist", vec![0, 1, 2])],
        Task::PerFrame,
    )
    .expect("fixed grammar is valid");
    let (program, _) =
        parse_program("map (fun x_t. DistAffine(x_t)) x", &grammar).expect("fixed program parses");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Resample until both classes occur.
    loop {
        let params = ParamStore::init(&program, Init::Gaussian(1.5), &mut rng);
        let spec = SyntheticTaskSpec {
            program: program.clone(),
            params,
            label_dim: TOY_CLASSES,
            noise: 0.1,
            len_range: (len, len),
            n_train,
            n_valid,
            n_test,
            seed: rng.gen(),
            frames: FrameDist::StandardNormal,
            beta: 1.0,
        };
        if let Ok((data, _)) = generate_synthetic(&spec) {
            return data;
        }
    }
}
