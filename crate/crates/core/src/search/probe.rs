use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{SearchError, SearchNode};
use crate::dsl::Architecture;
use crate::graph::ProgramGraph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeEntry {
    pub program: String,
    pub depth: usize,
    pub h: f64,
    /// Estimated cost-to-go: min over completions of λ·Δs + ζ^val.
    pub j_hat: f64,
    /// `h − Ĵ`.
    pub gap: f64,
    /// Whether Ĵ is exact (every completion was trained).
    pub exhaustive: bool,
    pub completions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub entries: Vec<ProbeEntry>,
    /// Largest gap, or −∞ when nothing was probed.
    pub max_gap: f64,
    /// ε̂ = max(0, max gap).
    pub epsilon_hat: f64,
}

impl ProbeReport {
    /// Entries with `h > Ĵ + ε`.
    pub fn violations(&self, epsilon: f64) -> Vec<&ProbeEntry> {
        self.entries.iter().filter(|e| e.gap > epsilon).collect()
    }
}

/// Compares h(u) with an estimate of J(u) for each node. Ĵ is exact when `u`
/// has at most `n_samples` completions and sampled otherwise. A complete
/// node is its own only completion, so its gap is 0.
pub fn admissibility_probe(
    graph: &ProgramGraph,
    nodes: &[SearchNode<Architecture>],
    n_samples: usize,
    seed: u64,
) -> Result<ProbeReport, SearchError> {
    if n_samples == 0 {
        return Err(SearchError::Invalid("n_samples must be ≥ 1".into()));
    }
    let lambda = graph.config().lambda;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::with_capacity(nodes.len());
    for n in nodes {
        let arch = &n.state;
        let base = arch.structural_cost();
        let (completions, exhaustive) = {
            let all = graph.completions(arch, n.depth, n_samples);
            if all.len() <= n_samples {
                (all, true)
            } else {
                let sampled = (0..n_samples)
                    .map(|_| graph.random_completion(arch, n.depth, &mut rng))
                    .collect();
                (sampled, false)
            }
        };
        let mut j_hat = f64::INFINITY;
        for c in &completions {
            let z = graph.evaluate_goal(c)?.zeta_val;
            j_hat = j_hat.min(lambda * (c.structural_cost() - base) + z);
        }
        let h = if arch.is_complete() { j_hat } else { n.h };
        entries.push(ProbeEntry {
            program: crate::dsl::pretty_print(arch, None),
            depth: n.depth,
            h,
            j_hat,
            gap: h - j_hat,
            exhaustive,
            completions: completions.len(),
        });
    }
    let max_gap = entries
        .iter()
        .map(|e| e.gap)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(ProbeReport {
        entries,
        max_gap,
        epsilon_hat: max_gap.max(0.0),
    })
}
