//! Typed context-free grammar over program architectures.
//!
//! Every nonterminal is identified by its [`Signature`]; a rule rewrites a
//! nonterminal into one construct whose child slots are again nonterminals.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::types::{SemType, Signature, Task};
use super::DslError;

/// Default per-rule structural cost.
pub const DEFAULT_PENALTY: f64 = 0.01;

/// Name reserved for the selector over a fold's accumulator slice.
pub const STATE_SELECTOR: &str = "State";

/// A named subset of input dimensions fed to an affine library function.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Selector {
    pub name: Arc<str>,
    pub indices: Arc<[usize]>,
}

impl Selector {
    pub fn new(name: &str, indices: &[usize]) -> Self {
        Selector {
            name: Arc::from(name),
            indices: Arc::from(indices),
        }
    }

    /// Name of the library function built on this selector, e.g. `DistAffine`.
    pub fn function_name(&self) -> String {
        format!("{}Affine", self.name)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// One production of the DSL.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Production {
    /// The bound input variable itself.
    Input,
    /// Learnable constant vector.
    Const,
    /// Affine map over a selected subset of the input.
    Affine(Selector),
    Add,
    Mul,
    IfThenElse,
    Map,
    MapPrefix,
    Fold,
    /// Average of the body over the trailing window of frames.
    WindowAvg,
}

impl Production {
    pub fn name(&self) -> String {
        match self {
            Production::Input => "Input".into(),
            Production::Const => "Const".into(),
            Production::Affine(sel) => sel.function_name(),
            Production::Add => "Add".into(),
            Production::Mul => "Multiply".into(),
            Production::IfThenElse => "IfThenElse".into(),
            Production::Map => "Map".into(),
            Production::MapPrefix => "MapPrefix".into(),
            Production::Fold => "Fold".into(),
            Production::WindowAvg => "SlidingWindowAvg".into(),
        }
    }

    /// Child slot signatures when this production rewrites a nonterminal of
    /// type `lhs`, or `None` when the production does not type-check there.
    pub fn child_signatures(&self, lhs: Signature) -> Option<Vec<Signature>> {
        if !lhs.is_well_formed() {
            return None;
        }
        use SemType::{Sequence, Vector};
        match (self, lhs.input, lhs.output) {
            (Production::Input, Vector(n), Vector(m)) if n == m => Some(vec![]),
            (Production::Const, Vector(_), Vector(_)) => Some(vec![]),
            (Production::Affine(sel), Vector(n), Vector(_)) => {
                (!sel.is_empty() && sel.indices.iter().all(|&i| i < n)).then(Vec::new)
            }
            (Production::Add | Production::Mul, _, _) => Some(vec![lhs, lhs]),
            (Production::IfThenElse, _, _) => Some(vec![lhs, lhs, lhs]),
            (Production::Map, Sequence(n), Sequence(m)) => Some(vec![Signature::vec_to_vec(n, m)]),
            (Production::MapPrefix, Sequence(n), Sequence(m)) => {
                Some(vec![Signature::seq_to_vec(n, m)])
            }
            (Production::Fold, Sequence(n), Vector(m)) => {
                Some(vec![Signature::vec_to_vec(n + m, m)])
            }
            (Production::WindowAvg, Sequence(n), Vector(m)) => {
                Some(vec![Signature::vec_to_vec(n, m)])
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RuleId(pub usize);

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub id: RuleId,
    pub lhs: Signature,
    pub production: Production,
    pub cost: f64,
}

impl Rule {
    pub fn name(&self) -> String {
        self.production.name()
    }

    pub fn children(&self) -> Vec<Signature> {
        self.production
            .child_signatures(self.lhs)
            .expect("rules are type-checked on construction")
    }

    pub fn arity(&self) -> usize {
        self.children().len()
    }
}

/// Rule before it has been assigned an id by [`Grammar::new`].
#[derive(Debug, Clone)]
pub struct RuleSpec {
    pub lhs: Signature,
    pub production: Production,
    pub cost: f64,
}

#[derive(Debug, Clone)]
pub struct Grammar {
    start: Signature,
    rules: Vec<Rule>,
    by_lhs: HashMap<Signature, Vec<RuleId>>,
    min_steps: HashMap<Signature, usize>,
    min_cost: HashMap<Signature, f64>,
    selectors: Vec<Selector>,
}

impl Grammar {
    pub fn new(start: Signature, specs: Vec<RuleSpec>) -> Result<Self, DslError> {
        if !start.is_well_formed() || !start.input.is_sequence() {
            return Err(DslError::Grammar(format!(
                "invalid start signature {start}"
            )));
        }
        let mut rules = Vec::with_capacity(specs.len());
        for (i, spec) in specs.into_iter().enumerate() {
            if !(spec.cost.is_finite() && spec.cost >= 0.0) {
                return Err(DslError::Grammar(format!(
                    "rule {} has invalid cost {}",
                    spec.production.name(),
                    spec.cost
                )));
            }
            if spec.production.child_signatures(spec.lhs).is_none() {
                return Err(DslError::Grammar(format!(
                    "rule {} does not type-check at {}",
                    spec.production.name(),
                    spec.lhs
                )));
            }
            rules.push(Rule {
                id: RuleId(i),
                lhs: spec.lhs,
                production: spec.production,
                cost: spec.cost,
            });
        }
        let mut by_lhs: HashMap<Signature, Vec<RuleId>> = HashMap::new();
        for r in &rules {
            by_lhs.entry(r.lhs).or_default().push(r.id);
        }
        for ids in by_lhs.values_mut() {
            ids.sort_by(|a, b| rules[a.0].cost.total_cmp(&rules[b.0].cost).then(a.cmp(b)));
        }
        let mut selectors: Vec<Selector> = Vec::new();
        for r in &rules {
            if let Production::Affine(sel) = &r.production {
                if !selectors.iter().any(|s| s.name == sel.name) {
                    selectors.push(sel.clone());
                }
            }
        }
        let mut g = Grammar {
            start,
            rules,
            by_lhs,
            min_steps: HashMap::new(),
            min_cost: HashMap::new(),
            selectors,
        };
        g.compute_completion_bounds();
        if g.min_steps(start).is_none() {
            return Err(DslError::Grammar(format!(
                "start nonterminal {start} derives no complete program"
            )));
        }
        Ok(g)
    }

    /// Bellman-Ford style fixpoint for the fewest rules (and the cheapest
    /// rule-cost total) needed to complete a hole of each signature.
    fn compute_completion_bounds(&mut self) {
        let mut steps: HashMap<Signature, usize> = HashMap::new();
        let mut cost: HashMap<Signature, f64> = HashMap::new();
        loop {
            let mut changed = false;
            for r in &self.rules {
                let mut s = 1usize;
                let mut c = r.cost;
                let mut ok = true;
                for child in r.children() {
                    match (steps.get(&child), cost.get(&child)) {
                        (Some(cs), Some(cc)) => {
                            s += cs;
                            c += cc;
                        }
                        _ => {
                            ok = false;
                            break;
                        }
                    }
                }
                if !ok {
                    continue;
                }
                if steps.get(&r.lhs).is_none_or(|&old| s < old) {
                    steps.insert(r.lhs, s);
                    changed = true;
                }
                if cost.get(&r.lhs).is_none_or(|&old| c < old) {
                    cost.insert(r.lhs, c);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        self.min_steps = steps;
        self.min_cost = cost;
    }

    pub fn start(&self) -> Signature {
        self.start
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rule(&self, id: RuleId) -> &Rule {
        &self.rules[id.0]
    }

    /// Rules rewriting nonterminal `sig`, ordered by cost then id.
    pub fn rules_for(&self, sig: Signature) -> &[RuleId] {
        self.by_lhs.get(&sig).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Fewest derivation steps that complete a hole of type `sig`.
    pub fn min_steps(&self, sig: Signature) -> Option<usize> {
        self.min_steps.get(&sig).copied()
    }

    /// Smallest total rule cost that completes a hole of type `sig`.
    pub fn min_cost(&self, sig: Signature) -> Option<f64> {
        self.min_cost.get(&sig).copied()
    }

    pub fn selectors(&self) -> &[Selector] {
        &self.selectors
    }

    /// The rule of production `production` rewriting `lhs`, if any.
    pub fn find_rule(&self, lhs: Signature, production: &Production) -> Option<&Rule> {
        self.rules_for(lhs)
            .iter()
            .map(|&id| self.rule(id))
            .find(|r| &r.production == production)
    }

    /// Looks up an affine rule by its library-function name at `lhs`.
    pub fn find_affine(&self, lhs: Signature, function_name: &str) -> Option<&Rule> {
        self.rules_for(lhs).iter().map(|&id| self.rule(id)).find(
            |r| matches!(&r.production, Production::Affine(sel) if sel.function_name() == function_name),
        )
    }

    pub fn nonterminals(&self) -> BTreeSet<Signature> {
        self.by_lhs.keys().copied().collect()
    }
}

/// Parameters of the standard sequence-classification grammar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrammarConfig {
    pub feature_dim: usize,
    pub label_dim: usize,
    pub task: Task,
    /// Named feature subsets, one affine library function each.
    pub selectors: Vec<(String, Vec<usize>)>,
    /// Uniform per-rule cost.
    pub penalty: f64,
    /// Per-rule cost overrides keyed by rule name (`Map`, `DistAffine`, ...).
    pub cost_overrides: BTreeMap<String, f64>,
}

impl GrammarConfig {
    pub fn new(
        feature_dim: usize,
        label_dim: usize,
        task: Task,
        selectors: Vec<(String, Vec<usize>)>,
    ) -> Self {
        GrammarConfig {
            feature_dim,
            label_dim,
            task,
            selectors,
            penalty: DEFAULT_PENALTY,
            cost_overrides: BTreeMap::new(),
        }
    }

    pub fn build(&self) -> Result<Grammar, DslError> {
        let (d, k) = (self.feature_dim, self.label_dim);
        if d == 0 || k == 0 {
            return Err(DslError::Grammar(
                "feature_dim and label_dim must be ≥ 1".into(),
            ));
        }
        if self.selectors.is_empty() {
            return Err(DslError::Grammar(
                "at least one selector is required".into(),
            ));
        }
        let mut selectors = Vec::new();
        for (name, idx) in &self.selectors {
            if name == STATE_SELECTOR {
                return Err(DslError::Grammar(format!(
                    "selector name `{name}` is reserved"
                )));
            }
            if idx.is_empty() {
                return Err(DslError::Grammar(format!("selector `{name}` is empty")));
            }
            if let Some(&bad) = idx.iter().find(|&&i| i >= d) {
                return Err(DslError::Grammar(format!(
                    "selector `{name}` index {bad} out of range for feature_dim {d}"
                )));
            }
            selectors.push(Selector::new(name, idx));
        }
        let cost_of = |p: &Production| -> f64 {
            self.cost_overrides
                .get(&p.name())
                .copied()
                .unwrap_or(self.penalty)
        };
        let mut specs = Vec::new();
        let mut push = |lhs: Signature, production: Production| {
            let cost = cost_of(&production);
            specs.push(RuleSpec {
                lhs,
                production,
                cost,
            });
        };

        let vec_body = |specs_push: &mut dyn FnMut(Signature, Production),
                        sig: Signature,
                        extra: Option<Selector>| {
            for sel in &selectors {
                specs_push(sig, Production::Affine(sel.clone()));
            }
            if let Some(sel) = extra {
                specs_push(sig, Production::Affine(sel));
            }
            specs_push(sig, Production::Add);
            specs_push(sig, Production::Mul);
            specs_push(sig, Production::IfThenElse);
            specs_push(sig, Production::Const);
            if sig.input.dim() == sig.output.dim() {
                specs_push(sig, Production::Input);
            }
        };

        if self.task == Task::PerFrame {
            let s2s = Signature::seq_to_seq(d, k);
            push(s2s, Production::Map);
            push(s2s, Production::MapPrefix);
            push(s2s, Production::IfThenElse);
        }
        let s2v = Signature::seq_to_vec(d, k);
        push(s2v, Production::Fold);
        push(s2v, Production::WindowAvg);
        push(s2v, Production::IfThenElse);
        vec_body(&mut push, Signature::vec_to_vec(d, k), None);
        let state: Vec<usize> = (d..d + k).collect();
        vec_body(
            &mut push,
            Signature::vec_to_vec(d + k, k),
            Some(Selector::new(STATE_SELECTOR, &state)),
        );
        Grammar::new(self.task.start_signature(d, k), specs)
    }
}

/// The standard grammar with uniform rule cost [`DEFAULT_PENALTY`].
pub fn default_grammar(
    feature_dim: usize,
    label_dim: usize,
    selectors: &[(&str, Vec<usize>)],
    task: Task,
) -> Result<Grammar, DslError> {
    GrammarConfig::new(
        feature_dim,
        label_dim,
        task,
        selectors
            .iter()
            .map(|(n, i)| (n.to_string(), i.clone()))
            .collect(),
    )
    .build()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(g: &Grammar, sig: Signature) -> Vec<String> {
        g.rules_for(sig)
            .iter()
            .map(|&id| g.rule(id).name())
            .collect()
    }

    #[test]
    fn basketball_selectors_become_library_rules() {
        let offense: Vec<usize> = (0..10).collect();
        let g = default_grammar(
            22,
            6,
            &[("Offense", offense), ("Ball", vec![20, 21])],
            Task::PerFrame,
        )
        .unwrap();
        let body = names(&g, Signature::vec_to_vec(22, 6));
        assert!(body.contains(&"OffenseAffine".to_string()));
        assert!(body.contains(&"BallAffine".to_string()));
        assert_eq!(g.start(), Signature::seq_to_seq(22, 6));
    }

    #[test]
    fn minimal_grammar_has_one_library_rule() {
        let g = default_grammar(1, 1, &[("All", vec![0])], Task::PerFrame).unwrap();
        let lib: Vec<_> = g
            .rules_for(Signature::vec_to_vec(1, 1))
            .iter()
            .filter(|&&id| matches!(g.rule(id).production, Production::Affine(_)))
            .collect();
        assert_eq!(lib.len(), 1);
        assert!(!g.rules_for(g.start()).is_empty());
        assert_eq!(g.min_steps(g.start()), Some(2));
    }

    #[test]
    fn per_trajectory_start_is_sequence_to_vector() {
        let g = default_grammar(4, 3, &[("A", vec![0, 1])], Task::PerTrajectory).unwrap();
        assert_eq!(g.start(), Signature::seq_to_vec(4, 3));
        // Fold body sees the element and the accumulator.
        let fold_body = names(&g, Signature::vec_to_vec(7, 3));
        assert!(fold_body.contains(&"StateAffine".to_string()));
    }

    #[test]
    fn selector_errors() {
        assert!(default_grammar(3, 2, &[], Task::PerFrame).is_err());
        assert!(default_grammar(3, 2, &[("A", vec![3])], Task::PerFrame).is_err());
        assert!(default_grammar(3, 2, &[("A", vec![])], Task::PerFrame).is_err());
        assert!(default_grammar(3, 2, &[("State", vec![0])], Task::PerFrame).is_err());
    }

    #[test]
    fn every_rule_child_type_is_derivable() {
        let g =
            default_grammar(5, 2, &[("A", vec![0, 1]), ("B", vec![4])], Task::PerFrame).unwrap();
        for r in g.rules() {
            for child in r.children() {
                assert!(
                    g.min_steps(child).is_some(),
                    "rule {} has underivable child {child}",
                    r.name()
                );
            }
        }
    }

    #[test]
    fn cost_overrides_apply_by_name() {
        let mut cfg = GrammarConfig::new(2, 2, Task::PerFrame, vec![("A".into(), vec![0])]);
        cfg.cost_overrides.insert("Map".into(), 0.5);
        let g = cfg.build().unwrap();
        let map = g.find_rule(g.start(), &Production::Map).unwrap();
        assert_eq!(map.cost, 0.5);
        let prefix = g.find_rule(g.start(), &Production::MapPrefix).unwrap();
        assert_eq!(prefix.cost, DEFAULT_PENALTY);
        // Cheapest rule first.
        assert_ne!(
            g.rule(g.rules_for(g.start())[0]).production,
            Production::Map
        );
    }
}
