//! Flat parameter storage for a (neurosymbolic) program.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::dsl::{Architecture, NeuralKind, Op, Production};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotKind {
    Affine,
    Const,
    FoldInit,
    Feedforward,
    Recurrent,
    Seq2Seq,
}

/// One named tensor inside a slot; `offset` is absolute in the flat vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Part {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Part {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub kind: SlotKind,
    pub parts: Vec<Part>,
}

impl Slot {
    pub fn part(&self, name: &str) -> &Part {
        self.parts
            .iter()
            .find(|p| p.name == name)
            .unwrap_or_else(|| panic!("slot has no part `{name}`"))
    }
}

/// Parameters θ (and ω for neural modules) keyed by node id, stored in one
/// flat vector with a gradient accumulator of the same shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    slots: BTreeMap<usize, Slot>,
    values: Vec<f64>,
    #[serde(skip)]
    grads: Vec<f64>,
}

/// How fresh parameters are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// Weights uniform in ±1/√fan_in, biases and constants zero.
    Default,
    /// Every entry drawn from N(0, std²).
    Gaussian(f64),
    Zeros,
}

type PartSpec = (&'static str, usize, usize, bool);

fn slot_spec(arch_node: &crate::dsl::Node) -> Option<(SlotKind, Vec<PartSpec>)> {
    let (n, m) = (arch_node.sig.input.dim(), arch_node.sig.output.dim());
    // (name, rows, cols, is_weight)
    match &arch_node.op {
        Op::Construct(Production::Affine(sel)) => Some((
            SlotKind::Affine,
            vec![("W", m, sel.len(), true), ("b", m, 1, false)],
        )),
        Op::Construct(Production::Const) => Some((SlotKind::Const, vec![("c", m, 1, false)])),
        Op::Construct(Production::Fold) => Some((SlotKind::FoldInit, vec![("c", m, 1, false)])),
        Op::Neural(spec) => {
            let u = spec.units;
            match spec.kind {
                NeuralKind::Feedforward => Some((
                    SlotKind::Feedforward,
                    vec![
                        ("W1", u, n, true),
                        ("b1", u, 1, false),
                        ("W2", m, u, true),
                        ("b2", m, 1, false),
                    ],
                )),
                NeuralKind::Recurrent | NeuralKind::Seq2Seq => {
                    let kind = if spec.kind == NeuralKind::Recurrent {
                        SlotKind::Recurrent
                    } else {
                        SlotKind::Seq2Seq
                    };
                    Some((
                        kind,
                        vec![
                            ("Wc", u, n + u, true),
                            ("bc", u, 1, false),
                            ("Wo", m, u, true),
                            ("bo", m, 1, false),
                        ],
                    ))
                }
            }
        }
        _ => None,
    }
}

impl ParamStore {
    /// Allocates and initializes one slot per parameterized node of `arch`.
    pub fn init<R: Rng + ?Sized>(arch: &Architecture, init: Init, rng: &mut R) -> Self {
        let mut slots = BTreeMap::new();
        let mut values = Vec::new();
        for (id, node) in arch.nodes().into_iter().enumerate() {
            let Some((kind, specs)) = slot_spec(node) else {
                continue;
            };
            let mut parts = Vec::with_capacity(specs.len());
            for (name, rows, cols, is_weight) in specs {
                let offset = values.len();
                let bound = 1.0 / (cols as f64).sqrt();
                for _ in 0..rows * cols {
                    let v = match init {
                        Init::Default if is_weight => {
                            Uniform::new_inclusive(-bound, bound).sample(rng)
                        }
                        Init::Default | Init::Zeros => 0.0,
                        Init::Gaussian(std) => {
                            let z: f64 = StandardNormal.sample(rng);
                            std * z
                        }
                    };
                    values.push(v);
                }
                parts.push(Part {
                    name: name.to_string(),
                    offset,
                    rows,
                    cols,
                });
            }
            slots.insert(id, Slot { kind, parts });
        }
        let grads = vec![0.0; values.len()];
        ParamStore {
            slots,
            values,
            grads,
        }
    }

    pub fn zeros(arch: &Architecture) -> Self {
        let mut rng = rand::rngs::mock::StepRng::new(0, 0);
        ParamStore::init(arch, Init::Zeros, &mut rng)
    }

    /// Checks that the slot layout is exactly the one `arch` requires.
    pub fn matches(&self, arch: &Architecture) -> bool {
        let fresh = ParamStore::zeros(arch);
        fresh.slots == self.slots && fresh.values.len() == self.values.len()
    }

    pub fn slots(&self) -> &BTreeMap<usize, Slot> {
        &self.slots
    }

    pub fn slot(&self, node_id: usize) -> Option<&Slot> {
        self.slots.get(&node_id)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn grads(&self) -> &[f64] {
        &self.grads
    }

    pub fn zero_grads(&mut self) {
        self.grads.clear();
        self.grads.resize(self.values.len(), 0.0);
    }

    /// Values and gradient buffer borrowed together.
    pub fn split_mut(&mut self) -> (&[f64], &mut [f64]) {
        if self.grads.len() != self.values.len() {
            self.grads.resize(self.values.len(), 0.0);
        }
        (&self.values, &mut self.grads)
    }

    pub fn part_values(&self, node_id: usize, name: &str) -> Option<&[f64]> {
        let p = self
            .slots
            .get(&node_id)?
            .parts
            .iter()
            .find(|p| p.name == name)?;
        Some(&self.values[p.offset..p.offset + p.len()])
    }

    pub fn set_part(&mut self, node_id: usize, name: &str, data: &[f64]) -> bool {
        let Some(p) = self
            .slots
            .get(&node_id)
            .and_then(|s| s.parts.iter().find(|p| p.name == name))
        else {
            return false;
        };
        if p.len() != data.len() {
            return false;
        }
        let off = p.offset;
        self.values[off..off + data.len()].copy_from_slice(data);
        true
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
