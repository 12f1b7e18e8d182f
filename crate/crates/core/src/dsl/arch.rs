//! Program architectures: typed derivation trees with holes.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::grammar::{Production, Rule, RuleId};
use super::types::{SemType, Signature};
use super::DslError;

/// Kind of a neural module standing in for a hole.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NeuralKind {
    /// Vector to vector: one tanh hidden layer.
    Feedforward,
    /// Sequence to vector: tanh recurrence, affine head on the last state.
    Recurrent,
    /// Sequence to sequence: tanh recurrence, affine head on every state.
    Seq2Seq,
}

impl NeuralKind {
    /// The unique module kind that is type-correct for `sig`.
    pub fn for_signature(sig: Signature) -> Option<NeuralKind> {
        match (sig.input, sig.output) {
            (SemType::Vector(_), SemType::Vector(_)) => Some(NeuralKind::Feedforward),
            (SemType::Sequence(_), SemType::Vector(_)) => Some(NeuralKind::Recurrent),
            (SemType::Sequence(_), SemType::Sequence(_)) => Some(NeuralKind::Seq2Seq),
            (SemType::Vector(_), SemType::Sequence(_)) => None,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            NeuralKind::Feedforward => "ff",
            NeuralKind::Recurrent => "rnn",
            NeuralKind::Seq2Seq => "seq",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "ff" => Some(NeuralKind::Feedforward),
            "rnn" => Some(NeuralKind::Recurrent),
            "seq" => Some(NeuralKind::Seq2Seq),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NeuralSpec {
    pub kind: NeuralKind,
    pub units: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Op {
    Hole,
    Construct(Production),
    Neural(NeuralSpec),
}

/// The grammar rule that produced a node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleRef {
    pub id: RuleId,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub sig: Signature,
    pub op: Op,
    pub children: Vec<Node>,
    pub rule: Option<RuleRef>,
}

impl Node {
    pub fn hole(sig: Signature) -> Self {
        Node {
            sig,
            op: Op::Hole,
            children: Vec::new(),
            rule: None,
        }
    }

    /// Rewrites a hole with `rule`; child slots become fresh holes.
    pub fn from_rule(rule: &Rule) -> Self {
        Node {
            sig: rule.lhs,
            op: Op::Construct(rule.production.clone()),
            children: rule.children().into_iter().map(Node::hole).collect(),
            rule: Some(RuleRef {
                id: rule.id,
                cost: rule.cost,
            }),
        }
    }

    pub fn neural(sig: Signature, units: usize) -> Option<Self> {
        let kind = NeuralKind::for_signature(sig)?;
        Some(Node {
            sig,
            op: Op::Neural(NeuralSpec { kind, units }),
            children: Vec::new(),
            rule: None,
        })
    }

    pub fn is_hole(&self) -> bool {
        matches!(self.op, Op::Hole)
    }

    fn height(&self) -> usize {
        1 + self.children.iter().map(Node::height).max().unwrap_or(0)
    }

    fn size(&self) -> usize {
        1 + self.children.iter().map(Node::size).sum::<usize>()
    }

    fn preorder<'a>(&'a self, out: &mut Vec<&'a Node>) {
        out.push(self);
        for c in &self.children {
            c.preorder(out);
        }
    }

    fn write_canonical(&self, out: &mut String) {
        match &self.op {
            Op::Hole => {
                let _ = write!(out, "?{}", self.sig);
            }
            Op::Neural(spec) => {
                let _ = write!(out, "N{}{}:{}", spec.kind.tag(), spec.units, self.sig);
            }
            Op::Construct(p) => {
                let _ = write!(out, "{}:{}", p.name(), self.sig);
                if let Production::Affine(sel) = p {
                    let _ = write!(out, "{:?}", sel.indices);
                }
            }
        }
        if !self.children.is_empty() {
            out.push('(');
            for (i, c) in self.children.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                c.write_canonical(out);
            }
            out.push(')');
        }
    }

    fn typecheck(&self, path: usize) -> Result<(), DslError> {
        if !self.sig.is_well_formed() {
            return Err(DslError::Type(format!(
                "node {path}: malformed signature {}",
                self.sig
            )));
        }
        match &self.op {
            Op::Hole => {
                if !self.children.is_empty() {
                    return Err(DslError::Type(format!("node {path}: hole with children")));
                }
            }
            Op::Neural(spec) => {
                if NeuralKind::for_signature(self.sig) != Some(spec.kind) || spec.units == 0 {
                    return Err(DslError::Type(format!(
                        "node {path}: neural module {:?} does not fit {}",
                        spec.kind, self.sig
                    )));
                }
            }
            Op::Construct(p) => {
                let want = p.child_signatures(self.sig).ok_or_else(|| {
                    DslError::Type(format!(
                        "node {path}: {} does not type-check at {}",
                        p.name(),
                        self.sig
                    ))
                })?;
                let got: Vec<Signature> = self.children.iter().map(|c| c.sig).collect();
                if want != got {
                    return Err(DslError::Type(format!(
                        "node {path}: {} expects children {want:?}, found {got:?}",
                        p.name()
                    )));
                }
            }
        }
        let mut id = path + 1;
        for c in &self.children {
            c.typecheck(id)?;
            id += c.size();
        }
        Ok(())
    }
}

/// A (possibly partial) program architecture. Node ids are pre-order
/// positions; because derivations always rewrite the leftmost hole, the
/// pre-order sequence of rules is also the derivation order.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    root: Node,
}

impl Architecture {
    /// The empty architecture: a single hole of the start type.
    pub fn empty(start: Signature) -> Self {
        Architecture {
            root: Node::hole(start),
        }
    }

    pub fn from_root(root: Node) -> Result<Self, DslError> {
        let arch = Architecture { root };
        arch.typecheck()?;
        Ok(arch)
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn signature(&self) -> Signature {
        self.root.sig
    }

    pub fn nodes(&self) -> Vec<&Node> {
        let mut out = Vec::with_capacity(self.size());
        self.root.preorder(&mut out);
        out
    }

    pub fn node(&self, id: usize) -> Option<&Node> {
        self.nodes().get(id).copied()
    }

    pub fn size(&self) -> usize {
        self.root.size()
    }

    /// Tree height: `map (fun x. Affine(x))` has depth 2.
    pub fn depth(&self) -> usize {
        self.root.height()
    }

    /// Ids and types of all holes, leftmost first.
    pub fn holes(&self) -> Vec<(usize, Signature)> {
        self.nodes()
            .iter()
            .enumerate()
            .filter(|(_, n)| n.is_hole())
            .map(|(i, n)| (i, n.sig))
            .collect()
    }

    pub fn leftmost_hole(&self) -> Option<(usize, Signature)> {
        self.nodes()
            .iter()
            .enumerate()
            .find(|(_, n)| n.is_hole())
            .map(|(i, n)| (i, n.sig))
    }

    pub fn is_complete(&self) -> bool {
        self.leftmost_hole().is_none()
    }

    /// Complete and free of neural modules.
    pub fn is_symbolic(&self) -> bool {
        self.nodes()
            .iter()
            .all(|n| matches!(n.op, Op::Construct(_)))
    }

    pub fn neural_count(&self) -> usize {
        self.nodes()
            .iter()
            .filter(|n| matches!(n.op, Op::Neural(_)))
            .count()
    }

    /// The multiset of rules used, in derivation order.
    pub fn rules_used(&self) -> Vec<RuleRef> {
        self.nodes().iter().filter_map(|n| n.rule).collect()
    }

    /// Sum of rule costs, accumulated in derivation order starting at 0.
    pub fn structural_cost(&self) -> f64 {
        self.rules_used().iter().fold(0.0, |acc, r| acc + r.cost)
    }

    /// Replaces hole `hole_id` by `rule`'s template.
    pub fn expand(&self, hole_id: usize, rule: &Rule) -> Result<Architecture, DslError> {
        let node = self.node(hole_id).ok_or(DslError::UnknownHole(hole_id))?;
        if !node.is_hole() {
            return Err(DslError::UnknownHole(hole_id));
        }
        if node.sig != rule.lhs {
            return Err(DslError::Type(format!(
                "rule {} rewrites {} but hole {hole_id} has type {}",
                rule.name(),
                rule.lhs,
                node.sig
            )));
        }
        Ok(self.replace(hole_id, Node::from_rule(rule)))
    }

    /// Copy of `self` with the subtree at `id` replaced. Panics on a bad id.
    pub fn replace(&self, id: usize, subtree: Node) -> Architecture {
        fn go(node: &Node, target: usize, next: &mut usize, sub: &mut Option<Node>) -> Node {
            let me = *next;
            *next += 1;
            if me == target {
                *next += node.size() - 1;
                return sub.take().expect("subtree inserted once");
            }
            Node {
                sig: node.sig,
                op: node.op.clone(),
                children: node
                    .children
                    .iter()
                    .map(|c| go(c, target, next, sub))
                    .collect(),
                rule: node.rule,
            }
        }
        assert!(id < self.size(), "node id {id} out of range");
        let mut next = 0;
        let mut sub = Some(subtree);
        Architecture {
            root: go(&self.root, id, &mut next, &mut sub),
        }
    }

    /// Applies `f` to every hole, leftmost first, producing a new tree.
    pub fn map_holes(&self, f: &mut dyn FnMut(Signature) -> Node) -> Architecture {
        fn go(node: &Node, f: &mut dyn FnMut(Signature) -> Node) -> Node {
            if node.is_hole() {
                return f(node.sig);
            }
            Node {
                sig: node.sig,
                op: node.op.clone(),
                children: node.children.iter().map(|c| go(c, f)).collect(),
                rule: node.rule,
            }
        }
        Architecture {
            root: go(&self.root, f),
        }
    }

    pub fn typecheck(&self) -> Result<(), DslError> {
        self.root.typecheck(0)
    }

    pub fn canonical(&self) -> String {
        let mut s = String::new();
        self.root.write_canonical(&mut s);
        s
    }

    /// Stable 64-bit identifier of the architecture.
    pub fn structural_hash(&self) -> u64 {
        let digest = Sha256::digest(self.canonical().as_bytes());
        let mut bytes = [0u8; 8];
        bytes.copy_from_slice(&digest[..8]);
        u64::from_le_bytes(bytes)
    }
}
