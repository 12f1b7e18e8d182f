//! Differentiable semantics of complete (possibly neurosymbolic) programs.
//!
//! A program is first compiled against its [`ParamStore`] into a tree that
//! carries parameter offsets, then evaluated on a [`Tape`] so the same code
//! path serves inference and gradient computation.

use std::sync::Arc;

use crate::autodiff::params::ParamStore;
use crate::autodiff::tape::{sigmoid, Tape, Var};

use super::arch::{Architecture, NeuralKind, Node, Op};
use super::grammar::Production;
use super::types::{SemType, Signature};
use super::DslError;

/// Frames averaged by the sliding-window library function.
pub const WINDOW: usize = 10;

/// `σ(β·c)·a + (1 − σ(β·c))·b`
pub fn smooth_if(c: f64, a: f64, b: f64, beta: f64) -> f64 {
    let s = sigmoid(beta * c);
    s * a + (1.0 - s) * b
}

#[derive(Debug, Clone)]
enum CNode {
    Input,
    Const {
        off: usize,
        len: usize,
    },
    Affine {
        w: usize,
        b: usize,
        out: usize,
        sel: Arc<[usize]>,
    },
    Add(Box<CNode>, Box<CNode>),
    Mul(Box<CNode>, Box<CNode>),
    Ite(Box<CNode>, Box<CNode>, Box<CNode>),
    Map(Box<CNode>),
    MapPrefix(Box<CNode>),
    Fold {
        body: Box<CNode>,
        init: usize,
        dim: usize,
    },
    Window(Box<CNode>),
    Feedforward {
        w1: usize,
        b1: usize,
        w2: usize,
        b2: usize,
        units: usize,
        out: usize,
    },
    Recurrent {
        wc: usize,
        bc: usize,
        wo: usize,
        bo: usize,
        units: usize,
        out: usize,
    },
}

/// Output of a program on one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub enum Output {
    Vector(Vec<f64>),
    Sequence(Vec<Vec<f64>>),
}

/// Tape handles for a program output.
#[derive(Debug, Clone)]
pub enum OutVars {
    Vector(Var),
    Sequence(Vec<Var>),
}

/// A complete program bound to a parameter layout.
#[derive(Debug, Clone)]
pub struct Compiled {
    root: CNode,
    sig: Signature,
    beta: f64,
}

fn compile_node(node: &Node, id: &mut usize, params: &ParamStore) -> Result<CNode, DslError> {
    let me = *id;
    *id += 1;
    let part = |name: &str| -> Result<usize, DslError> {
        params
            .slot(me)
            .and_then(|s| s.parts.iter().find(|p| p.name == name))
            .map(|p| p.offset)
            .ok_or_else(|| DslError::Params(format!("node {me} has no parameter `{name}`")))
    };
    let mut kids = Vec::with_capacity(node.children.len());
    for c in &node.children {
        kids.push(Box::new(compile_node(c, id, params)?));
    }
    let mut kids = kids.into_iter();
    let mut next = || kids.next().expect("arity checked by typecheck");
    let out = node.sig.output.dim();
    Ok(match &node.op {
        Op::Hole => return Err(DslError::Incomplete),
        Op::Construct(p) => match p {
            Production::Input => CNode::Input,
            Production::Const => CNode::Const {
                off: part("c")?,
                len: out,
            },
            Production::Affine(sel) => CNode::Affine {
                w: part("W")?,
                b: part("b")?,
                out,
                sel: sel.indices.clone(),
            },
            Production::Add => CNode::Add(next(), next()),
            Production::Mul => CNode::Mul(next(), next()),
            Production::IfThenElse => CNode::Ite(next(), next(), next()),
            Production::Map => CNode::Map(next()),
            Production::MapPrefix => CNode::MapPrefix(next()),
            Production::Fold => CNode::Fold {
                body: next(),
                init: part("c")?,
                dim: out,
            },
            Production::WindowAvg => CNode::Window(next()),
        },
        Op::Neural(spec) => match spec.kind {
            NeuralKind::Feedforward => CNode::Feedforward {
                w1: part("W1")?,
                b1: part("b1")?,
                w2: part("W2")?,
                b2: part("b2")?,
                units: spec.units,
                out,
            },
            NeuralKind::Recurrent | NeuralKind::Seq2Seq => CNode::Recurrent {
                wc: part("Wc")?,
                bc: part("bc")?,
                wo: part("Wo")?,
                bo: part("bo")?,
                units: spec.units,
                out,
            },
        },
    })
}

impl Compiled {
    pub fn new(arch: &Architecture, params: &ParamStore, beta: f64) -> Result<Self, DslError> {
        if !arch.is_complete() {
            return Err(DslError::Incomplete);
        }
        arch.typecheck()?;
        if !params.matches(arch) {
            return Err(DslError::Params(
                "parameter layout does not match the architecture".into(),
            ));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(DslError::Params(format!(
                "temperature β must be positive, got {beta}"
            )));
        }
        let mut id = 0;
        let root = compile_node(arch.root(), &mut id, params)?;
        Ok(Compiled {
            root,
            sig: arch.signature(),
            beta,
        })
    }

    pub fn signature(&self) -> Signature {
        self.sig
    }

    /// Records the program on `tape` for a trajectory stored row-major in
    /// `features` (`len` frames of `dim` values).
    pub fn forward(&self, tape: &mut Tape, theta: &[f64], features: &[f64], dim: usize) -> OutVars {
        assert_eq!(dim, self.sig.input.dim(), "input width mismatch");
        assert!(
            !features.is_empty() && features.len().is_multiple_of(dim),
            "ragged trajectory"
        );
        let xs: Vec<Var> = features.chunks_exact(dim).map(|f| tape.leaf(f)).collect();
        let ev = Evaluator {
            tape,
            theta,
            beta: self.beta,
        };
        ev.run(&self.root, self.sig, &xs)
    }
}

struct Evaluator<'a> {
    tape: &'a mut Tape,
    theta: &'a [f64],
    beta: f64,
}

impl Evaluator<'_> {
    fn run(mut self, root: &CNode, sig: Signature, xs: &[Var]) -> OutVars {
        match sig.output {
            SemType::Sequence(_) => OutVars::Sequence(self.seq2seq(root, xs)),
            SemType::Vector(_) => OutVars::Vector(self.last(root, xs)),
        }
    }

    fn gate(&mut self, cond: Var) -> Var {
        let m = self.tape.mean(cond);
        let z = self.tape.scale(m, self.beta);
        self.tape.sigmoid(z)
    }

    fn vec(&mut self, node: &CNode, x: Var) -> Var {
        match node {
            CNode::Input => x,
            CNode::Const { off, len } => self.tape.param(self.theta, *off, *len),
            CNode::Affine { w, b, out, sel } => {
                self.tape
                    .affine(self.theta, x, *w, *b, *out, Some(sel.clone()))
            }
            CNode::Add(a, b) => {
                let (a, b) = (self.vec(a, x), self.vec(b, x));
                self.tape.add(a, b)
            }
            CNode::Mul(a, b) => {
                let (a, b) = (self.vec(a, x), self.vec(b, x));
                self.tape.mul(a, b)
            }
            CNode::Ite(c, a, b) => {
                let c = self.vec(c, x);
                let s = self.gate(c);
                let (a, b) = (self.vec(a, x), self.vec(b, x));
                self.tape.blend(s, a, b)
            }
            CNode::Feedforward {
                w1,
                b1,
                w2,
                b2,
                units,
                out,
            } => {
                let pre = self.tape.affine(self.theta, x, *w1, *b1, *units, None);
                let h = self.tape.tanh(pre);
                self.tape.affine(self.theta, h, *w2, *b2, *out, None)
            }
            _ => unreachable!("sequence construct in vector position"),
        }
    }

    fn seq2seq(&mut self, node: &CNode, xs: &[Var]) -> Vec<Var> {
        match node {
            CNode::Map(body) => xs.iter().map(|&x| self.vec(body, x)).collect(),
            CNode::MapPrefix(body) => self.prefixes(body, xs),
            CNode::Add(a, b) => {
                let (a, b) = (self.seq2seq(a, xs), self.seq2seq(b, xs));
                a.into_iter()
                    .zip(b)
                    .map(|(a, b)| self.tape.add(a, b))
                    .collect()
            }
            CNode::Mul(a, b) => {
                let (a, b) = (self.seq2seq(a, xs), self.seq2seq(b, xs));
                a.into_iter()
                    .zip(b)
                    .map(|(a, b)| self.tape.mul(a, b))
                    .collect()
            }
            CNode::Ite(c, a, b) => {
                let c = self.seq2seq(c, xs);
                let gates: Vec<Var> = c.into_iter().map(|c| self.gate(c)).collect();
                let (a, b) = (self.seq2seq(a, xs), self.seq2seq(b, xs));
                gates
                    .into_iter()
                    .zip(a.into_iter().zip(b))
                    .map(|(s, (a, b))| self.tape.blend(s, a, b))
                    .collect()
            }
            CNode::Recurrent { .. } => self.recurrent(node, xs),
            _ => unreachable!("vector construct in sequence position"),
        }
    }

    /// Outputs of a sequence-to-vector function on every prefix of `xs`.
    /// Each construct here is causal, so prefix `i` is computed exactly as
    /// if the function were applied to `xs[..=i]` alone.
    fn prefixes(&mut self, node: &CNode, xs: &[Var]) -> Vec<Var> {
        match node {
            CNode::Fold { body, init, dim } => {
                let mut acc = self.tape.param(self.theta, *init, *dim);
                let mut out = Vec::with_capacity(xs.len());
                for &x in xs {
                    let inp = self.tape.concat(x, acc);
                    acc = self.vec(body, inp);
                    out.push(acc);
                }
                out
            }
            CNode::Window(body) => {
                let gs: Vec<Var> = xs.iter().map(|&x| self.vec(body, x)).collect();
                (0..gs.len()).map(|i| self.window_at(&gs, i)).collect()
            }
            CNode::Add(a, b) => {
                let (a, b) = (self.prefixes(a, xs), self.prefixes(b, xs));
                a.into_iter()
                    .zip(b)
                    .map(|(a, b)| self.tape.add(a, b))
                    .collect()
            }
            CNode::Mul(a, b) => {
                let (a, b) = (self.prefixes(a, xs), self.prefixes(b, xs));
                a.into_iter()
                    .zip(b)
                    .map(|(a, b)| self.tape.mul(a, b))
                    .collect()
            }
            CNode::Ite(c, a, b) => {
                let c = self.prefixes(c, xs);
                let gates: Vec<Var> = c.into_iter().map(|c| self.gate(c)).collect();
                let (a, b) = (self.prefixes(a, xs), self.prefixes(b, xs));
                gates
                    .into_iter()
                    .zip(a.into_iter().zip(b))
                    .map(|(s, (a, b))| self.tape.blend(s, a, b))
                    .collect()
            }
            CNode::Recurrent { .. } => self.recurrent(node, xs),
            _ => unreachable!("construct is not sequence-to-vector"),
        }
    }

    /// Sequence-to-vector output on the whole of `xs`.
    fn last(&mut self, node: &CNode, xs: &[Var]) -> Var {
        match node {
            CNode::Window(body) => {
                let start = xs.len().saturating_sub(WINDOW);
                let mut gs = vec![self.vec(body, xs[0])];
                for &x in &xs[start.max(1)..] {
                    gs.push(self.vec(body, x));
                }
                // gs[0] is frame 0; the rest are frames max(start, 1)..
                let mut terms = Vec::with_capacity(gs.len());
                let pad = WINDOW.saturating_sub(xs.len());
                let first_weight = (pad + usize::from(start == 0)) as f64 / WINDOW as f64;
                if first_weight > 0.0 {
                    terms.push((gs[0], first_weight));
                }
                for &g in &gs[1..] {
                    terms.push((g, 1.0 / WINDOW as f64));
                }
                self.tape.weighted_sum(&terms)
            }
            CNode::Add(a, b) => {
                let (a, b) = (self.last(a, xs), self.last(b, xs));
                self.tape.add(a, b)
            }
            CNode::Mul(a, b) => {
                let (a, b) = (self.last(a, xs), self.last(b, xs));
                self.tape.mul(a, b)
            }
            CNode::Ite(c, a, b) => {
                let c = self.last(c, xs);
                let s = self.gate(c);
                let (a, b) = (self.last(a, xs), self.last(b, xs));
                self.tape.blend(s, a, b)
            }
            _ => *self
                .prefixes(node, xs)
                .last()
                .expect("trajectories are nonempty"),
        }
    }

    /// Mean of the window ending at frame `i`, padding with frame 0.
    fn window_at(&mut self, gs: &[Var], i: usize) -> Var {
        let start = (i + 1).saturating_sub(WINDOW);
        let pad = WINDOW.saturating_sub(i + 1);
        let w = 1.0 / WINDOW as f64;
        let mut terms = Vec::with_capacity(WINDOW);
        for (j, &g) in gs.iter().enumerate().take(i + 1).skip(start) {
            let weight = if j == 0 { w * (1 + pad) as f64 } else { w };
            terms.push((g, weight));
        }
        self.tape.weighted_sum(&terms)
    }

    /// Per-step head outputs of a tanh recurrence.
    fn recurrent(&mut self, node: &CNode, xs: &[Var]) -> Vec<Var> {
        let CNode::Recurrent {
            wc,
            bc,
            wo,
            bo,
            units,
            out,
        } = node
        else {
            unreachable!()
        };
        let mut h = self.tape.leaf(&vec![0.0; *units]);
        let mut outs = Vec::with_capacity(xs.len());
        for &x in xs {
            let inp = self.tape.concat(x, h);
            let pre = self.tape.affine(self.theta, inp, *wc, *bc, *units, None);
            h = self.tape.tanh(pre);
            outs.push(self.tape.affine(self.theta, h, *wo, *bo, *out, None));
        }
        outs
    }
}

/// Evaluates a complete program on one trajectory (one row per frame).
pub fn evaluate(
    arch: &Architecture,
    params: &ParamStore,
    x: &[Vec<f64>],
    beta: f64,
) -> Result<Output, DslError> {
    if !params.all_finite() {
        return Err(DslError::NonFinite("parameters".into()));
    }
    let dim = arch.signature().input.dim();
    if x.is_empty() {
        return Err(DslError::Input("empty trajectory".into()));
    }
    if let Some(bad) = x.iter().position(|f| f.len() != dim) {
        return Err(DslError::Input(format!(
            "frame {bad} has width {} but the program expects {dim}",
            x[bad].len()
        )));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(DslError::NonFinite("input".into()));
    }
    let prog = Compiled::new(arch, params, beta)?;
    let flat: Vec<f64> = x.iter().flatten().copied().collect();
    let mut tape = Tape::new();
    let out = match prog.forward(&mut tape, params.values(), &flat, dim) {
        OutVars::Vector(v) => Output::Vector(tape.value(v).to_vec()),
        OutVars::Sequence(vs) => {
            Output::Sequence(vs.iter().map(|&v| tape.value(v).to_vec()).collect())
        }
    };
    let finite = match &out {
        Output::Vector(v) => v.iter().all(|x| x.is_finite()),
        Output::Sequence(rows) => rows.iter().flatten().all(|x| x.is_finite()),
    };
    if !finite {
        return Err(DslError::NonFinite("output".into()));
    }
    Ok(out)
}
