//! Vector-valued reverse-mode tape.
//!
//! Values live in one flat arena; every record owns a contiguous range and
//! refers to its inputs by [`Var`]. Inputs are always recorded before the
//! ops that consume them, so replaying the records backwards is a reverse
//! topological order. Parameters are read directly from the flat parameter
//! vector and their gradients are accumulated straight into a caller-owned
//! gradient vector of the same layout.

use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(u32);

impl Var {
    fn idx(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone)]
enum OpRec {
    Leaf,
    Param {
        src: usize,
    },
    Affine {
        x: Var,
        w: usize,
        b: usize,
        sel: Option<Arc<[usize]>>,
    },
    Add(Var, Var),
    Mul(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    Mean(Var),
    Scale(Var, f64),
    Blend {
        gate: Var,
        a: Var,
        b: Var,
    },
    Concat(Var, Var),
    WeightedSum(Box<[(Var, f64)]>),
    SoftmaxCe {
        logits: Var,
        target: usize,
        weight: f64,
    },
}

#[derive(Debug, Clone)]
struct Rec {
    op: OpRec,
    off: usize,
    len: usize,
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Default, Clone)]
pub struct Tape {
    vals: Vec<f64>,
    grads: Vec<f64>,
    recs: Vec<Rec>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    /// Drops all records but keeps the allocations.
    pub fn clear(&mut self) {
        self.vals.clear();
        self.recs.clear();
    }

    pub fn len(&self) -> usize {
        self.recs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.recs.is_empty()
    }

    pub fn value(&self, v: Var) -> &[f64] {
        let r = &self.recs[v.idx()];
        &self.vals[r.off..r.off + r.len]
    }

    pub fn dim(&self, v: Var) -> usize {
        self.recs[v.idx()].len
    }

    fn push(&mut self, op: OpRec, out: impl IntoIterator<Item = f64>) -> Var {
        let off = self.vals.len();
        self.vals.extend(out);
        let len = self.vals.len() - off;
        let id = self.recs.len();
        self.recs.push(Rec { op, off, len });
        Var(u32::try_from(id).expect("tape exceeds u32 records"))
    }

    fn range(&self, v: Var) -> (usize, usize) {
        let r = &self.recs[v.idx()];
        (r.off, r.len)
    }

    /// Constant input; receives no gradient.
    pub fn leaf(&mut self, data: &[f64]) -> Var {
        let off = self.vals.len();
        self.vals.extend_from_slice(data);
        let id = self.recs.len();
        self.recs.push(Rec {
            op: OpRec::Leaf,
            off,
            len: data.len(),
        });
        Var(id as u32)
    }

    /// Copy of `theta[src..src + len]` whose gradient flows back to the store.
    pub fn param(&mut self, theta: &[f64], src: usize, len: usize) -> Var {
        let off = self.vals.len();
        self.vals.extend_from_slice(&theta[src..src + len]);
        let id = self.recs.len();
        self.recs.push(Rec {
            op: OpRec::Param { src },
            off,
            len,
        });
        Var(id as u32)
    }

    /// `W · x[sel] + b`, with `W` stored row-major (`out × k`) at `theta[w..]`
    /// and `b` at `theta[b..]`. `sel = None` uses every input dimension.
    pub fn affine(
        &mut self,
        theta: &[f64],
        x: Var,
        w: usize,
        b: usize,
        out: usize,
        sel: Option<Arc<[usize]>>,
    ) -> Var {
        let (xo, xl) = self.range(x);
        let k = sel.as_ref().map_or(xl, |s| s.len());
        let off = self.vals.len();
        for i in 0..out {
            let row = &theta[w + i * k..w + (i + 1) * k];
            let mut acc = theta[b + i];
            match &sel {
                Some(s) => {
                    for (wj, &j) in row.iter().zip(s.iter()) {
                        acc += wj * self.vals[xo + j];
                    }
                }
                None => {
                    for (wj, xj) in row.iter().zip(&self.vals[xo..xo + xl]) {
                        acc += wj * xj;
                    }
                }
            }
            self.vals.push(acc);
        }
        let id = self.recs.len();
        self.recs.push(Rec {
            op: OpRec::Affine { x, w, b, sel },
            off,
            len: out,
        });
        Var(id as u32)
    }

    fn binary(&mut self, a: Var, b: Var, op: OpRec, f: impl Fn(f64, f64) -> f64) -> Var {
        let (ao, al) = self.range(a);
        let (bo, bl) = self.range(b);
        assert_eq!(al, bl, "elementwise op on mismatched widths");
        let out: Vec<f64> = (0..al)
            .map(|i| f(self.vals[ao + i], self.vals[bo + i]))
            .collect();
        self.push(op, out)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, OpRec::Add(a, b), |x, y| x + y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, OpRec::Mul(a, b), |x, y| x * y)
    }

    fn unary(&mut self, a: Var, op: OpRec, f: impl Fn(f64) -> f64) -> Var {
        let (ao, al) = self.range(a);
        let out: Vec<f64> = self.vals[ao..ao + al].iter().map(|&x| f(x)).collect();
        self.push(op, out)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, OpRec::Sigmoid(a), sigmoid)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, OpRec::Tanh(a), f64::tanh)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, OpRec::Scale(a, c), |x| c * x)
    }

    /// Mean over all components; a width-1 result.
    pub fn mean(&mut self, a: Var) -> Var {
        let (ao, al) = self.range(a);
        let m = self.vals[ao..ao + al].iter().sum::<f64>() / al as f64;
        self.push(OpRec::Mean(a), [m])
    }

    /// `gate · a + (1 − gate) · b` with a width-1 gate.
    pub fn blend(&mut self, gate: Var, a: Var, b: Var) -> Var {
        let s = self.value(gate)[0];
        let (ao, al) = self.range(a);
        let (bo, bl) = self.range(b);
        assert_eq!(al, bl, "blend on mismatched widths");
        let out: Vec<f64> = (0..al)
            .map(|i| s * self.vals[ao + i] + (1.0 - s) * self.vals[bo + i])
            .collect();
        self.push(OpRec::Blend { gate, a, b }, out)
    }

    pub fn concat(&mut self, a: Var, b: Var) -> Var {
        let (ao, al) = self.range(a);
        let (bo, bl) = self.range(b);
        let mut out = Vec::with_capacity(al + bl);
        out.extend_from_slice(&self.vals[ao..ao + al]);
        out.extend_from_slice(&self.vals[bo..bo + bl]);
        self.push(OpRec::Concat(a, b), out)
    }

    /// `Σ wᵢ · vᵢ` over equally wide inputs.
    pub fn weighted_sum(&mut self, terms: &[(Var, f64)]) -> Var {
        let width = self.dim(terms[0].0);
        let mut out = vec![0.0; width];
        for &(v, w) in terms {
            let (o, l) = self.range(v);
            assert_eq!(l, width, "weighted sum on mismatched widths");
            for (acc, x) in out.iter_mut().zip(&self.vals[o..o + l]) {
                *acc += w * x;
            }
        }
        self.push(OpRec::WeightedSum(terms.into()), out)
    }

    /// `weight · (−log softmax(logits)[target])`, width 1.
    pub fn softmax_ce(&mut self, logits: Var, target: usize, weight: f64) -> Var {
        let z = self.value(logits);
        assert!(target < z.len(), "target class out of range");
        let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
        let loss = weight * (lse - z[target]);
        self.push(
            OpRec::SoftmaxCe {
                logits,
                target,
                weight,
            },
            [loss],
        )
    }

    /// Back-propagates `seed · ∂out` through the tape, accumulating parameter
    /// gradients into `param_grads` (same layout as `theta`).
    pub fn backward(&mut self, out: Var, seed: f64, theta: &[f64], param_grads: &mut [f64]) {
        let n_vals = self.vals.len();
        self.grads.clear();
        self.grads.resize(n_vals, 0.0);
        let (oo, ol) = self.range(out);
        for g in &mut self.grads[oo..oo + ol] {
            *g = seed;
        }
        let vals = &self.vals;
        for rec in self.recs[..=out.idx()].iter().rev() {
            let (lo, hi) = self.grads.split_at_mut(rec.off);
            let g = &hi[..rec.len];
            if g.iter().all(|&v| v == 0.0) {
                continue;
            }
            let r = |v: Var| {
                let rr = &self.recs[v.idx()];
                (rr.off, rr.len)
            };
            match &rec.op {
                OpRec::Leaf => {}
                OpRec::Param { src } => {
                    for (pg, gi) in param_grads[*src..*src + rec.len].iter_mut().zip(g) {
                        *pg += gi;
                    }
                }
                OpRec::Affine { x, w, b, sel } => {
                    let (xo, xl) = r(*x);
                    let k = sel.as_ref().map_or(xl, |s| s.len());
                    for (i, &gi) in g.iter().enumerate() {
                        if gi == 0.0 {
                            continue;
                        }
                        param_grads[b + i] += gi;
                        let wrow = w + i * k;
                        match sel {
                            Some(s) => {
                                for (jj, &j) in s.iter().enumerate() {
                                    param_grads[wrow + jj] += gi * vals[xo + j];
                                    lo[xo + j] += gi * theta[wrow + jj];
                                }
                            }
                            None => {
                                for j in 0..xl {
                                    param_grads[wrow + j] += gi * vals[xo + j];
                                    lo[xo + j] += gi * theta[wrow + j];
                                }
                            }
                        }
                    }
                }
                OpRec::Add(a, b) => {
                    let (ao, _) = r(*a);
                    let (bo, _) = r(*b);
                    for (i, &gi) in g.iter().enumerate() {
                        lo[ao + i] += gi;
                        lo[bo + i] += gi;
                    }
                }
                OpRec::Mul(a, b) => {
                    let (ao, _) = r(*a);
                    let (bo, _) = r(*b);
                    for (i, &gi) in g.iter().enumerate() {
                        let (av, bv) = (vals[ao + i], vals[bo + i]);
                        lo[ao + i] += gi * bv;
                        lo[bo + i] += gi * av;
                    }
                }
                OpRec::Sigmoid(a) => {
                    let (ao, _) = r(*a);
                    for (i, &gi) in g.iter().enumerate() {
                        let y = vals[rec.off + i];
                        lo[ao + i] += gi * y * (1.0 - y);
                    }
                }
                OpRec::Tanh(a) => {
                    let (ao, _) = r(*a);
                    for (i, &gi) in g.iter().enumerate() {
                        let y = vals[rec.off + i];
                        lo[ao + i] += gi * (1.0 - y * y);
                    }
                }
                OpRec::Scale(a, c) => {
                    let (ao, _) = r(*a);
                    for (i, &gi) in g.iter().enumerate() {
                        lo[ao + i] += gi * c;
                    }
                }
                OpRec::Mean(a) => {
                    let (ao, al) = r(*a);
                    let share = g[0] / al as f64;
                    for gx in &mut lo[ao..ao + al] {
                        *gx += share;
                    }
                }
                OpRec::Blend { gate, a, b } => {
                    let (so, _) = r(*gate);
                    let (ao, _) = r(*a);
                    let (bo, _) = r(*b);
                    let s = vals[so];
                    let mut gs = 0.0;
                    for (i, &gi) in g.iter().enumerate() {
                        let (av, bv) = (vals[ao + i], vals[bo + i]);
                        lo[ao + i] += gi * s;
                        lo[bo + i] += gi * (1.0 - s);
                        gs += gi * (av - bv);
                    }
                    lo[so] += gs;
                }
                OpRec::Concat(a, b) => {
                    let (ao, al) = r(*a);
                    let (bo, _) = r(*b);
                    for (i, &gi) in g.iter().enumerate() {
                        if i < al {
                            lo[ao + i] += gi;
                        } else {
                            lo[bo + i - al] += gi;
                        }
                    }
                }
                OpRec::WeightedSum(terms) => {
                    for &(v, wt) in terms.iter() {
                        let (vo, _) = r(v);
                        for (i, &gi) in g.iter().enumerate() {
                            lo[vo + i] += wt * gi;
                        }
                    }
                }
                OpRec::SoftmaxCe {
                    logits,
                    target,
                    weight,
                } => {
                    let (zo, zl) = r(*logits);
                    let z = &vals[zo..zo + zl];
                    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let denom: f64 = z.iter().map(|&v| (v - max).exp()).sum();
                    for i in 0..zl {
                        let p = (z[i] - max).exp() / denom;
                        let onehot = if i == *target { 1.0 } else { 0.0 };
                        lo[zo + i] += g[0] * weight * (p - onehot);
                    }
                }
            }
        }
    }

    /// Gradient w.r.t. a tape variable after [`Tape::backward`].
    pub fn grad(&self, v: Var) -> &[f64] {
        let (o, l) = self.range(v);
        &self.grads[o..o + l]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fan_out_accumulates() {
        // y = mean(x * x + x) ⇒ dy/dx_i = (2x_i + 1)/n
        let mut t = Tape::new();
        let x = t.leaf(&[1.0, -2.0, 0.5]);
        let xx = t.mul(x, x);
        let s = t.add(xx, x);
        let y = t.mean(s);
        t.backward(y, 1.0, &[], &mut []);
        let g = t.grad(x);
        for (gi, xi) in g.iter().zip([1.0, -2.0, 0.5]) {
            assert!((gi - (2.0 * xi + 1.0) / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn affine_with_selector_routes_gradients() {
        // W (1×2) = [2, 3], b = 1, selection [2, 0]
        let theta = [2.0, 3.0, 1.0];
        let mut grads = [0.0; 3];
        let mut t = Tape::new();
        let x = t.leaf(&[5.0, 7.0, 11.0]);
        let y = t.affine(&theta, x, 0, 2, 1, Some(Arc::from(&[2usize, 0][..])));
        assert_eq!(t.value(y), &[2.0 * 11.0 + 3.0 * 5.0 + 1.0]);
        t.backward(y, 1.0, &theta, &mut grads);
        assert_eq!(grads, [11.0, 5.0, 1.0]);
        assert_eq!(t.grad(x), &[3.0, 0.0, 2.0]);
    }

    #[test]
    fn zero_logits_give_log_k() {
        let mut t = Tape::new();
        let z = t.leaf(&[0.0; 4]);
        let l = t.softmax_ce(z, 2, 1.0);
        assert!((t.value(l)[0] - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn stable_sigmoid_extremes() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(-800.0).is_finite());
        assert_eq!(sigmoid(800.0), 1.0);
    }
}
