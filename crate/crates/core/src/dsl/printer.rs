//! Program text in the `map (fun x_t. ...) x` style.

use std::fmt::Write as _;

use crate::autodiff::params::ParamStore;

use super::arch::{Architecture, Node, Op};
use super::grammar::Production;

struct Printer<'a> {
    params: Option<&'a ParamStore>,
    out: String,
    id: usize,
}

fn fmt_vals(vals: &[f64]) -> String {
    vals.iter()
        .map(|v| format!("{v:.4}"))
        .collect::<Vec<_>>()
        .join(", ")
}

impl Printer<'_> {
    fn part(&self, id: usize, name: &str) -> Option<&[f64]> {
        self.params?.part_values(id, name)
    }

    /// Prints `node`, whose input is bound to the variable `var`.
    fn node(&mut self, node: &Node, var: &str) {
        let me = self.id;
        self.id += 1;
        match &node.op {
            Op::Hole => {
                let _ = write!(self.out, "Hole<{}>", node.sig);
            }
            Op::Neural(spec) => {
                let _ = write!(
                    self.out,
                    "Neural<{}{}: {}>",
                    spec.kind.tag(),
                    spec.units,
                    node.sig
                );
            }
            Op::Construct(p) => match p {
                Production::Input => self.out.push_str(var),
                Production::Const => {
                    self.out.push('c');
                    if let Some(c) = self.part(me, "c") {
                        let _ = write!(self.out, "[{}]", fmt_vals(c));
                    }
                }
                Production::Affine(sel) => {
                    self.out.push_str(&sel.function_name());
                    if let (Some(w), Some(b)) = (self.part(me, "W"), self.part(me, "b")) {
                        let k = sel.len();
                        let rows: Vec<String> =
                            w.chunks(k).map(|r| format!("[{}]", fmt_vals(r))).collect();
                        let _ = write!(self.out, "[{}; {}]", rows.join(", "), fmt_vals(b));
                    }
                    let _ = write!(self.out, "({var})");
                }
                Production::Add | Production::Mul => {
                    self.out.push_str(if *p == Production::Add {
                        "add("
                    } else {
                        "multiply("
                    });
                    self.node(&node.children[0], var);
                    self.out.push_str(", ");
                    self.node(&node.children[1], var);
                    self.out.push(')');
                }
                Production::IfThenElse => {
                    self.out.push_str("if ");
                    self.node(&node.children[0], var);
                    self.out.push_str(" then ");
                    self.node(&node.children[1], var);
                    self.out.push_str(" else ");
                    self.node(&node.children[2], var);
                }
                Production::Map => {
                    self.out.push_str("map (fun x_t. ");
                    self.node(&node.children[0], "x_t");
                    let _ = write!(self.out, ") {var}");
                }
                Production::MapPrefix => {
                    self.out.push_str("mapprefix (fun xs. ");
                    self.node(&node.children[0], "xs");
                    let _ = write!(self.out, ") {var}");
                }
                Production::Fold => {
                    self.out.push_str("fold (fun x_t. ");
                    self.node(&node.children[0], "x_t");
                    self.out.push_str(") c");
                    if let Some(c) = self.part(me, "c") {
                        let _ = write!(self.out, "[{}]", fmt_vals(c));
                    }
                    let _ = write!(self.out, " {var}");
                }
                Production::WindowAvg => {
                    self.out.push_str("SlidingWindowAvg (fun x_t. ");
                    self.node(&node.children[0], "x_t");
                    let _ = write!(self.out, ") {var}");
                }
            },
        }
    }
}

/// Renders `arch`, with parameter values to four decimals when `params` is
/// given. The output is accepted by [`super::parse_program`].
pub fn pretty_print(arch: &Architecture, params: Option<&ParamStore>) -> String {
    let mut p = Printer {
        params: params.filter(|p| p.matches(arch)),
        out: String::new(),
        id: 0,
    };
    p.node(arch.root(), "x");
    p.out
}
