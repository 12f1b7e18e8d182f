//! Type-directed parser for the text produced by [`super::pretty_print`].

use crate::autodiff::params::ParamStore;

use super::arch::{Architecture, NeuralKind, NeuralSpec, Node, Op};
use super::grammar::{Grammar, Production};
use super::types::{SemType, Signature};
use super::DslError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Sym(char),
    Arrow,
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, DslError> {
    let bytes: Vec<(usize, char)> = src.char_indices().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let (pos, c) = bytes[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '→' {
            toks.push((pos, Tok::Arrow));
            i += 1;
        } else if c == '-' && bytes.get(i + 1).map(|b| b.1) == Some('>') {
            toks.push((pos, Tok::Arrow));
            i += 2;
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].1.is_ascii_alphanumeric() || bytes[i].1 == '_') {
                i += 1;
            }
            let s: String = bytes[start..i].iter().map(|b| b.1).collect();
            toks.push((pos, Tok::Ident(s)));
        } else if c.is_ascii_digit() || c == '-' || c == '+' {
            let start = i;
            i += 1;
            while i < bytes.len() {
                let d = bytes[i].1;
                let exp_sign = (d == '-' || d == '+') && matches!(bytes[i - 1].1, 'e' | 'E');
                if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                    i += 1;
                } else {
                    break;
                }
            }
            let s: String = bytes[start..i].iter().map(|b| b.1).collect();
            let v = s.parse::<f64>().map_err(|_| DslError::Parse {
                pos,
                msg: format!("bad number `{s}`"),
            })?;
            toks.push((pos, Tok::Num(v)));
        } else if "()[]<>,;.:".contains(c) {
            toks.push((pos, Tok::Sym(c)));
            i += 1;
        } else {
            return Err(DslError::Parse {
                pos,
                msg: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(toks)
}

/// Parameter values captured while parsing, keyed by pre-order node id.
type Captured = Vec<(usize, &'static str, Vec<f64>)>;

struct Parser<'g> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
    grammar: &'g Grammar,
    next_id: usize,
    captured: Captured,
    slots_seen: usize,
}

impl Parser<'_> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, DslError> {
        let pos = self.toks.get(self.pos).map_or(self.end, |t| t.0);
        Err(DslError::Parse {
            pos,
            msg: msg.into(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.1.clone());
        self.pos += 1;
        t
    }

    fn sym(&mut self, c: char) -> Result<(), DslError> {
        match self.peek() {
            Some(Tok::Sym(s)) if *s == c => {
                self.pos += 1;
                Ok(())
            }
            _ => self.err(format!("expected `{c}`")),
        }
    }

    fn eat_sym(&mut self, c: char) -> bool {
        if matches!(self.peek(), Some(Tok::Sym(s)) if *s == c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<String, DslError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.err("expected an identifier"),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), DslError> {
        match self.peek() {
            Some(Tok::Ident(s)) if s == kw => {
                self.pos += 1;
                Ok(())
            }
            _ => self.err(format!("expected `{kw}`")),
        }
    }

    fn num(&mut self) -> Result<f64, DslError> {
        match self.bump() {
            Some(Tok::Num(v)) => Ok(v),
            _ => {
                self.pos -= 1;
                self.err("expected a number")
            }
        }
    }

    fn dim(&mut self) -> Result<usize, DslError> {
        let v = self.num()?;
        if v < 1.0 || v.fract() != 0.0 {
            return self.err("dimensions are positive integers");
        }
        Ok(v as usize)
    }

    fn sem_type(&mut self) -> Result<SemType, DslError> {
        let kind = self.ident()?;
        self.sym('(')?;
        let d = self.dim()?;
        self.sym(')')?;
        match kind.as_str() {
            "Vec" => Ok(SemType::Vector(d)),
            "Seq" => Ok(SemType::Sequence(d)),
            _ => self.err("expected `Vec` or `Seq`"),
        }
    }

    fn signature(&mut self) -> Result<Signature, DslError> {
        let input = self.sem_type()?;
        if self.bump() != Some(Tok::Arrow) {
            self.pos -= 1;
            return self.err("expected `→`");
        }
        let output = self.sem_type()?;
        Ok(Signature::new(input, output))
    }

    /// Comma-separated numbers up to (not including) `close`.
    fn num_list(&mut self, close: char) -> Result<Vec<f64>, DslError> {
        let mut out = Vec::new();
        if matches!(self.peek(), Some(Tok::Sym(c)) if *c == close) {
            return Ok(out);
        }
        loop {
            out.push(self.num()?);
            if !self.eat_sym(',') {
                return Ok(out);
            }
        }
    }

    fn opt_vector(&mut self, id: usize, name: &'static str) -> Result<(), DslError> {
        if self.eat_sym('[') {
            let v = self.num_list(']')?;
            self.sym(']')?;
            self.captured.push((id, name, v));
        }
        Ok(())
    }

    fn rule_node(&self, sig: Signature, p: &Production) -> Result<Node, DslError> {
        match self.grammar.find_rule(sig, p) {
            Some(r) => Ok(Node::from_rule(r)),
            None => self.err(format!("the grammar has no `{}` rule for {sig}", p.name())),
        }
    }

    fn expect_var(&mut self) -> Result<(), DslError> {
        self.ident().map(|_| ())
    }

    fn expr(&mut self, sig: Signature) -> Result<Node, DslError> {
        let id = self.next_id;
        self.next_id += 1;
        let word = match self.peek() {
            Some(Tok::Ident(s)) => s.clone(),
            _ => return self.err("expected an expression"),
        };
        self.pos += 1;
        let mut node = match word.as_str() {
            "Hole" => {
                self.sym('<')?;
                let s = self.signature()?;
                self.sym('>')?;
                if s != sig {
                    return self.err(format!("hole typed {s} where {sig} is expected"));
                }
                return Ok(Node::hole(sig));
            }
            "Neural" => {
                self.sym('<')?;
                let tag = self.ident()?;
                self.sym(':')?;
                let s = self.signature()?;
                self.sym('>')?;
                let split = tag.find(|c: char| c.is_ascii_digit()).unwrap_or(tag.len());
                let kind = NeuralKind::from_tag(&tag[..split]);
                let units = tag[split..].parse::<usize>().ok().filter(|&u| u > 0);
                let (Some(kind), Some(units)) = (kind, units) else {
                    return self.err(format!("bad neural module tag `{tag}`"));
                };
                if s != sig || NeuralKind::for_signature(sig) != Some(kind) {
                    return self.err(format!("neural module {tag}: {s} where {sig} is expected"));
                }
                self.slots_seen += 1;
                return Ok(Node {
                    sig,
                    op: Op::Neural(NeuralSpec { kind, units }),
                    children: Vec::new(),
                    rule: None,
                });
            }
            "c" => {
                let n = self.rule_node(sig, &Production::Const)?;
                self.slots_seen += 1;
                self.opt_vector(id, "c")?;
                return Ok(n);
            }
            "add" | "multiply" => {
                let p = if word == "add" {
                    Production::Add
                } else {
                    Production::Mul
                };
                let n = self.rule_node(sig, &p)?;
                self.sym('(')?;
                let a = self.expr(sig)?;
                self.sym(',')?;
                let b = self.expr(sig)?;
                self.sym(')')?;
                let mut n = n;
                n.children = vec![a, b];
                return Ok(n);
            }
            "if" => {
                let mut n = self.rule_node(sig, &Production::IfThenElse)?;
                let c = self.expr(sig)?;
                self.keyword("then")?;
                let a = self.expr(sig)?;
                self.keyword("else")?;
                let b = self.expr(sig)?;
                n.children = vec![c, a, b];
                return Ok(n);
            }
            "map" | "mapprefix" | "fold" | "SlidingWindowAvg" => {
                let p = match word.as_str() {
                    "map" => Production::Map,
                    "mapprefix" => Production::MapPrefix,
                    "fold" => Production::Fold,
                    _ => Production::WindowAvg,
                };
                self.rule_node(sig, &p)?
            }
            w if w.ends_with("Affine") => match self.grammar.find_affine(sig, w) {
                Some(r) => Node::from_rule(r),
                None => return self.err(format!("the grammar has no `{w}` rule for {sig}")),
            },
            _ => {
                let n = self.rule_node(sig, &Production::Input)?;
                return Ok(n);
            }
        };
        match node.op.clone() {
            Op::Construct(Production::Affine(sel)) => {
                self.slots_seen += 1;
                if self.eat_sym('[') {
                    let mut w = Vec::new();
                    loop {
                        self.sym('[')?;
                        let row = self.num_list(']')?;
                        self.sym(']')?;
                        if row.len() != sel.len() {
                            return self.err(format!(
                                "weight row has {} entries, selector has {}",
                                row.len(),
                                sel.len()
                            ));
                        }
                        w.extend(row);
                        if !self.eat_sym(',') {
                            break;
                        }
                    }
                    self.sym(';')?;
                    let b = self.num_list(']')?;
                    self.sym(']')?;
                    self.captured.push((id, "W", w));
                    self.captured.push((id, "b", b));
                }
                self.sym('(')?;
                self.expect_var()?;
                self.sym(')')?;
            }
            Op::Construct(_) => {
                // Higher-order combinator: `(fun v. BODY) [c[..]] seq`.
                let child_sig = node.children[0].sig;
                self.sym('(')?;
                self.keyword("fun")?;
                self.expect_var()?;
                self.sym('.')?;
                let body = self.expr(child_sig)?;
                self.sym(')')?;
                if node.op == Op::Construct(Production::Fold) {
                    self.slots_seen += 1;
                    self.keyword("c")?;
                    self.opt_vector(id, "c")?;
                }
                self.expect_var()?;
                node.children = vec![body];
            }
            _ => unreachable!(),
        }
        Ok(node)
    }
}

/// Parses program text against `grammar`. Parameters are returned when every
/// parameterized node carried printed values (neural modules never do).
pub fn parse_program(
    text: &str,
    grammar: &Grammar,
) -> Result<(Architecture, Option<ParamStore>), DslError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.len(),
        grammar,
        next_id: 0,
        captured: Vec::new(),
        slots_seen: 0,
    };
    let root = p.expr(grammar.start())?;
    if p.pos < p.toks.len() {
        return p.err("trailing input");
    }
    let arch = Architecture::from_root(root)?;
    let mut store = ParamStore::zeros(&arch);
    let slots_with_values: std::collections::BTreeSet<usize> =
        p.captured.iter().map(|c| c.0).collect();
    for (id, name, vals) in &p.captured {
        if !store.set_part(*id, name, vals) {
            return Err(DslError::Parse {
                pos: 0,
                msg: format!("parameter `{name}` of node {id} has the wrong length"),
            });
        }
    }
    let complete = p.slots_seen > 0 && slots_with_values.len() == p.slots_seen;
    Ok((arch, complete.then_some(store)))
}
