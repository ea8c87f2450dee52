//! CodeBLEU over `.abm` programs.
//!
//! - `ngram`: BLEU-4 (geometric mean of clipped 1..4-gram precisions, no
//!   smoothing) times the brevity penalty, over the tokens of the canonical
//!   printing of each program.
//! - `weighted_ngram`: the same with every n-gram containing a DSL keyword
//!   counted twice.
//! - `ast_match`: fraction of the reference's subtrees of depth two or more
//!   that also occur in the candidate (multiset matching). Identifiers and
//!   literal values are not part of node labels.
//! - `dataflow_match`: fraction of the reference's def-use edges (state
//!   written, state read on the right-hand side) that the candidate also has.
//!   States are identified by class index and declaration index, so renaming
//!   leaves the edge set unchanged.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::dsl::{print_program, tokenize, AbmProgram, Expr, Literal, Scope, StateRef, Statement, TokenKind, UnaryOp};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CodeBleuWeights {
    pub ngram: f64,
    pub weighted_ngram: f64,
    pub ast: f64,
    pub dataflow: f64,
}

impl Default for CodeBleuWeights {
    fn default() -> Self {
        CodeBleuWeights {
            ngram: 0.1,
            weighted_ngram: 0.1,
            ast: 0.4,
            dataflow: 0.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid CodeBLEU weights {weights:?}: {reason}")]
pub struct InvalidWeights {
    pub weights: [f64; 4],
    pub reason: &'static str,
}

impl CodeBleuWeights {
    pub fn new(ngram: f64, weighted_ngram: f64, ast: f64, dataflow: f64) -> Result<Self, InvalidWeights> {
        let w = CodeBleuWeights {
            ngram,
            weighted_ngram,
            ast,
            dataflow,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.ngram, self.weighted_ngram, self.ast, self.dataflow]
    }

    pub fn validate(&self) -> Result<(), InvalidWeights> {
        let weights = self.as_array();
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(InvalidWeights {
                weights,
                reason: "weights must be finite and non-negative",
            });
        }
        if (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(InvalidWeights {
                weights,
                reason: "weights must sum to 1",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodeBleuScore {
    pub ngram: f64,
    pub weighted_ngram: f64,
    pub ast_match: f64,
    pub dataflow_match: f64,
    pub weights: CodeBleuWeights,
    pub total: f64,
}

pub fn codebleu(
    candidate: &AbmProgram,
    reference: &AbmProgram,
    weights: CodeBleuWeights,
) -> Result<CodeBleuScore, InvalidWeights> {
    weights.validate()?;
    let cand = tokens(candidate);
    let refr = tokens(reference);
    let ngram = bleu(&cand, &refr, false);
    let weighted_ngram = bleu(&cand, &refr, true);
    let ast_match = ast_match(candidate, reference);
    let dataflow_match = dataflow_match(candidate, reference);
    let total = weights.ngram * ngram
        + weights.weighted_ngram * weighted_ngram
        + weights.ast * ast_match
        + weights.dataflow * dataflow_match;
    Ok(CodeBleuScore {
        ngram,
        weighted_ngram,
        ast_match,
        dataflow_match,
        weights,
        total: total.clamp(0.0, 1.0),
    })
}

/// `(text, is_keyword)` tokens of the canonical printing.
pub fn tokens(program: &AbmProgram) -> Vec<(String, bool)> {
    tokenize(&print_program(program))
        .expect("printed programs lex")
        .into_iter()
        .map(|t| (t.text, matches!(t.kind, TokenKind::Keyword(_))))
        .collect()
}

fn ngram_counts(toks: &[(String, bool)], n: usize) -> BTreeMap<Vec<&str>, (usize, bool)> {
    let mut out: BTreeMap<Vec<&str>, (usize, bool)> = BTreeMap::new();
    if toks.len() < n {
        return out;
    }
    for w in toks.windows(n) {
        let key: Vec<&str> = w.iter().map(|t| t.0.as_str()).collect();
        let kw = w.iter().any(|t| t.1);
        out.entry(key).or_insert((0, kw)).0 += 1;
    }
    out
}

/// Clipped n-gram precision, optionally keyword-weighted.
pub fn ngram_precision(cand: &[(String, bool)], refr: &[(String, bool)], n: usize, weighted: bool) -> f64 {
    let c = ngram_counts(cand, n);
    let r = ngram_counts(refr, n);
    let weight = |kw: bool| if weighted && kw { 2.0 } else { 1.0 };
    let mut matched = 0.0;
    let mut total = 0.0;
    for (g, &(count, kw)) in &c {
        let w = weight(kw);
        total += w * count as f64;
        let clip = r.get(g).map(|x| x.0).unwrap_or(0).min(count);
        matched += w * clip as f64;
    }
    if total == 0.0 {
        0.0
    } else {
        matched / total
    }
}

pub fn brevity_penalty(cand_len: usize, ref_len: usize) -> f64 {
    if cand_len == 0 {
        0.0
    } else if cand_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    }
}

fn bleu(cand: &[(String, bool)], refr: &[(String, bool)], weighted: bool) -> f64 {
    let mut log_sum = 0.0;
    for n in 1..=4 {
        let p = ngram_precision(cand, refr, n, weighted);
        if p == 0.0 {
            return 0.0;
        }
        log_sum += p.ln() / 4.0;
    }
    let score = brevity_penalty(cand.len(), refr.len()) * log_sum.exp();
    // exp(ln) round trip can land a hair above one on identical inputs
    score.min(1.0)
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Node {
    label: String,
    children: Vec<Node>,
}

impl Node {
    fn leaf(label: impl Into<String>) -> Self {
        Node {
            label: label.into(),
            children: Vec::new(),
        }
    }

    fn new(label: impl Into<String>, children: Vec<Node>) -> Self {
        Node {
            label: label.into(),
            children,
        }
    }

    fn key(&self) -> String {
        if self.children.is_empty() {
            return self.label.clone();
        }
        let inner: Vec<String> = self.children.iter().map(Node::key).collect();
        format!("({} {})", self.label, inner.join(" "))
    }

    /// Keys of every subtree with at least one child.
    fn subtrees(&self, out: &mut BTreeMap<String, usize>) {
        if !self.children.is_empty() {
            *out.entry(self.key()).or_insert(0) += 1;
            for c in &self.children {
                c.subtrees(out);
            }
        }
    }
}

fn scope(s: Scope) -> &'static str {
    match s {
        Scope::SelfRef => "self",
        Scope::Neighbor => "neighbor",
    }
}

fn expr_tree(e: &Expr) -> Node {
    match e {
        Expr::Literal(l) => Node::leaf(match l {
            Literal::Bool(_) => "bool",
            Literal::Int(_) => "int",
            Literal::Real(_) => "real",
            Literal::Str(_) => "str",
        }),
        Expr::Name(_) => Node::leaf("name"),
        Expr::State(r) => Node::leaf(format!("state.{}", scope(r.scope))),
        Expr::Param(_) => Node::leaf("param"),
        Expr::Unary { op, operand } => Node::new(
            match op {
                UnaryOp::Neg => "neg",
                UnaryOp::Not => "not",
            },
            vec![expr_tree(operand)],
        ),
        Expr::Binary { op, lhs, rhs } => Node::new(op.symbol(), vec![expr_tree(lhs), expr_tree(rhs)]),
        Expr::Call { func, args } => {
            if args.is_empty() {
                Node::leaf(func.name())
            } else {
                Node::new(func.name(), args.iter().map(expr_tree).collect())
            }
        }
        Expr::CountNeighbors { radius, predicate, .. } => {
            Node::new("count_neighbors", vec![expr_tree(radius), expr_tree(predicate)])
        }
        Expr::CountAll { predicate, .. } => Node::new("count_all", vec![expr_tree(predicate)]),
        Expr::SumAll { value, .. } => Node::new("sum_all", vec![expr_tree(value)]),
        Expr::Distance => Node::leaf("distance"),
    }
}

fn block(label: &str, body: &[Statement]) -> Node {
    Node::new(label, body.iter().map(stmt_tree).collect())
}

fn stmt_tree(s: &Statement) -> Node {
    match s {
        Statement::Assign { target, value, .. } => {
            Node::new(format!("assign.{}", scope(target.scope)), vec![expr_tree(value)])
        }
        Statement::If {
            cond,
            then_branch,
            else_branch,
            ..
        } => Node::new(
            "if",
            vec![expr_tree(cond), block("then", then_branch), block("else", else_branch)],
        ),
        Statement::ForNeighbor { radius, body, .. } => {
            Node::new("for_neighbor", vec![expr_tree(radius), block("body", body)])
        }
        Statement::Emit { .. } => Node::leaf("emit"),
        Statement::Todo { .. } => Node::leaf("todo"),
    }
}

/// Children whose order comes from identifier sorting are put in a
/// name-independent order.
fn sorted(mut nodes: Vec<Node>) -> Vec<Node> {
    nodes.sort_by_key(Node::key);
    nodes
}

fn program_tree(p: &AbmProgram) -> Node {
    let params = sorted(
        p.parameters
            .values()
            .map(|v| Node::leaf(format!("param.{}", v.value.ty().name())))
            .collect(),
    );
    let objects = p
        .objects
        .iter()
        .map(|o| {
            let mut children: Vec<Node> = o
                .states
                .iter()
                .map(|s| Node::new(format!("state.{}", s.ty.name()), vec![expr_tree(&s.default)]))
                .collect();
            children.extend(o.activities.iter().map(|a| block("activity", &a.body)));
            Node::new("object", children)
        })
        .collect();
    let counts = sorted(
        p.init
            .counts
            .values()
            .map(|c| Node::new("count", vec![expr_tree(&c.count)]))
            .collect(),
    );
    let schedule = p
        .schedule
        .iter()
        .map(|s| {
            let mut children = vec![Node::leaf("target")];
            if let Some(c) = &s.condition {
                children.push(expr_tree(c));
            }
            Node::new(format!("step.{}", s.kind.name()), children)
        })
        .collect();
    let recorders = p
        .recorders
        .iter()
        .map(|r| Node::new("record", vec![expr_tree(&r.expr)]))
        .collect();
    Node::new(
        "program",
        vec![
            Node::new("parameters", params),
            Node::new("objects", objects),
            Node::new("init", counts),
            Node::new("schedule", schedule),
            Node::new("recorders", recorders),
        ],
    )
}

/// Multiset of subtree keys (depth two or more) of a program, as used by
/// `ast_match`.
pub fn subtree_counts(p: &AbmProgram) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    program_tree(p).subtrees(&mut out);
    out
}

fn overlap<K: Ord>(cand: &BTreeMap<K, usize>, refr: &BTreeMap<K, usize>) -> f64 {
    let total: usize = refr.values().sum();
    if total == 0 {
        return if cand.values().sum::<usize>() == 0 { 1.0 } else { 0.0 };
    }
    let matched: usize = refr
        .iter()
        .map(|(k, n)| cand.get(k).copied().unwrap_or(0).min(*n))
        .sum();
    matched as f64 / total as f64
}

pub fn ast_match(candidate: &AbmProgram, reference: &AbmProgram) -> f64 {
    overlap(&subtree_counts(candidate), &subtree_counts(reference))
}

/// `(written, read)` with states as `(class index, state index)`.
pub type DataflowEdge = ((usize, usize), (usize, usize));

struct Flow<'p> {
    p: &'p AbmProgram,
    edges: BTreeMap<DataflowEdge, usize>,
}

impl Flow<'_> {
    fn state(&self, class: Option<&str>, name: &str) -> Option<(usize, usize)> {
        let ci = self.p.objects.iter().position(|o| Some(o.name.as_str()) == class)?;
        let si = self.p.objects[ci].states.iter().position(|s| s.name == name)?;
        Some((ci, si))
    }

    fn reads(&self, e: &Expr, own: Option<&str>, nb: Option<&str>, out: &mut Vec<(usize, usize)>) {
        match e {
            Expr::State(StateRef { scope, name }) => {
                let class = match scope {
                    Scope::SelfRef => own,
                    Scope::Neighbor => nb,
                };
                out.extend(self.state(class, name));
            }
            Expr::CountNeighbors {
                object,
                radius,
                predicate,
            } => {
                self.reads(radius, own, nb, out);
                self.reads(predicate, own, Some(object), out);
            }
            Expr::CountAll { object, predicate } => self.reads(predicate, Some(object), None, out),
            Expr::SumAll { object, value } => self.reads(value, Some(object), None, out),
            other => {
                for c in other.children() {
                    self.reads(c, own, nb, out);
                }
            }
        }
    }

    fn body(&mut self, body: &[Statement], own: &str, nb: Option<&str>) {
        for s in body {
            match s {
                Statement::Assign { target, value, .. } => {
                    let class = match target.scope {
                        Scope::SelfRef => Some(own),
                        Scope::Neighbor => nb,
                    };
                    let Some(w) = self.state(class, &target.name) else {
                        continue;
                    };
                    let mut r = Vec::new();
                    self.reads(value, Some(own), nb, &mut r);
                    for read in r {
                        *self.edges.entry((w, read)).or_insert(0) += 1;
                    }
                }
                Statement::If {
                    then_branch,
                    else_branch,
                    ..
                } => {
                    self.body(then_branch, own, nb);
                    self.body(else_branch, own, nb);
                }
                Statement::ForNeighbor { object, body, .. } => self.body(body, own, Some(object)),
                Statement::Emit { .. } | Statement::Todo { .. } => {}
            }
        }
    }
}

/// Multiset of def-use edges of a program.
pub fn dataflow_edges(p: &AbmProgram) -> BTreeMap<DataflowEdge, usize> {
    let mut flow = Flow {
        p,
        edges: BTreeMap::new(),
    };
    for o in &p.objects {
        for a in &o.activities {
            flow.body(&a.body, &o.name, None);
        }
    }
    flow.edges
}

pub fn dataflow_match(candidate: &AbmProgram, reference: &AbmProgram) -> f64 {
    overlap(&dataflow_edges(candidate), &dataflow_edges(reference))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_program;

    const P: &str = "\
param rate = 0.5;
object person {
  state infected: bool = false;
  state contacts: int = 0;
  state pos: position = random_position();
  activity meet {
    contacts := contacts + count_neighbors(person, 1, neighbor.infected);
    if contacts > 2 { infected := bernoulli(rate); }
  }
}
init { person = 4; }
schedule { Do(person, meet); }
record sick = count_all(person, infected);
";

    #[test]
    fn self_score_is_one() {
        let p = parse_program(P).unwrap();
        let s = codebleu(&p, &p, CodeBleuWeights::default()).unwrap();
        assert_eq!(
            (s.ngram, s.weighted_ngram, s.ast_match, s.dataflow_match),
            (1.0, 1.0, 1.0, 1.0)
        );
        assert!((s.total - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn weights_are_validated() {
        assert!(CodeBleuWeights::new(0.25, 0.25, 0.25, 0.25).is_ok());
        assert!(CodeBleuWeights::new(0.5, 0.5, 0.5, -0.5).is_err());
        assert!(CodeBleuWeights::new(0.1, 0.1, 0.1, 0.1).is_err());
    }

    #[test]
    fn edges_use_positions() {
        let p = parse_program(P).unwrap();
        let e: Vec<_> = dataflow_edges(&p).into_keys().collect();
        // contacts <- contacts, contacts <- neighbor.infected
        assert_eq!(e, vec![((0, 1), (0, 0)), ((0, 1), (0, 1))]);
    }

    #[test]
    fn brevity() {
        assert_eq!(brevity_penalty(5, 4), 1.0);
        assert_eq!(brevity_penalty(4, 4), 1.0);
        assert!((brevity_penalty(2, 4) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(brevity_penalty(0, 4), 0.0);
    }
}
