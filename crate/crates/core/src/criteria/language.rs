//! The verification language: parser, printer and aggregates.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::dsl::is_identifier;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregate {
    Final,
    Max,
    Min,
    Mean,
    LastKMean(usize),
}

impl Aggregate {
    /// `None` for an empty series.
    pub fn apply(self, series: &[f64]) -> Option<f64> {
        let tail = match self {
            Aggregate::LastKMean(k) => &series[series.len().saturating_sub(k)..],
            _ => series,
        };
        if tail.is_empty() {
            return None;
        }
        Some(match self {
            Aggregate::Final => tail[tail.len() - 1],
            Aggregate::Max => tail.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Aggregate::Min => tail.iter().copied().fold(f64::INFINITY, f64::min),
            Aggregate::Mean | Aggregate::LastKMean(_) => tail.iter().sum::<f64>() / tail.len() as f64,
        })
    }

    /// `final(m)`, `last_k_mean(m, k)`, ...
    pub fn render(self, metric: &str) -> String {
        match self {
            Aggregate::LastKMean(k) => format!("last_k_mean({metric}, {k})"),
            a => format!("{}({metric})", a.name()),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Aggregate::Final => "final",
            Aggregate::Max => "max",
            Aggregate::Min => "min",
            Aggregate::Mean => "mean",
            Aggregate::LastKMean(_) => "last_k_mean",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CmpOp {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
}

impl CmpOp {
    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ne => lhs != rhs,
            CmpOp::Ge => lhs >= rhs,
            CmpOp::Gt => lhs > rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Predicate {
    Cmp {
        agg: Aggregate,
        metric: String,
        op: CmpOp,
        value: f64,
    },
    /// Tolerance `None` means the metric type's default.
    Unchanged {
        metric: String,
        tolerance: Option<f64>,
    },
    And(Box<Predicate>, Box<Predicate>),
    Or(Box<Predicate>, Box<Predicate>),
    Not(Box<Predicate>),
}

impl Predicate {
    /// Referenced metrics in order of first appearance.
    pub fn metrics(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        self.visit(&mut |p| {
            let m = match p {
                Predicate::Cmp { metric, .. } | Predicate::Unchanged { metric, .. } => metric.as_str(),
                _ => return,
            };
            if !out.contains(&m) {
                out.push(m);
            }
        });
        out
    }

    pub fn visit<'a>(&'a self, f: &mut dyn FnMut(&'a Predicate)) {
        f(self);
        match self {
            Predicate::And(a, b) | Predicate::Or(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Predicate::Not(a) => a.visit(f),
            _ => {}
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Predicate::Or(..) => 1,
            Predicate::And(..) => 2,
            _ => 3,
        }
    }
}

fn number(v: f64) -> String {
    format!("{v}")
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let child = |f: &mut fmt::Formatter<'_>, p: &Predicate, min: u8| {
            if p.precedence() < min {
                write!(f, "({p})")
            } else {
                write!(f, "{p}")
            }
        };
        match self {
            Predicate::Cmp { agg, metric, op, value } => {
                write!(f, "{} {} {}", agg.render(metric), op.symbol(), number(*value))
            }
            Predicate::Unchanged { metric, tolerance } => match tolerance {
                Some(t) => write!(f, "unchanged({metric}, {})", number(*t)),
                None => write!(f, "unchanged({metric})"),
            },
            Predicate::And(a, b) => {
                child(f, a, 2)?;
                f.write_str(" and ")?;
                child(f, b, 3)
            }
            Predicate::Or(a, b) => {
                child(f, a, 1)?;
                f.write_str(" or ")?;
                child(f, b, 2)
            }
            Predicate::Not(a) => {
                f.write_str("not ")?;
                child(f, a, 3)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("predicate syntax error at byte {offset}: {message}")]
pub struct PredicateSyntaxError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Op(CmpOp),
    LParen,
    RParen,
    Comma,
    End,
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, PredicateSyntaxError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |offset, message: &str| PredicateSyntaxError {
        offset,
        message: message.to_string(),
    };
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'(' => {
                out.push((Tok::LParen, start));
                i += 1;
            }
            b')' => {
                out.push((Tok::RParen, start));
                i += 1;
            }
            b',' => {
                out.push((Tok::Comma, start));
                i += 1;
            }
            b'<' | b'>' | b'=' | b'!' => {
                let two = bytes.get(i + 1) == Some(&b'=');
                let op = match (c, two) {
                    (b'<', true) => CmpOp::Le,
                    (b'<', false) => CmpOp::Lt,
                    (b'>', true) => CmpOp::Ge,
                    (b'>', false) => CmpOp::Gt,
                    (b'=', true) => CmpOp::Eq,
                    (b'!', true) => CmpOp::Ne,
                    _ => return Err(err(start, "expected a comparison operator")),
                };
                out.push((Tok::Op(op), start));
                i += if two { 2 } else { 1 };
            }
            b'0'..=b'9' | b'-' | b'+' | b'.' => {
                i += 1;
                while i < bytes.len() {
                    let d = bytes[i];
                    let exp_sign = (d == b'-' || d == b'+') && matches!(bytes[i - 1], b'e' | b'E');
                    if d.is_ascii_digit() || d == b'.' || d == b'e' || d == b'E' || exp_sign {
                        i += 1;
                    } else {
                        break;
                    }
                }
                let s = &text[start..i];
                let v: f64 = s.parse().map_err(|_| err(start, &format!("bad number `{s}`")))?;
                if !v.is_finite() {
                    return Err(err(start, "number out of range"));
                }
                out.push((Tok::Num(v), start));
            }
            c if c == b'_' || c.is_ascii_alphabetic() => {
                while i < bytes.len() && (bytes[i] == b'_' || bytes[i].is_ascii_alphanumeric()) {
                    i += 1;
                }
                out.push((Tok::Ident(text[start..i].to_string()), start));
            }
            _ => {
                let ch = text[start..].chars().next().unwrap_or('?');
                return Err(err(start, &format!("unexpected character `{ch}`")));
            }
        }
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T, PredicateSyntaxError> {
        Err(PredicateSyntaxError {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), PredicateSyntaxError> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            self.fail(format!("expected {what}"))
        }
    }

    fn keyword(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == k)
    }

    fn or(&mut self) -> Result<Predicate, PredicateSyntaxError> {
        let mut lhs = self.and()?;
        while self.keyword("or") {
            self.bump();
            lhs = Predicate::Or(Box::new(lhs), Box::new(self.and()?));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Predicate, PredicateSyntaxError> {
        let mut lhs = self.unary()?;
        while self.keyword("and") {
            self.bump();
            lhs = Predicate::And(Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Predicate, PredicateSyntaxError> {
        if self.keyword("not") {
            self.bump();
            return Ok(Predicate::Not(Box::new(self.unary()?)));
        }
        if *self.peek() == Tok::LParen {
            self.bump();
            let inner = self.or()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(inner);
        }
        self.atom()
    }

    fn metric(&mut self) -> Result<String, PredicateSyntaxError> {
        match self.peek().clone() {
            Tok::Ident(s) if is_identifier(&s) => {
                self.bump();
                Ok(s)
            }
            _ => self.fail("expected a metric name"),
        }
    }

    fn number(&mut self, what: &str) -> Result<f64, PredicateSyntaxError> {
        match *self.peek() {
            Tok::Num(v) => {
                self.bump();
                Ok(v)
            }
            _ => self.fail(format!("expected {what}")),
        }
    }

    fn atom(&mut self) -> Result<Predicate, PredicateSyntaxError> {
        let Tok::Ident(name) = self.peek().clone() else {
            return self.fail("expected an aggregate, `unchanged`, `not` or `(`");
        };
        let name_at = self.offset();
        self.bump();
        self.expect(Tok::LParen, "`(`")?;
        let metric = self.metric()?;
        if name == "unchanged" {
            let tolerance = if *self.peek() == Tok::Comma {
                self.bump();
                let t = self.number("a tolerance")?;
                if t < 0.0 {
                    return Err(PredicateSyntaxError {
                        offset: self.toks[self.pos - 1].1,
                        message: "tolerance must not be negative".into(),
                    });
                }
                Some(t)
            } else {
                None
            };
            self.expect(Tok::RParen, "`)`")?;
            return Ok(Predicate::Unchanged { metric, tolerance });
        }
        let agg = match name.as_str() {
            "final" => Aggregate::Final,
            "max" => Aggregate::Max,
            "min" => Aggregate::Min,
            "mean" => Aggregate::Mean,
            "last_k_mean" => {
                self.expect(Tok::Comma, "`,` and a window size")?;
                let at = self.offset();
                let k = self.number("a window size")?;
                if k < 1.0 || k.fract() != 0.0 || k > u32::MAX as f64 {
                    return Err(PredicateSyntaxError {
                        offset: at,
                        message: "window size must be a positive integer".into(),
                    });
                }
                Aggregate::LastKMean(k as usize)
            }
            _ => {
                return Err(PredicateSyntaxError {
                    offset: name_at,
                    message: format!("unknown aggregate `{name}`"),
                })
            }
        };
        self.expect(Tok::RParen, "`)`")?;
        let op = match self.bump() {
            Tok::Op(op) => op,
            _ => {
                self.pos -= 1;
                return self.fail("expected a comparison operator");
            }
        };
        let value = self.number("a number")?;
        Ok(Predicate::Cmp { agg, metric, op, value })
    }
}

pub fn parse_predicate(text: &str) -> Result<Predicate, PredicateSyntaxError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
    };
    let pred = p.or()?;
    if *p.peek() != Tok::End {
        return p.fail("unexpected text after the predicate");
    }
    Ok(pred)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn objective_examples() {
        assert_eq!(
            parse_predicate("final(spread_rate) < 0.1").unwrap(),
            Predicate::Cmp {
                agg: Aggregate::Final,
                metric: "spread_rate".into(),
                op: CmpOp::Lt,
                value: 0.1
            }
        );
        assert_eq!(
            parse_predicate("unchanged(spread_distance, 0.0)").unwrap(),
            Predicate::Unchanged {
                metric: "spread_distance".into(),
                tolerance: Some(0.0)
            }
        );
    }

    #[test]
    fn precedence_and_printing() {
        let p = parse_predicate("not max(a) > 1 or min(b) >= -2 and last_k_mean(c, 3) != 1e-3").unwrap();
        assert!(matches!(p, Predicate::Or(..)));
        assert_eq!(
            p.to_string(),
            "not max(a) > 1 or min(b) >= -2 and last_k_mean(c, 3) != 0.001"
        );
        let q = parse_predicate("(final(a) < 1 or final(b) < 1) and not (unchanged(c) or mean(d) == 0)").unwrap();
        assert_eq!(parse_predicate(&q.to_string()).unwrap(), q);
        let r = parse_predicate("final(a) < 1 or (final(b) < 1 or final(c) < 1)").unwrap();
        assert_eq!(parse_predicate(&r.to_string()).unwrap(), r);
        assert_eq!(q.metrics(), vec!["a", "b", "c", "d"]);
    }

    #[test]
    fn errors_carry_offsets() {
        assert_eq!(parse_predicate("final(x) <").unwrap_err().offset, 10);
        assert_eq!(parse_predicate("median(x) < 1").unwrap_err().offset, 0);
        assert_eq!(parse_predicate("last_k_mean(x, 0) < 1").unwrap_err().offset, 15);
        assert!(parse_predicate("final(x) < 1 final(y) < 2").is_err());
        assert!(parse_predicate("the rate drops").is_err());
        assert!(parse_predicate("unchanged(x, -1)").is_err());
        assert!(parse_predicate("").is_err());
    }

    #[test]
    fn aggregates() {
        let s = [3.0, 1.0, 4.0, 1.0, 5.0];
        assert_eq!(Aggregate::Final.apply(&s), Some(5.0));
        assert_eq!(Aggregate::Max.apply(&s), Some(5.0));
        assert_eq!(Aggregate::Min.apply(&s), Some(1.0));
        assert_eq!(Aggregate::Mean.apply(&s), Some(2.8));
        assert_eq!(Aggregate::LastKMean(2).apply(&s), Some(3.0));
        assert_eq!(Aggregate::LastKMean(9).apply(&s), Some(2.8));
        assert_eq!(Aggregate::Mean.apply(&[]), None);
    }
}
