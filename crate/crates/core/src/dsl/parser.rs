//! Recursive-descent parser with statement- and item-level error recovery.
//!
//! The output still contains unresolved [`Expr::Name`] nodes and may hold
//! duplicate declarations; `check` turns it into an [`AbmProgram`].

use super::ast::*;
use super::token::{lex, Keyword, Token, TokenKind};
use crate::defect::Defect;

#[derive(Debug, Default)]
pub(crate) struct RawInit {
    pub grid: Option<((i64, i64), Span)>,
    pub seed: Option<(u64, Span)>,
    pub counts: Vec<(String, InitCount)>,
    pub span: Span,
}

#[derive(Debug, Default)]
pub(crate) struct Parsed {
    pub params: Vec<(String, Parameter)>,
    pub objects: Vec<RawObject>,
    pub inits: Vec<RawInit>,
    pub schedule: Vec<ScheduleStep>,
    pub recorders: Vec<Recorder>,
}

#[derive(Debug)]
pub(crate) struct RawObject {
    pub name: String,
    pub states: Vec<StateDecl>,
    pub activities: Vec<Activity>,
    pub span: Span,
}

struct Fail;

type PResult<T> = Result<T, Fail>;

pub(crate) fn parse(source: &str) -> (Parsed, Vec<Defect>) {
    let (tokens, mut defects) = lex(source);
    let mut parser = Parser {
        tokens,
        pos: 0,
        defects: Vec::new(),
        last_line: 1,
    };
    let parsed = parser.program();
    defects.extend(parser.defects);
    (parsed, defects)
}

/// Parse a standalone statement list, as used by patch directives.
pub(crate) fn parse_statements(source: &str) -> Result<Vec<Statement>, Vec<Defect>> {
    let (tokens, mut defects) = lex(source);
    let mut parser = Parser {
        tokens,
        pos: 0,
        defects: Vec::new(),
        last_line: 1,
    };
    let mut body = Vec::new();
    while !parser.at_end() {
        let before = parser.pos;
        match parser.statement() {
            Ok(s) => body.push(s),
            Err(Fail) => {
                parser.sync_statement();
                if parser.pos == before {
                    parser.advance();
                }
            }
        }
    }
    defects.extend(parser.defects);
    if defects.is_empty() {
        Ok(body)
    } else {
        Err(defects)
    }
}

/// Parse a standalone expression, as used by patch directives.
pub(crate) fn parse_expression(source: &str) -> Result<Expr, Vec<Defect>> {
    let (tokens, mut defects) = lex(source);
    let mut parser = Parser {
        tokens,
        pos: 0,
        defects: Vec::new(),
        last_line: 1,
    };
    let expr = parser.expr();
    if expr.is_ok() && !parser.at_end() {
        let _ = parser.fail::<()>("end of expression");
    }
    defects.extend(parser.defects);
    match expr {
        Ok(e) if defects.is_empty() => Ok(e),
        _ => Err(defects),
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    defects: Vec<Defect>,
    last_line: u32,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_kind(&self) -> Option<TokenKind> {
        self.peek().map(|t| t.kind)
    }

    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn line(&self) -> u32 {
        self.peek().map(|t| t.line).unwrap_or(self.last_line)
    }

    fn advance(&mut self) -> Option<Token> {
        let tok = self.tokens.get(self.pos).cloned();
        if let Some(t) = &tok {
            self.last_line = t.line;
            self.pos += 1;
        }
        tok
    }

    fn check(&self, kind: TokenKind) -> bool {
        self.peek_kind() == Some(kind)
    }

    fn check_kw(&self, kw: Keyword) -> bool {
        self.check(TokenKind::Keyword(kw))
    }

    fn eat(&mut self, kind: TokenKind) -> bool {
        if self.check(kind) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn fail<T>(&mut self, expected: &str) -> PResult<T> {
        let (line, excerpt, found) = match self.peek() {
            Some(t) => (t.line, t.text.clone(), format!("'{}'", t.text)),
            None => (self.last_line, "<eof>".to_string(), "end of input".to_string()),
        };
        self.defects.push(Defect::compilation(
            line,
            excerpt,
            format!("syntax error: expected {expected}, found {found}"),
        ));
        Err(Fail)
    }

    fn expect(&mut self, kind: TokenKind, what: &str) -> PResult<Token> {
        if self.check(kind) {
            Ok(self.advance().unwrap())
        } else {
            self.fail(what)
        }
    }

    fn expect_kw(&mut self, kw: Keyword) -> PResult<Token> {
        self.expect(TokenKind::Keyword(kw), &format!("'{}'", kw.as_str()))
    }

    fn ident(&mut self, what: &str) -> PResult<String> {
        Ok(self.expect(TokenKind::Ident, what)?.text)
    }

    /// Skip to just past the next `;` or to the next unmatched `}`.
    fn sync_statement(&mut self) {
        let mut depth = 0usize;
        while let Some(kind) = self.peek_kind() {
            match kind {
                TokenKind::Semi if depth == 0 => {
                    self.advance();
                    return;
                }
                TokenKind::LBrace => depth += 1,
                TokenKind::RBrace => {
                    if depth == 0 {
                        return;
                    }
                    depth -= 1;
                    if depth == 0 {
                        self.advance();
                        return;
                    }
                }
                _ => {}
            }
            self.advance();
        }
    }

    /// Skip to the next top-level item keyword.
    fn sync_item(&mut self) {
        let mut depth = 0usize;
        while let Some(kind) = self.peek_kind() {
            match kind {
                TokenKind::LBrace => depth += 1,
                TokenKind::RBrace => depth = depth.saturating_sub(1),
                TokenKind::Keyword(
                    Keyword::Param | Keyword::Object | Keyword::Init | Keyword::Schedule | Keyword::Record,
                ) if depth == 0 => return,
                _ => {}
            }
            self.advance();
        }
    }

    fn program(&mut self) -> Parsed {
        let mut out = Parsed::default();
        while let Some(kind) = self.peek_kind() {
            let result = match kind {
                TokenKind::Keyword(Keyword::Param) => self.param().map(|p| out.params.push(p)),
                TokenKind::Keyword(Keyword::Object) => self.object().map(|o| out.objects.push(o)),
                TokenKind::Keyword(Keyword::Init) => self.init().map(|i| out.inits.push(i)),
                TokenKind::Keyword(Keyword::Schedule) => self.schedule().map(|s| out.schedule.extend(s)),
                TokenKind::Keyword(Keyword::Record) => self.recorder().map(|r| out.recorders.push(r)),
                _ => self.fail("'param', 'object', 'init', 'schedule' or 'record'"),
            };
            if result.is_err() {
                // The failing token itself may be an item keyword in the wrong place.
                if self.pos < self.tokens.len() {
                    self.advance();
                }
                self.sync_item();
            }
        }
        out
    }

    fn signed_number(&mut self) -> PResult<Number> {
        let negative = self.eat(TokenKind::Minus);
        let tok = match self.peek_kind() {
            Some(TokenKind::Int | TokenKind::Real) => self.advance().unwrap(),
            _ => return self.fail("a number"),
        };
        let number = match tok.kind {
            TokenKind::Int => {
                let v: i64 = tok.text.parse().unwrap_or(0);
                Number::Int(if negative { -v } else { v })
            }
            _ => {
                let v: f64 = tok.text.parse().unwrap_or(0.0);
                Number::Real(if negative { -v } else { v })
            }
        };
        Ok(number)
    }

    fn param(&mut self) -> PResult<(String, Parameter)> {
        let line = self.line();
        self.expect_kw(Keyword::Param)?;
        let name = self.ident("parameter name")?;
        self.expect(TokenKind::Eq, "'='")?;
        let value = self.signed_number()?;
        self.expect(TokenKind::Semi, "';'")?;
        Ok((
            name,
            Parameter {
                value,
                span: Span::at(line),
            },
        ))
    }

    fn object(&mut self) -> PResult<RawObject> {
        let line = self.line();
        self.expect_kw(Keyword::Object)?;
        let name = self.ident("object name")?;
        self.expect(TokenKind::LBrace, "'{'")?;
        let mut states = Vec::new();
        let mut activities = Vec::new();
        loop {
            match self.peek_kind() {
                Some(TokenKind::RBrace) => {
                    self.advance();
                    break;
                }
                None => return self.fail("'}' closing object"),
                Some(TokenKind::Keyword(Keyword::State)) => match self.state_decl() {
                    Ok(s) => states.push(s),
                    Err(Fail) => self.sync_statement(),
                },
                Some(TokenKind::Keyword(Keyword::Activity)) => match self.activity() {
                    Ok(a) => activities.push(a),
                    Err(Fail) => self.sync_statement(),
                },
                Some(_) => {
                    let _ = self.fail::<()>("'state', 'activity' or '}'");
                    self.sync_statement();
                }
            }
        }
        Ok(RawObject {
            name,
            states,
            activities,
            span: Span::at(line),
        })
    }

    fn state_decl(&mut self) -> PResult<StateDecl> {
        let line = self.line();
        self.expect_kw(Keyword::State)?;
        let name = self.ident("state name")?;
        self.expect(TokenKind::Colon, "':'")?;
        let ty = match self.peek_kind() {
            Some(TokenKind::Keyword(Keyword::BoolType)) => Type::Bool,
            Some(TokenKind::Keyword(Keyword::IntType)) => Type::Int,
            Some(TokenKind::Keyword(Keyword::RealType)) => Type::Real,
            Some(TokenKind::Keyword(Keyword::PositionType)) => Type::Position,
            _ => return self.fail("a type (bool, int, real, position)"),
        };
        self.advance();
        self.expect(TokenKind::Eq, "'='")?;
        let default = self.expr()?;
        self.expect(TokenKind::Semi, "';'")?;
        Ok(StateDecl {
            name,
            ty,
            default,
            span: Span::at(line),
        })
    }

    fn activity(&mut self) -> PResult<Activity> {
        let line = self.line();
        self.expect_kw(Keyword::Activity)?;
        let name = self.ident("activity name")?;
        let body = self.block()?;
        Ok(Activity {
            name,
            body,
            span: Span::at(line),
        })
    }

    fn block(&mut self) -> PResult<Vec<Statement>> {
        self.expect(TokenKind::LBrace, "'{'")?;
        let mut body = Vec::new();
        loop {
            match self.peek_kind() {
                Some(TokenKind::RBrace) => {
                    self.advance();
                    return Ok(body);
                }
                None => return self.fail("'}'"),
                Some(_) => match self.statement() {
                    Ok(s) => body.push(s),
                    Err(Fail) => self.sync_statement(),
                },
            }
        }
    }

    fn statement(&mut self) -> PResult<Statement> {
        let line = self.line();
        let span = Span::at(line);
        match self.peek_kind() {
            Some(TokenKind::Keyword(Keyword::If)) => self.if_statement(),
            Some(TokenKind::Keyword(Keyword::ForNeighbor)) => {
                self.advance();
                let object = self.ident("object name")?;
                self.expect_kw(Keyword::Within)?;
                let radius = self.expr()?;
                let body = self.block()?;
                Ok(Statement::ForNeighbor {
                    object,
                    radius,
                    body,
                    span,
                })
            }
            Some(TokenKind::Keyword(Keyword::Emit)) => {
                self.advance();
                let event = self.ident("event name")?;
                self.expect(TokenKind::Semi, "';'")?;
                Ok(Statement::Emit { event, span })
            }
            Some(TokenKind::Keyword(Keyword::Todo)) => {
                self.advance();
                self.expect(TokenKind::Semi, "';'")?;
                Ok(Statement::Todo { span })
            }
            Some(TokenKind::Ident) => {
                let name = self.advance().unwrap().text;
                self.assignment(StateRef::own(name), span)
            }
            Some(TokenKind::Keyword(kw @ (Keyword::SelfRef | Keyword::Neighbor))) => {
                self.advance();
                self.expect(TokenKind::Dot, "'.'")?;
                let name = self.ident("state name")?;
                let target = if kw == Keyword::SelfRef {
                    StateRef::own(name)
                } else {
                    StateRef::neighbor(name)
                };
                self.assignment(target, span)
            }
            _ => self.fail("a statement"),
        }
    }

    fn assignment(&mut self, target: StateRef, span: Span) -> PResult<Statement> {
        self.expect(TokenKind::Assign, "':='")?;
        let value = self.expr()?;
        self.expect(TokenKind::Semi, "';'")?;
        Ok(Statement::Assign { target, value, span })
    }

    fn if_statement(&mut self) -> PResult<Statement> {
        let span = Span::at(self.line());
        self.expect_kw(Keyword::If)?;
        let cond = self.expr()?;
        let then_branch = self.block()?;
        let else_branch = if self.check_kw(Keyword::Else) {
            self.advance();
            if self.check_kw(Keyword::If) {
                vec![self.if_statement()?]
            } else {
                self.block()?
            }
        } else {
            Vec::new()
        };
        Ok(Statement::If {
            cond,
            then_branch,
            else_branch,
            span,
        })
    }

    fn init(&mut self) -> PResult<RawInit> {
        let span = Span::at(self.line());
        self.expect_kw(Keyword::Init)?;
        self.expect(TokenKind::LBrace, "'{'")?;
        let mut init = RawInit {
            span,
            ..RawInit::default()
        };
        loop {
            match self.peek_kind() {
                Some(TokenKind::RBrace) => {
                    self.advance();
                    return Ok(init);
                }
                None => return self.fail("'}' closing init"),
                Some(_) => {
                    if self.init_entry(&mut init).is_err() {
                        self.sync_statement();
                    }
                }
            }
        }
    }

    fn init_entry(&mut self, init: &mut RawInit) -> PResult<()> {
        let line = self.line();
        match self.peek_kind() {
            Some(TokenKind::Keyword(Keyword::Grid)) => {
                self.advance();
                self.expect(TokenKind::LParen, "'('")?;
                let w = self.int_literal("grid width")?;
                self.expect(TokenKind::Comma, "','")?;
                let h = self.int_literal("grid height")?;
                self.expect(TokenKind::RParen, "')'")?;
                self.expect(TokenKind::Semi, "';'")?;
                if init.grid.is_some() {
                    self.defects
                        .push(Defect::compilation(line, "grid", "grid declared more than once"));
                }
                init.grid = Some(((w, h), Span::at(line)));
            }
            Some(TokenKind::Keyword(Keyword::Seed)) => {
                self.advance();
                let seed = self.int_literal("seed")?;
                self.expect(TokenKind::Semi, "';'")?;
                if init.seed.is_some() {
                    self.defects
                        .push(Defect::compilation(line, "seed", "seed declared more than once"));
                }
                if seed < 0 {
                    self.defects
                        .push(Defect::compilation(line, seed.to_string(), "seed must be non-negative"));
                }
                init.seed = Some((seed.max(0) as u64, Span::at(line)));
            }
            Some(TokenKind::Ident) => {
                let name = self.advance().unwrap().text;
                self.expect(TokenKind::Eq, "'='")?;
                let count = self.expr()?;
                self.expect(TokenKind::Semi, "';'")?;
                init.counts.push((
                    name,
                    InitCount {
                        count,
                        span: Span::at(line),
                    },
                ));
            }
            _ => return self.fail("'grid', 'seed' or an instance count"),
        }
        Ok(())
    }

    fn int_literal(&mut self, what: &str) -> PResult<i64> {
        match self.signed_number()? {
            Number::Int(i) => Ok(i),
            Number::Real(_) => {
                self.pos -= 1;
                self.fail(&format!("an integer {what}"))
            }
        }
    }

    fn schedule(&mut self) -> PResult<Vec<ScheduleStep>> {
        self.expect_kw(Keyword::Schedule)?;
        self.expect(TokenKind::LBrace, "'{'")?;
        let mut steps = Vec::new();
        loop {
            match self.peek_kind() {
                Some(TokenKind::RBrace) => {
                    self.advance();
                    return Ok(steps);
                }
                None => return self.fail("'}' closing schedule"),
                Some(_) => match self.schedule_step() {
                    Ok(s) => steps.push(s),
                    Err(Fail) => self.sync_statement(),
                },
            }
        }
    }

    fn schedule_step(&mut self) -> PResult<ScheduleStep> {
        let span = Span::at(self.line());
        let kind = match self.peek_kind() {
            Some(TokenKind::Keyword(Keyword::Do)) => ScheduleKind::Do,
            Some(TokenKind::Keyword(Keyword::RandomDo)) => ScheduleKind::RandomDo,
            Some(TokenKind::Keyword(Keyword::ConditionalDo)) => ScheduleKind::ConditionalDo,
            Some(TokenKind::Keyword(Keyword::RandomConditionalDo)) => ScheduleKind::RandomConditionalDo,
            _ => return self.fail("a schedule primitive (Do, Random_Do, Conditional_Do, Random_Conditional_Do)"),
        };
        self.advance();
        self.expect(TokenKind::LParen, "'('")?;
        let object = self.ident("object name")?;
        self.expect(TokenKind::Comma, "','")?;
        let activity = self.ident("activity name")?;
        let condition = if kind.is_conditional() {
            self.expect(TokenKind::Comma, "',' before the condition")?;
            Some(self.expr()?)
        } else {
            None
        };
        self.expect(TokenKind::RParen, "')'")?;
        self.expect(TokenKind::Semi, "';'")?;
        Ok(ScheduleStep {
            kind,
            object,
            activity,
            condition,
            span,
        })
    }

    fn recorder(&mut self) -> PResult<Recorder> {
        let span = Span::at(self.line());
        self.expect_kw(Keyword::Record)?;
        let name = self.ident("metric name")?;
        self.expect(TokenKind::Eq, "'='")?;
        let expr = self.expr()?;
        self.expect(TokenKind::Semi, "';'")?;
        Ok(Recorder { name, expr, span })
    }

    // Expressions, loosest to tightest.

    fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.and_expr()?;
        while self.check_kw(Keyword::Or) {
            self.advance();
            let rhs = self.and_expr()?;
            lhs = Expr::binary(BinaryOp::Or, lhs, rhs);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.not_expr()?;
        while self.check_kw(Keyword::And) {
            self.advance();
            let rhs = self.not_expr()?;
            lhs = Expr::binary(BinaryOp::And, lhs, rhs);
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> PResult<Expr> {
        if self.check_kw(Keyword::Not) {
            self.advance();
            let operand = self.not_expr()?;
            return Ok(Expr::Unary {
                op: UnaryOp::Not,
                operand: Box::new(operand),
            });
        }
        self.cmp_expr()
    }

    fn cmp_op(&self) -> Option<BinaryOp> {
        Some(match self.peek_kind()? {
            TokenKind::Lt => BinaryOp::Lt,
            TokenKind::Le => BinaryOp::Le,
            TokenKind::EqEq => BinaryOp::Eq,
            TokenKind::NotEq => BinaryOp::Ne,
            TokenKind::Ge => BinaryOp::Ge,
            TokenKind::Gt => BinaryOp::Gt,
            _ => return None,
        })
    }

    fn cmp_expr(&mut self) -> PResult<Expr> {
        let lhs = self.add_expr()?;
        if let Some(op) = self.cmp_op() {
            self.advance();
            let rhs = self.add_expr()?;
            if self.cmp_op().is_some() {
                return self.fail("an operator other than a second comparison");
            }
            return Ok(Expr::binary(op, lhs, rhs));
        }
        Ok(lhs)
    }

    fn add_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = match self.peek_kind() {
                Some(TokenKind::Plus) => BinaryOp::Add,
                Some(TokenKind::Minus) => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.mul_expr()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn mul_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary_expr()?;
        loop {
            let op = match self.peek_kind() {
                Some(TokenKind::Star) => BinaryOp::Mul,
                Some(TokenKind::Slash) => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.unary_expr()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary_expr(&mut self) -> PResult<Expr> {
        if self.check(TokenKind::Minus) {
            self.advance();
            let operand = self.unary_expr()?;
            return Ok(match operand {
                Expr::Literal(Literal::Int(i)) => Expr::int(i.wrapping_neg()),
                Expr::Literal(Literal::Real(r)) => Expr::real(-r),
                other => Expr::Unary {
                    op: UnaryOp::Neg,
                    operand: Box::new(other),
                },
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        let Some(tok) = self.peek().cloned() else {
            return self.fail("an expression");
        };
        match tok.kind {
            TokenKind::Int => {
                self.advance();
                Ok(Expr::int(tok.text.parse().unwrap_or(0)))
            }
            TokenKind::Real => {
                self.advance();
                Ok(Expr::real(tok.text.parse().unwrap_or(0.0)))
            }
            TokenKind::Bool => {
                self.advance();
                Ok(Expr::bool(tok.text == "true"))
            }
            TokenKind::Str => {
                self.advance();
                Ok(Expr::Literal(Literal::Str(tok.text)))
            }
            TokenKind::Ident => {
                self.advance();
                Ok(Expr::Name(tok.text))
            }
            TokenKind::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect(TokenKind::RParen, "')'")?;
                Ok(e)
            }
            TokenKind::Keyword(kw @ (Keyword::SelfRef | Keyword::Neighbor)) => {
                self.advance();
                self.expect(TokenKind::Dot, "'.' after self/neighbor")?;
                let name = self.ident("state name")?;
                Ok(Expr::State(if kw == Keyword::SelfRef {
                    StateRef::own(name)
                } else {
                    StateRef::neighbor(name)
                }))
            }
            TokenKind::Keyword(Keyword::Bernoulli) => self.call(Builtin::Bernoulli),
            TokenKind::Keyword(Keyword::Uniform) => self.call(Builtin::Uniform),
            TokenKind::Keyword(Keyword::Randint) => self.call(Builtin::Randint),
            TokenKind::Keyword(Keyword::RandomPosition) => self.call(Builtin::RandomPosition),
            TokenKind::Keyword(Keyword::Jitter) => self.call(Builtin::Jitter),
            TokenKind::Keyword(Keyword::CountNeighbors) => {
                self.advance();
                self.expect(TokenKind::LParen, "'('")?;
                let object = self.ident("object name")?;
                self.expect(TokenKind::Comma, "','")?;
                let radius = self.expr()?;
                self.expect(TokenKind::Comma, "','")?;
                let predicate = self.expr()?;
                self.expect(TokenKind::RParen, "')'")?;
                Ok(Expr::CountNeighbors {
                    object,
                    radius: Box::new(radius),
                    predicate: Box::new(predicate),
                })
            }
            TokenKind::Keyword(Keyword::CountAll) => {
                self.advance();
                self.expect(TokenKind::LParen, "'('")?;
                let object = self.ident("object name")?;
                self.expect(TokenKind::Comma, "','")?;
                let predicate = self.expr()?;
                self.expect(TokenKind::RParen, "')'")?;
                Ok(Expr::CountAll {
                    object,
                    predicate: Box::new(predicate),
                })
            }
            TokenKind::Keyword(Keyword::SumAll) => {
                self.advance();
                self.expect(TokenKind::LParen, "'('")?;
                let object = self.ident("object name")?;
                self.expect(TokenKind::Comma, "','")?;
                let value = self.expr()?;
                self.expect(TokenKind::RParen, "')'")?;
                Ok(Expr::SumAll {
                    object,
                    value: Box::new(value),
                })
            }
            TokenKind::Keyword(Keyword::Distance) => {
                self.advance();
                self.expect(TokenKind::LParen, "'('")?;
                self.expect_kw(Keyword::SelfRef)?;
                self.expect(TokenKind::Comma, "','")?;
                self.expect_kw(Keyword::Neighbor)?;
                self.expect(TokenKind::RParen, "')'")?;
                Ok(Expr::Distance)
            }
            _ => self.fail("an expression"),
        }
    }

    fn call(&mut self, func: Builtin) -> PResult<Expr> {
        self.advance();
        self.expect(TokenKind::LParen, "'('")?;
        let mut args = Vec::new();
        if !self.check(TokenKind::RParen) {
            args.push(self.expr()?);
            while self.eat(TokenKind::Comma) {
                args.push(self.expr()?);
            }
        }
        let close_line = self.line();
        self.expect(TokenKind::RParen, "')'")?;
        if args.len() != func.arity() {
            self.defects.push(Defect::compilation(
                close_line,
                func.name(),
                format!(
                    "{} takes {} argument(s), {} given",
                    func.name(),
                    func.arity(),
                    args.len()
                ),
            ));
            return Err(Fail);
        }
        Ok(Expr::Call { func, args })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_folding() {
        let e = parse_expression("1 + 2 * -3 < x and not y or z").unwrap();
        let expected = Expr::binary(
            BinaryOp::Or,
            Expr::binary(
                BinaryOp::And,
                Expr::binary(
                    BinaryOp::Lt,
                    Expr::binary(
                        BinaryOp::Add,
                        Expr::int(1),
                        Expr::binary(BinaryOp::Mul, Expr::int(2), Expr::int(-3)),
                    ),
                    Expr::Name("x".into()),
                ),
                Expr::Unary {
                    op: UnaryOp::Not,
                    operand: Box::new(Expr::Name("y".into())),
                },
            ),
            Expr::Name("z".into()),
        );
        assert_eq!(e, expected);
    }

    #[test]
    fn chained_comparison_is_rejected() {
        assert!(parse_expression("a < b < c").is_err());
    }

    #[test]
    fn recovery_reports_several_syntax_errors() {
        let src = "object a {\n  state s: int = 0;\n  activity go {\n    s := ;\n    s := 1;\n    s := * 2;\n  }\n}\n";
        let (parsed, defects) = parse(src);
        assert_eq!(defects.len(), 2, "{defects:?}");
        assert_eq!(defects[0].line(), Some(4));
        assert_eq!(defects[1].line(), Some(6));
        assert_eq!(parsed.objects[0].activities[0].body.len(), 1);
    }

    #[test]
    fn arity_is_checked() {
        let err = parse_expression("uniform(1)").unwrap_err();
        assert!(err[0].reason().contains("takes 2 argument"));
    }

    #[test]
    fn else_if_chains() {
        let body = parse_statements("if a { x := 1; } else if b { x := 2; } else { x := 3; }").unwrap();
        let Statement::If { else_branch, .. } = &body[0] else {
            panic!()
        };
        assert!(matches!(else_branch[0], Statement::If { .. }));
    }
}
