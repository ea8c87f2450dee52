//! Abstract syntax for `.abm` models.
//!
//! Source positions are kept in [`Span`], which compares equal to every
//! other span: two programs are structurally equal regardless of where
//! their items sat in the source text.

use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, Copy, Default)]
pub struct Span {
    pub line: u32,
}

impl Span {
    pub fn at(line: u32) -> Self {
        Span { line }
    }
}

impl PartialEq for Span {
    fn eq(&self, _: &Span) -> bool {
        true
    }
}

/// Closed set of value types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Type {
    Bool,
    Int,
    Real,
    Position,
    /// Only produced by string literals, which have no legal use.
    Str,
}

impl Type {
    pub fn is_numeric(self) -> bool {
        matches!(self, Type::Int | Type::Real)
    }

    pub fn name(self) -> &'static str {
        match self {
            Type::Bool => "bool",
            Type::Int => "int",
            Type::Real => "real",
            Type::Position => "position",
            Type::Str => "string",
        }
    }

    /// `true` if a value of type `value` may be stored in a slot of type `self`.
    pub fn accepts(self, value: Type) -> bool {
        self == value || (self == Type::Real && value == Type::Int)
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Number {
    Int(i64),
    Real(f64),
}

impl Number {
    pub fn as_f64(self) -> f64 {
        match self {
            Number::Int(i) => i as f64,
            Number::Real(r) => r,
        }
    }

    pub fn ty(self) -> Type {
        match self {
            Number::Int(_) => Type::Int,
            Number::Real(_) => Type::Real,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub value: Number,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbmProgram {
    pub parameters: BTreeMap<String, Parameter>,
    pub objects: Vec<ObjectClass>,
    pub init: InitSpec,
    pub schedule: Vec<ScheduleStep>,
    pub recorders: Vec<Recorder>,
}

impl AbmProgram {
    pub fn object(&self, name: &str) -> Option<&ObjectClass> {
        self.objects.iter().find(|o| o.name == name)
    }

    pub fn object_mut(&mut self, name: &str) -> Option<&mut ObjectClass> {
        self.objects.iter_mut().find(|o| o.name == name)
    }

    pub fn recorder(&self, name: &str) -> Option<&Recorder> {
        self.recorders.iter().find(|r| r.name == name)
    }

    /// Every event name emitted anywhere in the program, sorted.
    pub fn event_names(&self) -> Vec<String> {
        let mut names = std::collections::BTreeSet::new();
        for object in &self.objects {
            for activity in &object.activities {
                walk_statements(&activity.body, &mut |s| {
                    if let Statement::Emit { event, .. } = s {
                        names.insert(event.clone());
                    }
                });
            }
        }
        names.into_iter().collect()
    }

    /// Schedule steps that run `object.activity`.
    pub fn steps_for<'a>(&'a self, object: &'a str, activity: &'a str) -> impl Iterator<Item = &'a ScheduleStep> + 'a {
        self.schedule
            .iter()
            .filter(move |s| s.object == object && s.activity == activity)
    }

    pub fn statement_count(&self) -> usize {
        let mut n = 0;
        for object in &self.objects {
            for activity in &object.activities {
                walk_statements(&activity.body, &mut |_| n += 1);
            }
        }
        n
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectClass {
    pub name: String,
    pub states: Vec<StateDecl>,
    pub activities: Vec<Activity>,
    pub span: Span,
}

impl ObjectClass {
    pub fn state(&self, name: &str) -> Option<&StateDecl> {
        self.states.iter().find(|s| s.name == name)
    }

    pub fn activity(&self, name: &str) -> Option<&Activity> {
        self.activities.iter().find(|a| a.name == name)
    }

    pub fn activity_mut(&mut self, name: &str) -> Option<&mut Activity> {
        self.activities.iter_mut().find(|a| a.name == name)
    }

    /// The position-typed state that locates instances on the grid.
    pub fn location_state(&self) -> Option<&StateDecl> {
        self.states.iter().find(|s| s.ty == Type::Position)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateDecl {
    pub name: String,
    pub ty: Type,
    pub default: Expr,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Activity {
    pub name: String,
    pub body: Vec<Statement>,
    pub span: Span,
}

impl Activity {
    pub fn has_placeholder(&self) -> bool {
        let mut found = false;
        walk_statements(&self.body, &mut |s| {
            if matches!(s, Statement::Todo { .. }) {
                found = true;
            }
        });
        found
    }

    /// Writes at least one state or emits at least one event.
    pub fn has_effect(&self) -> bool {
        let mut found = false;
        walk_statements(&self.body, &mut |s| {
            if matches!(s, Statement::Assign { .. } | Statement::Emit { .. }) {
                found = true;
            }
        });
        found
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scope {
    /// The executing instance.
    SelfRef,
    /// The instance bound by the innermost neighbor iteration.
    Neighbor,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StateRef {
    pub scope: Scope,
    pub name: String,
}

impl StateRef {
    pub fn own(name: impl Into<String>) -> Self {
        StateRef {
            scope: Scope::SelfRef,
            name: name.into(),
        }
    }

    pub fn neighbor(name: impl Into<String>) -> Self {
        StateRef {
            scope: Scope::Neighbor,
            name: name.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Statement {
    Assign {
        target: StateRef,
        value: Expr,
        span: Span,
    },
    If {
        cond: Expr,
        then_branch: Vec<Statement>,
        else_branch: Vec<Statement>,
        span: Span,
    },
    ForNeighbor {
        object: String,
        radius: Expr,
        body: Vec<Statement>,
        span: Span,
    },
    Emit {
        event: String,
        span: Span,
    },
    Todo {
        span: Span,
    },
}

impl Statement {
    pub fn span(&self) -> Span {
        match self {
            Statement::Assign { span, .. }
            | Statement::If { span, .. }
            | Statement::ForNeighbor { span, .. }
            | Statement::Emit { span, .. }
            | Statement::Todo { span } => *span,
        }
    }

    /// Nested statement lists, in order (`then`, `else` for `if`).
    pub fn children(&self) -> Vec<&Vec<Statement>> {
        match self {
            Statement::If {
                then_branch,
                else_branch,
                ..
            } => vec![then_branch, else_branch],
            Statement::ForNeighbor { body, .. } => vec![body],
            _ => Vec::new(),
        }
    }
}

/// Pre-order walk over every statement in `body`, including nested ones.
pub fn walk_statements<'a>(body: &'a [Statement], f: &mut dyn FnMut(&'a Statement)) {
    for stmt in body {
        f(stmt);
        for child in stmt.children() {
            walk_statements(child, f);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Bool(bool),
    Int(i64),
    Real(f64),
    Str(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Lt,
    Le,
    Eq,
    Ne,
    Ge,
    Gt,
    And,
    Or,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::Ge => ">=",
            BinaryOp::Gt => ">",
            BinaryOp::And => "and",
            BinaryOp::Or => "or",
        }
    }

    /// Binding strength; higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::And => 2,
            BinaryOp::Lt | BinaryOp::Le | BinaryOp::Eq | BinaryOp::Ne | BinaryOp::Ge | BinaryOp::Gt => 4,
            BinaryOp::Add | BinaryOp::Sub => 5,
            BinaryOp::Mul | BinaryOp::Div => 6,
        }
    }

    pub fn is_comparison(self) -> bool {
        self.precedence() == 4
    }
}

/// Built-in random and spatial functions with positional arguments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Builtin {
    Bernoulli,
    Uniform,
    Randint,
    RandomPosition,
    Jitter,
}

impl Builtin {
    pub fn name(self) -> &'static str {
        match self {
            Builtin::Bernoulli => "bernoulli",
            Builtin::Uniform => "uniform",
            Builtin::Randint => "randint",
            Builtin::RandomPosition => "random_position",
            Builtin::Jitter => "jitter",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Builtin::Bernoulli => 1,
            Builtin::Uniform | Builtin::Randint | Builtin::Jitter => 2,
            Builtin::RandomPosition => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Literal(Literal),
    /// Bare identifier before name resolution. Checked programs never contain it.
    Name(String),
    State(StateRef),
    Param(String),
    Unary {
        op: UnaryOp,
        operand: Box<Expr>,
    },
    Binary {
        op: BinaryOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Call {
        func: Builtin,
        args: Vec<Expr>,
    },
    CountNeighbors {
        object: String,
        radius: Box<Expr>,
        predicate: Box<Expr>,
    },
    CountAll {
        object: String,
        predicate: Box<Expr>,
    },
    /// Sum of a numeric expression over every instance of `object`.
    SumAll {
        object: String,
        value: Box<Expr>,
    },
    /// `distance(self, neighbor)`
    Distance,
}

impl Expr {
    pub fn bool(b: bool) -> Self {
        Expr::Literal(Literal::Bool(b))
    }

    pub fn int(i: i64) -> Self {
        Expr::Literal(Literal::Int(i))
    }

    pub fn real(r: f64) -> Self {
        Expr::Literal(Literal::Real(r))
    }

    pub fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Self {
        Expr::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    /// Direct sub-expressions.
    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Literal(_) | Expr::Name(_) | Expr::State(_) | Expr::Param(_) | Expr::Distance => Vec::new(),
            Expr::Unary { operand, .. } => vec![operand],
            Expr::Binary { lhs, rhs, .. } => vec![lhs, rhs],
            Expr::Call { args, .. } => args.iter().collect(),
            Expr::CountNeighbors { radius, predicate, .. } => vec![radius, predicate],
            Expr::CountAll { predicate, .. } => vec![predicate],
            Expr::SumAll { value, .. } => vec![value],
        }
    }

    /// `true` if evaluating this expression may draw from the random stream.
    pub fn draws_randomness(&self) -> bool {
        matches!(self, Expr::Call { .. }) || self.children().iter().any(|c| c.draws_randomness())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum ScheduleKind {
    Do,
    #[serde(rename = "Random_Do")]
    RandomDo,
    #[serde(rename = "Conditional_Do")]
    ConditionalDo,
    #[serde(rename = "Random_Conditional_Do")]
    RandomConditionalDo,
}

impl ScheduleKind {
    pub fn name(self) -> &'static str {
        match self {
            ScheduleKind::Do => "Do",
            ScheduleKind::RandomDo => "Random_Do",
            ScheduleKind::ConditionalDo => "Conditional_Do",
            ScheduleKind::RandomConditionalDo => "Random_Conditional_Do",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [
            ScheduleKind::Do,
            ScheduleKind::RandomDo,
            ScheduleKind::ConditionalDo,
            ScheduleKind::RandomConditionalDo,
        ]
        .into_iter()
        .find(|k| k.name() == name)
    }

    pub fn is_conditional(self) -> bool {
        matches!(self, ScheduleKind::ConditionalDo | ScheduleKind::RandomConditionalDo)
    }

    pub fn is_random(self) -> bool {
        matches!(self, ScheduleKind::RandomDo | ScheduleKind::RandomConditionalDo)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleStep {
    pub kind: ScheduleKind,
    pub object: String,
    pub activity: String,
    pub condition: Option<Expr>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitCount {
    pub count: Expr,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitSpec {
    pub grid: (i64, i64),
    /// Default seed used when a run does not supply one.
    pub seed: Option<u64>,
    pub counts: BTreeMap<String, InitCount>,
    pub span: Span,
}

impl Default for InitSpec {
    fn default() -> Self {
        InitSpec {
            grid: (DEFAULT_GRID, DEFAULT_GRID),
            seed: None,
            counts: BTreeMap::new(),
            span: Span::default(),
        }
    }
}

pub const DEFAULT_GRID: i64 = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct Recorder {
    pub name: String,
    pub expr: Expr,
    pub span: Span,
}
