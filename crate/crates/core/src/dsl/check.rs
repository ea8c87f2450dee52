//! Name resolution and type checking.
//!
//! Bare identifiers resolve to a state of the current `self` object first and
//! to a parameter second; a name that is both is rejected as ambiguous.
//! Errors are reported once per offending expression: an ill-typed operand
//! does not also report its enclosing expression.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, HashMap};

use super::ast::*;
use super::parser::{Parsed, RawObject};
use super::printer::print_expr;
use crate::defect::Defect;

struct ClassInfo {
    states: HashMap<String, Type>,
    located: bool,
}

struct Symbols {
    params: HashMap<String, Type>,
    classes: HashMap<String, ClassInfo>,
}

#[derive(Clone, Copy)]
struct Ctx<'a> {
    own: Option<&'a str>,
    neighbor: Option<&'a str>,
    states: bool,
    random: bool,
    aggregates: bool,
    line: u32,
    place: &'static str,
}

impl<'a> Ctx<'a> {
    fn activity(object: &'a str, line: u32) -> Self {
        Ctx {
            own: Some(object),
            neighbor: None,
            states: true,
            random: true,
            aggregates: true,
            line,
            place: "activity",
        }
    }
}

struct Checker<'s> {
    sym: &'s Symbols,
    defects: Vec<Defect>,
}

pub(crate) fn check(parsed: Parsed) -> (AbmProgram, Vec<Defect>) {
    let mut defects = Vec::new();

    let mut parameters = BTreeMap::new();
    for (name, param) in parsed.params {
        match parameters.entry(name) {
            Entry::Occupied(e) => defects.push(Defect::compilation(
                param.span.line,
                e.key().clone(),
                format!("duplicate parameter `{}`", e.key()),
            )),
            Entry::Vacant(e) => {
                e.insert(param);
            }
        }
    }

    let mut objects: Vec<ObjectClass> = Vec::new();
    for raw in parsed.objects {
        if objects.iter().any(|o| o.name == raw.name) {
            defects.push(Defect::compilation(
                raw.span.line,
                raw.name.clone(),
                format!("duplicate object `{}`", raw.name),
            ));
            continue;
        }
        objects.push(dedupe_members(raw, &mut defects));
    }

    let sym = Symbols {
        params: parameters.iter().map(|(k, v)| (k.clone(), v.value.ty())).collect(),
        classes: objects
            .iter()
            .map(|o| {
                (
                    o.name.clone(),
                    ClassInfo {
                        states: o.states.iter().map(|s| (s.name.clone(), s.ty)).collect(),
                        located: o.location_state().is_some(),
                    },
                )
            })
            .collect(),
    };

    for object in &objects {
        for state in &object.states {
            if sym.params.contains_key(&state.name) {
                defects.push(Defect::compilation(
                    state.span.line,
                    state.name.clone(),
                    format!(
                        "ambiguous name `{}`: both a parameter and a state of object {}",
                        state.name, object.name
                    ),
                ));
            }
        }
    }

    let mut checker = Checker {
        sym: &sym,
        defects: Vec::new(),
    };

    for object in &mut objects {
        let name = object.name.clone();
        for state in &mut object.states {
            let ctx = Ctx {
                own: None,
                neighbor: None,
                states: false,
                random: true,
                aggregates: false,
                line: state.span.line,
                place: "state default",
            };
            if let Some(ty) = checker.expr(&mut state.default, ctx) {
                if !state.ty.accepts(ty) {
                    checker.mismatch(
                        &state.default,
                        state.span.line,
                        format!(
                            "type mismatch: state `{}` of object {name} is {} but its default is {ty}",
                            state.name, state.ty
                        ),
                    );
                }
            }
        }
        for activity in &mut object.activities {
            let ctx = Ctx::activity(&name, activity.span.line);
            checker.block(&mut activity.body, ctx);
        }
    }

    let init = checker.init(parsed.inits, &objects);

    let mut schedule = parsed.schedule;
    for step in &mut schedule {
        checker.step(step, &objects);
    }

    let mut recorders: Vec<Recorder> = Vec::new();
    for mut rec in parsed.recorders {
        if recorders.iter().any(|r| r.name == rec.name) {
            checker.defects.push(Defect::compilation(
                rec.span.line,
                rec.name.clone(),
                format!("duplicate recorder `{}`", rec.name),
            ));
            continue;
        }
        let ctx = Ctx {
            own: None,
            neighbor: None,
            states: false,
            random: true,
            aggregates: true,
            line: rec.span.line,
            place: "recorder",
        };
        if let Some(ty) = checker.expr(&mut rec.expr, ctx) {
            if !(ty.is_numeric() || ty == Type::Bool) {
                checker.mismatch(
                    &rec.expr,
                    rec.span.line,
                    format!(
                        "type mismatch: recorder `{}` must be numeric or bool, found {ty}",
                        rec.name
                    ),
                );
            }
        }
        recorders.push(rec);
    }

    defects.extend(checker.defects);
    let program = AbmProgram {
        parameters,
        objects,
        init,
        schedule,
        recorders,
    };
    (program, defects)
}

fn dedupe_members(raw: RawObject, defects: &mut Vec<Defect>) -> ObjectClass {
    let mut states: Vec<StateDecl> = Vec::new();
    for s in raw.states {
        if states.iter().any(|x| x.name == s.name) {
            defects.push(Defect::compilation(
                s.span.line,
                s.name.clone(),
                format!("duplicate state `{}` in object {}", s.name, raw.name),
            ));
            continue;
        }
        if s.ty == Type::Position && states.iter().any(|x| x.ty == Type::Position) {
            defects.push(Defect::compilation(
                s.span.line,
                s.name.clone(),
                format!("object {} declares more than one position state", raw.name),
            ));
            continue;
        }
        states.push(s);
    }
    let mut activities: Vec<Activity> = Vec::new();
    for a in raw.activities {
        if activities.iter().any(|x| x.name == a.name) {
            defects.push(Defect::compilation(
                a.span.line,
                a.name.clone(),
                format!("duplicate activity `{}` in object {}", a.name, raw.name),
            ));
            continue;
        }
        activities.push(a);
    }
    ObjectClass {
        name: raw.name,
        states,
        activities,
        span: raw.span,
    }
}

impl Checker<'_> {
    fn err(&mut self, line: u32, excerpt: impl Into<String>, reason: impl Into<String>) {
        self.defects.push(Defect::compilation(line, excerpt, reason));
    }

    fn mismatch(&mut self, e: &Expr, line: u32, reason: String) {
        self.err(line, print_expr(e), reason);
    }

    fn class(&self, name: &str) -> Option<&ClassInfo> {
        self.sym.classes.get(name)
    }

    fn init(&mut self, inits: Vec<super::parser::RawInit>, objects: &[ObjectClass]) -> InitSpec {
        let mut spec = InitSpec::default();
        let mut seen_block = false;
        for raw in inits {
            if seen_block {
                self.err(raw.span.line, "init", "duplicate init block");
                continue;
            }
            seen_block = true;
            spec.span = raw.span;
            if let Some(((w, h), span)) = raw.grid {
                if w < 1 || h < 1 {
                    self.err(
                        span.line,
                        format!("grid({w}, {h})"),
                        "grid dimensions must be at least 1",
                    );
                }
                spec.grid = (w, h);
            }
            spec.seed = raw.seed.map(|(s, _)| s);
            for (name, mut count) in raw.counts {
                let line = count.span.line;
                if spec.counts.contains_key(&name) {
                    self.err(
                        line,
                        name.clone(),
                        format!("duplicate instance count for object {name}"),
                    );
                    continue;
                }
                if self.class(&name).is_none() {
                    self.err(line, name.clone(), format!("unknown object `{name}` in init"));
                    continue;
                }
                let ctx = Ctx {
                    own: None,
                    neighbor: None,
                    states: false,
                    random: false,
                    aggregates: false,
                    line,
                    place: "instance count",
                };
                if let Some(ty) = self.expr(&mut count.count, ctx) {
                    if ty != Type::Int {
                        self.mismatch(
                            &count.count,
                            line,
                            format!("type mismatch: instance count for {name} must be int, found {ty}"),
                        );
                    }
                }
                spec.counts.insert(name, count);
            }
        }
        for object in objects {
            if !spec.counts.contains_key(&object.name) {
                self.err(
                    object.span.line,
                    object.name.clone(),
                    format!("no instance count for object {} in init", object.name),
                );
            }
        }
        spec
    }

    fn step(&mut self, step: &mut ScheduleStep, objects: &[ObjectClass]) {
        let line = step.span.line;
        let Some(object) = objects.iter().find(|o| o.name == step.object) else {
            self.err(
                line,
                step.object.clone(),
                format!("unknown object `{}` in schedule", step.object),
            );
            return;
        };
        if object.activity(&step.activity).is_none() {
            self.err(
                line,
                format!("{}.{}", step.object, step.activity),
                format!("unknown activity of object {}", step.object),
            );
            return;
        }
        if let Some(cond) = &mut step.condition {
            let ctx = Ctx {
                place: "schedule condition",
                ..Ctx::activity(&object.name, line)
            };
            if let Some(ty) = self.expr(cond, ctx) {
                if ty != Type::Bool {
                    self.mismatch(
                        cond,
                        line,
                        format!("type mismatch: schedule condition must be bool, found {ty}"),
                    );
                }
            }
        }
    }

    fn block(&mut self, body: &mut [Statement], ctx: Ctx<'_>) {
        for stmt in body {
            self.statement(stmt, ctx);
        }
    }

    fn statement(&mut self, stmt: &mut Statement, ctx: Ctx<'_>) {
        let line = stmt.span().line;
        let ctx = Ctx { line, ..ctx };
        match stmt {
            Statement::Assign { target, value, .. } => {
                let slot = self.state_type(target, ctx);
                let value_ty = self.expr(value, ctx);
                if let (Some(slot), Some(ty)) = (slot, value_ty) {
                    if !slot.accepts(ty) {
                        self.mismatch(
                            value,
                            line,
                            format!("type mismatch: cannot assign {ty} to {slot} state `{}`", target.name),
                        );
                    }
                }
            }
            Statement::If {
                cond,
                then_branch,
                else_branch,
                ..
            } => {
                if let Some(ty) = self.expr(cond, ctx) {
                    if ty != Type::Bool {
                        self.mismatch(
                            cond,
                            line,
                            format!("type mismatch: if condition must be bool, found {ty}"),
                        );
                    }
                }
                self.block(then_branch, ctx);
                self.block(else_branch, ctx);
            }
            Statement::ForNeighbor {
                object, radius, body, ..
            } => {
                let ok = self.spatial(object, ctx, "for_neighbor");
                self.numeric(radius, ctx, "neighbor radius");
                if ok {
                    let inner = Ctx {
                        neighbor: Some(object.as_str()),
                        ..ctx
                    };
                    self.block(body, inner);
                }
            }
            Statement::Emit { .. } | Statement::Todo { .. } => {}
        }
    }

    /// Checks that `object` exists, is located, and that `self` is located too.
    fn spatial(&mut self, object: &str, ctx: Ctx<'_>, what: &str) -> bool {
        let Some(target) = self.class(object) else {
            self.err(ctx.line, object.to_string(), format!("unknown object `{object}`"));
            return false;
        };
        if !target.located {
            self.err(
                ctx.line,
                object.to_string(),
                format!("{what} needs object {object} to have a position state"),
            );
            return false;
        }
        match ctx.own {
            Some(own) if self.class(own).is_some_and(|c| c.located) => true,
            Some(own) => {
                self.err(
                    ctx.line,
                    what.to_string(),
                    format!("{what} needs object {own} to have a position state"),
                );
                false
            }
            None => {
                self.err(
                    ctx.line,
                    what.to_string(),
                    format!("{what} is not allowed in a {}", ctx.place),
                );
                false
            }
        }
    }

    fn numeric(&mut self, e: &mut Expr, ctx: Ctx<'_>, what: &str) {
        if let Some(ty) = self.expr(e, ctx) {
            if !ty.is_numeric() {
                self.mismatch(
                    e,
                    ctx.line,
                    format!("type mismatch: {what} must be numeric, found {ty}"),
                );
            }
        }
    }

    fn state_type(&mut self, r: &StateRef, ctx: Ctx<'_>) -> Option<Type> {
        let owner = match r.scope {
            Scope::SelfRef => match ctx.own.filter(|_| ctx.states) {
                Some(o) => o,
                None => {
                    self.err(
                        ctx.line,
                        r.name.clone(),
                        format!("state reference `{}` is not allowed in a {}", r.name, ctx.place),
                    );
                    return None;
                }
            },
            Scope::Neighbor => match ctx.neighbor {
                Some(o) => o,
                None => {
                    self.err(
                        ctx.line,
                        format!("neighbor.{}", r.name),
                        "neighbor used outside for_neighbor or count_neighbors",
                    );
                    return None;
                }
            },
        };
        match self.class(owner).and_then(|c| c.states.get(&r.name)) {
            Some(ty) => Some(*ty),
            None => {
                self.err(ctx.line, r.name.clone(), format!("unknown state of object {owner}"));
                None
            }
        }
    }

    fn expr(&mut self, e: &mut Expr, ctx: Ctx<'_>) -> Option<Type> {
        let line = ctx.line;
        match e {
            Expr::Literal(lit) => Some(match lit {
                Literal::Bool(_) => Type::Bool,
                Literal::Int(_) => Type::Int,
                Literal::Real(_) => Type::Real,
                Literal::Str(_) => Type::Str,
            }),
            Expr::Name(name) => {
                let state = ctx
                    .own
                    .filter(|_| ctx.states)
                    .and_then(|o| self.class(o))
                    .and_then(|c| c.states.get(name.as_str()).copied());
                if let Some(ty) = state {
                    *e = Expr::State(StateRef::own(std::mem::take(name)));
                    return Some(ty);
                }
                if let Some(ty) = self.sym.params.get(name.as_str()).copied() {
                    *e = Expr::Param(std::mem::take(name));
                    return Some(ty);
                }
                let reason = match ctx.own.filter(|_| ctx.states) {
                    Some(o) => format!("unknown state of object {o}"),
                    None => "unknown parameter".to_string(),
                };
                self.err(line, name.clone(), reason);
                None
            }
            Expr::State(r) => {
                let r = r.clone();
                self.state_type(&r, ctx)
            }
            Expr::Param(name) => match self.sym.params.get(name.as_str()) {
                Some(ty) => Some(*ty),
                None => {
                    self.err(line, name.clone(), "unknown parameter");
                    None
                }
            },
            Expr::Unary { op, operand } => {
                let ty = self.expr(operand, ctx)?;
                match op {
                    UnaryOp::Neg if ty.is_numeric() => Some(ty),
                    UnaryOp::Not if ty == Type::Bool => Some(Type::Bool),
                    _ => {
                        let reason = format!(
                            "type mismatch: operator {} does not apply to {ty}",
                            if *op == UnaryOp::Neg { "-" } else { "not" }
                        );
                        self.mismatch(e, line, reason);
                        None
                    }
                }
            }
            Expr::Binary { op, lhs, rhs } => {
                let op = *op;
                let l = self.expr(lhs, ctx);
                let r = self.expr(rhs, ctx);
                let (l, r) = (l?, r?);
                let result = match op {
                    BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul if l.is_numeric() && r.is_numeric() => {
                        Some(if l == Type::Int && r == Type::Int {
                            Type::Int
                        } else {
                            Type::Real
                        })
                    }
                    BinaryOp::Div if l.is_numeric() && r.is_numeric() => Some(Type::Real),
                    BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge if l.is_numeric() && r.is_numeric() => {
                        Some(Type::Bool)
                    }
                    BinaryOp::Eq | BinaryOp::Ne if (l.is_numeric() && r.is_numeric()) || (l == r && l != Type::Str) => {
                        Some(Type::Bool)
                    }
                    BinaryOp::And | BinaryOp::Or if l == Type::Bool && r == Type::Bool => Some(Type::Bool),
                    _ => None,
                };
                if result.is_none() {
                    self.mismatch(
                        e,
                        line,
                        format!("type mismatch: operator {} does not apply to {l} and {r}", op.symbol()),
                    );
                }
                result
            }
            Expr::Call { func, args } => {
                let func = *func;
                if !ctx.random {
                    self.err(
                        line,
                        func.name(),
                        format!("{} is not allowed in a {}", func.name(), ctx.place),
                    );
                    return None;
                }
                let mut types = Vec::with_capacity(args.len());
                for a in args.iter_mut() {
                    types.push(self.expr(a, ctx));
                }
                let types: Vec<Type> = types.into_iter().collect::<Option<_>>()?;
                let (ok, result) = match func {
                    Builtin::Bernoulli => (types[0].is_numeric(), Type::Bool),
                    Builtin::Uniform => (types.iter().all(|t| t.is_numeric()), Type::Real),
                    Builtin::Randint => (types.iter().all(|t| *t == Type::Int), Type::Int),
                    Builtin::RandomPosition => (true, Type::Position),
                    Builtin::Jitter => (types[0] == Type::Position && types[1] == Type::Int, Type::Position),
                };
                if ok {
                    Some(result)
                } else {
                    let found: Vec<&str> = types.iter().map(|t| t.name()).collect();
                    self.mismatch(
                        e,
                        line,
                        format!("type mismatch: {} does not accept ({})", func.name(), found.join(", ")),
                    );
                    None
                }
            }
            Expr::CountNeighbors {
                object,
                radius,
                predicate,
            } => {
                if !ctx.aggregates {
                    self.err(
                        line,
                        "count_neighbors",
                        format!("count_neighbors is not allowed in a {}", ctx.place),
                    );
                    return None;
                }
                if !self.spatial(object, ctx, "count_neighbors") {
                    return None;
                }
                self.numeric(radius, ctx, "neighbor radius");
                let inner = Ctx {
                    neighbor: Some(object.as_str()),
                    ..ctx
                };
                self.predicate(predicate, inner);
                Some(Type::Int)
            }
            Expr::CountAll { object, predicate } => {
                if !ctx.aggregates {
                    self.err(
                        line,
                        "count_all",
                        format!("count_all is not allowed in a {}", ctx.place),
                    );
                    return None;
                }
                if self.class(object).is_none() {
                    self.err(line, object.clone(), format!("unknown object `{object}`"));
                    return None;
                }
                let inner = Ctx {
                    own: Some(object.as_str()),
                    neighbor: None,
                    states: true,
                    ..ctx
                };
                self.predicate(predicate, inner);
                Some(Type::Int)
            }
            Expr::SumAll { object, value } => {
                if !ctx.aggregates {
                    self.err(line, "sum_all", format!("sum_all is not allowed in a {}", ctx.place));
                    return None;
                }
                if self.class(object).is_none() {
                    self.err(line, object.clone(), format!("unknown object `{object}`"));
                    return None;
                }
                let inner = Ctx {
                    own: Some(object.as_str()),
                    neighbor: None,
                    states: true,
                    ..ctx
                };
                let ty = self.expr(value, inner)?;
                if !ty.is_numeric() {
                    self.mismatch(
                        value,
                        line,
                        format!("type mismatch: sum_all needs a numeric value, found {ty}"),
                    );
                    return None;
                }
                Some(ty)
            }
            Expr::Distance => {
                let own_located = ctx.own.and_then(|o| self.class(o)).is_some_and(|c| c.located);
                let neighbor_located = ctx.neighbor.and_then(|o| self.class(o)).is_some_and(|c| c.located);
                if ctx.neighbor.is_none() {
                    self.err(
                        line,
                        "distance",
                        "distance(self, neighbor) used outside a neighbor scope",
                    );
                    None
                } else if !(own_located && neighbor_located) {
                    self.err(line, "distance", "distance needs both objects to have a position state");
                    None
                } else {
                    Some(Type::Real)
                }
            }
        }
    }

    fn predicate(&mut self, e: &mut Expr, ctx: Ctx<'_>) {
        if let Some(ty) = self.expr(e, ctx) {
            if ty != Type::Bool {
                self.mismatch(
                    e,
                    ctx.line,
                    format!("type mismatch: predicate must be bool, found {ty}"),
                );
            }
        }
    }
}

/// Type of a recorder expression in a checked program.
pub fn recorder_type(program: &AbmProgram, name: &str) -> Option<Type> {
    let rec = program.recorder(name)?;
    Some(infer(program, &rec.expr, None, None))
}

/// Infers the type of an already-checked expression.
fn infer(p: &AbmProgram, e: &Expr, own: Option<&str>, neighbor: Option<&str>) -> Type {
    match e {
        Expr::Literal(Literal::Bool(_)) => Type::Bool,
        Expr::Literal(Literal::Int(_)) => Type::Int,
        Expr::Literal(Literal::Real(_)) => Type::Real,
        Expr::Literal(Literal::Str(_)) => Type::Str,
        Expr::Name(_) => Type::Real,
        Expr::State(r) => {
            let owner = match r.scope {
                Scope::SelfRef => own,
                Scope::Neighbor => neighbor,
            };
            owner
                .and_then(|o| p.object(o))
                .and_then(|o| o.state(&r.name))
                .map(|s| s.ty)
                .unwrap_or(Type::Real)
        }
        Expr::Param(n) => p.parameters.get(n).map(|x| x.value.ty()).unwrap_or(Type::Real),
        Expr::Unary { op: UnaryOp::Not, .. } => Type::Bool,
        Expr::Unary { operand, .. } => infer(p, operand, own, neighbor),
        Expr::Binary { op, lhs, rhs } => match op {
            BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul => {
                if infer(p, lhs, own, neighbor) == Type::Int && infer(p, rhs, own, neighbor) == Type::Int {
                    Type::Int
                } else {
                    Type::Real
                }
            }
            BinaryOp::Div => Type::Real,
            _ => Type::Bool,
        },
        Expr::Call { func, .. } => match func {
            Builtin::Bernoulli => Type::Bool,
            Builtin::Uniform => Type::Real,
            Builtin::Randint => Type::Int,
            Builtin::RandomPosition | Builtin::Jitter => Type::Position,
        },
        Expr::CountNeighbors { .. } | Expr::CountAll { .. } => Type::Int,
        Expr::SumAll { object, value } => infer(p, value, Some(object), None),
        Expr::Distance => Type::Real,
    }
}
