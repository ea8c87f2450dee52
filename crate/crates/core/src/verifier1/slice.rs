//! Backward slicing of recorded metrics.
//!
//! The slice is flow-insensitive: any statement that writes a state in the
//! closure counts, wherever it sits. A statement's reads include the guards
//! of its enclosing `if` / `for_neighbor` statements, the position states
//! implied by neighbour scopes, the schedule conditions that decide whether
//! its activity runs, and the instance counts of the classes it iterates.
//!
//! The random stream is one shared pseudo-state. A statement reads it when it
//! draws a number or when its activity is scheduled in a random order; every
//! statement that draws a number writes it, as do the conditions of
//! `Random_Conditional_Do` steps (they decide how many numbers each shuffle
//! consumes). A slice that reaches the stream is marked `stochastic`.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::dsl::{AbmProgram, Expr, ObjectClass, ScheduleKind, Scope, Statement};

/// A statement addressed by its path through nested statement lists:
/// `[i0]` for a top-level statement, `[i0, branch, i1]` for statement `i1`
/// of branch `branch` (0 = then / loop body, 1 = else) of statement `i0`,
/// and so on.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct StatementId {
    pub object: String,
    pub activity: String,
    pub path: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct StateKey {
    pub object: String,
    pub state: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SliceResult {
    pub metric: String,
    pub statements: BTreeSet<StatementId>,
    pub states: BTreeSet<StateKey>,
    pub parameters: BTreeSet<String>,
    /// The metric depends on the random stream.
    pub stochastic: bool,
}

impl SliceResult {
    /// Activities holding at least one sliced statement, as `(object, activity)`.
    pub fn activities(&self) -> BTreeSet<(String, String)> {
        self.statements
            .iter()
            .map(|s| (s.object.clone(), s.activity.clone()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SliceError {
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Dep {
    State(String, String),
    Param(String),
    /// Number of instances of a class.
    Count(String),
    Rng,
}

struct Fact {
    id: StatementId,
    writes: Option<Dep>,
    draws: bool,
    reads: BTreeSet<Dep>,
}

struct Reader<'p> {
    program: &'p AbmProgram,
}

impl Reader<'_> {
    fn position(&self, class: &str, out: &mut BTreeSet<Dep>) {
        if let Some(loc) = self.program.object(class).and_then(ObjectClass::location_state) {
            out.insert(Dep::State(class.to_string(), loc.name.clone()));
        }
    }

    fn expr(&self, e: &Expr, own: Option<&str>, neighbor: Option<&str>, out: &mut BTreeSet<Dep>) {
        match e {
            Expr::Literal(_) | Expr::Name(_) => {}
            Expr::State(r) => {
                let owner = match r.scope {
                    Scope::SelfRef => own,
                    Scope::Neighbor => neighbor,
                };
                if let Some(o) = owner {
                    out.insert(Dep::State(o.to_string(), r.name.clone()));
                }
            }
            Expr::Param(p) => {
                out.insert(Dep::Param(p.clone()));
            }
            Expr::Unary { operand, .. } => self.expr(operand, own, neighbor, out),
            Expr::Binary { lhs, rhs, .. } => {
                self.expr(lhs, own, neighbor, out);
                self.expr(rhs, own, neighbor, out);
            }
            Expr::Call { args, .. } => {
                out.insert(Dep::Rng);
                for a in args {
                    self.expr(a, own, neighbor, out);
                }
            }
            Expr::CountNeighbors {
                object,
                radius,
                predicate,
            } => {
                if let Some(o) = own {
                    self.position(o, out);
                }
                self.position(object, out);
                out.insert(Dep::Count(object.clone()));
                self.expr(radius, own, neighbor, out);
                self.expr(predicate, own, Some(object), out);
            }
            Expr::CountAll { object, predicate } => {
                out.insert(Dep::Count(object.clone()));
                self.expr(predicate, Some(object), None, out);
            }
            Expr::SumAll { object, value } => {
                out.insert(Dep::Count(object.clone()));
                self.expr(value, Some(object), None, out);
            }
            Expr::Distance => {
                if let Some(o) = own {
                    self.position(o, out);
                }
                if let Some(n) = neighbor {
                    self.position(n, out);
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn body(
        &self,
        body: &[Statement],
        object: &str,
        activity: &str,
        neighbor: Option<&str>,
        prefix: &[usize],
        inherited: &BTreeSet<Dep>,
        out: &mut Vec<Fact>,
    ) {
        for (i, stmt) in body.iter().enumerate() {
            let mut path = prefix.to_vec();
            path.push(i);
            let id = StatementId {
                object: object.to_string(),
                activity: activity.to_string(),
                path: path.clone(),
            };
            let mut own_reads = BTreeSet::new();
            let (writes, draws) = match stmt {
                Statement::Assign { target, value, .. } => {
                    self.expr(value, Some(object), neighbor, &mut own_reads);
                    let owner = match target.scope {
                        Scope::SelfRef => Some(object),
                        Scope::Neighbor => neighbor,
                    };
                    (
                        owner.map(|o| Dep::State(o.to_string(), target.name.clone())),
                        value.draws_randomness(),
                    )
                }
                Statement::If { cond, .. } => {
                    self.expr(cond, Some(object), neighbor, &mut own_reads);
                    (None, cond.draws_randomness())
                }
                Statement::ForNeighbor {
                    object: target, radius, ..
                } => {
                    self.expr(radius, Some(object), neighbor, &mut own_reads);
                    self.position(object, &mut own_reads);
                    self.position(target, &mut own_reads);
                    own_reads.insert(Dep::Count(target.clone()));
                    (None, radius.draws_randomness())
                }
                Statement::Emit { .. } | Statement::Todo { .. } => (None, false),
            };
            let mut reads = inherited.clone();
            reads.extend(own_reads);
            out.push(Fact {
                id,
                writes,
                draws,
                reads: reads.clone(),
            });
            match stmt {
                Statement::If {
                    then_branch,
                    else_branch,
                    ..
                } => {
                    for (branch, list) in [then_branch, else_branch].into_iter().enumerate() {
                        let mut p = path.clone();
                        p.push(branch);
                        self.body(list, object, activity, neighbor, &p, &reads, out);
                    }
                }
                Statement::ForNeighbor {
                    object: target,
                    body: inner,
                    ..
                } => {
                    let mut p = path.clone();
                    p.push(0);
                    self.body(inner, object, activity, Some(target), &p, &reads, out);
                }
                _ => {}
            }
        }
    }
}

/// Statements, states and parameters that can influence `metric`.
pub fn backward_slice(program: &AbmProgram, metric: &str) -> Result<SliceResult, SliceError> {
    let recorder = program
        .recorder(metric)
        .ok_or_else(|| SliceError::UnknownMetric(metric.to_string()))?;
    let reader = Reader { program };

    let mut facts = Vec::new();
    for object in &program.objects {
        for activity in &object.activities {
            let mut step_reads = BTreeSet::new();
            let mut scheduled = false;
            for step in program.steps_for(&object.name, &activity.name) {
                scheduled = true;
                if let Some(c) = &step.condition {
                    reader.expr(c, Some(&object.name), None, &mut step_reads);
                }
                if step.kind.is_random() {
                    step_reads.insert(Dep::Rng);
                }
            }
            if scheduled {
                step_reads.insert(Dep::Count(object.name.clone()));
            }
            reader.body(
                &activity.body,
                &object.name,
                &activity.name,
                None,
                &[],
                &step_reads,
                &mut facts,
            );
        }
    }

    // Reads that feed the random stream outside statements.
    let mut rng_sources = BTreeSet::new();
    for step in &program.schedule {
        if step.kind == ScheduleKind::RandomConditionalDo {
            if let Some(c) = &step.condition {
                reader.expr(c, Some(&step.object), None, &mut rng_sources);
            }
            rng_sources.insert(Dep::Count(step.object.clone()));
        }
    }
    for object in &program.objects {
        for s in &object.states {
            if s.default.draws_randomness() {
                reader.expr(&s.default, None, None, &mut rng_sources);
                rng_sources.insert(Dep::Count(object.name.clone()));
            }
        }
    }

    let mut deps = BTreeSet::new();
    reader.expr(&recorder.expr, None, None, &mut deps);
    let mut included = vec![false; facts.len()];
    loop {
        let before = (deps.len(), included.iter().filter(|b| **b).count());
        // Initial values and instance counts.
        let mut extra = BTreeSet::new();
        for d in &deps {
            match d {
                Dep::State(o, s) => {
                    if let Some(decl) = program.object(o).and_then(|c| c.state(s)) {
                        reader.expr(&decl.default, None, None, &mut extra);
                        extra.insert(Dep::Count(o.clone()));
                    }
                }
                Dep::Count(o) => {
                    if let Some(c) = program.init.counts.get(o) {
                        reader.expr(&c.count, None, None, &mut extra);
                    }
                }
                Dep::Rng => extra.extend(rng_sources.iter().cloned()),
                Dep::Param(_) => {}
            }
        }
        deps.extend(extra);
        for (i, fact) in facts.iter().enumerate() {
            if included[i] {
                continue;
            }
            let hit =
                fact.writes.as_ref().is_some_and(|w| deps.contains(w)) || (fact.draws && deps.contains(&Dep::Rng));
            if hit {
                included[i] = true;
                deps.extend(fact.reads.iter().cloned());
            }
        }
        if before == (deps.len(), included.iter().filter(|b| **b).count()) {
            break;
        }
    }

    let mut statements = BTreeSet::new();
    for (fact, inc) in facts.iter().zip(&included) {
        if *inc {
            // The statement and every enclosing compound statement.
            let path = &fact.id.path;
            let mut len = 1;
            while len <= path.len() {
                statements.insert(StatementId {
                    path: path[..len].to_vec(),
                    ..fact.id.clone()
                });
                len += 2;
            }
        }
    }
    let mut states = BTreeSet::new();
    let mut parameters = BTreeSet::new();
    let mut stochastic = false;
    for d in deps {
        match d {
            Dep::State(object, state) => {
                states.insert(StateKey { object, state });
            }
            Dep::Param(p) => {
                parameters.insert(p);
            }
            Dep::Rng => stochastic = true,
            Dep::Count(_) => {}
        }
    }
    Ok(SliceResult {
        metric: metric.to_string(),
        statements,
        states,
        parameters,
        stochastic,
    })
}

/// Copy of `program` with the given statements (and everything nested in
/// them) removed.
pub fn delete_statements(program: &AbmProgram, remove: &BTreeSet<StatementId>) -> AbmProgram {
    fn prune(
        body: &[Statement],
        object: &str,
        activity: &str,
        prefix: &[usize],
        remove: &BTreeSet<StatementId>,
    ) -> Vec<Statement> {
        let mut out = Vec::new();
        for (i, stmt) in body.iter().enumerate() {
            let mut path = prefix.to_vec();
            path.push(i);
            let id = StatementId {
                object: object.to_string(),
                activity: activity.to_string(),
                path: path.clone(),
            };
            if remove.contains(&id) {
                continue;
            }
            let mut stmt = stmt.clone();
            let child = |branch: usize| {
                let mut p = path.clone();
                p.push(branch);
                p
            };
            match &mut stmt {
                Statement::If {
                    then_branch,
                    else_branch,
                    ..
                } => {
                    *then_branch = prune(then_branch, object, activity, &child(0), remove);
                    *else_branch = prune(else_branch, object, activity, &child(1), remove);
                }
                Statement::ForNeighbor { body, .. } => {
                    *body = prune(body, object, activity, &child(0), remove);
                }
                _ => {}
            }
            out.push(stmt);
        }
        out
    }
    let mut p = program.clone();
    for object in &mut p.objects {
        let name = object.name.clone();
        for activity in &mut object.activities {
            activity.body = prune(&activity.body, &name, &activity.name, &[], remove);
        }
    }
    p
}

/// Every statement of the program, pre-order.
pub fn all_statements(program: &AbmProgram) -> Vec<StatementId> {
    fn walk(body: &[Statement], object: &str, activity: &str, prefix: &[usize], out: &mut Vec<StatementId>) {
        for (i, stmt) in body.iter().enumerate() {
            let mut path = prefix.to_vec();
            path.push(i);
            out.push(StatementId {
                object: object.to_string(),
                activity: activity.to_string(),
                path: path.clone(),
            });
            for (branch, list) in stmt.children().into_iter().enumerate() {
                let mut p = path.clone();
                p.push(branch);
                walk(list, object, activity, &p, out);
            }
        }
    }
    let mut out = Vec::new();
    for o in &program.objects {
        for a in &o.activities {
            walk(&a.body, &o.name, &a.name, &[], &mut out);
        }
    }
    out
}
