//! Whether a solution patch changes the model in a way that matters.
//!
//! A patch is substantive when it makes at least one structural change
//! (anything other than `set_parameter`) and every state or activity it adds
//! or rewrites takes part in the verification run. An activity takes part
//! when it is scheduled and either ran at least once or belongs to the
//! backward slice of a recorded metric; a state takes part when it is in
//! such a slice or is read or written by an activity that ran.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::dsl::{AbmProgram, Directive, Expr, Scope, Statement};
use crate::simulator::SimulationTrace;
use crate::verifier1::backward_slice;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SubstantivenessReport {
    pub added_states: Vec<String>,
    pub removed_states: Vec<String>,
    pub added_activities: Vec<String>,
    pub removed_activities: Vec<String>,
    pub rewritten_activities: Vec<String>,
    pub schedule_changes: usize,
    pub parameter_changes: usize,
    /// Added or rewritten items with no evidence of taking part in the run.
    pub unreachable: Vec<String>,
    pub verdict: bool,
}

fn states_touched(p: &AbmProgram, object: &str, activity: &str) -> BTreeSet<(String, String)> {
    let mut out = BTreeSet::new();
    let Some(a) = p.object(object).and_then(|o| o.activity(activity)) else {
        return out;
    };
    fn expr(e: &Expr, own: &str, nb: Option<&str>, out: &mut BTreeSet<(String, String)>) {
        match e {
            Expr::State(r) => {
                let class = match r.scope {
                    Scope::SelfRef => Some(own),
                    Scope::Neighbor => nb,
                };
                if let Some(c) = class {
                    out.insert((c.to_string(), r.name.clone()));
                }
            }
            Expr::CountNeighbors {
                object,
                radius,
                predicate,
            } => {
                expr(radius, own, nb, out);
                expr(predicate, own, Some(object), out);
            }
            Expr::CountAll { object, predicate } => expr(predicate, object, None, out),
            Expr::SumAll { object, value } => expr(value, object, None, out),
            other => other.children().into_iter().for_each(|c| expr(c, own, nb, out)),
        }
    }
    fn body(b: &[Statement], own: &str, nb: Option<&str>, out: &mut BTreeSet<(String, String)>) {
        for s in b {
            match s {
                Statement::Assign { target, value, .. } => {
                    let class = match target.scope {
                        Scope::SelfRef => Some(own),
                        Scope::Neighbor => nb,
                    };
                    if let Some(c) = class {
                        out.insert((c.to_string(), target.name.clone()));
                    }
                    expr(value, own, nb, out);
                }
                Statement::If {
                    cond,
                    then_branch,
                    else_branch,
                    ..
                } => {
                    expr(cond, own, nb, out);
                    body(then_branch, own, nb, out);
                    body(else_branch, own, nb, out);
                }
                Statement::ForNeighbor {
                    object: target,
                    radius,
                    body: inner,
                    ..
                } => {
                    expr(radius, own, nb, out);
                    body(inner, own, Some(target), out);
                }
                Statement::Emit { .. } | Statement::Todo { .. } => {}
            }
        }
    }
    body(&a.body, object, None, &mut out);
    out
}

/// Judge `patch`, already applied to give `program`, using `trace` from
/// running `program`.
pub fn assess_substantiveness(
    patch: &[Directive],
    program: &AbmProgram,
    trace: &SimulationTrace,
) -> SubstantivenessReport {
    let mut r = SubstantivenessReport {
        added_states: Vec::new(),
        removed_states: Vec::new(),
        added_activities: Vec::new(),
        removed_activities: Vec::new(),
        rewritten_activities: Vec::new(),
        schedule_changes: 0,
        parameter_changes: 0,
        unreachable: Vec::new(),
        verdict: false,
    };
    let mut check_states: Vec<(String, String)> = Vec::new();
    let mut check_activities: Vec<(String, String)> = Vec::new();
    for d in patch {
        match d {
            Directive::AddState { object, name, .. } => {
                r.added_states.push(format!("{object}.{name}"));
                check_states.push((object.clone(), name.clone()));
            }
            Directive::RemoveState { object, name } => r.removed_states.push(format!("{object}.{name}")),
            Directive::AddActivity { object, name, .. } => {
                r.added_activities.push(format!("{object}.{name}"));
                check_activities.push((object.clone(), name.clone()));
            }
            Directive::ReplaceActivityBody { object, name, .. } => {
                r.rewritten_activities.push(format!("{object}.{name}"));
                check_activities.push((object.clone(), name.clone()));
            }
            Directive::RemoveActivity { object, name } => r.removed_activities.push(format!("{object}.{name}")),
            Directive::AddScheduleStep { .. } | Directive::RemoveScheduleStep { .. } => r.schedule_changes += 1,
            Directive::SetParameter { .. } => r.parameter_changes += 1,
        }
    }

    let mut sliced_statements = BTreeSet::new();
    let mut sliced_states = BTreeSet::new();
    for rec in &program.recorders {
        if let Ok(s) = backward_slice(program, &rec.name) {
            sliced_statements.extend(s.activities());
            sliced_states.extend(s.states.into_iter().map(|k| (k.object, k.state)));
        }
    }
    let ran = |o: &str, a: &str| program.steps_for(o, a).next().is_some() && trace.activation_count(o, a) > 0;
    let mut touched_by_run = BTreeSet::new();
    for o in &program.objects {
        for a in &o.activities {
            if ran(&o.name, &a.name) {
                touched_by_run.extend(states_touched(program, &o.name, &a.name));
            }
        }
    }

    for (o, a) in &check_activities {
        let scheduled = program.steps_for(o, a).next().is_some();
        let exists = program.object(o).and_then(|c| c.activity(a)).is_some();
        let evidence = exists && scheduled && (ran(o, a) || sliced_statements.contains(&(o.clone(), a.clone())));
        if !evidence {
            r.unreachable.push(format!("{o}.{a}"));
        }
    }
    for key in &check_states {
        if !(sliced_states.contains(key) || touched_by_run.contains(key)) {
            r.unreachable.push(format!("{}.{}", key.0, key.1));
        }
    }
    let structural = patch.iter().any(|d| !d.is_parameter_only());
    r.verdict = structural && r.unreachable.is_empty();
    r
}
