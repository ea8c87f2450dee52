//! Consistent identifier renaming across a whole program.

use crate::dsl::{AbmProgram, Expr, Statement};

/// Apply `f` to every identifier: objects, states, activities, parameters,
/// events and metrics. `f` must be injective for the result to stay valid.
pub fn rename_identifiers(p: &AbmProgram, f: &dyn Fn(&str) -> String) -> AbmProgram {
    let mut out = p.clone();
    out.parameters = p.parameters.iter().map(|(k, v)| (f(k), v.clone())).collect();
    for o in &mut out.objects {
        o.name = f(&o.name);
        for s in &mut o.states {
            s.name = f(&s.name);
            expr(&mut s.default, f);
        }
        for a in &mut o.activities {
            a.name = f(&a.name);
            stmts(&mut a.body, f);
        }
    }
    out.init.counts = p
        .init
        .counts
        .iter()
        .map(|(k, v)| {
            let mut v = v.clone();
            expr(&mut v.count, f);
            (f(k), v)
        })
        .collect();
    for s in &mut out.schedule {
        s.object = f(&s.object);
        s.activity = f(&s.activity);
        if let Some(c) = &mut s.condition {
            expr(c, f);
        }
    }
    for r in &mut out.recorders {
        r.name = f(&r.name);
        expr(&mut r.expr, f);
    }
    out
}

fn stmts(body: &mut [Statement], f: &dyn Fn(&str) -> String) {
    for s in body {
        match s {
            Statement::Assign { target, value, .. } => {
                target.name = f(&target.name);
                expr(value, f);
            }
            Statement::If {
                cond,
                then_branch,
                else_branch,
                ..
            } => {
                expr(cond, f);
                stmts(then_branch, f);
                stmts(else_branch, f);
            }
            Statement::ForNeighbor {
                object, radius, body, ..
            } => {
                *object = f(object);
                expr(radius, f);
                stmts(body, f);
            }
            Statement::Emit { event, .. } => *event = f(event),
            Statement::Todo { .. } => {}
        }
    }
}

fn expr(e: &mut Expr, f: &dyn Fn(&str) -> String) {
    match e {
        Expr::Literal(_) | Expr::Distance => {}
        Expr::Name(n) | Expr::Param(n) => *n = f(n),
        Expr::State(r) => r.name = f(&r.name),
        Expr::Unary { operand, .. } => expr(operand, f),
        Expr::Binary { lhs, rhs, .. } => {
            expr(lhs, f);
            expr(rhs, f);
        }
        Expr::Call { args, .. } => args.iter_mut().for_each(|a| expr(a, f)),
        Expr::CountNeighbors {
            object,
            radius,
            predicate,
        } => {
            *object = f(object);
            expr(radius, f);
            expr(predicate, f);
        }
        Expr::CountAll { object, predicate } => {
            *object = f(object);
            expr(predicate, f);
        }
        Expr::SumAll { object, value } => {
            *object = f(object);
            expr(value, f);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_program, print_program};

    #[test]
    fn renamed_program_still_checks() {
        let src = "\
param r = 2;
object a {
  state x: int = r;
  state at: position = random_position();
  activity go { for_neighbor a within r { neighbor.x := x + 1; } emit tick; }
}
init { a = 3; }
schedule { Conditional_Do(a, go, x < r); }
record m = count_all(a, x > 1);
";
        let p = parse_program(src).unwrap();
        let q = rename_identifiers(&p, &|s| format!("z_{s}"));
        let printed = print_program(&q);
        assert!(printed.contains("for_neighbor z_a within z_r"));
        assert_eq!(parse_program(&printed).unwrap(), q);
    }
}
