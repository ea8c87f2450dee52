//! Canonical printer. Output is a pure function of program structure:
//! parameters sorted by name, then objects in declaration order (states
//! before activities), init, schedule and recorders.

use std::fmt::Write;

use super::ast::*;

const INDENT: &str = "  ";

pub fn print_program(p: &AbmProgram) -> String {
    let mut out = String::new();
    for (name, param) in &p.parameters {
        let _ = writeln!(out, "param {name} = {};", number(param.value));
    }
    for object in &p.objects {
        if !out.is_empty() {
            out.push('\n');
        }
        print_object(&mut out, object);
    }
    if !out.is_empty() {
        out.push('\n');
    }
    out.push_str("init {\n");
    let _ = writeln!(out, "{INDENT}grid({}, {});", p.init.grid.0, p.init.grid.1);
    if let Some(seed) = p.init.seed {
        let _ = writeln!(out, "{INDENT}seed {seed};");
    }
    for (name, count) in &p.init.counts {
        let _ = writeln!(out, "{INDENT}{name} = {};", print_expr(&count.count));
    }
    out.push_str("}\n\nschedule {\n");
    for step in &p.schedule {
        let _ = writeln!(out, "{INDENT}{};", print_step(step));
    }
    out.push_str("}\n");
    if !p.recorders.is_empty() {
        out.push('\n');
    }
    for rec in &p.recorders {
        let _ = writeln!(out, "record {} = {};", rec.name, print_expr(&rec.expr));
    }
    out
}

fn print_object(out: &mut String, object: &ObjectClass) {
    let _ = writeln!(out, "object {} {{", object.name);
    for state in &object.states {
        let _ = writeln!(
            out,
            "{INDENT}state {}: {} = {};",
            state.name,
            state.ty,
            print_expr(&state.default)
        );
    }
    for (i, activity) in object.activities.iter().enumerate() {
        if i > 0 || !object.states.is_empty() {
            out.push('\n');
        }
        print_activity(out, activity, 1);
    }
    out.push_str("}\n");
}

fn print_activity(out: &mut String, activity: &Activity, depth: usize) {
    let pad = INDENT.repeat(depth);
    let _ = writeln!(out, "{pad}activity {} {{", activity.name);
    print_block(out, &activity.body, depth + 1);
    let _ = writeln!(out, "{pad}}}");
}

/// Render one activity (used by prompts and patch previews).
pub fn print_activity_source(activity: &Activity) -> String {
    let mut out = String::new();
    print_activity(&mut out, activity, 0);
    out
}

pub fn print_statements(body: &[Statement]) -> String {
    let mut out = String::new();
    print_block(&mut out, body, 0);
    out
}

fn print_block(out: &mut String, body: &[Statement], depth: usize) {
    for stmt in body {
        print_statement(out, stmt, depth);
    }
}

fn print_statement(out: &mut String, stmt: &Statement, depth: usize) {
    let pad = INDENT.repeat(depth);
    match stmt {
        Statement::Assign { target, value, .. } => {
            let _ = writeln!(out, "{pad}{} := {};", state_ref(target), print_expr(value));
        }
        Statement::If { .. } => {
            out.push_str(&pad);
            print_if(out, stmt, depth);
            out.push('\n');
        }
        Statement::ForNeighbor {
            object, radius, body, ..
        } => {
            let _ = writeln!(out, "{pad}for_neighbor {object} within {} {{", print_expr(radius));
            print_block(out, body, depth + 1);
            let _ = writeln!(out, "{pad}}}");
        }
        Statement::Emit { event, .. } => {
            let _ = writeln!(out, "{pad}emit {event};");
        }
        Statement::Todo { .. } => {
            let _ = writeln!(out, "{pad}todo;");
        }
    }
}

fn print_if(out: &mut String, stmt: &Statement, depth: usize) {
    let Statement::If {
        cond,
        then_branch,
        else_branch,
        ..
    } = stmt
    else {
        unreachable!()
    };
    let pad = INDENT.repeat(depth);
    let _ = writeln!(out, "if {} {{", print_expr(cond));
    print_block(out, then_branch, depth + 1);
    let _ = write!(out, "{pad}}}");
    match else_branch.as_slice() {
        [] => {}
        [nested @ Statement::If { .. }] => {
            out.push_str(" else ");
            print_if(out, nested, depth);
        }
        branch => {
            out.push_str(" else {\n");
            print_block(out, branch, depth + 1);
            let _ = write!(out, "{pad}}}");
        }
    }
}

pub fn print_step(step: &ScheduleStep) -> String {
    match &step.condition {
        Some(cond) => format!(
            "{}({}, {}, {})",
            step.kind.name(),
            step.object,
            step.activity,
            print_expr(cond)
        ),
        None => format!("{}({}, {})", step.kind.name(), step.object, step.activity),
    }
}

fn state_ref(r: &StateRef) -> String {
    match r.scope {
        Scope::SelfRef => r.name.clone(),
        Scope::Neighbor => format!("neighbor.{}", r.name),
    }
}

pub fn number(n: Number) -> String {
    match n {
        Number::Int(i) => i.to_string(),
        Number::Real(r) => real(r),
    }
}

fn real(r: f64) -> String {
    // `{:?}` is the shortest representation that parses back to the same value
    // and always carries a '.' or an exponent.
    format!("{r:?}")
}

pub fn print_expr(e: &Expr) -> String {
    let mut out = String::new();
    expr(&mut out, e, 0);
    out
}

const NOT_PRECEDENCE: u8 = 3;
const UNARY_PRECEDENCE: u8 = 7;

fn expr(out: &mut String, e: &Expr, min_prec: u8) {
    match e {
        Expr::Literal(lit) => match lit {
            Literal::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Literal::Int(i) => {
                let _ = write!(out, "{i}");
            }
            Literal::Real(r) => out.push_str(&real(*r)),
            Literal::Str(s) => {
                let _ = write!(out, "\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""));
            }
        },
        Expr::Name(n) | Expr::Param(n) => out.push_str(n),
        Expr::State(r) => out.push_str(&state_ref(r)),
        Expr::Unary { op, operand } => {
            let prec = match op {
                UnaryOp::Neg => UNARY_PRECEDENCE,
                UnaryOp::Not => NOT_PRECEDENCE,
            };
            let wrap = prec < min_prec;
            if wrap {
                out.push('(');
            }
            match op {
                UnaryOp::Neg => out.push('-'),
                UnaryOp::Not => out.push_str("not "),
            }
            expr(out, operand, prec);
            if wrap {
                out.push(')');
            }
        }
        Expr::Binary { op, lhs, rhs } => {
            let prec = op.precedence();
            let wrap = prec < min_prec;
            if wrap {
                out.push('(');
            }
            // Comparisons do not chain, so both sides need strictly tighter operands.
            let lhs_min = if op.is_comparison() { prec + 1 } else { prec };
            expr(out, lhs, lhs_min);
            let _ = write!(out, " {} ", op.symbol());
            expr(out, rhs, prec + 1);
            if wrap {
                out.push(')');
            }
        }
        Expr::Call { func, args } => {
            out.push_str(func.name());
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                expr(out, a, 0);
            }
            out.push(')');
        }
        Expr::CountNeighbors {
            object,
            radius,
            predicate,
        } => {
            let _ = write!(out, "count_neighbors({object}, ");
            expr(out, radius, 0);
            out.push_str(", ");
            expr(out, predicate, 0);
            out.push(')');
        }
        Expr::CountAll { object, predicate } => {
            let _ = write!(out, "count_all({object}, ");
            expr(out, predicate, 0);
            out.push(')');
        }
        Expr::SumAll { object, value } => {
            let _ = write!(out, "sum_all({object}, ");
            expr(out, value, 0);
            out.push(')');
        }
        Expr::Distance => out.push_str("distance(self, neighbor)"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parser::parse_expression;

    fn roundtrip(src: &str) -> String {
        print_expr(&parse_expression(src).unwrap())
    }

    #[test]
    fn minimal_parentheses() {
        assert_eq!(roundtrip("(a + b) * c"), "(a + b) * c");
        assert_eq!(roundtrip("a - (b - c)"), "a - (b - c)");
        assert_eq!(roundtrip("(a - b) - c"), "a - b - c");
        assert_eq!(roundtrip("not (a and b)"), "not (a and b)");
        assert_eq!(roundtrip("(a < b) == c"), "(a < b) == c");
        assert_eq!(roundtrip("-(a + 1)"), "-(a + 1)");
        assert_eq!(roundtrip("x - -2.5"), "x - -2.5");
    }

    #[test]
    fn reals_keep_their_kind() {
        assert_eq!(roundtrip("2.0"), "2.0");
        assert_eq!(roundtrip("1e-7"), "1e-7");
        assert_eq!(roundtrip("0.1"), "0.1");
    }
}
