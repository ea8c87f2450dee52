//! Deterministic execution of checked `.abm` programs.
//!
//! Instances live on a toroidal `W x H` grid; neighbourhoods use Chebyshev
//! distance with wrap-around. A single [`SplitMix64`] stream is consumed in
//! program order: state defaults at initialisation (objects in declaration
//! order, instances by id, states in declaration order), then each
//! iteration's schedule steps in order. Within a step:
//!
//! - `Do` runs every instance in ascending id order;
//! - `Random_Do` shuffles all ids (Fisher-Yates) and runs them in that order;
//! - `Conditional_Do` walks ids in ascending order and runs an instance only
//!   if the condition holds at that moment;
//! - `Random_Conditional_Do` filters ids on the state before the step, then
//!   shuffles the survivors.
//!
//! `and` / `or` short-circuit, so the right operand draws no random numbers
//! when it is not evaluated. `bernoulli(p)` always consumes one draw, even
//! for `p` of 0 or 1.

mod rng;
mod trace;

use std::collections::{BTreeMap, HashMap};

use indexmap::IndexMap;
use thiserror::Error;

use crate::dsl::{
    walk_statements, AbmProgram, Activity, BinaryOp, Builtin, Expr, Literal, Number, ScheduleKind, Scope, StateRef,
    Statement, Type, UnaryOp,
};

pub use rng::SplitMix64;
pub use trace::{snapshot_metrics, InstanceSnapshot, SimulationTrace, StateValue};

/// Where in the run a fault happened.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FaultSite {
    Init { object: String },
    Activity { object: String, activity: String },
    Condition { object: String, activity: String },
    Recorder { metric: String },
}

impl std::fmt::Display for FaultSite {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FaultSite::Init { object } => write!(f, "initialising {object}"),
            FaultSite::Activity { object, activity } => write!(f, "{object}.{activity}"),
            FaultSite::Condition { object, activity } => {
                write!(f, "schedule condition of {object}.{activity}")
            }
            FaultSite::Recorder { metric } => write!(f, "recorder {metric}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("runtime fault at step {step} in {site}: {reason}")]
pub struct RuntimeFault {
    pub step: u64,
    pub site: FaultSite,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Value {
    Bool(bool),
    Int(i64),
    Real(f64),
    Pos(i64, i64),
}

impl Value {
    fn num(self) -> f64 {
        match self {
            Value::Int(i) => i as f64,
            Value::Real(r) => r,
            Value::Bool(b) => f64::from(u8::from(b)),
            Value::Pos(..) => f64::NAN,
        }
    }

    fn bool(self) -> Result<bool, String> {
        match self {
            Value::Bool(b) => Ok(b),
            other => Err(format!("expected a bool, found {other:?}")),
        }
    }

    fn to_state(self) -> StateValue {
        match self {
            Value::Bool(b) => StateValue::Bool(b),
            Value::Int(i) => StateValue::Int(i),
            Value::Real(r) => StateValue::Real(r),
            Value::Pos(x, y) => StateValue::Position([x, y]),
        }
    }
}

impl From<Number> for Value {
    fn from(n: Number) -> Self {
        match n {
            Number::Int(i) => Value::Int(i),
            Number::Real(r) => Value::Real(r),
        }
    }
}

struct ClassRt<'p> {
    name: &'p str,
    index: HashMap<&'p str, usize>,
    types: Vec<Type>,
    location: Option<usize>,
    activities: HashMap<&'p str, &'p Activity>,
}

#[derive(Clone, Copy)]
struct Frame {
    own: Option<(usize, usize)>,
    neighbor: Option<(usize, usize)>,
}

const NO_FRAME: Frame = Frame {
    own: None,
    neighbor: None,
};

struct Engine<'p> {
    program: &'p AbmProgram,
    classes: Vec<ClassRt<'p>>,
    class_index: HashMap<&'p str, usize>,
    params: HashMap<&'p str, Value>,
    grid: (i64, i64),
    rng: SplitMix64,
    world: Vec<Vec<Vec<Value>>>,
    step: u64,
    events: BTreeMap<String, Vec<u64>>,
    activations: BTreeMap<String, u64>,
}

/// Run `program` for `steps` iterations from `seed`.
pub fn simulate(program: &AbmProgram, seed: u64, steps: u64) -> Result<SimulationTrace, RuntimeFault> {
    let mut engine = Engine::new(program, seed, steps);
    engine.initialise()?;
    let mut series: BTreeMap<String, Vec<f64>> = program
        .recorders
        .iter()
        .map(|r| (r.name.clone(), Vec::with_capacity(steps as usize)))
        .collect();
    for step in 0..steps {
        engine.step = step;
        for s in &program.schedule {
            engine.run_step(s)?;
        }
        for rec in &program.recorders {
            let v = engine.eval(&rec.expr, NO_FRAME).map_err(|reason| {
                engine.fault_at(
                    FaultSite::Recorder {
                        metric: rec.name.clone(),
                    },
                    reason,
                )
            })?;
            series.get_mut(&rec.name).expect("recorder series").push(v.num());
        }
    }
    Ok(SimulationTrace {
        seed,
        steps,
        series,
        events: engine.events.clone(),
        final_state: engine.snapshot(),
        activations: engine.activations.clone(),
    })
}

impl<'p> Engine<'p> {
    fn new(program: &'p AbmProgram, seed: u64, steps: u64) -> Self {
        let classes: Vec<ClassRt<'p>> = program
            .objects
            .iter()
            .map(|o| ClassRt {
                name: &o.name,
                index: o.states.iter().enumerate().map(|(i, s)| (s.name.as_str(), i)).collect(),
                types: o.states.iter().map(|s| s.ty).collect(),
                location: o.states.iter().position(|s| s.ty == Type::Position),
                activities: o.activities.iter().map(|a| (a.name.as_str(), a)).collect(),
            })
            .collect();
        let class_index = classes.iter().enumerate().map(|(i, c)| (c.name, i)).collect();
        let mut activations = BTreeMap::new();
        for o in &program.objects {
            for a in &o.activities {
                activations.insert(format!("{}.{}", o.name, a.name), 0);
            }
        }
        Engine {
            program,
            classes,
            class_index,
            params: program
                .parameters
                .iter()
                .map(|(k, v)| (k.as_str(), Value::from(v.value)))
                .collect(),
            grid: program.init.grid,
            rng: SplitMix64::new(seed),
            world: Vec::new(),
            step: 0,
            events: program
                .event_names()
                .into_iter()
                .map(|e| (e, vec![0; steps as usize]))
                .collect(),
            activations,
        }
    }

    fn fault_at(&self, site: FaultSite, reason: String) -> RuntimeFault {
        RuntimeFault {
            step: self.step,
            site,
            reason,
        }
    }

    fn initialise(&mut self) -> Result<(), RuntimeFault> {
        for object in &self.program.objects {
            let site = || FaultSite::Init {
                object: object.name.clone(),
            };
            let count = match self.program.init.counts.get(&object.name) {
                Some(c) => self.eval(&c.count, NO_FRAME).map_err(|r| self.fault_at(site(), r))?,
                None => Value::Int(0),
            };
            let n = match count {
                Value::Int(n) if n >= 0 => n as usize,
                other => {
                    return Err(self.fault_at(
                        site(),
                        format!("instance count must be a non-negative int, found {other:?}"),
                    ))
                }
            };
            let mut instances = Vec::with_capacity(n);
            for _ in 0..n {
                let mut values = Vec::with_capacity(object.states.len());
                for state in &object.states {
                    let v = self
                        .eval(&state.default, NO_FRAME)
                        .map_err(|r| self.fault_at(site(), r))?;
                    values.push(coerce(v, state.ty));
                }
                instances.push(values);
            }
            self.world.push(instances);
        }
        Ok(())
    }

    fn run_step(&mut self, step: &crate::dsl::ScheduleStep) -> Result<(), RuntimeFault> {
        let Some(&class) = self.class_index.get(step.object.as_str()) else {
            return Ok(());
        };
        let Some(activity) = self.classes[class].activities.get(step.activity.as_str()).copied() else {
            return Ok(());
        };
        let n = self.world[class].len();
        let cond_site = || FaultSite::Condition {
            object: step.object.clone(),
            activity: step.activity.clone(),
        };
        let check = |engine: &mut Self, id: usize| -> Result<bool, RuntimeFault> {
            match &step.condition {
                None => Ok(true),
                Some(c) => {
                    let frame = Frame {
                        own: Some((class, id)),
                        neighbor: None,
                    };
                    engine
                        .eval(c, frame)
                        .and_then(Value::bool)
                        .map_err(|r| engine.fault_at(cond_site(), r))
                }
            }
        };
        let mut order: Vec<usize> = (0..n).collect();
        match step.kind {
            ScheduleKind::Do | ScheduleKind::ConditionalDo => {}
            ScheduleKind::RandomDo => self.rng.shuffle(&mut order),
            ScheduleKind::RandomConditionalDo => {
                let mut kept = Vec::with_capacity(n);
                for id in order {
                    if check(self, id)? {
                        kept.push(id);
                    }
                }
                order = kept;
                self.rng.shuffle(&mut order);
            }
        }
        let key = format!("{}.{}", step.object, step.activity);
        for id in order {
            if step.kind == ScheduleKind::ConditionalDo && !check(self, id)? {
                continue;
            }
            *self.activations.entry(key.clone()).or_insert(0) += 1;
            let frame = Frame {
                own: Some((class, id)),
                neighbor: None,
            };
            self.block(&activity.body, frame).map_err(|reason| {
                self.fault_at(
                    FaultSite::Activity {
                        object: step.object.clone(),
                        activity: step.activity.clone(),
                    },
                    reason,
                )
            })?;
        }
        Ok(())
    }

    fn block(&mut self, body: &[Statement], frame: Frame) -> Result<(), String> {
        for stmt in body {
            self.statement(stmt, frame)?;
        }
        Ok(())
    }

    fn statement(&mut self, stmt: &Statement, frame: Frame) -> Result<(), String> {
        match stmt {
            Statement::Assign { target, value, .. } => {
                let v = self.eval(value, frame)?;
                let (class, id, slot) = self.resolve(target, frame)?;
                let ty = self.classes[class].types[slot];
                self.world[class][id][slot] = coerce(v, ty);
            }
            Statement::If {
                cond,
                then_branch,
                else_branch,
                ..
            } => {
                if self.eval(cond, frame)?.bool()? {
                    self.block(then_branch, frame)?;
                } else {
                    self.block(else_branch, frame)?;
                }
            }
            Statement::ForNeighbor {
                object, radius, body, ..
            } => {
                let r = self.eval(radius, frame)?.num();
                let target = self.class_of(object)?;
                for j in self.neighbors(frame, target, r)? {
                    let inner = Frame {
                        own: frame.own,
                        neighbor: Some((target, j)),
                    };
                    self.block(body, inner)?;
                }
            }
            Statement::Emit { event, .. } => {
                let step = self.step as usize;
                if let Some(counts) = self.events.get_mut(event) {
                    counts[step] += 1;
                }
            }
            Statement::Todo { .. } => {}
        }
        Ok(())
    }

    fn class_of(&self, object: &str) -> Result<usize, String> {
        self.class_index
            .get(object)
            .copied()
            .ok_or_else(|| format!("unknown object `{object}`"))
    }

    fn resolve(&self, r: &StateRef, frame: Frame) -> Result<(usize, usize, usize), String> {
        let (class, id) = match r.scope {
            Scope::SelfRef => frame.own,
            Scope::Neighbor => frame.neighbor,
        }
        .ok_or_else(|| format!("state `{}` read without an instance in scope", r.name))?;
        let slot = *self.classes[class]
            .index
            .get(r.name.as_str())
            .ok_or_else(|| format!("unknown state `{}` of object {}", r.name, self.classes[class].name))?;
        Ok((class, id, slot))
    }

    fn position(&self, class: usize, id: usize) -> Result<(i64, i64), String> {
        let slot = self.classes[class]
            .location
            .ok_or_else(|| format!("object {} has no position state", self.classes[class].name))?;
        match self.world[class][id][slot] {
            Value::Pos(x, y) => Ok((x, y)),
            other => Err(format!("position state holds {other:?}")),
        }
    }

    fn distance(&self, a: (i64, i64), b: (i64, i64)) -> i64 {
        let wrap = |d: i64, size: i64| {
            let d = d.rem_euclid(size);
            d.min(size - d)
        };
        wrap(a.0 - b.0, self.grid.0).max(wrap(a.1 - b.1, self.grid.1))
    }

    /// Instances of `target` within Chebyshev distance `radius` of the
    /// executing instance, excluding itself, in ascending id order.
    fn neighbors(&self, frame: Frame, target: usize, radius: f64) -> Result<Vec<usize>, String> {
        let (own_class, own_id) = frame.own.ok_or("neighbour query without an instance in scope")?;
        let here = self.position(own_class, own_id)?;
        let mut out = Vec::new();
        for j in 0..self.world[target].len() {
            if target == own_class && j == own_id {
                continue;
            }
            if (self.distance(here, self.position(target, j)?) as f64) <= radius {
                out.push(j);
            }
        }
        Ok(out)
    }

    fn eval(&mut self, e: &Expr, frame: Frame) -> Result<Value, String> {
        Ok(match e {
            Expr::Literal(lit) => match lit {
                Literal::Bool(b) => Value::Bool(*b),
                Literal::Int(i) => Value::Int(*i),
                Literal::Real(r) => Value::Real(*r),
                Literal::Str(_) => return Err("string values cannot be evaluated".into()),
            },
            Expr::Name(n) => return Err(format!("unresolved name `{n}`")),
            Expr::State(r) => {
                let (class, id, slot) = self.resolve(r, frame)?;
                self.world[class][id][slot]
            }
            Expr::Param(p) => *self
                .params
                .get(p.as_str())
                .ok_or_else(|| format!("unknown parameter `{p}`"))?,
            Expr::Unary { op, operand } => {
                let v = self.eval(operand, frame)?;
                match (op, v) {
                    (UnaryOp::Neg, Value::Int(i)) => Value::Int(i.checked_neg().ok_or("integer overflow")?),
                    (UnaryOp::Neg, Value::Real(r)) => Value::Real(-r),
                    (UnaryOp::Not, Value::Bool(b)) => Value::Bool(!b),
                    _ => return Err(format!("operator {op:?} does not apply to {v:?}")),
                }
            }
            Expr::Binary { op, lhs, rhs } => return self.binary(*op, lhs, rhs, frame),
            Expr::Call { func, args } => return self.call(*func, args, frame),
            Expr::CountNeighbors {
                object,
                radius,
                predicate,
            } => {
                let r = self.eval(radius, frame)?.num();
                let target = self.class_of(object)?;
                let mut n = 0i64;
                for j in self.neighbors(frame, target, r)? {
                    let inner = Frame {
                        own: frame.own,
                        neighbor: Some((target, j)),
                    };
                    if self.eval(predicate, inner)?.bool()? {
                        n += 1;
                    }
                }
                Value::Int(n)
            }
            Expr::CountAll { object, predicate } => {
                let target = self.class_of(object)?;
                let mut n = 0i64;
                for j in 0..self.world[target].len() {
                    let inner = Frame {
                        own: Some((target, j)),
                        neighbor: None,
                    };
                    if self.eval(predicate, inner)?.bool()? {
                        n += 1;
                    }
                }
                Value::Int(n)
            }
            Expr::SumAll { object, value } => {
                let target = self.class_of(object)?;
                let mut int_sum = Some(0i64);
                let mut real_sum = 0.0;
                for j in 0..self.world[target].len() {
                    let inner = Frame {
                        own: Some((target, j)),
                        neighbor: None,
                    };
                    let v = self.eval(value, inner)?;
                    int_sum = match (int_sum, v) {
                        (Some(acc), Value::Int(i)) => Some(acc.checked_add(i).ok_or("integer overflow")?),
                        _ => None,
                    };
                    real_sum += v.num();
                }
                // Int-typed values are always Int at runtime, so this matches the static type.
                match int_sum {
                    Some(i) => Value::Int(i),
                    None => Value::Real(real_sum),
                }
            }
            Expr::Distance => {
                let (oc, oi) = frame.own.ok_or("distance without an instance in scope")?;
                let (nc, ni) = frame.neighbor.ok_or("distance without a neighbour in scope")?;
                let d = self.distance(self.position(oc, oi)?, self.position(nc, ni)?);
                Value::Real(d as f64)
            }
        })
    }

    fn binary(&mut self, op: BinaryOp, lhs: &Expr, rhs: &Expr, frame: Frame) -> Result<Value, String> {
        let l = self.eval(lhs, frame)?;
        match op {
            BinaryOp::And if !l.bool()? => return Ok(Value::Bool(false)),
            BinaryOp::Or if l.bool()? => return Ok(Value::Bool(true)),
            BinaryOp::And | BinaryOp::Or => return Ok(Value::Bool(self.eval(rhs, frame)?.bool()?)),
            _ => {}
        }
        let r = self.eval(rhs, frame)?;
        let overflow = || "integer overflow".to_string();
        Ok(match (op, l, r) {
            (BinaryOp::Add, Value::Int(a), Value::Int(b)) => Value::Int(a.checked_add(b).ok_or_else(overflow)?),
            (BinaryOp::Sub, Value::Int(a), Value::Int(b)) => Value::Int(a.checked_sub(b).ok_or_else(overflow)?),
            (BinaryOp::Mul, Value::Int(a), Value::Int(b)) => Value::Int(a.checked_mul(b).ok_or_else(overflow)?),
            (BinaryOp::Add, ..) => Value::Real(l.num() + r.num()),
            (BinaryOp::Sub, ..) => Value::Real(l.num() - r.num()),
            (BinaryOp::Mul, ..) => Value::Real(l.num() * r.num()),
            (BinaryOp::Div, ..) => {
                if r.num() == 0.0 {
                    return Err("division by zero".into());
                }
                Value::Real(l.num() / r.num())
            }
            (BinaryOp::Eq | BinaryOp::Ne, ..) => {
                let same = match (l, r) {
                    (Value::Bool(a), Value::Bool(b)) => a == b,
                    (Value::Pos(ax, ay), Value::Pos(bx, by)) => ax == bx && ay == by,
                    (Value::Int(a), Value::Int(b)) => a == b,
                    _ => l.num() == r.num(),
                };
                Value::Bool(if op == BinaryOp::Eq { same } else { !same })
            }
            (BinaryOp::Lt, Value::Int(a), Value::Int(b)) => Value::Bool(a < b),
            (BinaryOp::Le, Value::Int(a), Value::Int(b)) => Value::Bool(a <= b),
            (BinaryOp::Gt, Value::Int(a), Value::Int(b)) => Value::Bool(a > b),
            (BinaryOp::Ge, Value::Int(a), Value::Int(b)) => Value::Bool(a >= b),
            (BinaryOp::Lt, ..) => Value::Bool(l.num() < r.num()),
            (BinaryOp::Le, ..) => Value::Bool(l.num() <= r.num()),
            (BinaryOp::Gt, ..) => Value::Bool(l.num() > r.num()),
            (BinaryOp::Ge, ..) => Value::Bool(l.num() >= r.num()),
            (BinaryOp::And | BinaryOp::Or, ..) => unreachable!(),
        })
    }

    fn call(&mut self, func: Builtin, args: &[Expr], frame: Frame) -> Result<Value, String> {
        let mut vals = Vec::with_capacity(args.len());
        for a in args {
            vals.push(self.eval(a, frame)?);
        }
        Ok(match func {
            Builtin::Bernoulli => {
                let p = vals[0].num();
                if !(0.0..=1.0).contains(&p) {
                    return Err(format!("invalid probability {p}"));
                }
                Value::Bool(self.rng.next_f64() < p)
            }
            Builtin::Uniform => {
                let (lo, hi) = (vals[0].num(), vals[1].num());
                if lo.is_nan() || hi.is_nan() || lo > hi {
                    return Err(format!("uniform bounds out of order: {lo} > {hi}"));
                }
                Value::Real(lo + (hi - lo) * self.rng.next_f64())
            }
            Builtin::Randint => {
                let (Value::Int(lo), Value::Int(hi)) = (vals[0], vals[1]) else {
                    return Err("randint needs int bounds".into());
                };
                if lo > hi {
                    return Err(format!("randint bounds out of order: {lo} > {hi}"));
                }
                Value::Int(self.rng.range_inclusive(lo, hi))
            }
            Builtin::RandomPosition => {
                let x = self.rng.range_inclusive(0, self.grid.0 - 1);
                let y = self.rng.range_inclusive(0, self.grid.1 - 1);
                Value::Pos(x, y)
            }
            Builtin::Jitter => {
                let (Value::Pos(x, y), Value::Int(r)) = (vals[0], vals[1]) else {
                    return Err("jitter needs a position and an int".into());
                };
                if r < 0 {
                    return Err(format!("jitter radius {r} is negative"));
                }
                let dx = self.rng.range_inclusive(-r, r);
                let dy = self.rng.range_inclusive(-r, r);
                Value::Pos(
                    (x as i128 + dx as i128).rem_euclid(self.grid.0 as i128) as i64,
                    (y as i128 + dy as i128).rem_euclid(self.grid.1 as i128) as i64,
                )
            }
        })
    }

    fn snapshot(&self) -> IndexMap<String, Vec<InstanceSnapshot>> {
        self.program
            .objects
            .iter()
            .zip(&self.world)
            .map(|(o, instances)| {
                let snaps = instances
                    .iter()
                    .enumerate()
                    .map(|(id, values)| InstanceSnapshot {
                        id,
                        states: o
                            .states
                            .iter()
                            .zip(values)
                            .map(|(s, v)| (s.name.clone(), v.to_state()))
                            .collect(),
                    })
                    .collect();
                (o.name.clone(), snaps)
            })
            .collect()
    }
}

fn coerce(v: Value, ty: Type) -> Value {
    match (ty, v) {
        (Type::Real, Value::Int(i)) => Value::Real(i as f64),
        _ => v,
    }
}

/// `true` if any statement in the program can consume random numbers.
pub fn uses_randomness(program: &AbmProgram) -> bool {
    if program.schedule.iter().any(|s| s.kind.is_random()) {
        return true;
    }
    let mut found = false;
    for o in &program.objects {
        if o.states.iter().any(|s| s.default.draws_randomness()) {
            return true;
        }
        for a in &o.activities {
            walk_statements(&a.body, &mut |s| match s {
                Statement::Assign { value, .. } => found |= value.draws_randomness(),
                Statement::If { cond, .. } => found |= cond.draws_randomness(),
                Statement::ForNeighbor { radius, .. } => found |= radius.draws_randomness(),
                _ => {}
            });
        }
    }
    found
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_program;

    fn run(src: &str, seed: u64, steps: u64) -> Result<SimulationTrace, RuntimeFault> {
        simulate(&parse_program(src).unwrap(), seed, steps)
    }

    const COUNTER: &str = "\
object c {
  state n: int = 0;
  activity tick { n := n + 1; emit ticked; }
}
init { c = 3; }
schedule { Do(c, tick); }
record total = count_all(c, n > 1);
";

    #[test]
    fn zero_steps_is_identity() {
        let t = run(COUNTER, 1, 0).unwrap();
        assert!(t.series["total"].is_empty());
        assert!(t.events["ticked"].is_empty());
        assert_eq!(t.final_state["c"].len(), 3);
        assert_eq!(t.final_state["c"][0].states["n"], StateValue::Int(0));
    }

    #[test]
    fn do_runs_every_instance() {
        let t = run(COUNTER, 1, 3).unwrap();
        assert_eq!(t.series["total"], vec![0.0, 3.0, 3.0]);
        assert_eq!(t.events["ticked"], vec![3, 3, 3]);
        assert_eq!(t.activation_count("c", "tick"), 9);
    }

    #[test]
    fn division_by_zero_faults() {
        let src = COUNTER.replace("n := n + 1;", "n := n + 1; if n / 0 > 1 { n := 0; }");
        let fault = run(&src, 1, 2).unwrap_err();
        assert_eq!(fault.step, 0);
        assert_eq!(fault.reason, "division by zero");
        assert_eq!(
            fault.site,
            FaultSite::Activity {
                object: "c".into(),
                activity: "tick".into()
            }
        );
    }

    #[test]
    fn invalid_probability_faults() {
        let src = COUNTER.replace("n := n + 1;", "if bernoulli(1.5) { n := n + 1; }");
        assert!(run(&src, 1, 1).unwrap_err().reason.contains("probability"));
    }

    #[test]
    fn conditional_do_sees_earlier_writes() {
        // Instance 0 flips the shared flag held by instance 1 before 1 runs.
        let src = "\
object c {
  state pos: position = random_position();
  state on: bool = true;
  state hits: int = 0;
  activity act {
    hits := hits + 1;
    for_neighbor c within 100 { neighbor.on := false; }
  }
}
init { grid(3, 3); c = 2; }
schedule { Conditional_Do(c, act, on); }
record total = count_all(c, hits > 0);
";
        let t = run(src, 5, 1).unwrap();
        assert_eq!(t.series["total"], vec![1.0]);
    }

    #[test]
    fn toroidal_distance() {
        let src = "\
param r = 1;
object c {
  state pos: position = random_position();
  state seen: int = 0;
  activity look { seen := count_neighbors(c, r, true); }
}
init { grid(10, 10); c = 2; }
schedule { Do(c, look); }
record m = count_all(c, seen > 0);
";
        let p = parse_program(src).unwrap();
        let engine = Engine::new(&p, 0, 0);
        assert_eq!(engine.distance((0, 0), (9, 9)), 1);
        assert_eq!(engine.distance((0, 0), (5, 2)), 5);
        assert_eq!(engine.distance((2, 3), (2, 3)), 0);
    }

    #[test]
    fn traces_are_deterministic() {
        let src = "\
object c {
  state pos: position = random_position();
  state x: real = uniform(0, 1);
  activity wander { pos := jitter(pos, 1); if bernoulli(0.5) { x := x + 1; } }
}
init { grid(8, 8); c = 10; }
schedule { Random_Do(c, wander); }
record mean_x = count_all(c, x > 2);
";
        let a = run(src, 42, 20).unwrap().to_json();
        let b = run(src, 42, 20).unwrap().to_json();
        assert_eq!(a, b);
        assert_ne!(a, run(src, 43, 20).unwrap().to_json());
        let back = SimulationTrace::from_json(&a).unwrap();
        assert_eq!(back.to_json(), a);
    }
}
