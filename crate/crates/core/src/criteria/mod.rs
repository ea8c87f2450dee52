//! Verifier-level2: criteria compiled into verification-language predicates
//! and judged against simulation traces.
//!
//! `unchanged(m, tol)` compares the candidate series of `m` with the series
//! of the baseline run pointwise and holds when the largest absolute
//! difference is at most `tol`. Without an explicit tolerance, int and bool
//! metrics must match exactly and real metrics within 1e-9 relative to the
//! larger magnitude of each pair.

mod language;

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

pub use language::{parse_predicate, Aggregate, CmpOp, Predicate, PredicateSyntaxError};

use crate::dsl::{recorder_type, AbmProgram, Type};
use crate::generator::{render_prompt, Generator, GeneratorError, PromptKind, Slots};
use crate::representation::{Criterion, ObjectiveRepresentation};
use crate::simulator::SimulationTrace;

pub const DEFAULT_RELATIVE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CriteriaError {
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error("criterion `{criterion}`: no usable predicate after retry ({message})")]
    PredicateParse {
        criterion: String,
        text: String,
        message: String,
    },
    #[error("criterion `{criterion}` references `{metric}`, which the model does not record")]
    UnknownMetric { criterion: String, metric: String },
    #[error("metric `{metric}` missing from the {run} trace")]
    MissingMetric { metric: String, run: &'static str },
    #[error("metric `{metric}` has {candidate} candidate values but {baseline} baseline values")]
    SeriesLengthMismatch {
        metric: String,
        candidate: usize,
        baseline: usize,
    },
    #[error("metric `{metric}` has no values to aggregate")]
    EmptySeries { metric: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionPredicate {
    pub criterion: Criterion,
    pub expr: Predicate,
    /// Recorder type of every referenced metric, used for default tolerances.
    pub metric_types: BTreeMap<String, Type>,
}

impl CriterionPredicate {
    /// Parse `text` and check its metrics against the recorders of `program`.
    pub fn new(criterion: Criterion, text: &str, program: &AbmProgram) -> Result<Self, CriteriaError> {
        let expr = parse_predicate(text).map_err(|e| CriteriaError::PredicateParse {
            criterion: criterion.variable_name.clone(),
            text: text.to_string(),
            message: e.to_string(),
        })?;
        Self::from_expr(criterion, expr, program)
    }

    pub fn from_expr(criterion: Criterion, expr: Predicate, program: &AbmProgram) -> Result<Self, CriteriaError> {
        let mut metric_types = BTreeMap::new();
        for m in expr.metrics() {
            let ty = recorder_type(program, m).ok_or_else(|| CriteriaError::UnknownMetric {
                criterion: criterion.variable_name.clone(),
                metric: m.to_string(),
            })?;
            metric_types.insert(m.to_string(), ty);
        }
        Ok(CriterionPredicate {
            criterion,
            expr,
            metric_types,
        })
    }
}

/// `name (type)` list of the program's recorders.
pub fn describe_metrics(program: &AbmProgram) -> String {
    let parts: Vec<String> = program
        .recorders
        .iter()
        .map(|r| {
            let ty = recorder_type(program, &r.name).map(Type::name).unwrap_or("real");
            format!("{} ({ty})", r.name)
        })
        .collect();
    if parts.is_empty() {
        "(none)".into()
    } else {
        parts.join(", ")
    }
}

/// Ask the generator for one predicate per criterion. A response that has
/// no predicate block or does not parse is re-prompted once with the error
/// as feedback.
pub fn compile_criteria(
    objective: &ObjectiveRepresentation,
    program: &AbmProgram,
    generator: &Generator,
) -> Result<Vec<CriterionPredicate>, CriteriaError> {
    let metrics = describe_metrics(program);
    let mut out = Vec::with_capacity(objective.criteria.len());
    for criterion in &objective.criteria {
        if program.recorder(&criterion.variable_name).is_none() {
            return Err(CriteriaError::UnknownMetric {
                criterion: criterion.variable_name.clone(),
                metric: criterion.variable_name.clone(),
            });
        }
        let mut feedback = "(none)".to_string();
        let mut attempt = 0;
        loop {
            attempt += 1;
            let mut slots = Slots::new();
            slots.insert("problem", objective.problem.as_str());
            slots.insert("metrics", metrics.as_str());
            slots.insert("variable_name", criterion.variable_name.as_str());
            slots.insert("variable_example", criterion.variable_example.to_string());
            slots.insert("requirement", criterion.requirement.as_str());
            slots.insert("feedback", feedback.as_str());
            let prompt = render_prompt(PromptKind::GenVerification, &slots)?;
            let response = generator.exchange(&prompt)?;
            let (text, message) = match &response.payload {
                Ok(payload) => {
                    let text = match payload {
                        crate::generator::Payload::Predicate(t) => t.clone(),
                        _ => unreachable!("verification responses parse to predicates"),
                    };
                    match CriterionPredicate::new(criterion.clone(), &text, program) {
                        Ok(p) => {
                            out.push(p);
                            break;
                        }
                        Err(CriteriaError::PredicateParse { message, .. }) => (text, message),
                        Err(e) => return Err(e),
                    }
                }
                Err(e) => (response.raw.clone(), e.to_string()),
            };
            if attempt >= 2 {
                return Err(CriteriaError::PredicateParse {
                    criterion: criterion.variable_name.clone(),
                    text,
                    message,
                });
            }
            log::warn!(
                "predicate for `{}` rejected: {message}; retrying",
                criterion.variable_name
            );
            feedback = format!("{} was rejected: {message}", text.trim());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Observation {
    /// Aggregate expression or `unchanged(metric)`.
    pub expr: String,
    /// Aggregate value, or the largest pointwise difference for `unchanged`.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionResult {
    pub variable_name: String,
    pub requirement: String,
    pub predicate: String,
    pub satisfied: bool,
    pub observed: Vec<Observation>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub per_criterion: Vec<CriterionResult>,
    pub satisfying_flag: bool,
}

impl Verdict {
    pub fn satisfied_count(&self) -> usize {
        self.per_criterion.iter().filter(|c| c.satisfied).count()
    }
}

fn series<'a>(trace: &'a SimulationTrace, metric: &str, run: &'static str) -> Result<&'a [f64], CriteriaError> {
    trace
        .series
        .get(metric)
        .map(Vec::as_slice)
        .ok_or_else(|| CriteriaError::MissingMetric {
            metric: metric.to_string(),
            run,
        })
}

fn eval_pred(
    p: &Predicate,
    types: &BTreeMap<String, Type>,
    candidate: &SimulationTrace,
    baseline: &SimulationTrace,
    observed: &mut Vec<Observation>,
) -> Result<bool, CriteriaError> {
    Ok(match p {
        Predicate::Cmp { agg, metric, op, value } => {
            let s = series(candidate, metric, "candidate")?;
            let v = agg
                .apply(s)
                .ok_or_else(|| CriteriaError::EmptySeries { metric: metric.clone() })?;
            observed.push(Observation {
                expr: agg.render(metric),
                value: v,
            });
            op.holds(v, *value)
        }
        Predicate::Unchanged { metric, tolerance } => {
            let c = series(candidate, metric, "candidate")?;
            let b = series(baseline, metric, "baseline")?;
            if c.len() != b.len() {
                return Err(CriteriaError::SeriesLengthMismatch {
                    metric: metric.clone(),
                    candidate: c.len(),
                    baseline: b.len(),
                });
            }
            let max_diff = c.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            observed.push(Observation {
                expr: format!("unchanged({metric})"),
                value: max_diff,
            });
            match tolerance {
                Some(t) => max_diff <= *t,
                None => match types.get(metric) {
                    Some(Type::Int | Type::Bool) => max_diff == 0.0,
                    _ => c
                        .iter()
                        .zip(b)
                        .all(|(x, y)| (x - y).abs() <= DEFAULT_RELATIVE_TOLERANCE * x.abs().max(y.abs())),
                },
            }
        }
        Predicate::And(a, b) => {
            let l = eval_pred(a, types, candidate, baseline, observed)?;
            let r = eval_pred(b, types, candidate, baseline, observed)?;
            l && r
        }
        Predicate::Or(a, b) => {
            let l = eval_pred(a, types, candidate, baseline, observed)?;
            let r = eval_pred(b, types, candidate, baseline, observed)?;
            l || r
        }
        Predicate::Not(a) => !eval_pred(a, types, candidate, baseline, observed)?,
    })
}

/// Judge `candidate` against every predicate. Both sides of `and`/`or` are
/// evaluated so that all observed values are reported.
pub fn evaluate(
    preds: &[CriterionPredicate],
    candidate: &SimulationTrace,
    baseline: &SimulationTrace,
) -> Result<Verdict, CriteriaError> {
    let mut per_criterion = Vec::with_capacity(preds.len());
    for p in preds {
        let mut observed = Vec::new();
        let satisfied = eval_pred(&p.expr, &p.metric_types, candidate, baseline, &mut observed)?;
        per_criterion.push(CriterionResult {
            variable_name: p.criterion.variable_name.clone(),
            requirement: p.criterion.requirement.clone(),
            predicate: p.expr.to_string(),
            satisfied,
            observed,
        });
    }
    let satisfying_flag = per_criterion.iter().all(|c| c.satisfied);
    Ok(Verdict {
        per_criterion,
        satisfying_flag,
    })
}
