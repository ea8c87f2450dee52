//! Structured modification directives applied to a program.
//!
//! Snippets (activity bodies, state defaults, conditions) are parsed here but
//! not resolved; the patched program is printed and goes back through the
//! full checker.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::*;
use super::is_identifier;
use super::parser::{parse_expression, parse_statements};
use super::printer::print_program;
use crate::defect::Defect;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Directive {
    AddState {
        object: String,
        name: String,
        #[serde(rename = "type")]
        ty: Type,
        default: String,
    },
    RemoveState {
        object: String,
        name: String,
    },
    AddActivity {
        object: String,
        name: String,
        body: String,
    },
    ReplaceActivityBody {
        object: String,
        name: String,
        body: String,
    },
    RemoveActivity {
        object: String,
        name: String,
    },
    AddScheduleStep {
        kind: ScheduleKind,
        object: String,
        activity: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        condition: Option<String>,
        /// Insert position; appended when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        index: Option<usize>,
    },
    RemoveScheduleStep {
        object: String,
        activity: String,
    },
    SetParameter {
        name: String,
        value: serde_json::Number,
    },
}

impl Directive {
    /// Identifiers named by this directive.
    pub fn identifiers(&self) -> Vec<&str> {
        match self {
            Directive::AddState { object, name, .. }
            | Directive::RemoveState { object, name }
            | Directive::AddActivity { object, name, .. }
            | Directive::ReplaceActivityBody { object, name, .. }
            | Directive::RemoveActivity { object, name } => vec![object, name],
            Directive::AddScheduleStep { object, activity, .. }
            | Directive::RemoveScheduleStep { object, activity } => vec![object, activity],
            Directive::SetParameter { name, .. } => vec![name],
        }
    }

    pub fn is_parameter_only(&self) -> bool {
        matches!(self, Directive::SetParameter { .. })
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PatchError {
    #[error("`{0}` is not a valid identifier")]
    InvalidIdentifier(String),
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("object {object} has no {what} `{name}`")]
    UnknownMember {
        object: String,
        what: &'static str,
        name: String,
    },
    #[error("object {object} already has a {what} `{name}`")]
    Duplicate {
        object: String,
        what: &'static str,
        name: String,
    },
    #[error("no schedule step runs {object}.{activity}")]
    UnknownStep { object: String, activity: String },
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("snippet for {context} does not parse: {}", .defects.first().map(|d| d.to_string()).unwrap_or_default())]
    Snippet { context: String, defects: Vec<Defect> },
    #[error("{0}")]
    Invalid(String),
}

/// Apply `directives` in order and return the patched program's canonical source.
pub fn apply_patch(program: &AbmProgram, directives: &[Directive]) -> Result<String, PatchError> {
    let mut p = program.clone();
    for d in directives {
        apply_one(&mut p, d)?;
    }
    Ok(print_program(&p))
}

fn object_mut<'a>(p: &'a mut AbmProgram, name: &str) -> Result<&'a mut ObjectClass, PatchError> {
    p.object_mut(name)
        .ok_or_else(|| PatchError::UnknownObject(name.to_string()))
}

fn body(context: &str, text: &str) -> Result<Vec<Statement>, PatchError> {
    parse_statements(text).map_err(|defects| PatchError::Snippet {
        context: context.to_string(),
        defects,
    })
}

fn expression(context: &str, text: &str) -> Result<Expr, PatchError> {
    parse_expression(text).map_err(|defects| PatchError::Snippet {
        context: context.to_string(),
        defects,
    })
}

fn apply_one(p: &mut AbmProgram, d: &Directive) -> Result<(), PatchError> {
    for id in d.identifiers() {
        if !is_identifier(id) {
            return Err(PatchError::InvalidIdentifier(id.to_string()));
        }
    }
    match d {
        Directive::AddState {
            object,
            name,
            ty,
            default,
        } => {
            if *ty == Type::Str {
                return Err(PatchError::Invalid("states cannot have string type".into()));
            }
            let default = expression(&format!("{object}.{name} default"), default)?;
            let o = object_mut(p, object)?;
            if o.state(name).is_some() {
                return Err(PatchError::Duplicate {
                    object: object.clone(),
                    what: "state",
                    name: name.clone(),
                });
            }
            o.states.push(StateDecl {
                name: name.clone(),
                ty: *ty,
                default,
                span: Span::default(),
            });
        }
        Directive::RemoveState { object, name } => {
            let o = object_mut(p, object)?;
            let before = o.states.len();
            o.states.retain(|s| &s.name != name);
            if o.states.len() == before {
                return Err(PatchError::UnknownMember {
                    object: object.clone(),
                    what: "state",
                    name: name.clone(),
                });
            }
        }
        Directive::AddActivity {
            object,
            name,
            body: text,
        } => {
            let stmts = body(&format!("{object}.{name}"), text)?;
            let o = object_mut(p, object)?;
            if o.activity(name).is_some() {
                return Err(PatchError::Duplicate {
                    object: object.clone(),
                    what: "activity",
                    name: name.clone(),
                });
            }
            o.activities.push(Activity {
                name: name.clone(),
                body: stmts,
                span: Span::default(),
            });
        }
        Directive::ReplaceActivityBody {
            object,
            name,
            body: text,
        } => {
            let stmts = body(&format!("{object}.{name}"), text)?;
            let o = object_mut(p, object)?;
            let a = o.activity_mut(name).ok_or_else(|| PatchError::UnknownMember {
                object: object.clone(),
                what: "activity",
                name: name.clone(),
            })?;
            a.body = stmts;
        }
        Directive::RemoveActivity { object, name } => {
            let o = object_mut(p, object)?;
            let before = o.activities.len();
            o.activities.retain(|a| &a.name != name);
            if o.activities.len() == before {
                return Err(PatchError::UnknownMember {
                    object: object.clone(),
                    what: "activity",
                    name: name.clone(),
                });
            }
            p.schedule.retain(|s| !(s.object == *object && s.activity == *name));
        }
        Directive::AddScheduleStep {
            kind,
            object,
            activity,
            condition,
            index,
        } => {
            let condition = match (kind.is_conditional(), condition) {
                (true, Some(c)) => Some(expression(&format!("{object}.{activity} condition"), c)?),
                (false, None) => None,
                (true, None) => return Err(PatchError::Invalid(format!("{} requires a condition", kind.name()))),
                (false, Some(_)) => return Err(PatchError::Invalid(format!("{} takes no condition", kind.name()))),
            };
            if p.object(object).is_none() {
                return Err(PatchError::UnknownObject(object.clone()));
            }
            let step = ScheduleStep {
                kind: *kind,
                object: object.clone(),
                activity: activity.clone(),
                condition,
                span: Span::default(),
            };
            let at = index.unwrap_or(p.schedule.len()).min(p.schedule.len());
            p.schedule.insert(at, step);
        }
        Directive::RemoveScheduleStep { object, activity } => {
            let before = p.schedule.len();
            p.schedule.retain(|s| !(s.object == *object && s.activity == *activity));
            if p.schedule.len() == before {
                return Err(PatchError::UnknownStep {
                    object: object.clone(),
                    activity: activity.clone(),
                });
            }
        }
        Directive::SetParameter { name, value } => {
            let param = p
                .parameters
                .get_mut(name)
                .ok_or_else(|| PatchError::UnknownParameter(name.clone()))?;
            param.value = match value.as_i64() {
                Some(i) if !value.is_f64() => Number::Int(i),
                _ => Number::Real(value.as_f64().unwrap_or(0.0)),
            };
        }
    }
    Ok(())
}
