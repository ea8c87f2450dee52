//! Verifier-level1: compilation errors and lacking details.
//!
//! A program is *executable and elaborate* when it has no defects: it parses
//! and type-checks, no activity body is `todo` or empty, every activity the
//! scenario declares exists, and every scheduled activity writes a state or
//! emits an event.

mod slice;

use serde::Serialize;
use thiserror::Error;

use crate::defect::Defect;
use crate::dsl::{analyze, AbmProgram, Activity};
use crate::generator::{render_prompt, PromptKind, PromptText, Slots};
use crate::representation::ConceptualRepresentation;

pub use slice::{all_statements, backward_slice, delete_statements, SliceError, SliceResult, StateKey, StatementId};

pub const REASON_PLACEHOLDER: &str = "activity body is a placeholder (todo)";
pub const REASON_EMPTY: &str = "activity body is empty";
pub const REASON_MISSING: &str = "activity declared in the scenario is missing from the program";
pub const REASON_NO_EFFECT: &str = "scheduled activity has no effect (writes no state and emits no event)";

/// Defects of raw source text: compilation errors (ordered by line) followed
/// by lacking details. Lacking details are only computed when the source is
/// syntactically valid.
pub fn check_source(source: &str, rep: Option<&ConceptualRepresentation>) -> Vec<Defect> {
    let analysis = analyze(source);
    let mut defects = analysis.defects;
    if let Some(program) = &analysis.program {
        defects.extend(lacking_details(program, rep));
    }
    defects
}

/// Defects of an already-parsed program. Compile-time problems were rejected
/// when it was built, so only lacking details can appear here, unless the
/// program was assembled by hand; it is re-printed and re-checked to cover
/// that case.
pub fn check_program(program: &AbmProgram, rep: Option<&ConceptualRepresentation>) -> Vec<Defect> {
    check_source(&crate::dsl::print_program(program), rep)
}

fn lacking_details(program: &AbmProgram, rep: Option<&ConceptualRepresentation>) -> Vec<Defect> {
    let mut out = Vec::new();
    let mut seen: Vec<(&str, &str)> = Vec::new();
    let describe = |object: &str, activity: &str| {
        rep.and_then(|r| r.activity_description(object, activity))
            .map(str::to_string)
    };
    if let Some(rep) = rep {
        for spec in &rep.objects {
            for a in &spec.activities {
                seen.push((&spec.name, &a.name));
                let found = program.object(&spec.name).and_then(|o| o.activity(&a.name));
                let reason = match found {
                    None => Some(REASON_MISSING),
                    Some(activity) => activity_reason(program, &spec.name, activity),
                };
                if let Some(reason) = reason {
                    out.push(Defect::LackingDetail {
                        object: spec.name.clone(),
                        activity: a.name.clone(),
                        reason: reason.to_string(),
                        description: Some(a.description.clone()),
                    });
                }
            }
        }
    }
    for object in &program.objects {
        for activity in &object.activities {
            if seen.contains(&(object.name.as_str(), activity.name.as_str())) {
                continue;
            }
            if let Some(reason) = activity_reason(program, &object.name, activity) {
                out.push(Defect::LackingDetail {
                    object: object.name.clone(),
                    activity: activity.name.clone(),
                    reason: reason.to_string(),
                    description: describe(&object.name, &activity.name),
                });
            }
        }
    }
    out
}

fn activity_reason(program: &AbmProgram, object: &str, activity: &Activity) -> Option<&'static str> {
    if activity.has_placeholder() {
        Some(REASON_PLACEHOLDER)
    } else if activity.body.is_empty() {
        Some(REASON_EMPTY)
    } else if program.steps_for(object, &activity.name).next().is_some() && !activity.has_effect() {
        Some(REASON_NO_EFFECT)
    } else {
        None
    }
}

/// `[line, "excerpt", "reason"]` for compilation errors; an
/// `object.activity` bullet with its description for lacking details.
pub fn render_defect(defect: &Defect) -> String {
    let q = |s: &str| serde_json::to_string(s).expect("string serializes");
    match defect {
        Defect::Compilation { line, excerpt, reason } => format!("[{line}, {}, {}]", q(excerpt), q(reason)),
        Defect::LackingDetail {
            object,
            activity,
            reason,
            description,
        } => match description {
            Some(d) => format!("- {object}.{activity}: {reason}. Intended behaviour: {}", q(d)),
            None => format!("- {object}.{activity}: {reason}."),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RectifyError {
    #[error("cannot build a rectification prompt without defects")]
    EmptyDefectList,
}

/// Rectification prompt listing compilation errors and lacking details
/// separately, followed by the full program.
pub fn build_rectification_prompt(source: &str, defects: &[Defect]) -> Result<PromptText, RectifyError> {
    if defects.is_empty() {
        return Err(RectifyError::EmptyDefectList);
    }
    let section = |pick: fn(&Defect) -> bool| {
        let lines: Vec<String> = defects.iter().filter(|d| pick(d)).map(render_defect).collect();
        if lines.is_empty() {
            "(none)".to_string()
        } else {
            lines.join("\n")
        }
    };
    let mut slots = Slots::new();
    slots.insert("program", source.trim_end());
    slots.insert("compilation_errors", section(Defect::is_compilation));
    slots.insert("lacking_details", section(Defect::is_lacking_detail));
    Ok(render_prompt(PromptKind::RectifyDefects, &slots).expect("rectify template slots are fixed"))
}

/// Summary of a check, as printed by `sage verify`.
#[derive(Debug, Clone, Serialize)]
pub struct CheckSummary {
    pub executable: bool,
    pub elaborate: bool,
    pub defects: usize,
}

pub fn summarize(defects: &[Defect]) -> CheckSummary {
    CheckSummary {
        executable: !defects.iter().any(Defect::is_compilation),
        elaborate: !defects.iter().any(Defect::is_lacking_detail),
        defects: defects.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::representation::parse_conceptual;

    const SCENARIO: &str = r#"{
  "objects": [{
    "name": "cell",
    "states": [{"name": "a", "description": "a counter", "type": "int"}],
    "activities": [
      {"name": "grow", "description": "increase a by one"},
      {"name": "shrink", "description": "decrease a by one"}
    ]
  }],
  "scheduling": [{"kind": "Do", "object": "cell", "activity": "grow"}]
}"#;

    const GOOD: &str = "\
object cell {
  state a: int = 0;
  activity grow { a := a + 1; }
  activity shrink { a := a - 1; }
}
init { cell = 2; }
schedule { Do(cell, grow); }
";

    fn rep() -> ConceptualRepresentation {
        parse_conceptual(SCENARIO).unwrap()
    }

    #[test]
    fn concrete_program_has_no_defects() {
        assert_eq!(check_source(GOOD, Some(&rep())), vec![]);
    }

    #[test]
    fn todo_body_carries_description() {
        let src = GOOD.replace("activity grow { a := a + 1; }", "activity grow { todo; }");
        assert_eq!(
            check_source(&src, Some(&rep())),
            vec![Defect::LackingDetail {
                object: "cell".into(),
                activity: "grow".into(),
                reason: REASON_PLACEHOLDER.into(),
                description: Some("increase a by one".into()),
            }]
        );
    }

    #[test]
    fn missing_and_ineffective_activities() {
        let src = GOOD
            .replace("  activity shrink { a := a - 1; }\n", "")
            .replace("a := a + 1;", "if a > 1 { emit x; } else { }")
            .replace("emit x;", "");
        let defects = check_source(&src, Some(&rep()));
        let reasons: Vec<&str> = defects.iter().map(|d| d.reason()).collect();
        assert_eq!(reasons, vec![REASON_NO_EFFECT, REASON_MISSING]);
    }

    #[test]
    fn compilation_errors_come_first() {
        let src = GOOD
            .replace("a := a - 1;", "a := b - 1;")
            .replace("a := a + 1;", "todo;");
        let defects = check_source(&src, Some(&rep()));
        assert_eq!(defects.len(), 2);
        assert!(defects[0].is_compilation());
        assert!(defects[1].is_lacking_detail());
    }

    #[test]
    fn check_is_idempotent() {
        let src = GOOD.replace("a := a - 1;", "todo;");
        assert_eq!(check_source(&src, Some(&rep())), check_source(&src, Some(&rep())));
        let p = crate::dsl::parse_program(&src).unwrap();
        assert_eq!(check_program(&p, Some(&rep())), check_source(&src, Some(&rep())));
    }

    #[test]
    fn defect_rendering() {
        let d = Defect::compilation(12, "imune", "unknown state of object person");
        assert_eq!(render_defect(&d), r#"[12, "imune", "unknown state of object person"]"#);
        let prompt = build_rectification_prompt(GOOD, &[d]).unwrap();
        assert!(prompt
            .text
            .contains(r#"[12, "imune", "unknown state of object person"]"#));
        assert!(prompt.text.contains("activity grow { a := a + 1; }"));
        assert_eq!(
            build_rectification_prompt(GOOD, &[]),
            Err(RectifyError::EmptyDefectList)
        );
    }
}
