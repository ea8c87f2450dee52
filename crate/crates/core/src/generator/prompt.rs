//! Prompt template registry.
//!
//! Templates are plain text with `{{slot}}` placeholders. `dsl_reference`
//! and `predicate_reference` are filled in automatically; every other
//! placeholder must be supplied by the caller, and no others may be.

use std::collections::BTreeMap;

use serde::Serialize;

use super::GeneratorError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    GenAbm,
    RectifyDefects,
    GenVerification,
    #[serde(rename = "cot")]
    CoT,
    Modify,
}

impl PromptKind {
    pub const ALL: [PromptKind; 5] = [
        PromptKind::GenAbm,
        PromptKind::RectifyDefects,
        PromptKind::GenVerification,
        PromptKind::CoT,
        PromptKind::Modify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PromptKind::GenAbm => "gen_abm",
            PromptKind::RectifyDefects => "rectify_defects",
            PromptKind::GenVerification => "gen_verification",
            PromptKind::CoT => "cot",
            PromptKind::Modify => "modify",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Slot whose content identifies a request for the mock backend.
    pub fn key_slot(self) -> &'static str {
        match self {
            PromptKind::GenAbm => "scenario",
            PromptKind::RectifyDefects | PromptKind::CoT | PromptKind::Modify => "program",
            PromptKind::GenVerification => "requirement",
        }
    }

    fn template(self) -> &'static str {
        match self {
            PromptKind::GenAbm => include_str!("../../prompts/gen_abm.txt"),
            PromptKind::RectifyDefects => include_str!("../../prompts/rectify_defects.txt"),
            PromptKind::GenVerification => include_str!("../../prompts/gen_verification.txt"),
            PromptKind::CoT => include_str!("../../prompts/cot.txt"),
            PromptKind::Modify => include_str!("../../prompts/modify.txt"),
        }
    }

    /// Caller-supplied slots of this kind's template, sorted.
    pub fn slots(self) -> Vec<&'static str> {
        let mut names: Vec<&'static str> = placeholders(self.template())
            .into_iter()
            .filter(|n| builtin(n).is_none())
            .collect();
        names.sort_unstable();
        names.dedup();
        names
    }
}

impl std::fmt::Display for PromptKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn builtin(name: &str) -> Option<&'static str> {
    match name {
        "dsl_reference" => Some(include_str!("../../prompts/dsl_reference.txt").trim_end()),
        "predicate_reference" => Some(include_str!("../../prompts/predicate_reference.txt").trim_end()),
        _ => None,
    }
}

/// Named slot values.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Slots(BTreeMap<String, String>);

impl Slots {
    pub fn new() -> Self {
        Slots::default()
    }

    pub fn insert(&mut self, name: &str, value: impl Into<String>) {
        self.0.insert(name.to_string(), value.into());
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.0.get(name).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PromptText {
    pub kind: PromptKind,
    pub text: String,
    pub slots: Slots,
}

impl PromptText {
    pub fn key(&self) -> &str {
        self.slots.get(self.kind.key_slot()).unwrap_or_default()
    }
}

fn placeholders(template: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        let after = &rest[start + 2..];
        match after.find("}}") {
            Some(end) => {
                out.push(&after[..end]);
                rest = &after[end + 2..];
            }
            None => break,
        }
    }
    out
}

/// Fill the template of `kind`. Slot values are inserted verbatim; they are
/// never scanned for further placeholders.
pub fn render_prompt(kind: PromptKind, slots: &Slots) -> Result<PromptText, GeneratorError> {
    let declared = kind.slots();
    for name in &declared {
        if slots.get(name).is_none() {
            return Err(GeneratorError::MissingSlot {
                kind,
                slot: name.to_string(),
            });
        }
    }
    if let Some((extra, _)) = slots.iter().find(|(k, _)| !declared.contains(k)) {
        return Err(GeneratorError::UnknownSlot {
            kind,
            slot: extra.to_string(),
        });
    }
    let template = kind.template();
    let mut text = String::with_capacity(template.len() * 2);
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        text.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let Some(end) = after.find("}}") else {
            text.push_str(&rest[start..]);
            rest = "";
            break;
        };
        let name = &after[..end];
        let value = builtin(name).or_else(|| slots.get(name)).unwrap_or_default();
        text.push_str(value);
        rest = &after[end + 2..];
    }
    text.push_str(rest);
    Ok(PromptText {
        kind,
        text,
        slots: slots.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full(kind: PromptKind) -> Slots {
        let mut s = Slots::new();
        for name in kind.slots() {
            s.insert(name, format!("<{name}>"));
        }
        s
    }

    #[test]
    fn declared_slots() {
        assert_eq!(
            PromptKind::RectifyDefects.slots(),
            vec!["compilation_errors", "lacking_details", "program"]
        );
        assert_eq!(PromptKind::GenAbm.slots(), vec!["scenario"]);
        for kind in PromptKind::ALL {
            assert!(kind.slots().contains(&kind.key_slot()), "{kind}");
        }
    }

    #[test]
    fn rendering_is_deterministic_and_complete() {
        for kind in PromptKind::ALL {
            let a = render_prompt(kind, &full(kind)).unwrap();
            let b = render_prompt(kind, &full(kind)).unwrap();
            assert_eq!(a, b);
            assert!(!a.text.contains("{{"), "{kind} left a placeholder");
            assert!(a.text.contains("```"), "{kind} declares no fence convention");
        }
    }

    #[test]
    fn missing_and_unknown_slots() {
        let mut s = full(PromptKind::GenAbm);
        s.insert("bogus", "x");
        assert!(matches!(
            render_prompt(PromptKind::GenAbm, &s),
            Err(GeneratorError::UnknownSlot { .. })
        ));
        assert!(matches!(
            render_prompt(PromptKind::CoT, &Slots::new()),
            Err(GeneratorError::MissingSlot { .. })
        ));
    }

    #[test]
    fn values_are_not_rescanned() {
        let mut s = full(PromptKind::GenAbm);
        s.insert("scenario", "{{scenario}} {{dsl_reference}}");
        let p = render_prompt(PromptKind::GenAbm, &s).unwrap();
        assert!(p.text.contains("{{scenario}} {{dsl_reference}}"));
    }

    #[test]
    fn cot_has_three_numbered_steps() {
        let p = render_prompt(PromptKind::CoT, &full(PromptKind::CoT)).unwrap();
        assert!(p.text.contains("1. Extract relations"));
        assert!(p.text.contains("2. Analyze causes"));
        assert!(p.text.contains("3. Propose solutions"));
    }
}
