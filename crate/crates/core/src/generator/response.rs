//! Fenced-block extraction from generator output.
//!
//! A block opens with a line starting with three backticks and a tag
//! (```` ```abm ````) and closes with a line holding only three backticks.
//! Text outside blocks is ignored. Blocks whose tag a kind does not use are
//! ignored too.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::PromptKind;
use crate::dsl::{is_identifier, Directive};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot parse {kind} response at byte {offset}: {message}")]
pub struct PayloadParseError {
    pub kind: PromptKind,
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block<'a> {
    pub tag: &'a str,
    pub body: &'a str,
    /// Byte offset of the opening fence.
    pub offset: usize,
}

/// A reference to part of the model, written `object.member` (activity or
/// state) or a bare parameter name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub object: Option<String>,
    pub member: String,
}

impl std::fmt::Display for Relation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.object {
            Some(o) => write!(f, "{o}.{}", self.member),
            None => f.write_str(&self.member),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Solution {
    pub title: String,
    pub directives: Vec<Directive>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoTResponse {
    pub relations: Vec<Relation>,
    pub reasons: String,
    pub solutions: Vec<Solution>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Program(String),
    Predicate(String),
    CoT(CoTResponse),
    Patch {
        directives: Vec<Directive>,
        program: Option<String>,
    },
}

impl Payload {
    pub fn program(&self) -> Option<&str> {
        match self {
            Payload::Program(p) => Some(p),
            Payload::Patch { program, .. } => program.as_deref(),
            _ => None,
        }
    }
}

/// All fenced blocks of `raw`, in order.
pub fn blocks(raw: &str) -> Result<Vec<Block<'_>>, (usize, String)> {
    let mut out = Vec::new();
    let mut open: Option<(usize, &str, usize)> = None;
    let mut offset = 0;
    for line in raw.split_inclusive('\n') {
        let trimmed = line.trim_end_matches(['\n', '\r']).trim_end();
        match open {
            None => {
                if let Some(tag) = trimmed.strip_prefix("```") {
                    let tag = tag.trim();
                    if tag.is_empty() {
                        return Err((offset, "fenced block without a tag".into()));
                    }
                    open = Some((offset, tag, offset + line.len()));
                }
            }
            Some((start, tag, body_start)) => {
                if trimmed == "```" {
                    out.push(Block {
                        tag,
                        body: &raw[body_start..offset],
                        offset: start,
                    });
                    open = None;
                }
            }
        }
        offset += line.len();
    }
    if let Some((start, tag, _)) = open {
        return Err((start, format!("unterminated ```{tag} block")));
    }
    Ok(out)
}

pub fn parse_response(kind: PromptKind, raw: &str) -> Result<Payload, PayloadParseError> {
    let err = |offset: usize, message: String| PayloadParseError { kind, offset, message };
    let all = blocks(raw).map_err(|(o, m)| err(o, m))?;
    let find = |tag: &str| -> Result<Option<&Block<'_>>, PayloadParseError> {
        let mut matching = all.iter().filter(|b| b.tag == tag);
        let first = matching.next();
        if let Some(second) = matching.next() {
            return Err(err(second.offset, format!("more than one ```{tag} block")));
        }
        Ok(first)
    };
    let require = |tag: &str| -> Result<&Block<'_>, PayloadParseError> {
        find(tag)?.ok_or_else(|| err(raw.len(), format!("no ```{tag} block")))
    };
    match kind {
        PromptKind::GenAbm | PromptKind::RectifyDefects => {
            let b = require("abm")?;
            if b.body.trim().is_empty() {
                return Err(err(b.offset, "empty ```abm block".into()));
            }
            Ok(Payload::Program(b.body.to_string()))
        }
        PromptKind::GenVerification => {
            let b = require("predicate")?;
            let text = b.body.trim();
            if text.is_empty() {
                return Err(err(b.offset, "empty ```predicate block".into()));
            }
            Ok(Payload::Predicate(text.to_string()))
        }
        PromptKind::CoT => {
            let rel = require("relations")?;
            let mut relations = Vec::new();
            for line in rel.body.lines().map(str::trim).filter(|l| !l.is_empty()) {
                let line = line.trim_start_matches("- ");
                let relation = match line.split_once('.') {
                    Some((o, m)) if is_identifier(o) && is_identifier(m) => Relation {
                        object: Some(o.to_string()),
                        member: m.to_string(),
                    },
                    None if is_identifier(line) => Relation {
                        object: None,
                        member: line.to_string(),
                    },
                    _ => return Err(err(rel.offset, format!("bad relation `{line}`"))),
                };
                relations.push(relation);
            }
            if relations.is_empty() {
                return Err(err(rel.offset, "no relations listed".into()));
            }
            let reasons_block = require("reasons")?;
            let reasons = reasons_block.body.trim().to_string();
            if reasons.is_empty() {
                return Err(err(reasons_block.offset, "empty ```reasons block".into()));
            }
            let sol = require("solutions")?;
            let solutions: Vec<Solution> = serde_json::from_str(sol.body)
                .map_err(|e| err(sol.offset, format!("solutions are not valid JSON: {e}")))?;
            if solutions.is_empty() {
                return Err(err(sol.offset, "no solutions proposed".into()));
            }
            for s in &solutions {
                check_identifiers(&s.directives).map_err(|m| err(sol.offset, m))?;
            }
            Ok(Payload::CoT(CoTResponse {
                relations,
                reasons,
                solutions,
            }))
        }
        PromptKind::Modify => {
            let b = require("patch")?;
            let directives: Vec<Directive> =
                serde_json::from_str(b.body).map_err(|e| err(b.offset, format!("patch is not valid JSON: {e}")))?;
            check_identifiers(&directives).map_err(|m| err(b.offset, m))?;
            let program = find("abm")?.map(|b| b.body.to_string());
            Ok(Payload::Patch { directives, program })
        }
    }
}

fn check_identifiers(directives: &[Directive]) -> Result<(), String> {
    for d in directives {
        for id in d.identifiers() {
            if !is_identifier(id) {
                return Err(format!("`{id}` is not a valid identifier"));
            }
        }
    }
    Ok(())
}

/// Wrap text in a fenced block.
pub fn fence(tag: &str, body: &str) -> String {
    let body = body.trim_end_matches('\n');
    format!("```{tag}\n{body}\n```\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_program_block() {
        let raw = "Here you go:\n```abm\nobject a {}\n```\nThanks.";
        assert_eq!(
            parse_response(PromptKind::GenAbm, raw).unwrap(),
            Payload::Program("object a {}\n".into())
        );
    }

    #[test]
    fn no_block_is_an_error() {
        let e = parse_response(PromptKind::GenAbm, "sorry").unwrap_err();
        assert_eq!(e.offset, 5);
    }

    #[test]
    fn unterminated_block_reports_offset() {
        let e = parse_response(PromptKind::GenAbm, "ok\n```abm\nobject").unwrap_err();
        assert_eq!(e.offset, 3);
    }

    #[test]
    fn duplicate_blocks_rejected() {
        let raw = "```abm\na\n```\n```abm\nb\n```\n";
        assert!(parse_response(PromptKind::RectifyDefects, raw).is_err());
    }

    #[test]
    fn cot_sections() {
        let raw = "\
```relations
person.spread
spread_distance
```
```reasons
Too much contact.
```
```solutions
[{\"title\": \"enforce quarantine\", \"directives\": [{\"op\": \"add_state\", \"object\": \"person\", \"name\": \"quarantined\", \"type\": \"bool\", \"default\": \"false\"}]}]
```
";
        let Payload::CoT(c) = parse_response(PromptKind::CoT, raw).unwrap() else {
            panic!()
        };
        assert_eq!(c.relations.len(), 2);
        assert_eq!(c.relations[1].to_string(), "spread_distance");
        assert_eq!(c.solutions[0].title, "enforce quarantine");
        let round = format!(
            "{}{}{}",
            fence(
                "relations",
                &c.relations.iter().map(|r| r.to_string()).collect::<Vec<_>>().join("\n")
            ),
            fence("reasons", &c.reasons),
            fence("solutions", &serde_json::to_string(&c.solutions).unwrap())
        );
        assert_eq!(parse_response(PromptKind::CoT, &round).unwrap(), Payload::CoT(c));
    }

    #[test]
    fn patch_with_bad_identifier() {
        let raw = "```patch\n[{\"op\": \"remove_state\", \"object\": \"a b\", \"name\": \"x\"}]\n```\n";
        assert!(parse_response(PromptKind::Modify, raw).is_err());
    }
}
