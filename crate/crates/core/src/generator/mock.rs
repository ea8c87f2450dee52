//! Table-driven deterministic backend.
//!
//! A fixtures directory holds `manifest.json`:
//!
//! ```json
//! {
//!   "reference": "reference.abm",
//!   "entries": [
//!     {"kind": "gen_abm", "key_file": "../scenario.json", "response_file": "initial.abm"},
//!     {"kind": "gen_verification", "key": "spread rate below 0.1", "response": "```predicate\nfinal(spread_rate) < 0.1\n```"},
//!     {"kind": "cot", "key": "*", "response_file": "cot.txt"}
//!   ]
//! }
//! ```
//!
//! A request matches an entry of its kind when the SHA-256 digest of
//! `kind NUL normalize(key slot)` equals the entry's digest; `normalize`
//! compacts JSON text and collapses whitespace in anything else. `"*"`
//! matches any key of that kind, after exact matches were tried. Responses
//! read from `.abm` files are wrapped in an ```` ```abm ```` fence.
//!
//! Without a matching entry two rules apply: `rectify_defects` splices
//! activity bodies from the reference program into the defective sites
//! (one defect class per round: compilation errors first), and `modify`
//! echoes the directives of the proposed solutions as the patch.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};

use super::response::{fence, Solution};
use super::{Backend, GeneratorError, PromptKind, PromptText};
use crate::defect::Defect;
use crate::dsl::{analyze, parse_program, print_activity_source, AbmProgram};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestFile {
    #[serde(default)]
    reference: Option<String>,
    #[serde(default)]
    entries: Vec<EntryFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryFile {
    kind: String,
    #[serde(default)]
    key: Option<String>,
    #[serde(default)]
    key_file: Option<String>,
    #[serde(default)]
    digest: Option<String>,
    #[serde(default)]
    response: Option<String>,
    #[serde(default)]
    response_file: Option<String>,
}

#[derive(Debug, Clone)]
enum Key {
    Digest(String),
    Any,
}

#[derive(Debug, Clone)]
struct Entry {
    kind: PromptKind,
    key: Key,
    response: String,
}

#[derive(Debug, Clone)]
pub struct MockBackend {
    dir: PathBuf,
    entries: Vec<Entry>,
    reference: Option<AbmProgram>,
}

/// Canonical form of a key slot: compact JSON when the text is JSON,
/// otherwise whitespace-collapsed text.
pub fn normalize_key(text: &str) -> String {
    match serde_json::from_str::<serde_json::Value>(text) {
        Ok(v) if v.is_object() || v.is_array() => v.to_string(),
        _ => text.split_whitespace().collect::<Vec<_>>().join(" "),
    }
}

pub fn key_digest(kind: PromptKind, key: &str) -> String {
    let mut h = Sha256::new();
    h.update(kind.name().as_bytes());
    h.update([0u8]);
    h.update(normalize_key(key).as_bytes());
    hex::encode(h.finalize())
}

/// Scenario files are keyed by their canonical rendering, which is what the
/// modeling stage puts in the prompt.
fn file_key(kind: PromptKind, text: &str) -> String {
    match kind {
        PromptKind::GenAbm => crate::representation::parse_conceptual(text)
            .map(|r| crate::representation::render_conceptual(&r))
            .unwrap_or_else(|_| text.to_string()),
        _ => text.to_string(),
    }
}

impl MockBackend {
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self, GeneratorError> {
        let dir = dir.as_ref().to_path_buf();
        let bad = |m: String| GeneratorError::Fixture(format!("{}: {m}", dir.join(MANIFEST).display()));
        let manifest_text = std::fs::read_to_string(dir.join(MANIFEST)).map_err(|e| bad(e.to_string()))?;
        let manifest: ManifestFile = serde_json::from_str(&manifest_text).map_err(|e| bad(e.to_string()))?;
        let read = |rel: &str| {
            std::fs::read_to_string(dir.join(rel))
                .map_err(|e| GeneratorError::Fixture(format!("{}: {e}", dir.join(rel).display())))
        };
        let mut entries = Vec::new();
        for (i, e) in manifest.entries.into_iter().enumerate() {
            let kind =
                PromptKind::from_name(&e.kind).ok_or_else(|| bad(format!("entry {i}: unknown kind `{}`", e.kind)))?;
            let key = match (e.key, e.key_file, e.digest) {
                (Some(k), None, None) if k == "*" => Key::Any,
                (Some(k), None, None) => Key::Digest(key_digest(kind, &k)),
                (None, Some(f), None) => Key::Digest(key_digest(kind, &file_key(kind, &read(&f)?))),
                (None, None, Some(d)) => Key::Digest(d.to_ascii_lowercase()),
                _ => return Err(bad(format!("entry {i}: give exactly one of key, key_file, digest"))),
            };
            let response = match (e.response, e.response_file) {
                (Some(r), None) => r,
                (None, Some(f)) if f.ends_with(".abm") => fence("abm", &read(&f)?),
                (None, Some(f)) => read(&f)?,
                _ => return Err(bad(format!("entry {i}: give exactly one of response, response_file"))),
            };
            entries.push(Entry { kind, key, response });
        }
        let reference = match manifest.reference {
            Some(rel) => Some(
                parse_program(&read(&rel)?)
                    .map_err(|d| bad(format!("reference program {rel} has defects: {}", d[0])))?,
            ),
            None => None,
        };
        Ok(MockBackend {
            dir,
            entries,
            reference,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn lookup(&self, kind: PromptKind, digest: &str) -> Option<&str> {
        let exact = self
            .entries
            .iter()
            .find(|e| e.kind == kind && matches!(&e.key, Key::Digest(d) if d == digest));
        exact
            .or_else(|| {
                self.entries
                    .iter()
                    .find(|e| e.kind == kind && matches!(e.key, Key::Any))
            })
            .map(|e| e.response.as_str())
    }

    fn rule(&self, prompt: &PromptText) -> Option<String> {
        match prompt.kind {
            PromptKind::RectifyDefects => {
                let reference = self.reference.as_ref()?;
                splice_repair(prompt.slots.get("program")?, reference).map(|s| fence("abm", &s))
            }
            PromptKind::Modify => {
                let solutions: Vec<Solution> = serde_json::from_str(prompt.slots.get("solutions")?).ok()?;
                let directives: Vec<_> = solutions.into_iter().flat_map(|s| s.directives).collect();
                Some(fence("patch", &serde_json::to_string_pretty(&directives).ok()?))
            }
            _ => None,
        }
    }
}

impl Backend for MockBackend {
    fn name(&self) -> &str {
        "mock"
    }

    fn complete(&self, prompt: &PromptText) -> Result<String, GeneratorError> {
        let digest = key_digest(prompt.kind, prompt.key());
        if let Some(r) = self.lookup(prompt.kind, &digest) {
            return Ok(r.to_string());
        }
        self.rule(prompt).ok_or(GeneratorError::FixtureMiss {
            kind: prompt.kind,
            digest,
        })
    }
}

/// Source span of one activity: header line index and closing-brace line index.
struct ActivitySpan {
    object: String,
    activity: String,
    first: usize,
    last: usize,
}

struct ObjectSpan {
    name: String,
    close: usize,
}

/// Locate objects and activities by scanning headers and counting braces.
fn scan(source: &[&str]) -> (Vec<ObjectSpan>, Vec<ActivitySpan>) {
    let mut objects = Vec::new();
    let mut activities = Vec::new();
    let mut depth: i32 = 0;
    let mut object: Option<(String, i32)> = None;
    let mut activity: Option<(String, usize, i32)> = None;
    for (i, raw) in source.iter().enumerate() {
        let line = raw.split('#').next().unwrap_or_default();
        let words: Vec<&str> = line
            .split(|c: char| c.is_whitespace() || c == '{')
            .filter(|w| !w.is_empty())
            .collect();
        if words.first() == Some(&"object") && object.is_none() {
            if let Some(n) = words.get(1) {
                object = Some((n.to_string(), depth));
            }
        }
        if words.first() == Some(&"activity") && activity.is_none() && object.is_some() {
            if let Some(n) = words.get(1) {
                activity = Some((n.to_string(), i, depth));
            }
        }
        for c in line.chars() {
            match c {
                '{' => depth += 1,
                '}' => depth -= 1,
                _ => {}
            }
        }
        if let Some((name, first, d)) = &activity {
            if depth <= *d && (line.contains('}') || line.contains('{')) {
                activities.push(ActivitySpan {
                    object: object.as_ref().map(|o| o.0.clone()).unwrap_or_default(),
                    activity: name.clone(),
                    first: *first,
                    last: i,
                });
                activity = None;
            }
        }
        if let Some((name, d)) = &object {
            if depth <= *d && line.contains('}') {
                objects.push(ObjectSpan {
                    name: name.clone(),
                    close: i,
                });
                object = None;
            }
        }
    }
    (objects, activities)
}

fn indent(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| if l.is_empty() { String::new() } else { format!("  {l}") })
        .collect()
}

/// Repair one defect class of `source` using activities of `reference`.
/// Returns `None` when a defect lies outside any activity the reference can
/// supply.
pub fn splice_repair(source: &str, reference: &AbmProgram) -> Option<String> {
    let analysis = analyze(source);
    let lines: Vec<&str> = source.lines().collect();
    let (objects, spans) = scan(&lines);

    let mut replace: Vec<(String, String)> = Vec::new();
    let mut add: Vec<(String, String)> = Vec::new();
    if !analysis.defects.is_empty() {
        for d in &analysis.defects {
            let Defect::Compilation { line, .. } = d else { continue };
            let idx = (*line as usize).saturating_sub(1);
            let span = spans.iter().find(|s| s.first <= idx && idx <= s.last)?;
            reference.object(&span.object)?.activity(&span.activity)?;
            replace.push((span.object.clone(), span.activity.clone()));
        }
    } else {
        let program = analysis.program?;
        for d in crate::verifier1::check_program(&program, None) {
            if let Defect::LackingDetail { object, activity, .. } = d {
                reference.object(&object)?.activity(&activity)?;
                replace.push((object, activity));
            }
        }
        for ro in &reference.objects {
            let Some(po) = program.object(&ro.name) else { continue };
            for ra in &ro.activities {
                if po.activity(&ra.name).is_none() {
                    add.push((ro.name.clone(), ra.name.clone()));
                }
            }
        }
    }
    if replace.is_empty() && add.is_empty() {
        return None;
    }
    let replace: HashSet<(String, String)> = replace.into_iter().collect();

    let mut out: Vec<String> = Vec::with_capacity(lines.len());
    let mut i = 0;
    while i < lines.len() {
        if let Some(span) = spans
            .iter()
            .find(|s| s.first == i && replace.contains(&(s.object.clone(), s.activity.clone())))
        {
            let act = reference.object(&span.object)?.activity(&span.activity)?;
            out.extend(indent(&print_activity_source(act)));
            i = span.last + 1;
            continue;
        }
        if let Some(obj) = objects.iter().find(|o| o.close == i) {
            for (o, a) in add.iter().filter(|(o, _)| *o == obj.name) {
                let act = reference.object(o)?.activity(a)?;
                out.push(String::new());
                out.extend(indent(&print_activity_source(act)));
            }
        }
        out.push(lines[i].to_string());
        i += 1;
    }
    let mut text = out.join("\n");
    text.push('\n');
    Some(text)
}
