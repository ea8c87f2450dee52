//! Conceptual and objective representations: the two JSON input documents.
//!
//! Documents are validated field by field so that every rejection names a
//! JSON path (`$.objects[0].states[1].type`) and the line where the offending
//! value starts. Unknown keys are errors.

use std::collections::{HashMap, HashSet};

use indexmap::IndexMap;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::dsl::{is_identifier, Number, ScheduleKind, Type};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RepresentationError {
    #[error("syntax error at {path} (line {line}, column {column}): {message}")]
    Syntax {
        path: String,
        line: u32,
        column: u32,
        message: String,
    },
    #[error("schema error at {path} (line {line}): {message}")]
    Schema { path: String, line: u32, message: String },
}

impl RepresentationError {
    pub fn path(&self) -> &str {
        match self {
            RepresentationError::Syntax { path, .. } | RepresentationError::Schema { path, .. } => path,
        }
    }

    pub fn line(&self) -> u32 {
        match self {
            RepresentationError::Syntax { line, .. } | RepresentationError::Schema { line, .. } => *line,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpec {
    pub name: String,
    pub description: String,
    pub ty: Type,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActivitySpec {
    pub name: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSpec {
    pub name: String,
    pub states: Vec<StateSpec>,
    pub activities: Vec<ActivitySpec>,
}

impl ObjectSpec {
    pub fn activity(&self, name: &str) -> Option<&ActivitySpec> {
        self.activities.iter().find(|a| a.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleDirective {
    pub kind: ScheduleKind,
    pub object: String,
    pub activity: String,
    /// Verbatim condition text; parsed by the `.abm` front end.
    pub condition: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConceptualRepresentation {
    pub objects: Vec<ObjectSpec>,
    pub scheduling: Vec<ScheduleDirective>,
    pub parameters: IndexMap<String, Number>,
}

impl ConceptualRepresentation {
    pub fn object(&self, name: &str) -> Option<&ObjectSpec> {
        self.objects.iter().find(|o| o.name == name)
    }

    pub fn activity_description(&self, object: &str, activity: &str) -> Option<&str> {
        self.object(object)?.activity(activity).map(|a| a.description.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Criterion {
    pub variable_name: String,
    /// Sample value showing the metric's data type.
    pub variable_example: Value,
    pub requirement: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveRepresentation {
    pub problem: String,
    pub criteria: Vec<Criterion>,
}

/// Parse and validate a conceptual representation document.
pub fn parse_conceptual(document: &str) -> Result<ConceptualRepresentation, RepresentationError> {
    let (value, lines) = load(document)?;
    let v = Validator { lines: &lines };
    let top = v.object(&value, "$", &["objects", "scheduling", "parameters"])?;

    let objects_value = v.required(top, "$", "objects")?;
    let list = v.array(objects_value, "$.objects")?;
    if list.is_empty() {
        return Err(v.schema("$.objects", "a scenario needs at least one object"));
    }
    let mut objects: Vec<ObjectSpec> = Vec::with_capacity(list.len());
    for (i, item) in list.iter().enumerate() {
        let path = format!("$.objects[{i}]");
        let obj = v.object(item, &path, &["name", "states", "activities"])?;
        let name = v.identifier(obj, &path, "name")?;
        if objects.iter().any(|o| o.name == name) {
            return Err(v.schema(&format!("{path}.name"), &format!("duplicate object name `{name}`")));
        }
        let states_path = format!("{path}.states");
        let states_list = v.array(v.required(obj, &path, "states")?, &states_path)?;
        if states_list.is_empty() {
            return Err(v.schema(&states_path, &format!("object `{name}` needs at least one state")));
        }
        let mut states: Vec<StateSpec> = Vec::new();
        for (j, s) in states_list.iter().enumerate() {
            let sp = format!("{states_path}[{j}]");
            let so = v.object(s, &sp, &["name", "description", "type"])?;
            let sname = v.identifier(so, &sp, "name")?;
            if states.iter().any(|x| x.name == sname) {
                return Err(v.schema(
                    &format!("{sp}.name"),
                    &format!("duplicate state `{sname}` in object `{name}`"),
                ));
            }
            let description = v.text(so, &sp, "description")?;
            let ty_text = v.string(so, &sp, "type")?;
            let ty = match ty_text.as_str() {
                "bool" => Type::Bool,
                "int" => Type::Int,
                "real" => Type::Real,
                "position" => Type::Position,
                other => {
                    return Err(v.schema(
                        &format!("{sp}.type"),
                        &format!("unknown state type `{other}` (expected bool, int, real or position)"),
                    ))
                }
            };
            states.push(StateSpec {
                name: sname,
                description,
                ty,
            });
        }
        let acts_path = format!("{path}.activities");
        let acts_list = v.array(v.required(obj, &path, "activities")?, &acts_path)?;
        let mut activities: Vec<ActivitySpec> = Vec::new();
        for (j, a) in acts_list.iter().enumerate() {
            let ap = format!("{acts_path}[{j}]");
            let ao = v.object(a, &ap, &["name", "description"])?;
            let aname = v.identifier(ao, &ap, "name")?;
            if activities.iter().any(|x| x.name == aname) {
                return Err(v.schema(
                    &format!("{ap}.name"),
                    &format!("duplicate activity `{aname}` in object `{name}`"),
                ));
            }
            let description = v.text(ao, &ap, "description")?;
            activities.push(ActivitySpec {
                name: aname,
                description,
            });
        }
        objects.push(ObjectSpec {
            name,
            states,
            activities,
        });
    }

    let sched_list = v.array(v.required(top, "$", "scheduling")?, "$.scheduling")?;
    let mut scheduling = Vec::with_capacity(sched_list.len());
    for (i, item) in sched_list.iter().enumerate() {
        let path = format!("$.scheduling[{i}]");
        let so = v.object(item, &path, &["kind", "object", "activity", "condition"])?;
        let kind_text = v.string(so, &path, "kind")?;
        let kind = ScheduleKind::from_name(&kind_text).ok_or_else(|| {
            v.schema(
                &format!("{path}.kind"),
                &format!("unknown schedule kind `{kind_text}` (expected Do, Random_Do, Conditional_Do or Random_Conditional_Do)"),
            )
        })?;
        let object = v.identifier(so, &path, "object")?;
        let activity = v.identifier(so, &path, "activity")?;
        let condition = match so.get("condition") {
            None | Some(Value::Null) => None,
            Some(Value::String(c)) => Some(c.clone()),
            Some(_) => return Err(v.schema(&format!("{path}.condition"), "expected a string")),
        };
        match (&condition, kind.is_conditional()) {
            (None, true) => return Err(v.schema(&path, &format!("{} requires a condition", kind.name()))),
            (Some(c), true) if c.trim().is_empty() => {
                return Err(v.schema(&format!("{path}.condition"), "condition must not be empty"))
            }
            (Some(_), false) => {
                return Err(v.schema(
                    &format!("{path}.condition"),
                    &format!("{} takes no condition", kind.name()),
                ))
            }
            _ => {}
        }
        let Some(owner) = objects.iter().find(|o| o.name == object) else {
            return Err(v.schema(&format!("{path}.object"), &format!("unknown object `{object}`")));
        };
        if owner.activity(&activity).is_none() {
            return Err(v.schema(
                &format!("{path}.activity"),
                &format!("unknown activity `{object}.{activity}`"),
            ));
        }
        scheduling.push(ScheduleDirective {
            kind,
            object,
            activity,
            condition,
        });
    }

    let mut parameters = IndexMap::new();
    if let Some(p) = top.get("parameters") {
        let po = v.object(p, "$.parameters", &[])?;
        for (name, val) in po {
            let pp = format!("$.parameters.{name}");
            if !is_identifier(name) {
                return Err(v.schema(&pp, &format!("`{name}` is not a valid identifier")));
            }
            let n = match val {
                Value::Number(n) => number(n),
                _ => return Err(v.schema(&pp, "parameter values must be numbers")),
            };
            parameters.insert(name.clone(), n);
        }
    }
    Ok(ConceptualRepresentation {
        objects,
        scheduling,
        parameters,
    })
}

/// Parse and validate an objective representation document.
pub fn parse_objective(document: &str) -> Result<ObjectiveRepresentation, RepresentationError> {
    let (value, lines) = load(document)?;
    let v = Validator { lines: &lines };
    let top = v.object(&value, "$", &["problem", "criteria"])?;
    let problem = v.text(top, "$", "problem")?;
    let list = v.array(v.required(top, "$", "criteria")?, "$.criteria")?;
    if list.is_empty() {
        return Err(v.schema("$.criteria", "an objective needs at least one criterion"));
    }
    let mut criteria = Vec::with_capacity(list.len());
    for (i, item) in list.iter().enumerate() {
        let path = format!("$.criteria[{i}]");
        let co = v.object(item, &path, &["variable_name", "variable_example", "requirement"])?;
        let variable_name = v.identifier(co, &path, "variable_name")?;
        let variable_example = v.required(co, &path, "variable_example")?.clone();
        let requirement = v.text(co, &path, "requirement")?;
        criteria.push(Criterion {
            variable_name,
            variable_example,
            requirement,
        });
    }
    Ok(ObjectiveRepresentation { problem, criteria })
}

/// Canonical JSON form of a conceptual representation.
pub fn render_conceptual(rep: &ConceptualRepresentation) -> String {
    let objects: Vec<Value> = rep
        .objects
        .iter()
        .map(|o| {
            let mut m = Map::new();
            m.insert("name".into(), Value::String(o.name.clone()));
            m.insert(
                "states".into(),
                Value::Array(
                    o.states
                        .iter()
                        .map(|s| {
                            let mut sm = Map::new();
                            sm.insert("name".into(), Value::String(s.name.clone()));
                            sm.insert("description".into(), Value::String(s.description.clone()));
                            sm.insert("type".into(), Value::String(s.ty.name().into()));
                            Value::Object(sm)
                        })
                        .collect(),
                ),
            );
            m.insert(
                "activities".into(),
                Value::Array(
                    o.activities
                        .iter()
                        .map(|a| {
                            let mut am = Map::new();
                            am.insert("name".into(), Value::String(a.name.clone()));
                            am.insert("description".into(), Value::String(a.description.clone()));
                            Value::Object(am)
                        })
                        .collect(),
                ),
            );
            Value::Object(m)
        })
        .collect();
    let scheduling: Vec<Value> = rep
        .scheduling
        .iter()
        .map(|s| {
            let mut m = Map::new();
            m.insert("kind".into(), Value::String(s.kind.name().into()));
            m.insert("object".into(), Value::String(s.object.clone()));
            m.insert("activity".into(), Value::String(s.activity.clone()));
            if let Some(c) = &s.condition {
                m.insert("condition".into(), Value::String(c.clone()));
            }
            Value::Object(m)
        })
        .collect();
    let mut parameters = Map::new();
    for (k, n) in &rep.parameters {
        parameters.insert(k.clone(), number_value(*n));
    }
    let mut top = Map::new();
    top.insert("objects".into(), Value::Array(objects));
    top.insert("scheduling".into(), Value::Array(scheduling));
    top.insert("parameters".into(), Value::Object(parameters));
    pretty(&Value::Object(top))
}

/// Canonical JSON form of an objective representation.
pub fn render_objective(o: &ObjectiveRepresentation) -> String {
    let criteria: Vec<Value> = o
        .criteria
        .iter()
        .map(|c| {
            let mut m = Map::new();
            m.insert("variable_name".into(), Value::String(c.variable_name.clone()));
            m.insert("variable_example".into(), c.variable_example.clone());
            m.insert("requirement".into(), Value::String(c.requirement.clone()));
            Value::Object(m)
        })
        .collect();
    let mut top = Map::new();
    top.insert("problem".into(), Value::String(o.problem.clone()));
    top.insert("criteria".into(), Value::Array(criteria));
    pretty(&Value::Object(top))
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s
}

fn number(n: &serde_json::Number) -> Number {
    match n.as_i64() {
        Some(i) if !n.is_f64() => Number::Int(i),
        _ => Number::Real(n.as_f64().unwrap_or(f64::NAN)),
    }
}

fn number_value(n: Number) -> Value {
    match n {
        Number::Int(i) => Value::from(i),
        Number::Real(r) => serde_json::Number::from_f64(r)
            .map(Value::Number)
            .unwrap_or(Value::Null),
    }
}

fn load(document: &str) -> Result<(Value, HashMap<String, u32>), RepresentationError> {
    let value: Value = serde_json::from_str(document).map_err(|e| RepresentationError::Syntax {
        path: "$".into(),
        line: e.line().max(1) as u32,
        column: e.column() as u32,
        message: e.to_string(),
    })?;
    let (lines, duplicate) = line_map(document);
    if let Some((path, line)) = duplicate {
        let key = path.rsplit('.').next().unwrap_or_default().to_string();
        return Err(RepresentationError::Schema {
            path,
            line,
            message: format!("duplicate key `{key}`"),
        });
    }
    Ok((value, lines))
}

struct Validator<'a> {
    lines: &'a HashMap<String, u32>,
}

impl Validator<'_> {
    fn line(&self, path: &str) -> u32 {
        // Fall back to the nearest enclosing path that was located.
        let mut p = path;
        loop {
            if let Some(l) = self.lines.get(p) {
                return *l;
            }
            match p.rfind(['.', '[']) {
                Some(i) if i > 0 => p = &p[..i],
                _ => return 1,
            }
        }
    }

    fn schema(&self, path: &str, message: &str) -> RepresentationError {
        RepresentationError::Schema {
            path: path.to_string(),
            line: self.line(path),
            message: message.to_string(),
        }
    }

    fn object<'v>(
        &self,
        v: &'v Value,
        path: &str,
        allowed: &[&str],
    ) -> Result<&'v Map<String, Value>, RepresentationError> {
        let Value::Object(m) = v else {
            return Err(self.schema(path, "expected an object"));
        };
        if !allowed.is_empty() {
            for key in m.keys() {
                if !allowed.contains(&key.as_str()) {
                    return Err(self.schema(&format!("{path}.{key}"), &format!("unknown field `{key}`")));
                }
            }
        }
        Ok(m)
    }

    fn array<'v>(&self, v: &'v Value, path: &str) -> Result<&'v Vec<Value>, RepresentationError> {
        match v {
            Value::Array(a) => Ok(a),
            _ => Err(self.schema(path, "expected an array")),
        }
    }

    fn required<'v>(&self, m: &'v Map<String, Value>, path: &str, key: &str) -> Result<&'v Value, RepresentationError> {
        m.get(key)
            .ok_or_else(|| self.schema(path, &format!("missing field `{key}`")))
    }

    fn string(&self, m: &Map<String, Value>, path: &str, key: &str) -> Result<String, RepresentationError> {
        match self.required(m, path, key)? {
            Value::String(s) => Ok(s.clone()),
            _ => Err(self.schema(&format!("{path}.{key}"), "expected a string")),
        }
    }

    fn text(&self, m: &Map<String, Value>, path: &str, key: &str) -> Result<String, RepresentationError> {
        let s = self.string(m, path, key)?;
        if s.trim().is_empty() {
            return Err(self.schema(&format!("{path}.{key}"), &format!("`{key}` must not be empty")));
        }
        Ok(s)
    }

    fn identifier(&self, m: &Map<String, Value>, path: &str, key: &str) -> Result<String, RepresentationError> {
        let s = self.string(m, path, key)?;
        if !is_identifier(&s) {
            return Err(self.schema(&format!("{path}.{key}"), &format!("`{s}` is not a valid identifier")));
        }
        Ok(s)
    }
}

/// Line on which each value of a syntactically valid JSON document starts,
/// keyed by its path (`$`, `$.a`, `$.a[2].b`), plus the first duplicated key.
fn line_map(text: &str) -> (HashMap<String, u32>, Option<(String, u32)>) {
    let mut scanner = Scanner {
        bytes: text.as_bytes(),
        pos: 0,
        line: 1,
        out: HashMap::new(),
        duplicate: None,
    };
    scanner.value("$".to_string());
    (scanner.out, scanner.duplicate)
}

struct Scanner<'a> {
    bytes: &'a [u8],
    pos: usize,
    line: u32,
    out: HashMap<String, u32>,
    duplicate: Option<(String, u32)>,
}

impl Scanner<'_> {
    fn skip_ws(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            match b {
                b'\n' => self.line += 1,
                b' ' | b'\t' | b'\r' => {}
                _ => break,
            }
            self.pos += 1;
        }
    }

    fn string(&mut self) -> String {
        let start = self.pos;
        self.pos += 1;
        while let Some(&b) = self.bytes.get(self.pos) {
            self.pos += 1;
            match b {
                b'\\' => self.pos += 1,
                b'"' => break,
                _ => {}
            }
        }
        serde_json::from_slice(&self.bytes[start..self.pos.min(self.bytes.len())]).unwrap_or_default()
    }

    fn value(&mut self, path: String) {
        self.skip_ws();
        self.out.entry(path.clone()).or_insert(self.line);
        match self.bytes.get(self.pos) {
            Some(b'{') => {
                self.pos += 1;
                let mut seen = HashSet::new();
                loop {
                    self.skip_ws();
                    match self.bytes.get(self.pos) {
                        Some(b'}') | None => {
                            self.pos += 1;
                            return;
                        }
                        Some(b',') => self.pos += 1,
                        Some(b'"') => {
                            let key_line = self.line;
                            let key = self.string();
                            let child = format!("{path}.{key}");
                            if seen.insert(key) {
                                self.out.insert(child.clone(), key_line);
                            } else if self.duplicate.is_none() {
                                self.duplicate = Some((child.clone(), key_line));
                            }
                            self.skip_ws();
                            self.pos += 1; // ':'
                            self.value(child);
                        }
                        Some(_) => self.pos += 1,
                    }
                }
            }
            Some(b'[') => {
                self.pos += 1;
                let mut index = 0;
                loop {
                    self.skip_ws();
                    match self.bytes.get(self.pos) {
                        Some(b']') | None => {
                            self.pos += 1;
                            return;
                        }
                        Some(b',') => self.pos += 1,
                        Some(_) => {
                            self.value(format!("{path}[{index}]"));
                            index += 1;
                        }
                    }
                }
            }
            Some(b'"') => {
                self.string();
            }
            Some(_) => {
                while let Some(&b) = self.bytes.get(self.pos) {
                    if matches!(b, b',' | b'}' | b']') || b.is_ascii_whitespace() {
                        break;
                    }
                    self.pos += 1;
                }
            }
            None => {}
        }
    }
}
