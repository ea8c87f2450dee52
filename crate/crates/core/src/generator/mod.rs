//! Text-generation boundary: prompt templates, response parsing and the
//! backends that turn one into the other.
//!
//! Every exchange goes through [`Generator`], which writes the prompt to the
//! run log before calling the backend and the raw response right after, so
//! a crashed run can still be audited.

mod log;
pub mod mock;
mod prompt;
pub mod remote;
mod response;

use thiserror::Error;

pub use self::log::RunLog;
pub use mock::MockBackend;
pub use prompt::{render_prompt, PromptKind, PromptText, Slots};
pub use remote::{RemoteBackend, RemoteConfig, API_KEY_VAR};
pub use response::{blocks, fence, parse_response, Block, CoTResponse, Payload, PayloadParseError, Relation, Solution};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeneratorError {
    #[error("template {kind} needs slot `{slot}`")]
    MissingSlot { kind: PromptKind, slot: String },
    #[error("template {kind} has no slot `{slot}`")]
    UnknownSlot { kind: PromptKind, slot: String },
    #[error("backend timed out after {attempts} attempt(s)")]
    BackendTimeout { attempts: u32 },
    #[error("backend response unusable after retry: {error}")]
    BackendRefusal { kind: PromptKind, error: PayloadParseError },
    #[error("no fixture for {kind} request with key digest {digest}")]
    FixtureMiss { kind: PromptKind, digest: String },
    #[error("http: {0}")]
    Http(String),
    #[error("run log: {0}")]
    Io(String),
    #[error("fixtures: {0}")]
    Fixture(String),
}

/// Something that answers a rendered prompt with raw text.
pub trait Backend: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, prompt: &PromptText) -> Result<String, GeneratorError>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorResponse {
    pub kind: PromptKind,
    pub raw: String,
    pub payload: Result<Payload, PayloadParseError>,
}

impl GeneratorResponse {
    pub fn parsed(&self) -> Option<&Payload> {
        self.payload.as_ref().ok()
    }
}

pub struct Generator {
    backend: Box<dyn Backend>,
    log: Option<RunLog>,
}

impl std::fmt::Debug for Generator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Generator")
            .field("backend", &self.backend.name())
            .field("log", &self.log)
            .finish()
    }
}

impl Generator {
    pub fn new(backend: impl Backend + 'static) -> Self {
        Generator {
            backend: Box::new(backend),
            log: None,
        }
    }

    pub fn from_box(backend: Box<dyn Backend>) -> Self {
        Generator { backend, log: None }
    }

    pub fn with_log(mut self, log: RunLog) -> Self {
        self.log = Some(log);
        self
    }

    pub fn backend_name(&self) -> &str {
        self.backend.name()
    }

    pub fn run_log(&self) -> Option<&RunLog> {
        self.log.as_ref()
    }

    /// One logged exchange. The parse outcome is recorded in the response;
    /// backend and logging failures are errors.
    pub fn exchange(&self, prompt: &PromptText) -> Result<GeneratorResponse, GeneratorError> {
        let n = match &self.log {
            Some(log) => Some(log.write_prompt(prompt)?),
            None => None,
        };
        ::log::debug!("{} request to {} backend", prompt.kind, self.backend.name());
        let result = self.backend.complete(prompt);
        if let (Some(log), Some(n)) = (&self.log, n) {
            match &result {
                Ok(raw) => log.write_response(n, prompt.kind, raw)?,
                Err(e) => log.write_error(n, prompt.kind, &e.to_string())?,
            }
        }
        let raw = result?;
        let payload = parse_response(prompt.kind, &raw);
        Ok(GeneratorResponse {
            kind: prompt.kind,
            raw,
            payload,
        })
    }

    /// Exchange, retrying once with the parse error appended when the
    /// response does not follow the block convention.
    pub fn generate(&self, prompt: &PromptText) -> Result<GeneratorResponse, GeneratorError> {
        let first = self.exchange(prompt)?;
        let Err(error) = &first.payload else {
            return Ok(first);
        };
        ::log::warn!("{} response unparseable ({error}); retrying", prompt.kind);
        let mut retry = prompt.clone();
        retry.text = format!(
            "{}\n\nYour previous reply could not be used: {error}. Reply again, following the fenced block convention above.\n",
            prompt.text.trim_end()
        );
        let second = self.exchange(&retry)?;
        match second.payload {
            Ok(_) => Ok(second),
            Err(error) => Err(GeneratorError::BackendRefusal {
                kind: prompt.kind,
                error,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    struct Scripted {
        replies: Vec<String>,
        calls: Arc<AtomicUsize>,
    }

    impl Backend for Scripted {
        fn name(&self) -> &str {
            "scripted"
        }
        fn complete(&self, _: &PromptText) -> Result<String, GeneratorError> {
            let i = self.calls.fetch_add(1, Ordering::SeqCst);
            Ok(self.replies[i.min(self.replies.len() - 1)].clone())
        }
    }

    fn prompt() -> PromptText {
        let mut s = Slots::new();
        s.insert("scenario", "{}");
        render_prompt(PromptKind::GenAbm, &s).unwrap()
    }

    #[test]
    fn retry_then_refusal() {
        let calls = Arc::new(AtomicUsize::new(0));
        let g = Generator::new(Scripted {
            replies: vec!["no blocks".into()],
            calls: calls.clone(),
        });
        assert!(matches!(
            g.generate(&prompt()),
            Err(GeneratorError::BackendRefusal { .. })
        ));
        assert_eq!(calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn retry_can_recover() {
        let calls = Arc::new(AtomicUsize::new(0));
        let g = Generator::new(Scripted {
            replies: vec!["no blocks".into(), fence("abm", "object a {}")],
            calls,
        });
        let r = g.generate(&prompt()).unwrap();
        assert_eq!(r.parsed().and_then(Payload::program), Some("object a {}\n"));
    }

    #[test]
    fn exchanges_are_logged_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let log = RunLog::create(dir.path(), "r1").unwrap();
        let g = Generator::new(Scripted {
            replies: vec!["x".into(), fence("abm", "object a {}")],
            calls: Arc::new(AtomicUsize::new(0)),
        })
        .with_log(log);
        g.generate(&prompt()).unwrap();
        let run = dir.path().join("r1");
        let mut names: Vec<String> = std::fs::read_dir(&run)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        assert_eq!(
            names,
            vec![
                "01-gen_abm.prompt.txt",
                "01-gen_abm.response.txt",
                "02-gen_abm.prompt.txt",
                "02-gen_abm.response.txt"
            ]
        );
        assert_eq!(
            std::fs::read_to_string(run.join("01-gen_abm.response.txt")).unwrap(),
            "x"
        );
    }
}
