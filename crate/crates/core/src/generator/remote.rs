//! Chat-completion backend over HTTP.
//!
//! Request body: `{"model", "messages": [{"role": "user", "content"}],
//! "temperature": 0}`; the reply text is `choices[0].message.content`. The
//! bearer token comes from `SAGE_API_KEY` and is never logged.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{Backend, GeneratorError, PromptText};

pub const API_KEY_VAR: &str = "SAGE_API_KEY";

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub model: String,
    pub timeout: Duration,
    pub max_retries: u32,
    pub max_in_flight: usize,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            endpoint: "http://127.0.0.1:8000/v1/chat/completions".into(),
            model: "default".into(),
            timeout: Duration::from_secs(120),
            max_retries: 2,
            max_in_flight: 4,
        }
    }
}

struct Slots {
    used: Mutex<usize>,
    freed: Condvar,
    cap: usize,
}

struct Permit<'a>(&'a Slots);

impl Slots {
    fn acquire(&self) -> Permit<'_> {
        let mut used = self.used.lock().expect("in-flight counter poisoned");
        while *used >= self.cap {
            used = self.freed.wait(used).expect("in-flight counter poisoned");
        }
        *used += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.used.lock().expect("in-flight counter poisoned") -= 1;
        self.0.freed.notify_one();
    }
}

pub struct RemoteBackend {
    config: RemoteConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
    slots: Slots,
}

impl std::fmt::Debug for RemoteBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteBackend")
            .field("config", &self.config)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

#[derive(Deserialize)]
struct ChatReply {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: String,
}

enum Attempt {
    Done(String),
    Retry(GeneratorError),
    Fail(GeneratorError),
}

impl RemoteBackend {
    /// Backend using the key from `SAGE_API_KEY`, if set.
    pub fn new(config: RemoteConfig) -> Self {
        let key = std::env::var(API_KEY_VAR).ok().filter(|k| !k.is_empty());
        Self::with_key(config, key)
    }

    pub fn with_key(config: RemoteConfig, api_key: Option<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let cap = config.max_in_flight.max(1);
        RemoteBackend {
            config,
            api_key,
            agent,
            slots: Slots {
                used: Mutex::new(0),
                freed: Condvar::new(),
                cap,
            },
        }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn attempt(&self, body: &serde_json::Value) -> Attempt {
        let mut req = self
            .agent
            .post(&self.config.endpoint)
            .header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = match req.send_json(body) {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => return Attempt::Retry(GeneratorError::BackendTimeout { attempts: 0 }),
            Err(e) => return Attempt::Retry(GeneratorError::Http(e.to_string())),
        };
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Attempt::Retry(GeneratorError::Http(format!("status {status}")));
        }
        if status >= 400 {
            return Attempt::Fail(GeneratorError::Http(format!("status {status}")));
        }
        match resp.body_mut().read_json::<ChatReply>() {
            Ok(reply) => match reply.choices.into_iter().next() {
                Some(c) => Attempt::Done(c.message.content),
                None => Attempt::Fail(GeneratorError::Http("reply has no choices".into())),
            },
            Err(ureq::Error::Timeout(_)) => Attempt::Retry(GeneratorError::BackendTimeout { attempts: 0 }),
            Err(e) => Attempt::Fail(GeneratorError::Http(format!("malformed reply: {e}"))),
        }
    }
}

impl Backend for RemoteBackend {
    fn name(&self) -> &str {
        "remote"
    }

    fn complete(&self, prompt: &PromptText) -> Result<String, GeneratorError> {
        let body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt.text}],
            "temperature": 0,
        });
        let _permit = self.slots.acquire();
        let attempts = self.config.max_retries + 1;
        let mut last = GeneratorError::Http("no attempt made".into());
        for n in 1..=attempts {
            match self.attempt(&body) {
                Attempt::Done(text) => return Ok(text),
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(e) => {
                    ::log::warn!("{} request attempt {n}/{attempts} failed: {e}", prompt.kind);
                    last = e;
                }
            }
        }
        Err(match last {
            GeneratorError::BackendTimeout { .. } => GeneratorError::BackendTimeout { attempts },
            other => other,
        })
    }
}
