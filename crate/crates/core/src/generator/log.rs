//! Run artifact directory: `<root>/<id>/NN-<kind>.prompt.txt` and
//! `NN-<kind>.response.txt`, numbered from 01 in exchange order.

use std::path::{Path, PathBuf};
use std::sync::Mutex;

use super::{GeneratorError, PromptKind, PromptText};

#[derive(Debug)]
pub struct RunLog {
    dir: PathBuf,
    counter: Mutex<u32>,
}

impl RunLog {
    pub fn create(root: impl AsRef<Path>, id: &str) -> Result<Self, GeneratorError> {
        let dir = root.as_ref().join(id);
        std::fs::create_dir_all(&dir).map_err(|e| GeneratorError::Io(format!("{}: {e}", dir.display())))?;
        Ok(RunLog {
            dir,
            counter: Mutex::new(0),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Number of exchanges started so far.
    pub fn count(&self) -> u32 {
        *self.counter.lock().expect("run log counter poisoned")
    }

    fn write(&self, name: String, text: &str) -> Result<(), GeneratorError> {
        let path = self.dir.join(name);
        std::fs::write(&path, text).map_err(|e| GeneratorError::Io(format!("{}: {e}", path.display())))
    }

    pub(super) fn write_prompt(&self, prompt: &PromptText) -> Result<u32, GeneratorError> {
        let n = {
            let mut c = self.counter.lock().expect("run log counter poisoned");
            *c += 1;
            *c
        };
        self.write(format!("{n:02}-{}.prompt.txt", prompt.kind), &prompt.text)?;
        Ok(n)
    }

    pub(super) fn write_response(&self, n: u32, kind: PromptKind, raw: &str) -> Result<(), GeneratorError> {
        self.write(format!("{n:02}-{kind}.response.txt"), raw)
    }

    pub(super) fn write_error(&self, n: u32, kind: PromptKind, message: &str) -> Result<(), GeneratorError> {
        self.write(format!("{n:02}-{kind}.error.txt"), message)
    }
}
