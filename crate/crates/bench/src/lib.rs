//! Shared inputs for the `sage` benchmarks.

use std::path::PathBuf;

use sage_core::eval::{load_corpus, Sample};

/// The bundled corpus at the workspace root.
pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

/// Every corpus sample; panics when the corpus is missing or invalid.
pub fn corpus() -> Vec<Sample> {
    load_corpus(&corpus_dir()).expect("bundled corpus loads")
}

#[cfg(test)]
mod tests {
    #[test]
    fn corpus_loads() {
        assert_eq!(super::corpus().len(), 6);
    }
}
