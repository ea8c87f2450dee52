//! Evaluation: CodeBLEU, executable/elaborate rates and iteration counts over
//! a corpus, and solution substantiveness.
//!
//! A corpus is a directory of samples:
//!
//! ```text
//! corpus/<sample>/scenario.json
//! corpus/<sample>/reference.abm
//! corpus/<sample>/objective.json      (optional)
//! corpus/<sample>/fixtures/           (mock backend)
//! ```
//!
//! Samples run in parallel; the report lists them by name and is
//! independent of the corpus location, so reruns produce identical bytes.

mod codebleu;
mod rename;
mod substantive;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

pub use codebleu::{
    ast_match, brevity_penalty, codebleu, dataflow_edges, dataflow_match, ngram_precision, subtree_counts, tokens,
    CodeBleuScore, CodeBleuWeights, DataflowEdge, InvalidWeights,
};
pub use rename::rename_identifiers;
pub use substantive::{assess_substantiveness, SubstantivenessReport};

use crate::dsl::parse_program;
use crate::generator::{Backend, Generator, GeneratorError, RunLog};
use crate::pipeline::{run_modeling, run_solving, Budgets};
use crate::representation::{parse_conceptual, parse_objective};
use crate::verifier1::summarize;

pub const SCENARIO_FILE: &str = "scenario.json";
pub const REFERENCE_FILE: &str = "reference.abm";
pub const OBJECTIVE_FILE: &str = "objective.json";
pub const FIXTURES_DIR: &str = "fixtures";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
    #[error(transparent)]
    Weights(#[from] InvalidWeights),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub name: String,
    pub dir: PathBuf,
    pub scenario: crate::representation::ConceptualRepresentation,
    pub reference: crate::dsl::AbmProgram,
    pub objective: Option<crate::representation::ObjectiveRepresentation>,
}

fn read(path: &Path) -> Result<String, EvalError> {
    std::fs::read_to_string(path).map_err(|e| EvalError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Load every sample directory of `corpus`, sorted by name.
pub fn load_corpus(corpus: &Path) -> Result<Vec<Sample>, EvalError> {
    let entries = std::fs::read_dir(corpus).map_err(|e| EvalError::Io {
        path: corpus.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.join(SCENARIO_FILE).is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(EvalError::Invalid {
            path: corpus.to_path_buf(),
            message: format!("no sample directories with a {SCENARIO_FILE}"),
        });
    }
    dirs.iter().map(|d| load_sample(d)).collect()
}

pub fn load_sample(dir: &Path) -> Result<Sample, EvalError> {
    let invalid = |path: PathBuf, message: String| EvalError::Invalid { path, message };
    let scenario_path = dir.join(SCENARIO_FILE);
    let scenario =
        parse_conceptual(&read(&scenario_path)?).map_err(|e| invalid(scenario_path.clone(), e.to_string()))?;
    let reference_path = dir.join(REFERENCE_FILE);
    let reference = parse_program(&read(&reference_path)?).map_err(|d| {
        invalid(
            reference_path.clone(),
            format!("reference program has {} defect(s), first: {}", d.len(), d[0]),
        )
    })?;
    let objective_path = dir.join(OBJECTIVE_FILE);
    let objective = if objective_path.is_file() {
        Some(parse_objective(&read(&objective_path)?).map_err(|e| invalid(objective_path.clone(), e.to_string()))?)
    } else {
        None
    };
    Ok(Sample {
        name: dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        dir: dir.to_path_buf(),
        scenario,
        reference,
        objective,
    })
}

/// Settings for a corpus run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalConfig {
    pub budgets: Budgets,
    pub weights: CodeBleuWeights,
    pub seed: u64,
    pub steps: u64,
    #[serde(skip)]
    pub runs_dir: Option<PathBuf>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            budgets: Budgets::default(),
            weights: CodeBleuWeights::default(),
            seed: 42,
            steps: 50,
            runs_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolvingResult {
    pub success: bool,
    pub iterations_used: u32,
    pub solutions: Vec<String>,
    pub substantive: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleResult {
    pub name: String,
    pub executable: bool,
    pub elaborate: bool,
    pub success: bool,
    pub iterations_used: u32,
    pub defects: usize,
    pub codebleu: Option<CodeBleuScore>,
    pub error: Option<String>,
    pub solving: Option<SolvingResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub samples: usize,
    pub executable_rate: f64,
    pub elaborate_rate: f64,
    pub mean_codebleu: f64,
    /// Repair rounds of successful samples, binned; unresolved samples
    /// count in the last bin.
    pub iteration_histogram: BTreeMap<&'static str, usize>,
    pub solving_attempted: usize,
    pub solving_succeeded: usize,
    pub solving_substantive: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub config: EvalConfig,
    pub samples: Vec<SampleResult>,
    pub aggregate: Aggregate,
}

pub const HISTOGRAM_BINS: [&str; 4] = ["1: <=3", "2: 4-6", "3: 7-9", "4: >=10"];

pub fn histogram_bin(iterations: u32, success: bool) -> &'static str {
    match (success, iterations) {
        (false, _) => HISTOGRAM_BINS[3],
        (true, 0..=3) => HISTOGRAM_BINS[0],
        (true, 4..=6) => HISTOGRAM_BINS[1],
        (true, 7..=9) => HISTOGRAM_BINS[2],
        (true, _) => HISTOGRAM_BINS[3],
    }
}

fn percent(n: usize, of: usize) -> f64 {
    if of == 0 {
        0.0
    } else {
        // two decimals, so reports stay readable and stable
        (n as f64 * 10000.0 / of as f64).round() / 100.0
    }
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

pub type BackendFactory<'a> = dyn Fn(&Sample) -> Result<Box<dyn Backend>, GeneratorError> + Sync + 'a;

fn evaluate_sample(sample: &Sample, make_backend: &BackendFactory<'_>, config: &EvalConfig) -> SampleResult {
    let mut result = SampleResult {
        name: sample.name.clone(),
        executable: false,
        elaborate: false,
        success: false,
        iterations_used: config.budgets.modeling,
        defects: 0,
        codebleu: None,
        error: None,
        solving: None,
    };
    let generator = match make_backend(sample) {
        Ok(b) => {
            let g = Generator::from_box(b);
            match &config.runs_dir {
                Some(root) => match RunLog::create(root, &sample.name) {
                    Ok(log) => g.with_log(log),
                    Err(e) => {
                        result.error = Some(e.to_string());
                        return result;
                    }
                },
                None => g,
            }
        }
        Err(e) => {
            result.error = Some(e.to_string());
            return result;
        }
    };
    let outcome = match run_modeling(&sample.scenario, &generator, config.budgets.modeling) {
        Ok(o) => o,
        Err(e) => {
            result.error = Some(e.to_string());
            return result;
        }
    };
    let summary = summarize(outcome.final_defects());
    result.executable = summary.executable;
    result.elaborate = summary.elaborate;
    result.success = outcome.success;
    result.iterations_used = outcome.iterations_used;
    result.defects = summary.defects;
    if let Some(program) = &outcome.program {
        result.codebleu = codebleu(program, &sample.reference, config.weights).ok().map(|mut s| {
            s.ngram = round6(s.ngram);
            s.weighted_ngram = round6(s.weighted_ngram);
            s.ast_match = round6(s.ast_match);
            s.dataflow_match = round6(s.dataflow_match);
            s.total = round6(s.total);
            s
        });
    }
    if let (Some(objective), Some(program), true) = (&sample.objective, &outcome.program, outcome.success) {
        result.solving = Some(
            match run_solving(
                objective,
                program,
                &generator,
                config.budgets,
                config.seed,
                config.steps,
            ) {
                Ok(s) => {
                    let directives = s.applied_directives();
                    let substantive =
                        (s.best_round > 0).then(|| assess_substantiveness(&directives, &s.program, &s.trace).verdict);
                    SolvingResult {
                        success: s.success,
                        iterations_used: s.iterations_used,
                        solutions: s.solutions.iter().map(|x| x.title.clone()).collect(),
                        substantive,
                        error: None,
                    }
                }
                Err(e) => SolvingResult {
                    success: false,
                    iterations_used: config.budgets.solving,
                    solutions: Vec::new(),
                    substantive: None,
                    error: Some(e.to_string()),
                },
            },
        );
    }
    result
}

/// Run the modeling stage (and the solving stage for samples with an
/// objective) on every sample.
pub fn rate_corpus(
    samples: &[Sample],
    make_backend: &BackendFactory<'_>,
    config: &EvalConfig,
) -> Result<Report, EvalError> {
    config.weights.validate()?;
    let results: Vec<SampleResult> = samples
        .par_iter()
        .map(|s| evaluate_sample(s, make_backend, config))
        .collect();
    let n = results.len();
    let mut histogram: BTreeMap<&'static str, usize> = HISTOGRAM_BINS.iter().map(|b| (*b, 0)).collect();
    for r in &results {
        *histogram
            .entry(histogram_bin(r.iterations_used, r.success))
            .or_insert(0) += 1;
    }
    let scores: Vec<f64> = results
        .iter()
        .map(|r| r.codebleu.as_ref().map(|s| s.total).unwrap_or(0.0))
        .collect();
    let solving: Vec<&SolvingResult> = results.iter().filter_map(|r| r.solving.as_ref()).collect();
    let aggregate = Aggregate {
        samples: n,
        executable_rate: percent(results.iter().filter(|r| r.executable).count(), n),
        elaborate_rate: percent(results.iter().filter(|r| r.elaborate).count(), n),
        mean_codebleu: if n == 0 {
            0.0
        } else {
            round6(scores.iter().sum::<f64>() / n as f64)
        },
        iteration_histogram: histogram,
        solving_attempted: solving.len(),
        solving_succeeded: solving.iter().filter(|s| s.success).count(),
        solving_substantive: solving.iter().filter(|s| s.substantive == Some(true)).count(),
    };
    Ok(Report {
        config: config.clone(),
        samples: results,
        aggregate,
    })
}

/// Mock backend reading `<sample>/fixtures`.
pub fn mock_factory(sample: &Sample) -> Result<Box<dyn Backend>, GeneratorError> {
    Ok(Box::new(crate::generator::MockBackend::from_dir(
        sample.dir.join(FIXTURES_DIR),
    )?))
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Plain-text table of the report.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<16} {:>10} {:>9} {:>7} {:>6} {:>8}  {}\n",
            "sample", "executable", "elaborate", "rounds", "defects", "codebleu", "solving"
        ));
        for r in &self.samples {
            let yes = |b: bool| if b { "yes" } else { "no" };
            let score = r
                .codebleu
                .as_ref()
                .map(|s| format!("{:.4}", s.total))
                .unwrap_or_else(|| "-".into());
            let solving = match &r.solving {
                None => "-".to_string(),
                Some(s) if s.success && s.iterations_used == 0 => "criteria already met".to_string(),
                Some(s) if s.success => format!(
                    "solved in {} ({}{})",
                    s.iterations_used,
                    s.solutions.join("; "),
                    match s.substantive {
                        Some(true) => ", substantive",
                        Some(false) => ", not substantive",
                        None => "",
                    }
                ),
                Some(s) => format!(
                    "unsolved{}",
                    s.error.as_ref().map(|e| format!(": {e}")).unwrap_or_default()
                ),
            };
            out.push_str(&format!(
                "{:<16} {:>10} {:>9} {:>7} {:>6} {:>8}  {}\n",
                r.name,
                yes(r.executable),
                yes(r.elaborate),
                r.iterations_used,
                r.defects,
                score,
                solving
            ));
            if let Some(e) = &r.error {
                out.push_str(&format!("  error: {e}\n"));
            }
        }
        let a = &self.aggregate;
        out.push_str(&format!(
            "\nsamples {}  executable {:.2}%  elaborate {:.2}%  mean CodeBLEU {:.4}\n",
            a.samples, a.executable_rate, a.elaborate_rate, a.mean_codebleu
        ));
        let bins: Vec<String> = a
            .iteration_histogram
            .iter()
            .map(|(k, v)| format!("{}: {v}", &k[3..]))
            .collect();
        out.push_str(&format!("repair rounds  {}\n", bins.join("  ")));
        out.push_str(&format!(
            "solving  {} attempted, {} solved, {} substantive\n",
            a.solving_attempted, a.solving_succeeded, a.solving_substantive
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binning() {
        assert_eq!(histogram_bin(0, true), "1: <=3");
        assert_eq!(histogram_bin(3, true), "1: <=3");
        assert_eq!(histogram_bin(4, true), "2: 4-6");
        assert_eq!(histogram_bin(9, true), "3: 7-9");
        assert_eq!(histogram_bin(10, true), "4: >=10");
        assert_eq!(histogram_bin(2, false), "4: >=10");
    }

    #[test]
    fn percentages() {
        assert_eq!(percent(2, 2), 100.0);
        assert_eq!(percent(1, 3), 33.33);
        assert_eq!(percent(0, 0), 0.0);
    }
}
