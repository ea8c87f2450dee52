//! Subcommand implementations and exit-code mapping.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, Context};
use serde::Serialize;
use serde_json::json;

use sage_core::criteria::{compile_criteria, evaluate, CriterionPredicate};
use sage_core::dsl::{parse_program, AbmProgram};
use sage_core::eval::{assess_substantiveness, load_corpus, mock_factory, rate_corpus, EvalConfig, Sample};
use sage_core::generator::{
    Backend, Generator, GeneratorError, MockBackend, PromptText, RemoteBackend, RunLog, API_KEY_VAR,
};
use sage_core::pipeline::{evaluate_seeds, run_modeling, run_solving, PipelineError};
use sage_core::representation::{parse_conceptual, parse_objective};
use sage_core::simulator::simulate;
use sage_core::verifier1::{backward_slice, check_source};

use crate::config::{config_path, BackendKind, ConfigError, Layers, Settings, DEFAULT_SEED};
use crate::{Cli, Command, GlobalArgs, ReportFormat, RunArgs};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

fn usage(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        error: error.into(),
    }
}

fn failed(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: EXIT_FAILURE,
        error: error.into(),
    }
}

fn pipeline_failure(e: PipelineError) -> Failure {
    match e {
        PipelineError::DefectiveInput(_) | PipelineError::InvalidBudget(_) => usage(e),
        other => failed(other),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(usage)
}

fn load_program(path: &Path) -> Result<AbmProgram, Failure> {
    let source = read(path)?;
    parse_program(&source).map_err(|defects| {
        let listed: Vec<String> = defects.iter().take(5).map(|d| format!("  {d}")).collect();
        usage(anyhow!(
            "{} does not compile ({} defect(s)):\n{}",
            path.display(),
            defects.len(),
            listed.join("\n")
        ))
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text)
            .with_context(|| format!("cannot write {}", p.display()))
            .map_err(usage),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("summary serializes");
    s.push('\n');
    s
}

fn settings(global: &GlobalArgs, command: &Command) -> Result<Settings, ConfigError> {
    let lookup = |k: &str| std::env::var(k).ok();
    let mut layers = Layers::default();
    if let Some((path, required)) = config_path(global.config.as_deref(), &lookup) {
        match std::fs::read_to_string(&path) {
            Ok(text) => layers.file(&text, &path)?,
            Err(e) if required => {
                return Err(ConfigError {
                    key: "(file)".into(),
                    message: format!("cannot read {}: {e}", path.display()),
                })
            }
            Err(_) => {}
        }
    }
    layers.env(&lookup);
    let path_text = |p: &PathBuf| p.to_string_lossy().into_owned();
    let flags: [(&str, Option<String>, &str); 8] = [
        ("backend", global.backend.clone(), "--backend"),
        ("endpoint", global.endpoint.clone(), "--endpoint"),
        ("model", global.llm_model.clone(), "--llm-model"),
        ("timeout_s", global.timeout_s.clone(), "--timeout-s"),
        ("max_retries", global.max_retries.clone(), "--max-retries"),
        ("max_in_flight", global.max_in_flight.clone(), "--max-in-flight"),
        (
            "fixtures_dir",
            global.fixtures_dir.as_ref().map(path_text),
            "--fixtures-dir",
        ),
        ("runs_dir", global.runs_dir.as_ref().map(path_text), "--runs-dir"),
    ];
    for (key, value, flag) in flags {
        if let Some(v) = value {
            layers.text(key, v, flag);
        }
    }
    let mut run_flags = |run: &RunArgs| {
        if let Some(v) = &run.seed {
            layers.text("seed", v.clone(), "--seed");
        }
        if let Some(v) = &run.steps {
            layers.text("steps", v.clone(), "--steps");
        }
    };
    match command {
        Command::Solve { run, .. } | Command::Simulate { run, .. } | Command::VerifySolution { run, .. } => {
            run_flags(run)
        }
        Command::Eval { run, .. } => run_flags(run),
        _ => {}
    }
    match command {
        Command::Model { budget: Some(b), .. } | Command::Eval { budget: Some(b), .. } => {
            layers.text("budgets.modeling", b.clone(), "--budget")
        }
        Command::Solve {
            budget, inner_budget, ..
        } => {
            if let Some(b) = budget {
                layers.text("budgets.solving", b.clone(), "--budget");
            }
            if let Some(b) = inner_budget {
                layers.text("budgets.inner_repair", b.clone(), "--inner-budget");
            }
        }
        _ => {}
    }
    if let Command::Eval { weights: Some(w), .. } = command {
        let parts: Vec<&str> = w.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(ConfigError {
                key: "weights".into(),
                message: format!("--weights takes four comma-separated numbers, found `{w}`"),
            });
        }
        for (key, v) in [
            "weights.ngram",
            "weights.weighted_ngram",
            "weights.ast",
            "weights.dataflow",
        ]
        .into_iter()
        .zip(parts)
        {
            layers.text(key, v, "--weights");
        }
    }
    layers.resolve()
}

fn run_id(global: &GlobalArgs, command: &str) -> Result<String, ConfigError> {
    match &global.run_id {
        Some(id) => {
            let ok = !id.is_empty()
                && id != "."
                && id != ".."
                && id
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
            if ok {
                Ok(id.clone())
            } else {
                Err(ConfigError {
                    key: "run_id".into(),
                    message: format!("`{id}` must be a plain name of letters, digits, `-`, `_` or `.`"),
                })
            }
        }
        None => {
            let secs = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            Ok(format!("{command}-{secs}-{}", std::process::id()))
        }
    }
}

/// Forwards to a backend shared by several generators.
struct Shared(Arc<dyn Backend>);

impl Backend for Shared {
    fn name(&self) -> &str {
        self.0.name()
    }
    fn complete(&self, prompt: &PromptText) -> Result<String, GeneratorError> {
        self.0.complete(prompt)
    }
}

fn remote(settings: &Settings) -> RemoteBackend {
    if std::env::var(API_KEY_VAR).map(|k| k.is_empty()).unwrap_or(true) {
        log::warn!("{API_KEY_VAR} is not set; requests are sent without a bearer token");
    }
    RemoteBackend::new(settings.remote.clone())
}

fn backend(settings: &Settings) -> Result<Box<dyn Backend>, Failure> {
    match settings.backend {
        BackendKind::Mock => {
            let dir = settings.fixtures_dir.as_ref().ok_or_else(|| {
                usage(ConfigError {
                    key: "fixtures_dir".into(),
                    message: "required when backend = mock".into(),
                })
            })?;
            Ok(Box::new(MockBackend::from_dir(dir).map_err(usage)?))
        }
        BackendKind::Remote => Ok(Box::new(remote(settings))),
    }
}

fn generator(settings: &Settings, id: &str) -> Result<(Generator, PathBuf), Failure> {
    let log = RunLog::create(&settings.runs_dir, id).map_err(usage)?;
    let dir = log.dir().to_path_buf();
    Ok((Generator::from_box(backend(settings)?).with_log(log), dir))
}

pub fn run(cli: Cli) -> Result<u8, Failure> {
    let settings = settings(&cli.global, &cli.command).map_err(usage)?;
    log::debug!("settings: {settings:?}");
    match &cli.command {
        Command::Model { scenario, out, .. } => {
            let rep = parse_conceptual(&read(scenario)?).map_err(|e| usage(anyhow!("{}: {e}", scenario.display())))?;
            let id = run_id(&cli.global, "model").map_err(usage)?;
            let (generator, run_dir) = generator(&settings, &id)?;
            let outcome = run_modeling(&rep, &generator, settings.budgets.modeling).map_err(pipeline_failure)?;
            if let Some(out) = out {
                emit(Some(out), &outcome.source)?;
            }
            let history: Vec<_> = outcome
                .history
                .iter()
                .map(|r| json!({"iteration": r.iteration, "defects": r.defects.len()}))
                .collect();
            emit(
                None,
                &pretty(&json!({
                    "success": outcome.success,
                    "iterations_used": outcome.iterations_used,
                    "best_round": outcome.best_round,
                    "defects": outcome.final_defects(),
                    "history": history,
                    "run_dir": run_dir,
                })),
            )?;
            Ok(if outcome.success { EXIT_OK } else { EXIT_FAILURE })
        }
        Command::Solve {
            objective,
            model,
            eval_seeds,
            out,
            ..
        } => {
            let o = parse_objective(&read(objective)?).map_err(|e| usage(anyhow!("{}: {e}", objective.display())))?;
            let a0 = load_program(model)?;
            let id = run_id(&cli.global, "solve").map_err(usage)?;
            let (generator, run_dir) = generator(&settings, &id)?;
            let seed = settings.seed_for(&a0);
            let s =
                run_solving(&o, &a0, &generator, settings.budgets, seed, settings.steps).map_err(pipeline_failure)?;
            if let Some(out) = out {
                emit(Some(out), &s.source)?;
            }
            let substantiveness =
                (s.best_round > 0).then(|| assess_substantiveness(&s.applied_directives(), &s.program, &s.trace));
            let seed_verdicts = match eval_seeds {
                Some(n) if *n > 0 => {
                    let seeds: Vec<u64> = (0..*n).map(|i| seed.wrapping_add(i)).collect();
                    let verdicts = evaluate_seeds(&s.compiled, &a0, &s.program, &seeds, settings.steps)
                        .map_err(pipeline_failure)?;
                    Some(
                        verdicts
                            .into_iter()
                            .map(|(seed, v)| json!({"seed": seed, "verdict": v}))
                            .collect::<Vec<_>>(),
                    )
                }
                _ => None,
            };
            let rounds: Vec<_> = s
                .rounds
                .iter()
                .map(|r| {
                    json!({
                        "iteration": r.iteration,
                        "solutions": r.solutions.iter().map(|x| x.title.as_str()).collect::<Vec<_>>(),
                        "patch_error": r.patch_error,
                        "program_mismatch": r.program_mismatch,
                        "repair_rounds": r.repair_rounds,
                        "satisfied": r.verdict.satisfied_count(),
                    })
                })
                .collect();
            emit(
                None,
                &pretty(&json!({
                    "success": s.success,
                    "iterations_used": s.iterations_used,
                    "best_round": s.best_round,
                    "predicates": s.predicates,
                    "solutions": s.solutions,
                    "verdicts": s.verdicts,
                    "rounds": rounds,
                    "substantiveness": substantiveness,
                    "seed_verdicts": seed_verdicts,
                    "run_dir": run_dir,
                })),
            )?;
            Ok(if s.success { EXIT_OK } else { EXIT_FAILURE })
        }
        Command::Simulate { model, trace_out, .. } => {
            let p = load_program(model)?;
            let trace = simulate(&p, settings.seed_for(&p), settings.steps).map_err(failed)?;
            emit(trace_out.as_deref(), &trace.to_json())?;
            Ok(EXIT_OK)
        }
        Command::Verify { model, scenario } => {
            let source = read(model)?;
            let rep = match scenario {
                Some(s) => Some(parse_conceptual(&read(s)?).map_err(|e| usage(anyhow!("{}: {e}", s.display())))?),
                None => None,
            };
            let defects = check_source(&source, rep.as_ref());
            if defects.is_empty() {
                emit(None, "[]\n")?;
                return Ok(EXIT_OK);
            }
            let mut text = String::new();
            for d in &defects {
                text.push_str(&d.to_json_line());
                text.push('\n');
            }
            emit(None, &text)?;
            Ok(EXIT_FAILURE)
        }
        Command::VerifySolution {
            objective,
            model,
            baseline,
            predicates,
            ..
        } => {
            let o = parse_objective(&read(objective)?).map_err(|e| usage(anyhow!("{}: {e}", objective.display())))?;
            let candidate = load_program(model)?;
            let original = load_program(baseline)?;
            let preds = match predicates {
                Some(path) => {
                    let text = read(path)?;
                    let lines: Vec<&str> = text
                        .lines()
                        .map(str::trim)
                        .filter(|l| !l.is_empty() && !l.starts_with('#'))
                        .collect();
                    if lines.len() != o.criteria.len() {
                        return Err(usage(anyhow!(
                            "{} holds {} predicate(s) but the objective has {} criteria",
                            path.display(),
                            lines.len(),
                            o.criteria.len()
                        )));
                    }
                    o.criteria
                        .iter()
                        .zip(lines)
                        .map(|(c, l)| CriterionPredicate::new(c.clone(), l, &original))
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|e| usage(anyhow!("{}: {e}", path.display())))?
                }
                None => {
                    let id = run_id(&cli.global, "verify-solution").map_err(usage)?;
                    let (generator, _) = generator(&settings, &id)?;
                    compile_criteria(&o, &original, &generator).map_err(failed)?
                }
            };
            let seed = settings.seed_for(&original);
            let base = simulate(&original, seed, settings.steps).map_err(failed)?;
            let trace = simulate(&candidate, seed, settings.steps).map_err(failed)?;
            let verdict = evaluate(&preds, &trace, &base).map_err(failed)?;
            emit(None, &pretty(&verdict))?;
            Ok(if verdict.satisfying_flag { EXIT_OK } else { EXIT_FAILURE })
        }
        Command::Slice { model, metric } => {
            let p = load_program(model)?;
            match metric {
                Some(m) => {
                    let s = backward_slice(&p, m).map_err(usage)?;
                    emit(None, &pretty(&s))?;
                }
                None => {
                    let all = p
                        .recorders
                        .iter()
                        .map(|r| backward_slice(&p, &r.name))
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(failed)?;
                    emit(None, &pretty(&all))?;
                }
            }
            Ok(EXIT_OK)
        }
        Command::Eval {
            corpus, out, format, ..
        } => {
            let samples = load_corpus(corpus).map_err(usage)?;
            let id = run_id(&cli.global, "eval").map_err(usage)?;
            let config = EvalConfig {
                budgets: settings.budgets,
                weights: settings.weights,
                seed: settings.seed.unwrap_or(DEFAULT_SEED),
                steps: settings.steps,
                runs_dir: Some(settings.runs_dir.join(&id)),
            };
            let report = match settings.backend {
                BackendKind::Mock => rate_corpus(&samples, &mock_factory, &config),
                BackendKind::Remote => {
                    let shared: Arc<dyn Backend> = Arc::new(remote(&settings));
                    let factory = move |_: &Sample| -> Result<Box<dyn Backend>, GeneratorError> {
                        Ok(Box::new(Shared(Arc::clone(&shared))))
                    };
                    rate_corpus(&samples, &factory, &config)
                }
            }
            .map_err(usage)?;
            let text = match format {
                ReportFormat::Json => report.to_json(),
                ReportFormat::Table => report.render_table(),
            };
            emit(out.as_deref(), &text)?;
            Ok(EXIT_OK)
        }
    }
}
