//! The two stages: modeling (scenario to defect-free program) and solving
//! (program plus objective to a modified program meeting the criteria).
//!
//! Both loops are bounded. On budget exhaustion the best attempt so far
//! (fewest defects, or most criteria satisfied; ties go to the earliest) is
//! returned with `success = false`, and the full history is kept.

use serde::Serialize;
use thiserror::Error;

use crate::criteria::{compile_criteria, evaluate, CriteriaError, CriterionPredicate, Verdict};
use crate::defect::Defect;
use crate::dsl::{apply_patch, parse_program, print_program, AbmProgram, Directive};
use crate::generator::{render_prompt, Generator, GeneratorError, Payload, PromptKind, Slots, Solution};
use crate::representation::{render_conceptual, render_objective, ConceptualRepresentation, ObjectiveRepresentation};
use crate::simulator::{simulate, RuntimeFault, SimulationTrace};
use crate::verifier1::{backward_slice, build_rectification_prompt, check_source};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Budgets {
    pub modeling: u32,
    pub solving: u32,
    /// Repair rounds allowed after each solution patch.
    pub inner_repair: u32,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            modeling: 10,
            solving: 5,
            inner_repair: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Modeling,
    Solving,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("{stage:?} iteration {iteration}: {source}")]
    Generator {
        stage: Stage,
        iteration: u32,
        #[source]
        source: GeneratorError,
    },
    #[error("budget `{0}` must be at least 1")]
    InvalidBudget(&'static str),
    #[error("the input program has {} defect(s)", .0.len())]
    DefectiveInput(Vec<Defect>),
    #[error("solving iteration {iteration}: {} defect(s) remain after repair", .defects.len())]
    InnerRepairExhausted { iteration: u32, defects: Vec<Defect> },
    #[error(transparent)]
    Criteria(#[from] CriteriaError),
    #[error(transparent)]
    Runtime(#[from] RuntimeFault),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelingRound {
    pub iteration: u32,
    pub source: String,
    pub defects: Vec<Defect>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelingOutcome {
    /// Source of the returned program: the last round on success, the best
    /// round otherwise.
    pub source: String,
    #[serde(skip)]
    pub program: Option<AbmProgram>,
    pub history: Vec<ModelingRound>,
    pub best_round: usize,
    pub iterations_used: u32,
    pub success: bool,
}

impl ModelingOutcome {
    pub fn final_defects(&self) -> &[Defect] {
        &self.history[self.best_round].defects
    }
}

fn program_of(payload: &Payload) -> String {
    payload.program().map(str::to_string).unwrap_or_default()
}

fn ask(
    generator: &Generator,
    kind: PromptKind,
    prompt: &crate::generator::PromptText,
    stage: Stage,
    iteration: u32,
) -> Result<Payload, PipelineError> {
    debug_assert_eq!(prompt.kind, kind);
    let wrap = |source| PipelineError::Generator {
        stage,
        iteration,
        source,
    };
    let response = generator.generate(prompt).map_err(wrap)?;
    Ok(response.payload.expect("generate only returns parsed responses"))
}

/// Repair `source` with rectification prompts until it has no defects or
/// `budget` rounds are spent. Returns the rounds after the initial one.
fn repair_loop(
    generator: &Generator,
    rep: Option<&ConceptualRepresentation>,
    mut source: String,
    mut defects: Vec<Defect>,
    budget: u32,
    stage: Stage,
    first_iteration: u32,
) -> Result<Vec<ModelingRound>, PipelineError> {
    let mut rounds = Vec::new();
    let mut remaining = budget;
    let mut iteration = first_iteration;
    while !defects.is_empty() && remaining > 0 {
        iteration += 1;
        let prompt = build_rectification_prompt(&source, &defects).expect("defects are non-empty");
        let payload = ask(generator, PromptKind::RectifyDefects, &prompt, stage, iteration)?;
        source = program_of(&payload);
        defects = check_source(&source, rep);
        log::info!("{stage:?} repair round {iteration}: {} defect(s)", defects.len());
        rounds.push(ModelingRound {
            iteration,
            source: source.clone(),
            defects: defects.clone(),
        });
        remaining -= 1;
    }
    Ok(rounds)
}

/// Algorithm 1: generate a program for `rep`, then verify and repair it
/// until it is defect-free or `budget` repair rounds are used.
pub fn run_modeling(
    rep: &ConceptualRepresentation,
    generator: &Generator,
    budget: u32,
) -> Result<ModelingOutcome, PipelineError> {
    if budget == 0 {
        return Err(PipelineError::InvalidBudget("modeling"));
    }
    let mut slots = Slots::new();
    slots.insert("scenario", render_conceptual(rep));
    let prompt = render_prompt(PromptKind::GenAbm, &slots).expect("gen_abm slots are fixed");
    let payload = ask(generator, PromptKind::GenAbm, &prompt, Stage::Modeling, 0)?;
    let source = program_of(&payload);
    let defects = check_source(&source, Some(rep));
    log::info!("modeling: initial program has {} defect(s)", defects.len());
    let mut history = vec![ModelingRound {
        iteration: 0,
        source: source.clone(),
        defects: defects.clone(),
    }];
    history.extend(repair_loop(
        generator,
        Some(rep),
        source,
        defects,
        budget,
        Stage::Modeling,
        0,
    )?);

    let last = history.len() - 1;
    let success = history[last].defects.is_empty();
    let best_round = if success {
        last
    } else {
        (0..history.len())
            .min_by_key(|&i| (history[i].defects.len(), i))
            .unwrap_or(last)
    };
    let source = history[best_round].source.clone();
    let program = parse_program(&source).ok();
    Ok(ModelingOutcome {
        program,
        source,
        best_round,
        iterations_used: last as u32,
        success,
        history,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolvingRound {
    pub iteration: u32,
    pub solutions: Vec<Solution>,
    pub patch: Vec<Directive>,
    /// Set when the patch could not be applied; the program is left as it was.
    pub patch_error: Option<String>,
    /// The full program returned alongside the patch differs from the
    /// result of applying the patch.
    pub program_mismatch: bool,
    pub repair_rounds: u32,
    pub source: String,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolvingOutcome {
    pub source: String,
    #[serde(skip)]
    pub program: AbmProgram,
    /// Solutions applied to reach the returned program, in order.
    pub solutions: Vec<Solution>,
    pub predicates: Vec<String>,
    /// Baseline verdict first, then one per iteration.
    pub verdicts: Vec<Verdict>,
    pub rounds: Vec<SolvingRound>,
    #[serde(skip)]
    pub baseline: SimulationTrace,
    #[serde(skip)]
    pub trace: SimulationTrace,
    #[serde(skip)]
    pub compiled: Vec<CriterionPredicate>,
    pub best_round: usize,
    pub iterations_used: u32,
    pub success: bool,
}

impl SolvingOutcome {
    /// Directives of all applied solutions.
    pub fn applied_directives(&self) -> Vec<Directive> {
        self.rounds[..self.best_round]
            .iter()
            .filter(|r| r.patch_error.is_none())
            .flat_map(|r| r.patch.iter().cloned())
            .collect()
    }
}

/// One line per metric: final, min, max and mean.
pub fn summarize_trace(trace: &SimulationTrace) -> String {
    use crate::criteria::Aggregate;
    if trace.series.is_empty() {
        return "(no recorded metrics)".into();
    }
    let mut lines = vec![format!("{} steps, seed {}", trace.steps, trace.seed)];
    for (name, s) in &trace.series {
        let f = |a: Aggregate| a.apply(s).map(|v| format!("{v}")).unwrap_or_else(|| "-".into());
        lines.push(format!(
            "{name}: final={} min={} max={} mean={}",
            f(Aggregate::Final),
            f(Aggregate::Min),
            f(Aggregate::Max),
            f(Aggregate::Mean)
        ));
    }
    lines.join("\n")
}

/// Slice summary of every metric the predicates reference.
pub fn describe_slices(program: &AbmProgram, preds: &[CriterionPredicate]) -> String {
    let mut metrics: Vec<&str> = Vec::new();
    for p in preds {
        for m in p.expr.metrics() {
            if !metrics.contains(&m) {
                metrics.push(m);
            }
        }
    }
    let join = |items: Vec<String>| {
        if items.is_empty() {
            "(none)".to_string()
        } else {
            items.join(", ")
        }
    };
    let mut out = Vec::new();
    for m in metrics {
        let Ok(slice) = backward_slice(program, m) else {
            continue;
        };
        let activities = join(
            slice
                .activities()
                .into_iter()
                .map(|(o, a)| format!("{o}.{a}"))
                .collect(),
        );
        let states = join(
            slice
                .states
                .iter()
                .map(|s| format!("{}.{}", s.object, s.state))
                .collect(),
        );
        let params = join(slice.parameters.iter().cloned().collect());
        out.push(format!(
            "{m}: activities {activities}; states {states}; parameters {params}{}",
            if slice.stochastic {
                "; depends on randomness"
            } else {
                ""
            }
        ));
    }
    out.join("\n")
}

fn best_verdict(verdicts: &[Verdict]) -> usize {
    let mut best = 0;
    for (i, v) in verdicts.iter().enumerate() {
        if v.satisfied_count() > verdicts[best].satisfied_count() {
            best = i;
        }
    }
    best
}

/// Algorithm 2: compile the criteria, simulate the original program as the
/// baseline, then propose, apply, repair and judge solutions until the
/// criteria hold or `budgets.solving` iterations are used.
pub fn run_solving(
    objective: &ObjectiveRepresentation,
    a0: &AbmProgram,
    generator: &Generator,
    budgets: Budgets,
    seed: u64,
    steps: u64,
) -> Result<SolvingOutcome, PipelineError> {
    if budgets.solving == 0 {
        return Err(PipelineError::InvalidBudget("solving"));
    }
    let a0_source = print_program(a0);
    let defects = check_source(&a0_source, None);
    if !defects.is_empty() {
        return Err(PipelineError::DefectiveInput(defects));
    }
    let baseline = simulate(a0, seed, steps)?;
    let preds = compile_criteria(objective, a0, generator)?;
    let mut verdicts = vec![evaluate(&preds, &baseline, &baseline)?];
    let objective_text = render_objective(objective);

    let mut current = a0.clone();
    let mut current_source = a0_source;
    let mut current_trace = baseline.clone();
    let mut rounds: Vec<SolvingRound> = Vec::new();
    let mut traces = vec![baseline.clone()];
    let mut sources = vec![current_source.clone()];
    let mut programs = vec![current.clone()];
    let mut iteration = 0;
    while !verdicts.last().expect("baseline verdict").satisfying_flag && iteration < budgets.solving {
        iteration += 1;
        let verdict = verdicts.last().expect("at least one verdict");

        let mut slots = Slots::new();
        slots.insert("objective", objective_text.trim_end());
        slots.insert("slices", describe_slices(&current, &preds));
        slots.insert("results", summarize_trace(&current_trace));
        slots.insert(
            "verdict",
            serde_json::to_string_pretty(verdict).expect("verdict serializes"),
        );
        slots.insert("program", current_source.trim_end());
        let prompt = render_prompt(PromptKind::CoT, &slots).expect("cot slots are fixed");
        let Payload::CoT(cot) = ask(generator, PromptKind::CoT, &prompt, Stage::Solving, iteration)? else {
            unreachable!("cot responses parse to CoT payloads")
        };
        log::info!(
            "solving iteration {iteration}: {} solution(s): {}",
            cot.solutions.len(),
            cot.solutions
                .iter()
                .map(|s| s.title.as_str())
                .collect::<Vec<_>>()
                .join("; ")
        );

        let mut slots = Slots::new();
        slots.insert(
            "solutions",
            serde_json::to_string_pretty(&cot.solutions).expect("solutions serialize"),
        );
        slots.insert("program", current_source.trim_end());
        let prompt = render_prompt(PromptKind::Modify, &slots).expect("modify slots are fixed");
        let Payload::Patch { directives, program } =
            ask(generator, PromptKind::Modify, &prompt, Stage::Solving, iteration)?
        else {
            unreachable!("modify responses parse to patches")
        };

        let (source, patch_error) = match apply_patch(&current, &directives) {
            Ok(s) => (s, None),
            Err(e) => {
                log::warn!("solving iteration {iteration}: patch not applied: {e}");
                (current_source.clone(), Some(e.to_string()))
            }
        };
        let program_mismatch = match (&program, patch_error.is_none()) {
            (Some(text), true) => parse_program(text).ok().map(|p| print_program(&p)) != Some(source.clone()),
            _ => false,
        };
        if program_mismatch {
            log::warn!(
                "solving iteration {iteration}: returned program differs from the applied patch; using the patch"
            );
        }

        let defects = check_source(&source, None);
        let repairs = repair_loop(
            generator,
            None,
            source.clone(),
            defects.clone(),
            budgets.inner_repair,
            Stage::Solving,
            0,
        )?;
        let (source, defects) = match repairs.last() {
            Some(r) => (r.source.clone(), r.defects.clone()),
            None => (source, defects),
        };
        if !defects.is_empty() {
            return Err(PipelineError::InnerRepairExhausted { iteration, defects });
        }
        let candidate = parse_program(&source).expect("defect-free source parses");
        let trace = simulate(&candidate, seed, steps)?;
        let verdict = evaluate(&preds, &trace, &baseline)?;
        log::info!(
            "solving iteration {iteration}: {}/{} criteria satisfied",
            verdict.satisfied_count(),
            verdict.per_criterion.len()
        );

        rounds.push(SolvingRound {
            iteration,
            solutions: cot.solutions,
            patch: directives,
            patch_error,
            program_mismatch,
            repair_rounds: repairs.len() as u32,
            source: source.clone(),
            verdict: verdict.clone(),
        });
        verdicts.push(verdict);
        current = candidate;
        current_source = source;
        current_trace = trace;
        traces.push(current_trace.clone());
        sources.push(current_source.clone());
        programs.push(current.clone());
    }

    let last = verdicts.len() - 1;
    let success = verdicts[last].satisfying_flag;
    let best = if success { last } else { best_verdict(&verdicts) };
    let solutions = rounds[..best]
        .iter()
        .filter(|r| r.patch_error.is_none())
        .flat_map(|r| r.solutions.iter().cloned())
        .collect();
    Ok(SolvingOutcome {
        source: sources.swap_remove(best),
        program: programs.swap_remove(best),
        solutions,
        predicates: preds.iter().map(|p| p.expr.to_string()).collect(),
        verdicts,
        rounds,
        baseline,
        trace: traces.swap_remove(best),
        compiled: preds,
        best_round: best,
        iterations_used: iteration,
        success,
    })
}

/// Judge `program` on several seeds, each against the baseline run of
/// `original` with the same seed.
pub fn evaluate_seeds(
    preds: &[CriterionPredicate],
    original: &AbmProgram,
    program: &AbmProgram,
    seeds: &[u64],
    steps: u64,
) -> Result<Vec<(u64, Verdict)>, PipelineError> {
    let mut out = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let baseline = simulate(original, seed, steps)?;
        let trace = simulate(program, seed, steps)?;
        out.push((seed, evaluate(preds, &trace, &baseline)?));
    }
    Ok(out)
}
