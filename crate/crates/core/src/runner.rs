//! Seeded end-to-end optimization runs and their log pipeline: resolve an
//! objective, drive one method for `n_trials` evaluations, stream a JSONL
//! record per trial, and aggregate finished logs into regret tables.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::gp::GpEiScorer;
use crate::baselines::tpe::{tpe_fit, tpe_propose, TpeKind};
use crate::error::{Error, Result};
use crate::llm::{GenParams, LlmClient};
use crate::metrics::{normalized_regret_value, TaskBounds};
use crate::objectives::{self, Objective};
use crate::prompts::ContextLevel;
use crate::rng::substream;
use crate::sampler::{select_next, Sampler};
use crate::sampling::{random_point, sample_init, InitMethod};
use crate::space::Configuration;
use crate::surrogate::disc::DiscSurrogate;
use crate::surrogate::gen::GenSurrogate;
use crate::surrogate::{CandidateScorer, TaskContext};
use crate::trajectory::Trajectory;
use crate::warmstart::{warmstart, WarmstartReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    LlamboDisc,
    LlamboGen,
    TpeInd,
    TpeMulti,
    Gp,
    Random,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::LlamboDisc => "llambo_disc",
            Method::LlamboGen => "llambo_gen",
            Method::TpeInd => "tpe_ind",
            Method::TpeMulti => "tpe_multi",
            Method::Gp => "gp",
            Method::Random => "random",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How the first `n_init` points are chosen. `RandomShared` draws from the
/// "init" substream of the run seed, so every method in a seed group starts
/// from the same observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum InitMode {
    RandomShared,
    Warmstart { context: ContextLevel },
}

impl Default for InitMode {
    fn default() -> Self {
        InitMode::RandomShared
    }
}

/// Per-component knobs; the defaults match the main experimental setup.
/// `pool_size` is the per-trial candidate budget of the non-prompted
/// methods (random pool for gp, proposal count for tpe).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineOverrides {
    pub disc: crate::surrogate::disc::DiscConfig,
    pub gen: crate::surrogate::gen::GenSurrogateConfig,
    pub sampler: crate::sampler::SamplerConfig,
    pub tpe_gamma: f64,
    pub pool_size: usize,
}

impl Default for EngineOverrides {
    fn default() -> Self {
        EngineOverrides {
            disc: Default::default(),
            gen: Default::default(),
            sampler: Default::default(),
            tpe_gamma: 0.25,
            pool_size: 20,
        }
    }
}

/// One seeded search: `n_trials` total evaluations, the first `n_init` of
/// which are initialization points.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub objective: String,
    pub method: Method,
    pub n_init: usize,
    pub n_trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub init_mode: InitMode,
    #[serde(default)]
    pub engine: EngineOverrides,
}

impl RunSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_init == 0 {
            return Err(Error::Config("n_init must be ≥ 1".into()));
        }
        if self.n_trials < self.n_init {
            return Err(Error::Config(format!(
                "n_trials {} must be ≥ n_init {}",
                self.n_trials, self.n_init
            )));
        }
        if !(self.engine.tpe_gamma > 0.0 && self.engine.tpe_gamma < 1.0) {
            return Err(Error::Config(format!(
                "engine.tpe_gamma {} outside (0, 1)",
                self.engine.tpe_gamma
            )));
        }
        if self.engine.pool_size == 0 {
            return Err(Error::Config("engine.pool_size must be ≥ 1".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<RunSpec> {
        let spec: RunSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }
}

/// First line of a run log; carries everything needed to interpret the
/// records without re-resolving the objective.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunHeader {
    pub objective: String,
    pub method: Method,
    pub n_init: usize,
    pub n_trials: usize,
    pub seed: u64,
    pub init_mode: InitMode,
    pub backend: String,
    pub bounds: TaskBounds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warmstart: Option<WarmstartReport>,
}

/// One evaluated trial. Init trials log `candidate_count` 0 and
/// `acceptance_rate` 1; a trial that fell back to a random draw logs 0 for
/// both. `wallclock_ms` is pinned to 0 under deterministic backends so
/// equal seeds give byte-identical logs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub config: Configuration,
    pub score: f64,
    pub best_so_far: f64,
    pub candidate_count: usize,
    pub acceptance_rate: f64,
    pub wallclock_ms: u64,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub header: RunHeader,
    pub trajectory: Trajectory,
    pub best_score: f64,
    /// Trials that abandoned the method's proposal path for a random draw.
    pub n_fallback_trials: usize,
}

/// Resolves the objective from the registry and runs the spec against it.
pub fn run(
    spec: &RunSpec,
    client: &LlmClient,
    params: GenParams,
    out: &mut dyn Write,
) -> Result<RunOutcome> {
    let objective = objectives::resolve(&spec.objective)?;
    run_objective(spec, &objective, client, params, out)
}

/// Runs against an already-built objective. The log streams: records for
/// completed trials survive an abort mid-run.
pub fn run_objective(
    spec: &RunSpec,
    objective: &Objective,
    client: &LlmClient,
    params: GenParams,
    out: &mut dyn Write,
) -> Result<RunOutcome> {
    spec.validate()?;
    let result = drive(spec, objective, client, params, out);
    let flushed = out.flush();
    let outcome = result?;
    flushed?;
    Ok(outcome)
}

struct RunState<'a> {
    objective: &'a Objective,
    traj: Trajectory,
    best: f64,
    deterministic: bool,
}

impl RunState<'_> {
    /// Evaluates the chosen configuration, appends it to the trajectory,
    /// and writes the trial record. `started: None` pins wallclock to 0.
    fn record(
        &mut self,
        out: &mut dyn Write,
        config: Configuration,
        candidate_count: usize,
        acceptance_rate: f64,
        started: Option<Instant>,
    ) -> Result<()> {
        let score = self.objective.eval(&config)?;
        let trial = self.traj.len();
        self.traj.push(config.clone(), score)?;
        self.best = self.best.min(score);
        let wallclock_ms = match started {
            Some(t) if !self.deterministic => t.elapsed().as_millis() as u64,
            _ => 0,
        };
        let rec = TrialRecord {
            trial,
            config,
            score,
            best_so_far: self.best,
            candidate_count,
            acceptance_rate,
            wallclock_ms,
        };
        writeln!(out, "{}", serde_json::to_string(&rec)?)?;
        Ok(())
    }
}

fn drive(
    spec: &RunSpec,
    objective: &Objective,
    client: &LlmClient,
    params: GenParams,
    out: &mut dyn Write,
) -> Result<RunOutcome> {
    let space = objective.space().clone();
    let ctx = TaskContext {
        model_card: objective.model_card().clone(),
        data_card: objective.data_card().cloned(),
        params,
    };

    let (init_points, ws_report) = match spec.init_mode {
        InitMode::RandomShared => (
            sample_init(&space, spec.n_init, InitMethod::Random, spec.seed)?,
            None,
        ),
        InitMode::Warmstart { context } => {
            let (points, report) = warmstart(client, &ctx, &space, context, spec.n_init, spec.seed)?;
            (points, Some(report))
        }
    };

    let header = RunHeader {
        objective: objective.name().to_string(),
        method: spec.method,
        n_init: spec.n_init,
        n_trials: spec.n_trials,
        seed: spec.seed,
        init_mode: spec.init_mode,
        backend: client.backend().id(),
        bounds: objective.bounds().clone(),
        warmstart: ws_report,
    };
    writeln!(out, "{}", serde_json::to_string(&header)?)?;

    let mut state = RunState {
        objective,
        traj: Trajectory::new(space.clone()),
        best: f64::INFINITY,
        deterministic: client.backend().deterministic(),
    };
    for cfg in init_points {
        state.record(out, cfg, 0, 1.0, None)?;
    }

    // Per-run streams: the proposal components consume their own named
    // substreams internally, so the runner's selection/fallback draws and
    // the TPE sampling draws cannot perturb them across trials.
    let mut runner_rng = substream(spec.seed, "runner");
    let mut kde_rng = substream(spec.seed, "kde");
    let mut n_fallback = 0usize;

    match spec.method {
        Method::Random => {
            for _ in spec.n_init..spec.n_trials {
                let t0 = Instant::now();
                let cfg = random_point(&space, &mut runner_rng)?;
                state.record(out, cfg, 1, 1.0, Some(t0))?;
            }
        }
        Method::LlamboDisc | Method::LlamboGen => {
            let mut sampler = Sampler::new(client, &ctx, spec.engine.sampler.clone(), spec.seed);
            let mut scorer: Box<dyn CandidateScorer + '_> = match spec.method {
                Method::LlamboDisc => Box::new(DiscSurrogate::new(
                    client,
                    &ctx,
                    spec.engine.disc.clone(),
                    spec.seed,
                )),
                _ => Box::new(GenSurrogate::new(
                    client,
                    &ctx,
                    spec.engine.gen.clone(),
                    spec.seed,
                )),
            };
            for _ in spec.n_init..spec.n_trials {
                let t0 = Instant::now();
                let (cfg, count, rate) = match sampler.propose(&state.traj) {
                    Ok(set) => {
                        let sel = select_next(&set.candidates, scorer.as_mut(), &state.traj, &mut runner_rng)?;
                        (
                            set.candidates[sel.index].clone(),
                            set.candidates.len(),
                            set.acceptance_rate(),
                        )
                    }
                    Err(Error::Sampler(msg)) => {
                        log::warn!(
                            "trial {}: no usable candidates ({msg}); drawing a random point",
                            state.traj.len()
                        );
                        n_fallback += 1;
                        (random_point(&space, &mut runner_rng)?, 0, 0.0)
                    }
                    Err(e) => return Err(e),
                };
                state.record(out, cfg, count, rate, Some(t0))?;
            }
        }
        Method::TpeInd | Method::TpeMulti => {
            let kind = if spec.method == Method::TpeMulti {
                TpeKind::Multivariate
            } else {
                TpeKind::Independent
            };
            for _ in spec.n_init..spec.n_trials {
                let t0 = Instant::now();
                let (cfg, count, rate) = match tpe_fit(&state.traj, spec.engine.tpe_gamma, kind) {
                    Ok(model) => {
                        let proposals =
                            tpe_propose(&model, &space, spec.engine.pool_size, &mut kde_rng)?;
                        match proposals.len() {
                            0 => {
                                n_fallback += 1;
                                (random_point(&space, &mut runner_rng)?, 0, 0.0)
                            }
                            n => (proposals.into_iter().next().expect("n > 0"), n, 1.0),
                        }
                    }
                    Err(Error::InsufficientData(msg)) => {
                        log::debug!(
                            "trial {}: density fit unavailable ({msg}); drawing a random point",
                            state.traj.len()
                        );
                        n_fallback += 1;
                        (random_point(&space, &mut runner_rng)?, 0, 0.0)
                    }
                    Err(e) => return Err(e),
                };
                state.record(out, cfg, count, rate, Some(t0))?;
            }
        }
        Method::Gp => {
            for _ in spec.n_init..spec.n_trials {
                let t0 = Instant::now();
                let mut pool = Vec::with_capacity(spec.engine.pool_size);
                for _ in 0..spec.engine.pool_size {
                    pool.push(random_point(&space, &mut runner_rng)?);
                }
                let (cfg, count, rate) = match GpEiScorer::fit(&state.traj) {
                    Ok(mut scorer) => {
                        let sel = select_next(&pool, &mut scorer, &state.traj, &mut runner_rng)?;
                        (pool[sel.index].clone(), pool.len(), 1.0)
                    }
                    Err(Error::InsufficientData(msg)) | Err(Error::Numeric(msg)) => {
                        log::debug!(
                            "trial {}: surrogate fit unavailable ({msg}); taking the first pool point",
                            state.traj.len()
                        );
                        n_fallback += 1;
                        (pool.swap_remove(0), 0, 0.0)
                    }
                    Err(e) => return Err(e),
                };
                state.record(out, cfg, count, rate, Some(t0))?;
            }
        }
    }

    Ok(RunOutcome {
        best_score: state.best,
        trajectory: state.traj,
        n_fallback_trials: n_fallback,
        header,
    })
}

/// A parsed run log: header, readable records, and the count of lines that
/// were skipped as unreadable.
#[derive(Debug)]
pub struct ParsedLog {
    pub header: RunHeader,
    pub records: Vec<TrialRecord>,
    pub skipped: usize,
}

pub fn parse_log(text: &str) -> Result<ParsedLog> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let first = lines
        .next()
        .ok_or_else(|| Error::DataIntegrity("run log is empty".into()))?;
    let header: RunHeader = serde_json::from_str(first)
        .map_err(|e| Error::DataIntegrity(format!("run log header unreadable: {e}")))?;
    let mut records = Vec::new();
    let mut skipped = 0usize;
    for line in lines {
        match serde_json::from_str::<TrialRecord>(line) {
            Ok(rec) => records.push(rec),
            Err(e) => {
                skipped += 1;
                log::warn!("skipping unreadable log line: {e}");
            }
        }
    }
    Ok(ParsedLog {
        header,
        records,
        skipped,
    })
}

#[derive(Debug, Clone, Serialize)]
struct ReportRow {
    task: String,
    method: String,
    seed: String,
    trial: usize,
    normalized_regret: f64,
}

#[derive(Debug)]
pub struct Report {
    pub csv: String,
    /// Per-seed data rows (the cross-seed mean rows are extra).
    pub n_rows: usize,
    pub n_skipped: usize,
}

/// Aggregates run logs into per-trial normalized-regret rows, one per
/// (task, method, seed, trial), followed by cross-seed mean rows with
/// "mean" in the seed column. Unreadable lines and files are skipped and
/// counted, never fatal.
pub fn report_csv(logs: &[(String, String)]) -> Result<Report> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut means: BTreeMap<(String, String, usize), (f64, usize)> = BTreeMap::new();
    let mut n_rows = 0usize;
    let mut n_skipped = 0usize;

    for (source, text) in logs {
        let parsed = match parse_log(text) {
            Ok(p) => p,
            Err(e) => {
                n_skipped += 1;
                log::warn!("{source}: {e}; skipping file");
                continue;
            }
        };
        n_skipped += parsed.skipped;
        let task = parsed.header.objective.clone();
        let method = parsed.header.method.as_str().to_string();
        let seed = parsed.header.seed.to_string();
        for rec in &parsed.records {
            let regret = match normalized_regret_value(rec.best_so_far, &parsed.header.bounds) {
                Ok(r) => r,
                Err(e) => {
                    n_skipped += 1;
                    log::warn!("{source} trial {}: {e}; skipping row", rec.trial);
                    continue;
                }
            };
            write_row(&mut writer, &task, &method, &seed, rec.trial, regret)?;
            n_rows += 1;
            let cell = means.entry((task.clone(), method.clone(), rec.trial)).or_insert((0.0, 0));
            cell.0 += regret;
            cell.1 += 1;
        }
    }

    for ((task, method, trial), (sum, count)) in means {
        write_row(&mut writer, &task, &method, "mean", trial, sum / count as f64)?;
    }

    let bytes = writer
        .into_inner()
        .map_err(|e| Error::Config(format!("report: {e}")))?;
    Ok(Report {
        csv: String::from_utf8(bytes).expect("csv output is utf-8"),
        n_rows,
        n_skipped,
    })
}

fn write_row(
    writer: &mut csv::Writer<Vec<u8>>,
    task: &str,
    method: &str,
    seed: &str,
    trial: usize,
    normalized_regret: f64,
) -> Result<()> {
    writer
        .serialize(ReportRow {
            task: task.to_string(),
            method: method.to_string(),
            seed: seed.to_string(),
            trial,
            normalized_regret,
        })
        .map_err(|e| Error::Config(format!("report: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::mock::{MockBackend, StaticResponder};
    use crate::objectives::unit_cube_space;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    fn mock_client(seed: u64, space: &crate::space::SearchSpace) -> LlmClient {
        LlmClient::new(Arc::new(MockBackend::procedural(seed, space.clone())), 4)
    }

    fn spec(method: Method, n_init: usize, n_trials: usize, seed: u64) -> RunSpec {
        RunSpec {
            objective: "rosenbrock-2d".into(),
            method,
            n_init,
            n_trials,
            seed,
            init_mode: InitMode::RandomShared,
            engine: EngineOverrides::default(),
        }
    }

    fn run_to_string(spec: &RunSpec, client: &LlmClient) -> (RunOutcome, String) {
        let mut buf = Vec::new();
        let outcome = run(spec, client, GenParams::default(), &mut buf).expect("run completes");
        (outcome, String::from_utf8(buf).unwrap())
    }

    #[test]
    fn random_run_logs_each_trial_with_running_best() {
        let spec = spec(Method::Random, 5, 25, 11);
        let space = unit_cube_space(2);
        let (outcome, log) = run_to_string(&spec, &mock_client(0, &space));

        let parsed = parse_log(&log).unwrap();
        assert_eq!(parsed.records.len(), 25);
        assert_eq!(parsed.skipped, 0);
        assert!(parsed.header.backend.starts_with("mock"));
        // Running best recomputed from raw scores must match the logged one.
        let mut best = f64::INFINITY;
        for (i, rec) in parsed.records.iter().enumerate() {
            assert_eq!(rec.trial, i);
            best = best.min(rec.score);
            assert_eq!(rec.best_so_far, best);
            assert_eq!(rec.wallclock_ms, 0, "deterministic backend pins wallclock");
        }
        assert_eq!(outcome.best_score, best);
        assert_eq!(outcome.n_fallback_trials, 0);
        assert_eq!(outcome.trajectory.len(), 25);
    }

    #[test]
    fn llambo_disc_log_is_byte_identical_across_runs() {
        let spec = spec(Method::LlamboDisc, 3, 8, 3);
        let space = unit_cube_space(2);
        let (_, log1) = run_to_string(&spec, &mock_client(5, &space));
        let (_, log2) = run_to_string(&spec, &mock_client(5, &space));
        assert_eq!(log1, log2);
        assert!(!log1.is_empty());
    }

    #[test]
    fn init_block_is_shared_across_methods() {
        let space = unit_cube_space(2);
        let mut firsts = Vec::new();
        for method in [Method::Random, Method::TpeInd, Method::Gp] {
            let (_, log) = run_to_string(&spec(method, 4, 6, 9), &mock_client(0, &space));
            let records = parse_log(&log).unwrap().records;
            firsts.push(
                records[..4]
                    .iter()
                    .map(|r| serde_json::to_string(r).unwrap())
                    .collect::<Vec<_>>(),
            );
        }
        assert_eq!(firsts[0], firsts[1]);
        assert_eq!(firsts[1], firsts[2]);
    }

    #[test]
    fn unusable_sampler_falls_back_to_random_draws() {
        let spec = spec(Method::LlamboDisc, 2, 6, 4);
        let backend = MockBackend::with_responder(
            1,
            Box::new(StaticResponder("no suggestions today".into())),
        );
        let client = LlmClient::new(Arc::new(backend), 2);
        let (outcome, log) = {
            let mut buf = Vec::new();
            let outcome = run(&spec, &client, GenParams::default(), &mut buf).unwrap();
            (outcome, String::from_utf8(buf).unwrap())
        };
        assert_eq!(outcome.n_fallback_trials, 4);
        let parsed = parse_log(&log).unwrap();
        for rec in &parsed.records[2..] {
            assert_eq!(rec.candidate_count, 0);
            assert_eq!(rec.acceptance_rate, 0.0);
        }
        // Fallback points still advance the search.
        assert_eq!(parsed.records.len(), 6);
    }

    #[test]
    fn evaluation_failure_aborts_but_keeps_the_partial_log() {
        let space = unit_cube_space(2);
        let bounds = TaskBounds::new(0.0, 1.0).unwrap();
        let calls = Arc::new(AtomicUsize::new(0));
        let counter = calls.clone();
        let objective = Objective::custom("flaky", space.clone(), bounds, move |_| {
            if counter.fetch_add(1, Ordering::Relaxed) >= 4 {
                Err(Error::Numeric("simulated evaluation failure".into()))
            } else {
                Ok(0.5)
            }
        });
        let spec = spec(Method::Random, 2, 10, 8);
        let client = mock_client(0, &space);
        let mut buf = Vec::new();
        let err = run_objective(&spec, &objective, &client, GenParams::default(), &mut buf)
            .expect_err("run aborts");
        assert!(matches!(err, Error::Numeric(_)));
        let log = String::from_utf8(buf).unwrap();
        let parsed = parse_log(&log).unwrap();
        assert_eq!(parsed.records.len(), 4, "completed trials survive the abort");
    }

    #[test]
    fn warmstart_init_reports_its_fill_split() {
        let mut spec = spec(Method::Random, 4, 6, 13);
        spec.init_mode = InitMode::Warmstart {
            context: ContextLevel::None,
        };
        let space = unit_cube_space(2);
        let (outcome, log) = run_to_string(&spec, &mock_client(2, &space));
        let report = outcome.header.warmstart.clone().expect("warmstart ran");
        assert_eq!(report.n_suggested + report.n_filled, 4);

        let parsed = parse_log(&log).unwrap();
        let echoed = parsed.header.warmstart.expect("header carries the report");
        assert_eq!(echoed, report);
        assert_eq!(parsed.records.len(), 6);
    }

    #[test]
    fn tpe_and_gp_runs_complete_without_fallback() {
        let space = unit_cube_space(2);
        for method in [Method::TpeInd, Method::TpeMulti, Method::Gp] {
            let (outcome, log) = run_to_string(&spec(method, 5, 10, 21), &mock_client(0, &space));
            assert_eq!(outcome.n_fallback_trials, 0, "{method}");
            let parsed = parse_log(&log).unwrap();
            assert_eq!(parsed.records.len(), 10);
            for rec in &parsed.records[5..] {
                assert!(rec.candidate_count >= 1, "{method} proposes candidates");
            }
        }
    }

    #[test]
    fn classical_methods_never_touch_the_llm_backend() {
        let client = LlmClient::new(Arc::new(crate::llm::mock::PanicBackend), 4);
        for method in [Method::Random, Method::TpeInd, Method::TpeMulti, Method::Gp] {
            let (outcome, _) = run_to_string(&spec(method, 4, 8, 3), &client);
            assert_eq!(outcome.trajectory.len(), 8, "{method}");
        }
    }

    #[test]
    fn llambo_gen_run_completes() {
        let space = unit_cube_space(2);
        let (outcome, log) = run_to_string(
            &spec(Method::LlamboGen, 3, 6, 17),
            &mock_client(7, &space),
        );
        assert_eq!(outcome.trajectory.len(), 6);
        assert_eq!(parse_log(&log).unwrap().records.len(), 6);
    }

    #[test]
    fn spec_validation_names_the_offending_field() {
        let mut bad = spec(Method::Random, 0, 10, 1);
        assert!(bad.validate().unwrap_err().to_string().contains("n_init"));
        bad = spec(Method::Random, 5, 4, 1);
        assert!(bad.validate().unwrap_err().to_string().contains("n_trials"));
        bad = spec(Method::Random, 2, 10, 1);
        bad.engine.tpe_gamma = 1.0;
        assert!(bad.validate().unwrap_err().to_string().contains("tpe_gamma"));
        bad = spec(Method::Random, 2, 10, 1);
        bad.engine.pool_size = 0;
        assert!(bad.validate().unwrap_err().to_string().contains("pool_size"));
    }

    #[test]
    fn spec_json_accepts_defaults_and_warmstart_form() {
        let minimal = r#"{
            "objective": "rosenbrock-2d",
            "method": "llambo_disc",
            "n_init": 5,
            "n_trials": 25,
            "seed": 7
        }"#;
        let spec = RunSpec::from_json(minimal).unwrap();
        assert_eq!(spec.init_mode, InitMode::RandomShared);
        assert_eq!(spec.engine.pool_size, 20);
        assert_eq!(spec.engine.sampler.m_candidates, 20);

        let warm = r#"{
            "objective": "griewank-2d",
            "method": "random",
            "n_init": 3,
            "n_trials": 5,
            "seed": 1,
            "init_mode": {"mode": "warmstart", "context": "partial"}
        }"#;
        let spec = RunSpec::from_json(warm).unwrap();
        assert_eq!(
            spec.init_mode,
            InitMode::Warmstart {
                context: ContextLevel::Partial
            }
        );

        let typo = r#"{
            "objective": "rosenbrock-2d",
            "method": "random",
            "n_init": 3,
            "n_trials": 5,
            "seed": 1,
            "n_tirals": 9
        }"#;
        assert!(RunSpec::from_json(typo).is_err(), "unknown fields rejected");
    }

    #[test]
    fn report_emits_seed_rows_then_means() {
        let space = unit_cube_space(2);
        let mut logs = Vec::new();
        for seed in [1u64, 2] {
            let (_, log) = run_to_string(&spec(Method::Random, 2, 4, seed), &mock_client(0, &space));
            logs.push((format!("seed{seed}.jsonl"), log));
        }
        let report = report_csv(&logs).unwrap();
        assert_eq!(report.n_rows, 8);
        assert_eq!(report.n_skipped, 0);

        let lines: Vec<&str> = report.csv.lines().collect();
        assert_eq!(lines[0], "task,method,seed,trial,normalized_regret");
        assert_eq!(lines.len(), 1 + 8 + 4, "8 seed rows plus 4 mean rows");
        let mean_lines: Vec<&str> = lines.iter().filter(|l| l.contains(",mean,")).copied().collect();
        assert_eq!(mean_lines.len(), 4);

        // The mean row averages the two per-seed rows at the same trial.
        let parse_regret = |line: &str| -> f64 { line.rsplit(',').next().unwrap().parse().unwrap() };
        for trial in 0..4 {
            let per_seed: Vec<f64> = lines[1..=8]
                .iter()
                .filter(|l| l.split(',').nth(3).unwrap() == trial.to_string())
                .map(|l| parse_regret(l))
                .collect();
            assert_eq!(per_seed.len(), 2);
            let expect = (per_seed[0] + per_seed[1]) / 2.0;
            let mean_line = mean_lines
                .iter()
                .find(|l| l.split(',').nth(3).unwrap() == trial.to_string())
                .unwrap();
            assert!((parse_regret(mean_line) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn report_skips_corrupt_lines_and_files_with_a_count() {
        let space = unit_cube_space(2);
        let (_, mut log) = run_to_string(&spec(Method::Random, 2, 4, 1), &mock_client(0, &space));
        log.push_str("{\"trial\": \"not a number\"}\n");
        let logs = vec![
            ("good.jsonl".to_string(), log),
            ("junk.jsonl".to_string(), "not json at all".to_string()),
        ];
        let report = report_csv(&logs).unwrap();
        assert_eq!(report.n_rows, 4);
        assert_eq!(report.n_skipped, 2);
    }

    #[test]
    fn regret_in_reports_is_non_increasing_per_seed() {
        let space = unit_cube_space(2);
        let (_, log) = run_to_string(&spec(Method::Random, 3, 12, 5), &mock_client(0, &space));
        let parsed = parse_log(&log).unwrap();
        let regrets: Vec<f64> = parsed
            .records
            .iter()
            .map(|r| normalized_regret_value(r.best_so_far, &parsed.header.bounds).unwrap())
            .collect();
        for w in regrets.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
    }
}
