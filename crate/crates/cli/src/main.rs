//! Operator front end: run seeded experiments, validate their inputs,
//! aggregate finished logs into regret tables, and refresh the golden
//! prompt fixtures after template changes.
//!
//! Exit codes: 0 success, 2 invalid input (bad flags, unparseable spec or
//! config, missing credential), 3 transport failure, 1 anything else.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use llambo_core::llm::http::{HttpBackend, HttpConfig};
use llambo_core::llm::mock::MockBackend;
use llambo_core::llm::{GenParams, LlmBackend, LlmClient};
use llambo_core::metrics::normalized_regret_value;
use llambo_core::numfmt::format_sig;
use llambo_core::objectives::{self, Objective};
use llambo_core::prompts::golden;
use llambo_core::runner::{report_csv, run_objective, RunSpec};
use llambo_core::{Error, Result};

#[derive(Parser)]
#[command(name = "llambo", version, about = "LLM-assisted Bayesian optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one seeded run and stream its JSONL log.
    Run(RunArgs),
    /// Aggregate run logs matching a glob into a regret CSV.
    Report(ReportArgs),
    /// Check a run spec (and optionally a config) without running anything.
    Validate(ValidateArgs),
    /// Rewrite the golden prompt fixtures from the current templates.
    GoldenRegen(GoldenRegenArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// Run spec (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Engine config (JSON); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config's backend choice.
    #[arg(long, value_enum)]
    backend: Option<BackendKind>,
    /// Replace the spec's seed.
    #[arg(long)]
    seed_override: Option<u64>,
    /// Log path; defaults to {output_dir}/{objective}_{method}_seed{seed}.jsonl.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ReportArgs {
    /// Glob over run logs, e.g. `runs/*.jsonl`.
    logs: String,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ValidateArgs {
    /// Run spec (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Engine config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Backend to check the config against, as `run` would use it.
    #[arg(long, value_enum)]
    backend: Option<BackendKind>,
}

#[derive(clap::Args)]
struct GoldenRegenArgs {
    /// Fixture directory.
    #[arg(long, default_value = "crates/core/fixtures/prompts")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
enum BackendKind {
    Mock,
    Http,
}

/// Engine configuration shared across runs. The file is a shareable
/// artifact: the HTTP credential is read from the environment at backend
/// construction, never from here.
#[derive(Debug, Clone, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CliConfig {
    backend: BackendKind,
    /// Chat-completions URL; required for the http backend.
    endpoint_url: Option<String>,
    model_name: String,
    temperature: f64,
    top_p: f64,
    /// Concurrent in-flight completion requests per run.
    parallelism: usize,
    output_dir: PathBuf,
}

impl Default for CliConfig {
    fn default() -> Self {
        CliConfig {
            backend: BackendKind::Mock,
            endpoint_url: None,
            model_name: "gpt-3.5-turbo".into(),
            temperature: 0.7,
            top_p: 0.95,
            parallelism: 4,
            output_dir: PathBuf::from("runs"),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_class())
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Report(args) => cmd_report(args),
        Command::Validate(args) => cmd_validate(args),
        Command::GoldenRegen(args) => cmd_golden_regen(args),
    }
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

fn load_config(path: Option<&Path>) -> Result<CliConfig> {
    match path {
        None => Ok(CliConfig::default()),
        Some(p) => serde_json::from_str(&read_file(p)?)
            .map_err(|e| Error::Config(format!("config {}: {e}", p.display()))),
    }
}

/// The mock backend is fully offline. The http backend reads its credential
/// from the environment during construction, so a missing key fails here,
/// before any request leaves the process.
fn build_backend(
    kind: BackendKind,
    config: &CliConfig,
    seed: u64,
    objective: &Objective,
) -> Result<Arc<dyn LlmBackend>> {
    match kind {
        BackendKind::Mock => Ok(Arc::new(MockBackend::procedural(
            seed,
            objective.space().clone(),
        ))),
        BackendKind::Http => {
            let endpoint = config.endpoint_url.clone().ok_or_else(|| {
                Error::Config("http backend requires endpoint_url in the config".into())
            })?;
            let backend = HttpBackend::new(HttpConfig {
                endpoint,
                model: config.model_name.clone(),
                ..HttpConfig::default()
            })?;
            Ok(Arc::new(backend))
        }
    }
}

/// Objective names can embed paths (`tabular:data/grid.json`); flatten the
/// separators so the default log name stays a single path component.
fn log_stem(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '.' {
                c
            } else {
                '-'
            }
        })
        .collect()
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut spec = RunSpec::from_json(&read_file(&args.spec)?)?;
    if let Some(seed) = args.seed_override {
        spec.seed = seed;
    }
    let config = load_config(args.config.as_deref())?;
    let objective = objectives::resolve(&spec.objective)?;

    let kind = args.backend.unwrap_or(config.backend);
    let backend = build_backend(kind, &config, spec.seed, &objective)?;
    let client = LlmClient::new(backend, config.parallelism);
    let params = GenParams {
        temperature: config.temperature,
        top_p: config.top_p,
    };

    let out_path = args.out.unwrap_or_else(|| {
        config.output_dir.join(format!(
            "{}_{}_seed{}.jsonl",
            log_stem(&spec.objective),
            spec.method,
            spec.seed
        ))
    });
    if let Some(dir) = out_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))?;
    }
    let file = fs::File::create(&out_path)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", out_path.display())))?;
    let mut log = BufWriter::new(file);

    // Completed trials are already flushed when a later one fails, so the
    // partial log survives an abort.
    let outcome = run_objective(&spec, &objective, &client, params, &mut log)?;
    let regret = normalized_regret_value(outcome.best_score, objective.bounds())?;
    println!(
        "{} {} seed {}: best score {}, normalized regret {} ({} trials, log {})",
        objective.name(),
        spec.method,
        spec.seed,
        format_sig(outcome.best_score, 6),
        format_sig(regret, 6),
        spec.n_trials,
        out_path.display(),
    );
    if outcome.n_fallback_trials > 0 {
        eprintln!(
            "warning: {} trials fell back to random draws",
            outcome.n_fallback_trials
        );
    }
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let entries = glob::glob(&args.logs)
        .map_err(|e| Error::Config(format!("bad glob `{}`: {e}", args.logs)))?;
    let mut paths: Vec<PathBuf> = Vec::new();
    for entry in entries {
        match entry {
            Ok(p) if p.is_file() => paths.push(p),
            Ok(_) => {}
            Err(e) => log::warn!("skipping unreadable glob entry: {e}"),
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Config(format!("no logs match `{}`", args.logs)));
    }

    let mut logs = Vec::with_capacity(paths.len());
    let mut unreadable = 0usize;
    for p in paths {
        match fs::read_to_string(&p) {
            Ok(text) => logs.push((p.display().to_string(), text)),
            Err(e) => {
                log::warn!("skipping {}: {e}", p.display());
                unreadable += 1;
            }
        }
    }
    let report = report_csv(&logs)?;
    if report.n_rows == 0 {
        return Err(Error::DataIntegrity(
            "no usable rows in the matched logs".into(),
        ));
    }
    let skipped = report.n_skipped + unreadable;
    if skipped > 0 {
        eprintln!("warning: skipped {skipped} corrupt lines or files");
    }
    match args.out {
        Some(p) => fs::write(&p, report.csv.as_bytes())
            .map_err(|e| Error::Config(format!("cannot write {}: {e}", p.display())))?,
        None => std::io::stdout().lock().write_all(report.csv.as_bytes())?,
    }
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> Result<()> {
    let spec = RunSpec::from_json(&read_file(&args.spec)?)?;
    let objective = objectives::resolve(&spec.objective)?;
    println!(
        "spec ok: {} via {}, {} trials ({} init), seed {}",
        objective.name(),
        spec.method,
        spec.n_trials,
        spec.n_init,
        spec.seed
    );
    if args.config.is_some() || args.backend.is_some() {
        let config = load_config(args.config.as_deref())?;
        let kind = args.backend.unwrap_or(config.backend);
        // Same constructor `run` uses: for http this checks endpoint_url
        // and the credential without sending anything.
        let backend = build_backend(kind, &config, spec.seed, &objective)?;
        println!(
            "config ok: backend {}, parallelism {}",
            backend.id(),
            config.parallelism
        );
    }
    Ok(())
}

fn cmd_golden_regen(args: GoldenRegenArgs) -> Result<()> {
    fs::create_dir_all(&args.out)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", args.out.display())))?;
    let cases = golden::cases();
    let mut rewritten = 0usize;
    for (stem, text) in &cases {
        let path = args.out.join(format!("{stem}.txt"));
        if fs::read_to_string(&path).ok().as_deref() != Some(text.as_str()) {
            fs::write(&path, text.as_bytes())
                .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
            rewritten += 1;
        }
    }
    println!(
        "{} golden prompts in {} ({} rewritten)",
        cases.len(),
        args.out.display(),
        rewritten
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_fill_an_empty_file() {
        let config: CliConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(config.backend, BackendKind::Mock);
        assert_eq!(config.temperature, 0.7);
        assert_eq!(config.top_p, 0.95);
        assert_eq!(config.parallelism, 4);
        assert!(config.endpoint_url.is_none());
    }

    #[test]
    fn config_rejects_unknown_fields() {
        let err = serde_json::from_str::<CliConfig>(r#"{"api_key": "sk-123"}"#).unwrap_err();
        assert!(err.to_string().contains("api_key"));
    }

    #[test]
    fn mock_backend_needs_no_credential() {
        let objective = objectives::resolve("rosenbrock-2d").unwrap();
        let config = CliConfig::default();
        let backend = build_backend(BackendKind::Mock, &config, 7, &objective).unwrap();
        assert_eq!(backend.id(), "mock:7");
        assert!(backend.deterministic());
    }

    #[test]
    fn http_backend_requires_an_endpoint() {
        let objective = objectives::resolve("rosenbrock-2d").unwrap();
        let config = CliConfig::default();
        let err = match build_backend(BackendKind::Http, &config, 0, &objective) {
            Ok(_) => panic!("an endpoint-less http config must fail"),
            Err(e) => e,
        };
        assert!(err.to_string().contains("endpoint_url"));
        assert_eq!(err.exit_class(), 2);
    }

    #[test]
    fn log_stem_flattens_path_separators() {
        assert_eq!(log_stem("rosenbrock-2d"), "rosenbrock-2d");
        assert_eq!(log_stem("tabular:data/grid.json"), "tabular-data-grid.json");
    }
}
