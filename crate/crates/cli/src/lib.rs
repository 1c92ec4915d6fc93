//! Command implementations behind the `rollout` binary.
//!
//! Every command writes its primary output to a `Write` handle so tests can capture
//! it, and reports failures as [`CliError`], which maps onto the process exit code.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use rollout_core::allocators::{allocate, StrategyKind, StrategySpec};
use rollout_core::analysis::{self, ComparisonTable, VerificationReport};
use rollout_core::config::ExperimentConfig;
use rollout_core::engine::BudgetMode;
use rollout_core::trace::{self, TraceRecord};
use rollout_core::{CandidateSet, Trajectory};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable or malformed config, unusable input combination.
    Usage(String),
    /// Malformed data files or failures while running.
    Runtime(String),
    /// At least one verification claim failed.
    VerificationFailed,
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::VerificationFailed => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
            CliError::VerificationFailed => f.write_str("verification failed"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<rollout_core::Error> for CliError {
    fn from(e: rollout_core::Error) -> Self {
        match e {
            rollout_core::Error::Usage(_) | rollout_core::Error::Config(_) => {
                CliError::Usage(e.to_string())
            }
            rollout_core::Error::Data(_) => CliError::Runtime(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

/// Full-precision float rendering shared by every text output.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn load_config(path: &Path) -> CliResult<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let cfg: ExperimentConfig = toml::from_str(&text)
        .map_err(|e| CliError::Usage(format!("malformed config {}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Parses a comma or whitespace separated list of strategy names.
pub fn parse_strategies(list: &str) -> CliResult<Vec<StrategyKind>> {
    list.split([',', ' '])
        .filter(|s| !s.is_empty())
        .map(|s| StrategyKind::from_str(s).map_err(CliError::from))
        .collect()
}

fn parse_floats(text: &str, what: &str) -> CliResult<Vec<f64>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| CliError::Usage(format!("cannot parse {what} value '{s}'")))
        })
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct SimulateArgs {
    pub config: PathBuf,
    pub output: PathBuf,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub budgets: Vec<usize>,
    pub strategies: Option<Vec<StrategyKind>>,
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    config: &'a ExperimentConfig,
    results: &'a ComparisonTable,
}

/// Allocation the engine made in one round, as written next to each trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedAllocation {
    pub round: u32,
    pub budget: usize,
    pub candidate_ids: Vec<u64>,
    pub counts: Vec<usize>,
}

pub fn results_csv(table: &ComparisonTable) -> String {
    let mut out = String::from("strategy,budget,accuracy,ci_low,ci_high,pass_rate,coverage\n");
    for r in &table.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.strategy,
            r.budget,
            fmt_f64(r.accuracy.mean),
            fmt_f64(r.accuracy.ci.low),
            fmt_f64(r.accuracy.ci.high),
            fmt_f64(r.pass_rate.mean),
            fmt_f64(r.coverage.mean),
        );
    }
    out
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> CliResult<()> {
    let mut text = String::new();
    for item in items {
        text.push_str(&serde_json::to_string(item).map_err(|e| CliError::Runtime(e.to_string()))?);
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Runs the configured strategy grid and writes `results.csv`, `report.json` and, for
/// trial 0 of every cell, a trace plus the allocations the engine made.
pub fn cmd_simulate(args: &SimulateArgs, log: &mut dyn Write) -> CliResult<ComparisonTable> {
    let mut cfg = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if !args.budgets.is_empty() {
        cfg.budgets = args.budgets.clone();
    }
    if let Some(s) = &args.strategies {
        cfg.strategies = s.clone();
    }
    cfg.validate()?;

    let table = analysis::compare_strategies(&cfg)?;

    let traces = args.output.join("traces");
    fs::create_dir_all(&traces).map_err(|e| io_err(&traces, e))?;
    let csv = args.output.join("results.csv");
    fs::write(&csv, results_csv(&table)).map_err(|e| io_err(&csv, e))?;
    let report = args.output.join("report.json");
    let json = serde_json::to_string_pretty(&SimulateReport {
        config: &cfg,
        results: &table,
    })
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    fs::write(&report, json + "\n").map_err(|e| io_err(&report, e))?;

    for row in &table.rows {
        let Some(report) = &row.report else { continue };
        let stem = format!("{}_N{}", row.strategy, row.budget);
        write_jsonl(
            &traces.join(format!("{stem}.jsonl")),
            &trace::records_from_result(&report.sample),
        )?;
        let recorded: Vec<RecordedAllocation> = report
            .sample
            .rounds
            .iter()
            .filter_map(|r| {
                Some(RecordedAllocation {
                    round: r.round,
                    budget: r.budget?,
                    candidate_ids: r.active.iter().map(|t| t.id).collect(),
                    counts: r.allocation.as_ref()?.counts.clone(),
                })
            })
            .collect();
        write_jsonl(&traces.join(format!("{stem}.allocations.jsonl")), &recorded)?;
    }

    for r in &table.rows {
        let _ = writeln!(
            log,
            "{:<13} N={:<4} accuracy={:.4} [{:.4}, {:.4}] pass_rate={:.4}",
            r.strategy.name(),
            r.budget,
            r.accuracy.mean,
            r.accuracy.ci.low,
            r.accuracy.ci.high,
            r.pass_rate.mean
        );
    }
    Ok(table)
}

pub const CLAIMS: [&str; 5] = ["prop1", "prop2", "theorem1", "greedy_oracle", "beta_mc"];

pub fn parse_claims(list: Option<&str>) -> CliResult<Vec<String>> {
    let Some(list) = list else {
        return Ok(CLAIMS.iter().map(|s| s.to_string()).collect());
    };
    let claims: Vec<String> = list
        .split([',', ' '])
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect();
    if claims.is_empty() {
        return Err(CliError::Usage("no claims given".into()));
    }
    for c in &claims {
        if !CLAIMS.contains(&c.as_str()) {
            return Err(CliError::Usage(format!(
                "unknown claim '{c}'; expected one of {}",
                CLAIMS.join(", ")
            )));
        }
    }
    Ok(claims)
}

pub fn run_claim(claim: &str, seed: u64) -> CliResult<VerificationReport> {
    let report = match claim {
        "prop1" => analysis::verify_prop1(&analysis::Prop1Params {
            seed,
            ..Default::default()
        }),
        "prop2" => analysis::verify_prop2(&analysis::Prop2Params {
            seed,
            ..Default::default()
        }),
        "theorem1" => analysis::verify_theorem1(&analysis::Theorem1Params {
            seed,
            ..Default::default()
        }),
        "greedy_oracle" => analysis::verify_greedy_oracle(&analysis::GreedyOracleParams {
            seed,
            ..Default::default()
        }),
        "beta_mc" => analysis::verify_beta_mc(&analysis::BetaMcParams {
            seed,
            ..Default::default()
        }),
        other => return Err(CliError::Usage(format!("unknown claim '{other}'"))),
    };
    Ok(report?)
}

pub fn verify_line(r: &VerificationReport) -> String {
    format!(
        "{} {} max_deviation={} instances={}",
        r.claim,
        if r.passed { "PASS" } else { "FAIL" },
        fmt_f64(r.max_deviation),
        r.instances
    )
}

/// Prints one line per claim; with `verbose`, each check follows indented.
pub fn cmd_verify(
    claims: &[String],
    seed: u64,
    verbose: bool,
    output: Option<&Path>,
    out: &mut dyn Write,
) -> CliResult<Vec<VerificationReport>> {
    let mut reports = Vec::new();
    for claim in claims {
        let r = run_claim(claim, seed)?;
        let _ = writeln!(out, "{}", verify_line(&r));
        if verbose {
            for c in &r.checks {
                let _ = writeln!(
                    out,
                    "  {} {} deviation={} tolerance={}",
                    c.name,
                    if c.passed { "PASS" } else { "FAIL" },
                    fmt_f64(c.max_deviation),
                    fmt_f64(c.tolerance)
                );
            }
        }
        reports.push(r);
    }
    if let Some(path) = output {
        let json =
            serde_json::to_string_pretty(&reports).map_err(|e| CliError::Runtime(e.to_string()))?;
        fs::write(path, json + "\n").map_err(|e| io_err(path, e))?;
    }
    if reports.iter().all(|r| r.passed) {
        Ok(reports)
    } else {
        Err(CliError::VerificationFailed)
    }
}

#[derive(Debug, Clone)]
pub struct AllocateArgs {
    pub spec: StrategySpec,
    pub budget: usize,
    pub scores: Option<String>,
    pub scores_file: Option<PathBuf>,
    /// JSON file holding one embedding array per candidate.
    pub embeddings: Option<PathBuf>,
    /// Subtree group of each candidate, for dvts.
    pub groups: Option<String>,
}

pub fn cmd_allocate(args: &AllocateArgs) -> CliResult<String> {
    args.spec.validate()?;
    let scores = match (&args.scores, &args.scores_file) {
        (Some(inline), None) => parse_floats(inline, "score")?,
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
            parse_floats(&text, "score")?
        }
        _ => {
            return Err(CliError::Usage(
                "give exactly one of --scores or --scores-file".into(),
            ))
        }
    };
    let mut candidates: Vec<Trajectory> = scores
        .iter()
        .enumerate()
        .map(|(i, &s)| Trajectory::scored(i as u64, s))
        .collect();

    if let Some(path) = &args.embeddings {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        let embeddings: Vec<Vec<f64>> = serde_json::from_str(&text).map_err(|e| {
            CliError::Runtime(format!("malformed embeddings {}: {e}", path.display()))
        })?;
        if embeddings.len() != candidates.len() {
            return Err(CliError::Usage(format!(
                "{} embeddings for {} scores",
                embeddings.len(),
                candidates.len()
            )));
        }
        for (c, e) in candidates.iter_mut().zip(embeddings) {
            c.embedding = Some(e);
        }
    } else if args.spec.kind.needs_embeddings() {
        return Err(CliError::Usage(format!(
            "{} needs --embeddings",
            args.spec.kind
        )));
    }

    if let Some(groups) = &args.groups {
        let ids: Vec<usize> = groups
            .split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| CliError::Usage(format!("cannot parse group '{s}'")))
            })
            .collect::<CliResult<_>>()?;
        if ids.len() != candidates.len() {
            return Err(CliError::Usage(format!(
                "{} groups for {} scores",
                ids.len(),
                candidates.len()
            )));
        }
        for (c, g) in candidates.iter_mut().zip(ids) {
            c.group_id = Some(g);
        }
    } else if args.spec.kind == StrategyKind::Dvts {
        return Err(CliError::Usage("dvts needs --groups".into()));
    }

    let set = CandidateSet::new(candidates, args.budget);
    Ok(allocate(&set, &args.spec)?.to_string())
}

pub fn read_trace(path: &Path) -> CliResult<Vec<TraceRecord>> {
    let file = fs::File::open(path)
        .map_err(|e| CliError::Usage(format!("cannot read trace {}: {e}", path.display())))?;
    let mut records = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(
            serde_json::from_str(&line)
                .map_err(|e| CliError::Runtime(format!("{}:{}: {e}", path.display(), n + 1)))?,
        );
    }
    Ok(records)
}

#[derive(Debug, Clone)]
pub struct ReplayArgs {
    pub trace: PathBuf,
    pub specs: Vec<StrategySpec>,
    pub budget: usize,
    pub budget_mode: BudgetMode,
}

/// Replays a trace and writes one JSON record per round to `out`.
pub fn cmd_replay(args: &ReplayArgs, out: &mut dyn Write) -> CliResult<()> {
    let records = read_trace(&args.trace)?;
    let replayed = trace::replay(&records, &args.specs, args.budget, args.budget_mode)?;
    for r in &replayed {
        let line = serde_json::to_string(r).map_err(|e| CliError::Runtime(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    Ok(())
}
