use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rollout_cli::{
    cmd_allocate, cmd_replay, cmd_simulate, cmd_verify, parse_claims, parse_strategies,
    AllocateArgs, CliError, CliResult, ReplayArgs, SimulateArgs,
};
use rollout_core::allocators::{
    StrategyKind, StrategySpec, DEFAULT_BEAM_WIDTH, DEFAULT_CONCENTRATION,
    DEFAULT_REWARD_TEMPERATURE, DEFAULT_SIMILARITY_TEMPERATURE,
};
use rollout_core::analysis::DEFAULT_SEED;
use rollout_core::engine::BudgetMode;

#[derive(Parser)]
#[command(
    name = "rollout",
    version,
    about = "Rollout allocation experiments for parallel search"
)]
struct Cli {
    /// Master seed; overrides the config file's seed where one applies.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct StrategyFlags {
    #[arg(long, default_value_t = DEFAULT_BEAM_WIDTH)]
    beam_width: usize,
    #[arg(long, default_value_t = DEFAULT_REWARD_TEMPERATURE)]
    reward_temperature: f64,
    #[arg(long, default_value_t = DEFAULT_SIMILARITY_TEMPERATURE)]
    similarity_temperature: f64,
    #[arg(long, default_value_t = DEFAULT_CONCENTRATION)]
    concentration: f64,
}

impl StrategyFlags {
    fn spec(&self, kind: StrategyKind) -> StrategySpec {
        StrategySpec {
            kind,
            beam_width: self.beam_width,
            reward_temperature: self.reward_temperature,
            similarity_temperature: self.similarity_temperature,
            concentration: self.concentration,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the strategy grid of a config file and write results, report and traces.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        /// Budgets to run instead of the config's list; repeatable.
        #[arg(long)]
        budget: Vec<usize>,
        /// Comma-separated strategies to run instead of the config's list.
        #[arg(long)]
        strategy: Option<String>,
    },
    /// Run numerical verification suites.
    Verify {
        /// Comma-separated subset of prop1, prop2, theorem1, greedy_oracle, beta_mc.
        #[arg(long)]
        claims: Option<String>,
        /// Also print every individual check.
        #[arg(long)]
        verbose: bool,
        /// Write the full reports as JSON.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Allocate a budget once over the given scores.
    Allocate {
        #[arg(long)]
        strategy: StrategyKind,
        #[arg(long)]
        budget: usize,
        /// Inline comma-separated scores.
        #[arg(long)]
        scores: Option<String>,
        #[arg(long)]
        scores_file: Option<PathBuf>,
        /// JSON array of embedding arrays, one per score.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Comma-separated subtree group per score (dvts).
        #[arg(long)]
        groups: Option<String>,
        #[command(flatten)]
        flags: StrategyFlags,
    },
    /// Recompute allocations and direction diagnostics for every round of a trace.
    Replay {
        #[arg(long)]
        trace: PathBuf,
        /// Comma-separated strategies to replay.
        #[arg(long, default_value = "rebase,dora")]
        strategy: String,
        #[arg(long)]
        budget: usize,
        #[arg(long, default_value = "remaining")]
        budget_mode: BudgetMode,
        /// Output file; standard output when absent.
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        flags: StrategyFlags,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Simulate {
            config,
            output,
            trials,
            budget,
            strategy,
        } => {
            let args = SimulateArgs {
                config,
                output,
                seed: cli.seed,
                trials,
                budgets: budget,
                strategies: strategy.as_deref().map(parse_strategies).transpose()?,
            };
            cmd_simulate(&args, &mut out)?;
        }
        Command::Verify {
            claims,
            verbose,
            output,
        } => {
            let claims = parse_claims(claims.as_deref())?;
            cmd_verify(
                &claims,
                cli.seed.unwrap_or(DEFAULT_SEED),
                verbose,
                output.as_deref(),
                &mut out,
            )?;
        }
        Command::Allocate {
            strategy,
            budget,
            scores,
            scores_file,
            embeddings,
            groups,
            flags,
        } => {
            let line = cmd_allocate(&AllocateArgs {
                spec: flags.spec(strategy),
                budget,
                scores,
                scores_file,
                embeddings,
                groups,
            })?;
            writeln!(out, "{line}").map_err(|e| CliError::Runtime(e.to_string()))?;
        }
        Command::Replay {
            trace,
            strategy,
            budget,
            budget_mode,
            output,
            flags,
        } => {
            let specs = parse_strategies(&strategy)?
                .into_iter()
                .map(|k| flags.spec(k))
                .collect();
            let args = ReplayArgs {
                trace,
                specs,
                budget,
                budget_mode,
            };
            match output {
                Some(path) => {
                    let mut buf = Vec::new();
                    cmd_replay(&args, &mut buf)?;
                    std::fs::write(&path, buf)
                        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
                }
                None => cmd_replay(&args, &mut out)?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !matches!(e, CliError::VerificationFailed) {
                eprintln!("error: {e}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
