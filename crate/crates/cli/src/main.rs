//! `rpo`: generate → pairs → train → eval → analyze.
//!
//! Exit codes: 0 on success, 2 for usage or configuration errors, 3 for data
//! errors. Human-readable messages go to stderr; stdout stays empty unless
//! `--json` asks for a machine-readable summary.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rpo_core::pairs::{DpoMode, Strategy};
use rpo_core::policy::{InitMode, LossKind};

#[derive(Debug, Parser)]
#[command(name = "rpo", version, about = "Reverse preference optimization toolkit")]
struct Cli {
    /// Cap on worker threads used for parallel stages.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print a JSON summary of the run on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic session corpus from a JSON config.
    Gen(GenArgs),
    /// Build RPO, DPO or KTO training examples from sessions.
    Pairs(PairsArgs),
    /// Train the toy policy on preference pairs.
    Train(TrainArgs),
    /// Compute CSR / ISR / SSR and per-step strict accuracies.
    Eval(EvalArgs),
    /// Sample-efficiency and gap-bucket analysis.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Rpo,
    Dpo,
    Kto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DpoModeArg {
    Extremes,
    All,
}

impl From<DpoModeArg> for DpoMode {
    fn from(m: DpoModeArg) -> Self {
        match m {
            DpoModeArg::Extremes => DpoMode::Extremes,
            DpoModeArg::All => DpoMode::All,
        }
    }
}

#[derive(Debug, Args)]
pub struct PairsArgs {
    #[arg(long)]
    pub sessions: PathBuf,
    #[arg(long, value_enum, default_value = "rpo")]
    pub method: Method,
    #[arg(long, value_enum, default_value = "extremes")]
    pub dpo_mode: DpoModeArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Dpo,
    Rpo,
}

impl From<LossArg> for LossKind {
    fn from(l: LossArg) -> Self {
        match l {
            LossArg::Dpo => LossKind::Dpo,
            LossArg::Rpo => LossKind::Rpo,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Uniform,
    Sft,
}

impl From<InitArg> for InitMode {
    fn from(i: InitArg) -> Self {
        match i {
            InitArg::Uniform => InitMode::Uniform,
            InitArg::Sft => InitMode::Sft,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long, value_enum, default_value = "rpo")]
    pub loss: LossArg,
    #[arg(long, default_value_t = 0.1)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.05)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.5)]
    pub lr: f64,
    #[arg(long, default_value_t = 2000)]
    pub steps: usize,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Starting point of the policy; `sft` fits the session responses first.
    #[arg(long, value_enum, default_value = "uniform")]
    pub init: InitArg,
    /// Sessions whose responses serve as demonstrations for `--init sft`.
    #[arg(long)]
    pub sessions: Option<PathBuf>,
    /// Add-alpha smoothing for `--init sft`.
    #[arg(long, default_value_t = 1.0)]
    pub sft_smoothing: f64,
    /// Also record the end-to-end finite-difference gradient check.
    #[arg(long)]
    pub grad_check: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub sessions: PathBuf,
    /// Evaluate the policy's most probable candidate per turn instead of the
    /// recorded responses.
    #[arg(long)]
    pub policy: Option<PathBuf>,
    /// Scorer for the evaluated responses: the rule checkers, the offline
    /// stub judge, or the HTTP judge named by RPO_JUDGE_URL.
    #[arg(long, value_enum, default_value = "rules")]
    pub judge: JudgeArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum JudgeArg {
    Rules,
    Stub,
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Direct,
    Reverse,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Direct => Strategy::Direct,
            StrategyArg::Reverse => Strategy::Reverse,
        }
    }
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub sessions: PathBuf,
    #[arg(long, value_enum, default_value = "reverse")]
    pub strategy: StrategyArg,
    #[arg(long)]
    pub out: PathBuf,
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) => m,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }

    let result = match &cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::Pairs(a) => commands::pairs(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Analyze(a) => commands::analyze(a),
    };
    match result {
        Ok(summary) => {
            if cli.json {
                println!("{}", serde_json::to_string(&summary).expect("summary serializes"));
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
