use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use csapo::game::GameSpec;
use csapo::harness::{self, ExperimentConfig, OUTPUT_ROOT_ENV};
use csapo::hindsight::HindsightOptions;
use csapo::lagrangian::Mode;
use csapo::{Error, Result};

#[derive(Parser)]
#[command(
    name = "csapo",
    version,
    about = "Safe online learning in constrained two-player Markov games"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random game satisfying the feasibility margin.
    Generate(GenerateArgs),
    /// Run the learner for one or more seeds.
    Run(RunArgs),
    /// Compute regret and violation of a stored run.
    Evaluate(EvaluateArgs),
    /// Run and evaluate a grid of episode counts, modes, and seeds.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// TOML generator spec; the benchmark spec when omitted.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Coupled budget b.
    #[arg(long)]
    budget: Option<f64>,
    /// Feasibility margin of the witness.
    #[arg(long)]
    margin: Option<f64>,
    /// Per-player budgets, `b1,b2`.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    side_budgets: Option<Vec<f64>>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Game JSON file.
    #[arg(long)]
    game: Option<PathBuf>,
    /// Number of episodes.
    #[arg(long = "T")]
    episodes: Option<usize>,
    #[arg(long)]
    mode: Option<Mode>,
    /// Seed; repeat for several runs.
    #[arg(long)]
    seed: Vec<u64>,
    /// Output root.
    #[arg(long, env = OUTPUT_ROOT_ENV)]
    out: Option<PathBuf>,
    /// Write occupancy snapshots every S episodes.
    #[arg(long)]
    snapshot_every: Option<usize>,
    /// Add per-player solver columns to the run CSV.
    #[arg(long)]
    trace_solver: bool,
    #[arg(long = "V")]
    v: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Run directory containing `log.jsonl`.
    #[arg(long)]
    run: PathBuf,
    /// Game JSON file the run was made on.
    #[arg(long)]
    game: PathBuf,
    /// Exploitability the comparator must certify.
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    game: Option<PathBuf>,
    #[arg(long, env = OUTPUT_ROOT_ENV)]
    out: Option<PathBuf>,
}

fn generate(args: GenerateArgs) -> Result<()> {
    let mut spec = match &args.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            toml::from_str::<GameSpec>(&text).map_err(|e| Error::Config(e.to_string()))?
        }
        None => harness::benchmark_spec(),
    };
    spec.seed = args.seed.unwrap_or(spec.seed);
    spec.budget = args.budget.unwrap_or(spec.budget);
    spec.margin = args.margin.unwrap_or(spec.margin);
    if let Some(b) = args.side_budgets {
        spec.side_budgets = Some((b[0], b[1]));
    }
    let report = harness::cmd_generate(&spec, &args.out)?;
    println!("wrote {} (witness margin {:.6})", report.path.display(), report.margin);
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(game) = args.game {
        config.game.file = Some(game);
        config.game.spec = None;
    }
    config.episodes = args.episodes.unwrap_or(config.episodes);
    config.mode = args.mode.unwrap_or(config.mode);
    if !args.seed.is_empty() {
        config.seeds = args.seed;
    }
    config.out = args.out.or(config.out);
    config.snapshot_every = args.snapshot_every.unwrap_or(config.snapshot_every);
    config.trace_solver |= args.trace_solver;
    let p = &mut config.params;
    p.v = args.v.or(p.v);
    p.eta = args.eta.or(p.eta);
    p.theta = args.theta.or(p.theta);
    p.delta = args.delta.or(p.delta);
    for dir in harness::cmd_run(&config)? {
        println!("{}", dir.display());
    }
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let options = HindsightOptions {
        tol: args.tol,
        ..HindsightOptions::default()
    };
    let summary = harness::cmd_evaluate(&args.run, &args.game, &options)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(game) = args.game {
        config.game.file = Some(game);
        config.game.spec = None;
    }
    config.out = args.out.or(config.out);
    let summary = harness::cmd_sweep(&config)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Run(a) => run(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Sweep(a) => sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
