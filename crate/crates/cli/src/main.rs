use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use crowdml_cli::commands::{self, UsageError, EXIT_FAILED, EXIT_USAGE};
use crowdml_cli::config::{DEFAULT_DATA_DIR, DEFAULT_LISTEN};
use crowdml_cli::CliConfig;
use crowdml_core::service::LimitOverrides;

#[derive(Parser)]
#[command(name = "crowdml", version, about = "Self-hosted open-ended ML challenge platform")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Data directory holding challenges/ and store/
    #[arg(long, global = true, env = "CROWDML_DATA_DIR", default_value = DEFAULT_DATA_DIR)]
    data_dir: PathBuf,
    /// Evaluation worker threads [default: available cores]
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pool_size: Option<u16>,
    /// Address for `serve`
    #[arg(long, global = true, default_value = DEFAULT_LISTEN)]
    listen: String,
    /// Override every challenge's wall-clock limit (seconds)
    #[arg(long, global = true)]
    wall_clock_s: Option<f64>,
    /// Override every challenge's memory limit (MiB)
    #[arg(long, global = true)]
    memory_mb: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the HTTP API
    Serve,
    /// Challenge authoring tools
    #[command(subcommand)]
    Challenge(ChallengeCmd),
    /// Evaluate a submission locally without persisting anything
    EvalLocal {
        manifest: PathBuf,
        submission: PathBuf,
        /// Print the full report as JSON
        #[arg(long)]
        json: bool,
    },
    /// Install the demo challenges into an empty directory
    SeedDemo {
        /// Target directory [default: --data-dir]
        dir: Option<PathBuf>,
    },
    /// Print a challenge leaderboard from the store
    Leaderboard {
        challenge_id: String,
        #[arg(long)]
        json: bool,
    },
    /// Qualification quiz tools
    #[command(subcommand)]
    Quiz(QuizCmd),
}

#[derive(Subcommand)]
enum ChallengeCmd {
    /// Check a manifest and run its baseline
    Validate {
        manifest: PathBuf,
        /// Skip the baseline run
        #[arg(long)]
        no_run: bool,
    },
    /// Write the participant-visible bundle
    Package {
        dir: PathBuf,
        /// Output directory [default: ./<id>-public]
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum QuizCmd {
    /// Grade an answers file (JSON array or separated indices)
    Grade {
        quiz: PathBuf,
        answers: PathBuf,
        #[arg(long, default_value = "local")]
        user: String,
    },
}

fn config(g: &Global) -> CliConfig {
    let mut cfg = CliConfig::new(&g.data_dir);
    cfg.listen = g.listen.clone();
    if let Some(n) = g.pool_size {
        cfg.pool_size = n as usize;
    }
    cfg.limits = LimitOverrides {
        wall_clock_s: g.wall_clock_s,
        memory_mb: g.memory_mb,
    };
    cfg
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    let cfg = config(&cli.global);
    match cli.command {
        Command::Serve => commands::serve(&cfg),
        Command::Challenge(ChallengeCmd::Validate { manifest, no_run }) => commands::validate(&cfg, &manifest, no_run),
        Command::Challenge(ChallengeCmd::Package { dir, out }) => commands::package(&dir, out.as_deref()),
        Command::EvalLocal {
            manifest,
            submission,
            json,
        } => commands::eval_local(&cfg, &manifest, &submission, json),
        Command::SeedDemo { dir } => commands::seed(dir.as_deref().unwrap_or(&cfg.data_dir)),
        Command::Leaderboard { challenge_id, json } => commands::show_leaderboard(&cfg, &challenge_id, json),
        Command::Quiz(QuizCmd::Grade { quiz, answers, user }) => commands::grade(&quiz, &answers, &user),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FAILED)
        }
    }
}
