//! The `crowdrate` command line. Operator commands work on the event log
//! directly; player commands talk to a running service.

mod local;
mod remote;

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crowdrate_core::{Config, ConfigFile, Orientation};

pub const DEFAULT_LOG: &str = "crowdrate.log";
pub const DEFAULT_LISTEN: &str = "127.0.0.1:8080";
pub const DEFAULT_SERVER: &str = "http://127.0.0.1:8080";

#[derive(Debug, Parser)]
#[command(name = "crowdrate", version, about = "Crowd-sourced stock prediction game")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Game and deployment settings (`key = value` lines).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Event log; overrides `log_path` from the config file.
    #[arg(long, global = true, value_name = "FILE")]
    pub log: Option<PathBuf>,
    /// Snapshot directory; overrides `snapshot_dir` from the config file.
    #[arg(long, global = true, value_name = "DIR")]
    pub snapshot_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP service over the event log.
    Serve(ServeArgs),
    /// Append price observations from CSV files or a remote quote endpoint.
    Ingest(IngestArgs),
    /// Materialize the log and print a summary of the game state.
    Replay(ReplayArgs),
    /// Print the top-rated stocks as CSV.
    Report(ReportArgs),
    /// Write a deterministic synthetic game into an empty log.
    Simulate(SimulateArgs),
    /// Register a player.
    Register(RegisterArgs),
    /// Enter a prediction through the service.
    Submit(SubmitArgs),
    /// Show the player leaderboard from the service.
    Leaderboard(ServerArg),
    /// Show stock ratings from the service.
    Stocks(StocksArgs),
    /// Show one player's standing from the service.
    Player(PlayerArgs),
    /// List predictions known to the service.
    Predictions(PredictionsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClockArg {
    System,
    Log,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Listen address; overrides `listen` from the config file.
    #[arg(long)]
    pub listen: Option<String>,
    /// Time source for submissions.
    #[arg(long, value_enum, default_value = "system")]
    pub clock: ClockArg,
    /// Serve static files (e.g. a built web UI) from this directory.
    #[arg(long, value_name = "DIR")]
    pub static_dir: Option<PathBuf>,
    /// Write a snapshot every N events (needs a snapshot directory).
    #[arg(long, value_name = "N")]
    pub snapshot_every: Option<u64>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Price CSV files (`ticker,timestamp,value`).
    pub files: Vec<PathBuf>,
    /// Tickers to list as benchmark indexes when first seen.
    #[arg(long, value_delimiter = ',')]
    pub index: Vec<String>,
    /// Base URL of a quote endpoint serving `/quotes?tickers=...`.
    #[arg(long, requires = "tickers")]
    pub remote: Option<String>,
    #[arg(long, value_delimiter = ',', requires = "remote")]
    pub tickers: Vec<String>,
    /// Attempts per ticker against the remote endpoint.
    #[arg(long, default_value_t = 3)]
    pub attempts: u32,
    /// Delay before the first retry; doubles after each failure.
    #[arg(long, default_value_t = 200)]
    pub backoff_ms: u64,
    /// Send prices to a running service instead of writing the log.
    #[arg(long)]
    pub server: Option<String>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Stop after this event sequence number.
    #[arg(long)]
    pub up_to: Option<u64>,
    /// Write a snapshot of the replayed state into the snapshot directory.
    #[arg(long)]
    pub snapshot: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    #[arg(long)]
    pub up_to: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub players: usize,
    #[arg(long)]
    pub stocks: usize,
    #[arg(long)]
    pub days: u32,
    #[arg(long)]
    pub seed: u64,
    /// Extra agents that copy the leader's picks.
    #[arg(long, default_value_t = 0)]
    pub imitators: usize,
    /// Days an imitator trails the pick it copies.
    #[arg(long, default_value_t = 1)]
    pub lag: u32,
    /// Total picks by skilled and noise agents (default: 667/47 per player).
    #[arg(long)]
    pub predictions: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub skilled_fraction: f64,
    #[arg(long, default_value_t = 0.0003)]
    pub drift: f64,
    #[arg(long, default_value_t = 0.02)]
    pub volatility: f64,
}

#[derive(Debug, Args)]
pub struct RegisterArgs {
    pub id: String,
    /// Display name (defaults to the id).
    #[arg(long)]
    pub name: Option<String>,
    /// Register through a running service instead of writing the log.
    #[arg(long)]
    pub server: Option<String>,
}

#[derive(Debug, Args)]
pub struct ServerArg {
    #[arg(long, default_value = DEFAULT_SERVER)]
    pub server: String,
}

#[derive(Debug, Args)]
pub struct SubmitArgs {
    #[arg(long)]
    pub player: String,
    #[arg(long)]
    pub stock: String,
    #[arg(long)]
    pub index: String,
    #[arg(long, value_parser = parse_orientation)]
    pub orientation: Orientation,
    #[command(flatten)]
    pub server: ServerArg,
}

#[derive(Debug, Args)]
pub struct StocksArgs {
    /// Include stocks that do not qualify for a rating yet.
    #[arg(long)]
    pub all: bool,
    #[command(flatten)]
    pub server: ServerArg,
}

#[derive(Debug, Args)]
pub struct PlayerArgs {
    pub id: String,
    #[command(flatten)]
    pub server: ServerArg,
}

#[derive(Debug, Args)]
pub struct PredictionsArgs {
    #[arg(long)]
    pub player: Option<String>,
    #[command(flatten)]
    pub server: ServerArg,
}

fn parse_orientation(s: &str) -> Result<Orientation, String> {
    s.parse().map_err(|_| format!("expected one of: {}", Orientation::ALL.map(|o| o.as_str()).join(", ")))
}

/// Settings resolved from flags and the optional config file.
#[derive(Debug, Clone)]
pub struct Resolved {
    /// Game config from `--config`, if one was given.
    pub game: Option<Config>,
    pub log: PathBuf,
    pub snapshot_dir: Option<PathBuf>,
    pub listen: Option<String>,
}

impl Resolved {
    pub fn from_args(global: &GlobalArgs) -> Result<Self> {
        let file = match &global.config {
            Some(path) => Some(load_config(path)?),
            None => None,
        };
        let settings = file.as_ref().map(|f| f.settings.clone()).unwrap_or_default();
        Ok(Self {
            game: file.map(|f| f.game),
            log: global.log.clone().or(settings.log_path).unwrap_or_else(|| PathBuf::from(DEFAULT_LOG)),
            snapshot_dir: global.snapshot_dir.clone().or(settings.snapshot_dir),
            listen: settings.listen,
        })
    }
}

fn load_config(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ConfigFile::parse(&text).with_context(|| format!("in {}", path.display()))
}

pub async fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let resolved = Resolved::from_args(&cli.global)?;
    match cli.command {
        Command::Serve(args) => local::serve(&resolved, args).await,
        Command::Ingest(args) => local::ingest(&resolved, args, out).await,
        Command::Replay(args) => local::replay(&resolved, args, out),
        Command::Report(args) => local::report(&resolved, args, out),
        Command::Simulate(args) => local::simulate(&resolved, args, out),
        Command::Register(args) => match args.server.clone() {
            Some(server) => remote::register(&server, args, out).await,
            None => local::register(&resolved, args, out),
        },
        Command::Submit(args) => remote::submit(args, out).await,
        Command::Leaderboard(args) => remote::leaderboard(&args.server, out).await,
        Command::Stocks(args) => remote::stocks(args, out).await,
        Command::Player(args) => remote::player(args, out).await,
        Command::Predictions(args) => remote::predictions(args, out).await,
    }
}
