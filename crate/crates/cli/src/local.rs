use std::io::Write;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use chrono::Utc;
use tokio::net::TcpListener;

use crowdrate_client::{fetch_remote, ApiClient, QuoteEndpoint, RetryPolicy};
use crowdrate_core::engine::{self, evaluate, Evaluation};
use crowdrate_core::event_store::{
    read_events, replay as replay_log, replay_with_snapshots, write_snapshot, EventLog, Journal,
};
use crowdrate_core::game::price_ingest_events;
use crowdrate_core::market_data::{format_timestamp, parse_price_csv, write_price_csv};
use crowdrate_core::simulate::{simulate as run_simulation, SimulationParams};
use crowdrate_core::stock_rating::report_csv;
use crowdrate_core::{EventPayload, GameState, InstrumentKind, Player, PlayerId, Timestamp};
use crowdrate_server::{AppState, Clock, SnapshotPolicy};

use crate::{
    ClockArg, IngestArgs, RegisterArgs, ReplayArgs, ReportArgs, Resolved, ServeArgs, SimulateArgs, DEFAULT_LISTEN,
};

fn open_journal(res: &Resolved) -> Result<Journal> {
    let journal = match &res.snapshot_dir {
        Some(dir) => Journal::open_with_snapshots(&res.log, dir),
        None => Journal::open(&res.log),
    };
    journal.with_context(|| format!("opening {}", res.log.display()))
}

fn load_state(res: &Resolved, up_to: Option<u64>) -> Result<GameState> {
    let state = match &res.snapshot_dir {
        Some(dir) => replay_with_snapshots(&res.log, dir, up_to),
        None => replay_log(&res.log, up_to),
    };
    state.with_context(|| format!("replaying {}", res.log.display()))
}

/// A config change to record first when `--config` differs from the log's.
fn config_change(res: &Resolved, state: &GameState, at: Timestamp) -> Vec<(Timestamp, EventPayload)> {
    match &res.game {
        Some(config) if *config != state.config => vec![(at, EventPayload::ConfigChanged { config: config.clone() })],
        _ => Vec::new(),
    }
}

pub async fn serve(res: &Resolved, args: ServeArgs) -> Result<()> {
    let mut journal = open_journal(res)?;
    let now = journal.state().now().map_or_else(Utc::now, |last| last.max(Utc::now()));
    let change = config_change(res, journal.state(), now);
    journal.record_all(change)?;

    if args.snapshot_every.is_some() && res.snapshot_dir.is_none() {
        bail!("--snapshot-every needs a snapshot directory (--snapshot-dir or snapshot_dir in the config)");
    }
    let clock = match args.clock {
        ClockArg::System => Clock::System,
        ClockArg::Log => Clock::Log,
    };
    let policy = SnapshotPolicy { dir: res.snapshot_dir.clone(), every: args.snapshot_every };
    let router = crowdrate_server::app(AppState::from_journal(journal, clock, policy), args.static_dir);

    let listen = args.listen.or_else(|| res.listen.clone()).unwrap_or_else(|| DEFAULT_LISTEN.to_string());
    let listener = TcpListener::bind(&listen).await.with_context(|| format!("binding {listen}"))?;
    let _ = tracing_subscriber::fmt().with_writer(std::io::stderr).try_init();
    eprintln!("listening on http://{}", listener.local_addr()?);
    crowdrate_server::serve(listener, router).await?;
    Ok(())
}

pub async fn ingest(res: &Resolved, args: IngestArgs, out: &mut dyn Write) -> Result<()> {
    let mut points = Vec::new();
    for file in &args.files {
        let bytes = std::fs::read(file).with_context(|| format!("reading {}", file.display()))?;
        points.extend(parse_price_csv(&bytes).with_context(|| file.display().to_string())?);
    }
    if let Some(url) = &args.remote {
        let endpoint = QuoteEndpoint::new(url)?;
        let policy = RetryPolicy { attempts: args.attempts, initial_backoff: Duration::from_millis(args.backoff_ms) };
        points.extend(fetch_remote(&endpoint, &args.tickers, policy).await?);
    }
    if points.is_empty() {
        bail!("no prices to ingest; give CSV files or --remote with --tickers");
    }
    let count = points.len();

    if let Some(server) = &args.server {
        let done = ApiClient::new(server)?.ingest_prices(write_price_csv(&points), &args.index).await?;
        writeln!(out, "ingested {} prices as {} events; log at sequence {}", done.prices, done.events, done.sequence)?;
        return Ok(());
    }

    let mut journal = open_journal(res)?;
    let earliest = points.iter().map(|p| p.at).min().expect("points is not empty");
    let now = journal.state().now().unwrap_or(earliest);
    let mut batch = config_change(res, journal.state(), now);
    batch.extend(price_ingest_events(journal.state(), points, &args.index, now)?);
    let events = journal.record_all(batch)?;
    writeln!(
        out,
        "ingested {count} prices as {} events; log at sequence {}",
        events.len(),
        journal.state().last_sequence
    )?;
    Ok(())
}

pub fn replay(res: &Resolved, args: ReplayArgs, out: &mut dyn Write) -> Result<()> {
    let state = load_state(res, args.up_to)?;
    let eval = evaluate(&state);
    write_summary(&state, &eval, out)?;
    if args.snapshot {
        let Some(dir) = &res.snapshot_dir else {
            bail!("--snapshot needs a snapshot directory");
        };
        let path = write_snapshot(dir, &state)?;
        writeln!(out, "snapshot       {}", path.display())?;
    }
    Ok(())
}

fn write_summary(state: &GameState, eval: &Evaluation, out: &mut dyn Write) -> Result<()> {
    let kinds = |k| state.instruments.values().filter(|i| i.kind == k).count();
    let mature = eval.scores.iter().filter(|s| s.mature).count();
    let qualified = eval.stock_ratings.iter().filter(|r| r.qualified).count();
    let prices: usize = state.prices.values().map(|s| s.len()).sum();

    writeln!(out, "sequence       {}", state.last_sequence)?;
    writeln!(out, "as of          {}", state.now().map(format_timestamp).unwrap_or_else(|| "-".into()))?;
    writeln!(out, "players        {} registered, {} ranked", state.players.len(), eval.leaderboard().len())?;
    writeln!(out, "instruments    {} stocks, {} indexes", kinds(InstrumentKind::Stock), kinds(InstrumentKind::Index))?;
    writeln!(out, "prices         {prices}")?;
    writeln!(
        out,
        "predictions    {} entered, {mature} mature, {} unscored",
        state.predictions.len(),
        eval.unscored.len()
    )?;
    if !state.players.is_empty() {
        let per_player = state.predictions.len() as f64 / state.players.len() as f64;
        writeln!(out, "per player     {per_player:.4}")?;
    }
    writeln!(out, "rated stocks   {qualified} of {}", eval.stock_ratings.len())?;
    let top: Vec<_> = eval.leaderboard().iter().take(5).collect();
    if !top.is_empty() {
        writeln!(out, "leaders        player  y_R  y_S  y_A")?;
        for e in top {
            writeln!(
                out,
                "               {}  {:.2}  {:.2}  {:.2}",
                e.player_id, e.rating_percentile, e.score_percentile, e.accuracy_percentile
            )?;
        }
    }
    Ok(())
}

pub fn report(res: &Resolved, args: ReportArgs, out: &mut dyn Write) -> Result<()> {
    let state = load_state(res, args.up_to)?;
    let eval = evaluate(&state);
    out.write_all(report_csv(&engine::report(&state, &eval, args.top)).as_bytes())?;
    Ok(())
}

pub fn simulate(res: &Resolved, args: SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let existing = read_events(&res.log).with_context(|| format!("reading {}", res.log.display()))?;
    if !existing.is_empty() {
        bail!("{} already holds {} events; simulate needs an empty log", res.log.display(), existing.len());
    }
    let mut params = SimulationParams::new(args.players, args.stocks, args.days, args.seed);
    params.imitators = args.imitators;
    params.lag_days = args.lag;
    params.predictions = args.predictions;
    params.skilled_fraction = args.skilled_fraction;
    params.daily_drift = args.drift;
    params.daily_volatility = args.volatility;
    if let Some(config) = &res.game {
        params.config = config.clone();
    }
    let events = run_simulation(&params)?;
    let predictions = events.iter().filter(|e| matches!(e.payload, EventPayload::PredictionEntered { .. })).count();

    let (mut log, _) = EventLog::open(&res.log).with_context(|| format!("opening {}", res.log.display()))?;
    log.append_all(events.into_iter().map(|e| (e.at, e.payload)).collect())?;
    writeln!(
        out,
        "wrote {} events to {}: {} players + {} imitators, {} stocks, {predictions} predictions over {} days",
        log.len(),
        res.log.display(),
        args.players,
        args.imitators,
        args.stocks,
        args.days
    )?;
    Ok(())
}

pub fn register(res: &Resolved, args: RegisterArgs, out: &mut dyn Write) -> Result<()> {
    let mut journal = open_journal(res)?;
    let at = journal.state().now().unwrap_or_else(Utc::now);
    let player = Player { id: PlayerId::new(args.id.clone())?, name: args.name.unwrap_or(args.id), registered_at: at };
    let id = player.id.clone();
    let mut batch = config_change(res, journal.state(), at);
    batch.push((at, EventPayload::PlayerRegistered { player }));
    journal.record_all(batch)?;
    writeln!(out, "registered {id} at sequence {}", journal.state().last_sequence)?;
    Ok(())
}
