use std::io::Write;

use anyhow::{bail, Result};

use crowdrate_client::ApiClient;
use crowdrate_core::market_data::format_timestamp;
use crowdrate_core::wire::{RegisterPlayerRequest, SubmissionRequest};
use crowdrate_core::{PlayerId, Timestamp};

use crate::{PlayerArgs, PredictionsArgs, RegisterArgs, StocksArgs, SubmitArgs};

fn as_of(t: Option<Timestamp>) -> String {
    t.map(format_timestamp).unwrap_or_else(|| "-".into())
}

pub async fn register(server: &str, args: RegisterArgs, out: &mut dyn Write) -> Result<()> {
    let request = RegisterPlayerRequest { id: PlayerId::new(args.id.clone())?, name: args.name.unwrap_or(args.id) };
    let done = ApiClient::new(server)?.register_player(&request).await?;
    writeln!(out, "registered {} at sequence {}", done.player.id, done.sequence)?;
    Ok(())
}

pub async fn submit(args: SubmitArgs, out: &mut dyn Write) -> Result<()> {
    for (flag, value) in [("--player", &args.player), ("--stock", &args.stock), ("--index", &args.index)] {
        if value.trim().is_empty() {
            bail!("{flag} must not be empty");
        }
    }
    let request = SubmissionRequest {
        player_id: PlayerId::new(args.player)?,
        stock_ticker: args.stock,
        index_ticker: args.index,
        orientation: args.orientation,
    };
    let done = ApiClient::new(&args.server.server)?.submit_prediction(&request).await?;
    let p = &done.prediction;
    writeln!(
        out,
        "{} {} {} vs {} entered {}: {} @ {}, {} @ {} (sequence {})",
        p.id,
        p.orientation.as_str(),
        p.stock_ticker,
        p.index_ticker,
        format_timestamp(p.entered_at),
        p.stock_ticker,
        p.stock_entry_value,
        p.index_ticker,
        p.index_entry_value,
        done.sequence
    )?;
    Ok(())
}

pub async fn leaderboard(server: &str, out: &mut dyn Write) -> Result<()> {
    let board = ApiClient::new(server)?.leaderboard().await?;
    writeln!(out, "# sequence {} as of {}", board.sequence, as_of(board.as_of))?;
    writeln!(out, "player,rating_percentile,score_percentile,accuracy_percentile,raw_rating")?;
    for e in board.entries {
        writeln!(
            out,
            "{},{:.2},{:.2},{:.2},{:.4}",
            e.player_id, e.rating_percentile, e.score_percentile, e.accuracy_percentile, e.raw_rating
        )?;
    }
    Ok(())
}

pub async fn stocks(args: StocksArgs, out: &mut dyn Write) -> Result<()> {
    let ratings = ApiClient::new(&args.server.server)?.stock_ratings().await?;
    writeln!(out, "# sequence {} as of {}", ratings.sequence, as_of(ratings.as_of))?;
    writeln!(out, "ticker,percentile,score,predictions,outperform_mass,underperform_mass")?;
    let opt = |v: Option<f64>, digits: usize| v.map(|x| format!("{x:.digits$}")).unwrap_or_default();
    for r in ratings.ratings.iter().filter(|r| args.all || r.qualified) {
        writeln!(
            out,
            "{},{},{},{},{:.4},{:.4}",
            r.ticker,
            opt(r.percentile, 2),
            opt(r.score, 4),
            r.prediction_count,
            r.outperform_mass,
            r.underperform_mass
        )?;
    }
    Ok(())
}

pub async fn player(args: PlayerArgs, out: &mut dyn Write) -> Result<()> {
    let p = ApiClient::new(&args.server.server)?.player(&args.id).await?;
    writeln!(out, "player         {} ({})", p.player.id, p.player.name)?;
    writeln!(out, "registered     {}", format_timestamp(p.player.registered_at))?;
    writeln!(out, "as of          {} (sequence {})", as_of(p.as_of), p.sequence)?;
    match (&p.stats, &p.entry) {
        (Some(s), Some(e)) => {
            writeln!(out, "mature picks   {} ({} positive)", s.prediction_count, s.positive_count)?;
            writeln!(out, "total score    {:.4}", s.total_score)?;
            writeln!(out, "accuracy       {:.2} (adjusted {:.2})", s.accuracy, s.bayesian_accuracy)?;
            writeln!(out, "y_R            {:.2}", e.rating_percentile)?;
            writeln!(out, "y_S / y_A      {:.2} / {:.2}", e.score_percentile, e.accuracy_percentile)?;
        }
        _ => writeln!(out, "not ranked yet")?,
    }
    Ok(())
}

pub async fn predictions(args: PredictionsArgs, out: &mut dyn Write) -> Result<()> {
    let player = args.player.map(PlayerId::new).transpose()?;
    let list = ApiClient::new(&args.server.server)?.predictions(player.as_ref()).await?;
    writeln!(out, "# sequence {}", list.sequence)?;
    writeln!(out, "id,player,stock,index,orientation,entered_at,stock_entry,index_entry")?;
    for p in list.predictions {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            p.id,
            p.player_id,
            p.stock_ticker,
            p.index_ticker,
            p.orientation.as_str(),
            format_timestamp(p.entered_at),
            p.stock_entry_value,
            p.index_entry_value
        )?;
    }
    Ok(())
}
