use std::net::SocketAddr;
use std::path::PathBuf;

use clap::builder::TypedValueParser as _;
use clap::{Args, Parser, Subcommand, ValueEnum};
use threadscope_core::analytics::{TimeWindow, DEFAULT_BINS, DEFAULT_BUCKETS};

#[derive(Debug, Parser)]
#[command(name = "threadscope", version, about = "Collect, score and triage discussion threads")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Collect recent posts and their comment trees from the provider.
    Ingest(IngestArgs),
    /// Generate a deterministic synthetic corpus.
    Synth(SynthArgs),
    /// Attach toxicity scores to every comment.
    Score(ScoreArgs),
    /// Export every window aggregate as JSON.
    Report(ReportArgs),
    /// Serve a corpus over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub subreddit: String,
    /// How far back to collect, e.g. `48h`, `2days`, or plain seconds.
    #[arg(long, value_parser = parse_span)]
    pub span: i64,
    #[arg(long)]
    pub out: PathBuf,
    /// JSON file with `provider` and `credentials` sections.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Answer requests from a recorded session instead of the network.
    #[arg(long, hide = true)]
    pub replay: Option<PathBuf>,
    /// Collection instant in epoch seconds (defaults to the system clock).
    #[arg(long, hide = true)]
    pub now: Option<i64>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProviderArg {
    Remote,
    Lexicon,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub provider: ProviderArg,
    /// Term weights for the lexicon provider; the built-in list otherwise.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Where to write the scored corpus. Defaults to `<in>` with a `.scored.json` suffix.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON remote-scorer settings (endpoint, api_key, max_in_flight).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Pause between provider batches, e.g. `250ms`.
    #[arg(long, value_parser = parse_duration)]
    pub pacing: Option<std::time::Duration>,
    #[arg(long, hide = true)]
    pub replay: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// `<anchor>,<span>` with anchor in epoch seconds; defaults to the
    /// corpus fetch time and 24 hours.
    #[arg(long, value_parser = parse_window)]
    pub window: Option<TimeWindow>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = threadscope_core::analytics::DEFAULT_TOXICITY_THRESHOLD)]
    pub toxicity_threshold: f64,
    #[arg(long, default_value_t = threadscope_core::analytics::DEFAULT_SCORE_THRESHOLD, allow_negative_numbers = true)]
    pub score_threshold: i64,
    #[arg(long, default_value_t = DEFAULT_BINS, value_parser = clap::value_parser!(u16).range(1..).map(usize::from))]
    pub bins: usize,
    #[arg(long, default_value_t = DEFAULT_BUCKETS, value_parser = clap::value_parser!(u16).range(1..).map(usize::from))]
    pub buckets: usize,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Moderation action log (JSON Lines).
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long)]
    pub addr: Option<SocketAddr>,
    /// TOML server config; flags and THREADSCOPE_* variables override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
}

pub fn parse_duration(s: &str) -> Result<std::time::Duration, String> {
    let s = s.trim();
    if let Ok(secs) = s.parse::<u64>() {
        return Ok(std::time::Duration::from_secs(secs));
    }
    humantime::parse_duration(s).map_err(|e| e.to_string())
}

fn parse_span(s: &str) -> Result<i64, String> {
    let d = parse_duration(s)?;
    match i64::try_from(d.as_secs()) {
        Ok(secs) if secs > 0 => Ok(secs),
        _ => Err(format!("span must be at least one second, got {s:?}")),
    }
}

fn parse_window(s: &str) -> Result<TimeWindow, String> {
    let (anchor, span) = s.split_once(',').ok_or("expected <anchor>,<span>")?;
    let anchor: i64 = anchor.trim().parse().map_err(|e| format!("anchor: {e}"))?;
    let span = parse_span(span)?;
    TimeWindow::new(anchor, span).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_is_well_formed() {
        Cli::command().debug_assert();
    }

    #[test]
    fn spans_and_windows() {
        assert_eq!(parse_span("48h"), Ok(172_800));
        assert_eq!(parse_span("2days"), Ok(172_800));
        assert_eq!(parse_span("90"), Ok(90));
        assert!(parse_span("0").is_err());
        assert!(parse_span("soon").is_err());
        assert_eq!(parse_window("100,8m").unwrap(), TimeWindow::new(100, 480).unwrap());
        assert!(parse_window("100,1m").is_err());
        assert!(parse_window("100").is_err());
    }
}
