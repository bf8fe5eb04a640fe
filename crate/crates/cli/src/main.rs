mod args;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::Parser;
use serde::Deserialize;
use threadscope_core::analytics::{build_report, MetricThresholds, TimeWindow, MAX_SPAN_SECS};
use threadscope_core::http::{thread_sleeper, ReplayTransport, ReqwestTransport, RetryPolicy, Session, Transport};
use threadscope_core::ingest::{generate_synthetic, Credentials, FetchClient, ProviderConfig, SyntheticConfig};
use threadscope_core::model::write_atomic;
use threadscope_core::scoring::{
    score_corpus_with, system_clock, BatchOptions, Lexicon, LexiconScorer, RemoteConfig, RemoteScorer, ScoreCache,
    Scorer,
};
use threadscope_core::Corpus;
use threadscope_server::ServerConfig;

use args::{Cli, Command, IngestArgs, ProviderArg, ReportArgs, ScoreArgs, ServeArgs, SynthArgs};

const HTTP_TIMEOUT: Duration = Duration::from_secs(30);

fn main() -> ExitCode {
    let cli = Cli::parse();
    let default_level = if matches!(cli.command, Command::Serve(_)) { "info" } else { "warn" };
    let filter = tracing_subscriber::EnvFilter::try_from_env("THREADSCOPE_LOG")
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default_level));
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).init();

    let result = match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Synth(a) => synth(a),
        Command::Score(a) => score(a),
        Command::Report(a) => report(a),
        Command::Serve(a) => serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn env(name: &str) -> Option<String> {
    std::env::var(name).ok().filter(|v| !v.is_empty())
}

fn transport(replay: Option<&Path>) -> Result<Arc<dyn Transport>> {
    Ok(match replay {
        Some(path) => {
            let session = Session::load(path).with_context(|| format!("loading session {}", path.display()))?;
            Arc::new(ReplayTransport::new(session))
        }
        None => Arc::new(ReqwestTransport::new(HTTP_TIMEOUT)?),
    })
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct IngestFile {
    provider: ProviderConfig,
    credentials: Option<Credentials>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn ingest(a: IngestArgs) -> Result<()> {
    let mut file: IngestFile = match &a.config {
        Some(p) => read_json(p)?,
        None => IngestFile::default(),
    };
    if let Some(base) = env("THREADSCOPE_API_BASE") {
        file.provider.api_base = base;
    }
    let credentials = if let Some(token) = env("THREADSCOPE_REDDIT_TOKEN") {
        Credentials::Bearer { token }
    } else if let (Some(client_id), Some(client_secret)) =
        (env("THREADSCOPE_REDDIT_CLIENT_ID"), env("THREADSCOPE_REDDIT_CLIENT_SECRET"))
    {
        Credentials::ClientCredentials {
            client_id,
            client_secret,
        }
    } else if let Some(c) = file.credentials {
        c
    } else {
        bail!("no provider credentials: set THREADSCOPE_REDDIT_TOKEN or add `credentials` to --config");
    };

    let client = FetchClient::new(
        transport(a.replay.as_deref())?,
        file.provider,
        RetryPolicy::default(),
        thread_sleeper(),
    );
    let now = a.now.unwrap_or_else(|| system_clock()());
    let corpus = client.fetch_subreddit(&a.subreddit, a.span, &credentials, now)?;
    corpus.save(&a.out)?;
    eprintln!(
        "collected {} posts, {} comments from r/{} into {}",
        corpus.threads.len(),
        corpus.comment_count(),
        a.subreddit,
        a.out.display()
    );
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let config: SyntheticConfig = read_json(&a.config)?;
    let corpus = generate_synthetic(&config, a.seed)?;
    corpus.save(&a.out)?;
    eprintln!(
        "generated {} posts, {} comments into {}",
        corpus.threads.len(),
        corpus.comment_count(),
        a.out.display()
    );
    Ok(())
}

fn default_scored_path(input: &Path) -> PathBuf {
    let stem = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    input.with_file_name(format!("{stem}.scored.json"))
}

fn score(a: ScoreArgs) -> Result<()> {
    let out = a.out.clone().unwrap_or_else(|| default_scored_path(&a.input));
    if out == a.input {
        bail!("--out must differ from --in; inputs are never modified");
    }
    let corpus = Corpus::load(&a.input)?;
    let scorer: Box<dyn Scorer> = match a.provider {
        ProviderArg::Lexicon => {
            let lexicon = match &a.lexicon {
                Some(p) => Lexicon::load(p)?,
                None => Lexicon::builtin(),
            };
            Box::new(LexiconScorer::new(lexicon, system_clock()))
        }
        ProviderArg::Remote => {
            if a.lexicon.is_some() {
                bail!("--lexicon only applies to --provider lexicon");
            }
            let mut config: RemoteConfig = match &a.config {
                Some(p) => read_json(p)?,
                None => RemoteConfig::default(),
            };
            if let Some(key) = env("THREADSCOPE_PERSPECTIVE_KEY") {
                config.api_key = key;
            }
            if let Some(endpoint) = env("THREADSCOPE_PERSPECTIVE_ENDPOINT") {
                config.endpoint = endpoint;
            }
            if config.api_key.is_empty() {
                bail!("no API key: set THREADSCOPE_PERSPECTIVE_KEY or `api_key` in --config");
            }
            Box::new(RemoteScorer::new(
                transport(a.replay.as_deref())?,
                config,
                RetryPolicy::default(),
                thread_sleeper(),
                system_clock(),
            ))
        }
    };

    let cache_path = ScoreCache::path_for(&a.input);
    let mut cache = ScoreCache::load(&cache_path)?;
    let cached = cache.len();
    let options = BatchOptions {
        pacing: a.pacing.unwrap_or_default(),
        ..BatchOptions::default()
    };
    let result = score_corpus_with(&corpus, scorer.as_ref(), &mut cache, &options);
    // Keep whatever was scored so a rerun resumes instead of starting over.
    cache.save(&cache_path)?;
    let scored = result?;
    scored.save(&out)?;
    eprintln!(
        "scored {} comments ({} from cache) into {}",
        cache.len(),
        cached,
        out.display()
    );
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let corpus = Corpus::load(&a.input)?;
    let window = a.window.unwrap_or(TimeWindow {
        anchor: corpus.fetched_at,
        span: MAX_SPAN_SECS,
    });
    let thresholds = MetricThresholds::new(a.toxicity_threshold, a.score_threshold)?;
    let report = build_report(&corpus, &window, &thresholds, a.bins, a.buckets)?;
    let mut bytes = serde_json::to_vec_pretty(&report)?;
    bytes.push(b'\n');
    write_atomic(&a.out, &bytes)?;
    eprintln!("wrote report for {} posts into {}", report.posts.len(), a.out.display());
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let mut config = ServerConfig::load(a.config.as_deref())?;
    if let Some(c) = a.corpus {
        config.corpus = c;
    }
    if let Some(l) = a.log {
        config.action_log = l;
    }
    if let Some(addr) = a.addr {
        config.addr = addr;
    }
    if let Some(d) = a.static_dir {
        config.static_dir = Some(d);
    }
    let service = threadscope_server::build_service(&config, system_clock())?;

    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(config.addr)
            .await
            .with_context(|| format!("binding {}", config.addr))?;
        // Scripts read the bound address from this line.
        println!("listening on http://{}", listener.local_addr()?);
        reload_on_hangup(service.clone());
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        threadscope_server::serve(listener, service, &config, shutdown).await?;
        Ok(())
    })
}

#[cfg(unix)]
fn reload_on_hangup(service: Arc<threadscope_server::Service>) {
    use tokio::signal::unix::{signal, SignalKind};
    let Ok(mut hup) = signal(SignalKind::hangup()) else { return };
    tokio::spawn(async move {
        while hup.recv().await.is_some() {
            match service.reload() {
                Ok(_) => tracing::info!("corpus reloaded"),
                Err(e) => tracing::error!(error = %e, "reload failed; keeping previous snapshot"),
            }
        }
    });
}

#[cfg(not(unix))]
fn reload_on_hangup(_: Arc<threadscope_server::Service>) {}
