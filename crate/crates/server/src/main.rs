use std::net::{Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use paramscope::registry::{REMOTE_PROVIDER_ID, TOY_PROVIDER_ID};
use paramscope::{router, AppState, Provider, ProviderRegistry};
use paramscope_core::ngram::{NGramModel, Tokenizer, DEFAULT_CORPUS, DEFAULT_ORDER};
use paramscope_core::remote::{RemoteClient, RemoteProviderConfig, API_KEY_ENV};
use paramscope_core::store::JsonlStore;
use tracing::info;
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(version, about = "Explore how top-p and frequency/presence penalties shape generated text")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP API (and web UI, if --static-dir is given).
    Serve(ServeArgs),
}

#[derive(clap::Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,

    /// Interaction log (JSON Lines); created if missing.
    #[arg(long, default_value = "paramscope.jsonl")]
    db_path: PathBuf,

    /// UTF-8 training text for the toy model. Defaults to the bundled fables.
    #[arg(long)]
    corpus: Option<PathBuf>,

    #[arg(long, default_value_t = DEFAULT_ORDER)]
    ngram_order: usize,

    #[arg(long, default_value_t = Tokenizer::Char)]
    tokenizer: Tokenizer,

    /// Base URL of an OpenAI-compatible API, e.g. https://host/v1.
    #[arg(long, requires = "remote_model")]
    remote_url: Option<String>,

    #[arg(long, requires = "remote_url")]
    remote_model: Option<String>,

    /// Remote request timeout in seconds.
    #[arg(long, default_value_t = 60)]
    remote_timeout: u64,

    /// Directory with the built web UI.
    #[arg(long)]
    static_dir: Option<PathBuf>,
}

fn build_registry(args: &ServeArgs) -> Result<ProviderRegistry> {
    let corpus = match &args.corpus {
        Some(path) => std::fs::read_to_string(path)
            .with_context(|| format!("reading corpus {}", path.display()))?,
        None => DEFAULT_CORPUS.to_owned(),
    };
    let model = NGramModel::train(&corpus, args.ngram_order, args.tokenizer)
        .context("training the toy model")?;
    info!(
        order = model.order(),
        tokenizer = %model.tokenizer(),
        vocabulary = model.vocabulary().len(),
        contexts = model.context_count(),
        "toy model ready"
    );
    let mut registry = ProviderRegistry::new(TOY_PROVIDER_ID, Provider::Local(Arc::new(model)));

    if let (Some(url), Some(model_name)) = (&args.remote_url, &args.remote_model) {
        let api_key = RemoteProviderConfig::api_key_from_env();
        if api_key.is_none() {
            info!("{API_KEY_ENV} not set; remote requests will be unauthenticated");
        }
        let config = RemoteProviderConfig::new(
            url,
            api_key,
            model_name.clone(),
            Duration::from_secs(args.remote_timeout),
        )?;
        registry = registry.with(REMOTE_PROVIDER_ID, Provider::Remote(RemoteClient::new(config)?));
        info!(url, model = model_name, "remote provider registered");
    }
    Ok(registry)
}

async fn serve(args: ServeArgs) -> Result<()> {
    let registry = build_registry(&args)?;
    let store = JsonlStore::open(&args.db_path)
        .with_context(|| format!("opening {}", args.db_path.display()))?;
    let state = AppState::new(Arc::new(store), registry);
    let app = router(state, args.static_dir);

    let addr = SocketAddr::from((Ipv4Addr::UNSPECIFIED, args.port));
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .with_context(|| format!("binding {addr}"))?;
    info!(%addr, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

#[tokio::main]
async fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .init();
    match Cli::parse().command {
        Command::Serve(args) => serve(args).await,
    }
}
