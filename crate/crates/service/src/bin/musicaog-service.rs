use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use clap::Parser;

use musicaog_service::{load_models, router, AppState};

/// Serve amendment sessions over HTTP.
#[derive(Parser)]
#[command(version)]
struct Args {
    /// Directory of model files offered to sessions.
    #[arg(long)]
    models: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Directory for session snapshots; sessions found there are restored.
    #[arg(long)]
    snapshots: Option<PathBuf>,
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args = Args::parse();
    let models = load_models(&args.models)?;
    let state = Arc::new(AppState::new(models, args.snapshots)?);
    let listener = tokio::net::TcpListener::bind(args.addr).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}
