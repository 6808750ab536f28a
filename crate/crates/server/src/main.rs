use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use cola_server::cli::{self, RunArgs};
use cola_server::{router, App, Runtime, ServiceConfig};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "cola", version, about = "Role-based agent orchestration for desktop tasks")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one task in the foreground.
    Run(RunArgs),
    /// Serve the session API.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the configured listen address.
        #[arg(long)]
        listen: Option<String>,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("COLA_LOG").unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Cmd::Run(args) => {
            let stdin = std::io::stdin();
            let code = cli::run(&args, &mut stdin.lock(), &mut std::io::stdout(), &mut std::io::stderr());
            ExitCode::from(code as u8)
        }
        Cmd::Serve { config, listen } => match serve(config, listen) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(cli::EXIT_FAILURE as u8)
            }
        },
    }
}

fn serve(config: Option<PathBuf>, listen: Option<String>) -> Result<(), Box<dyn std::error::Error>> {
    let mut config = ServiceConfig::from_env(config.as_deref())?;
    if let Some(listen) = listen {
        config.listen = listen;
    }
    config.ensure_dirs()?;
    let addr = config.listen.clone();
    let app = Arc::new(App::new(Arc::new(Runtime::new(config)?)));
    let recovered = app.recover_all();
    if recovered > 0 {
        tracing::info!(recovered, "sessions recovered");
    }
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&addr).await?;
        println!("listening on {}", listener.local_addr()?);
        use std::io::Write;
        std::io::stdout().flush()?;
        axum::serve(listener, router(app.clone()))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        app.shutdown();
        Ok::<_, Box<dyn std::error::Error>>(())
    })
}
