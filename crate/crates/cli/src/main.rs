use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use relict_cli::commands::{cmd_rank, cmd_report, cmd_sweep};
use relict_cli::config::{RunConfig, WORKERS_ENV};
use relict_cli::service::{log_dir_exists, serve, Service, ServiceConfig};
use relict_cli::{CliError, CliResult};
use relict_core::engine::MeasureKind;

#[derive(Parser)]
#[command(name = "relict", version, about = "Find replicas of training images among synthetic 3D images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank training images for every synthetic image.
    Rank {
        #[arg(long)]
        config: PathBuf,
    },
    /// Calibrate thresholds from two-rater ratings.
    Sweep {
        #[arg(long)]
        ratings: PathBuf,
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the rating API.
    Serve {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        training: PathBuf,
        #[arg(long)]
        synthetic: PathBuf,
        #[arg(long)]
        ratings_log: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// The two rater ids, comma separated.
        #[arg(long, value_delimiter = ',')]
        raters: Option<Vec<String>>,
        /// Measure whose closest pairs make up the rating queue.
        #[arg(long, default_value = "rmse")]
        queue_measure: MeasureKind,
    },
    /// Write summary, curves and plots from rank/sweep outputs.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Rank { config } => {
            let cfg = RunConfig::load(&config)?;
            let workers = std::env::var(WORKERS_ENV).ok();
            let summary = cmd_rank(&cfg, workers.as_deref())?;
            for t in &summary.timings {
                println!("{}: {:.2} min", t.measure, t.minutes());
            }
            println!("records written to {}", summary.records.display());
        }
        Command::Sweep { ratings, records, out } => {
            let summary = cmd_sweep(&ratings, &records, &out)?;
            for s in &summary.sweeps {
                println!(
                    "{}: T = {:.2}, balanced accuracy {:.3}",
                    s.measure, s.optimal_threshold, s.optimal_balanced_accuracy
                );
            }
        }
        Command::Serve {
            records,
            training,
            synthetic,
            ratings_log,
            port,
            host,
            raters,
            queue_measure,
        } => {
            if !log_dir_exists(&ratings_log) {
                return Err(CliError::config(format!(
                    "directory of {} does not exist",
                    ratings_log.display()
                )));
            }
            let svc = Arc::new(Service::open(&ServiceConfig {
                records,
                training,
                synthetic,
                ratings_log,
                raters,
                queue_measure,
            })?);
            let rt = tokio::runtime::Runtime::new()
                .map_err(|e| CliError::config(format!("cannot start runtime: {e}")))?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind((host.as_str(), port))
                    .await
                    .map_err(|e| CliError::config(format!("cannot bind {host}:{port}: {e}")))?;
                log::info!("listening on {}", listener.local_addr().map_err(|e| CliError::config(e.to_string()))?);
                serve(listener, svc, async {
                    let _ = tokio::signal::ctrl_c().await;
                })
                .await
                .map_err(|e| CliError::config(format!("server failed: {e}")))
            })?;
        }
        Command::Report { input, out } => {
            let summary = cmd_report(&input, &out)?;
            println!("report written to {}", summary.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code as u8)
        }
    }
}
