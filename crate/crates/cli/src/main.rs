use std::io::{BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use chronoscope::{evaluate, explain, rate, validate, CliError, Outcome, Overrides, RunConfig, EXIT_ERROR};
use chronoscope_core::adapter::{serve_http, serve_stdio, MockKind, MockResponder};
use chronoscope_core::rde::HypothesisId;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "chronoscope",
    version,
    about = "Evaluate, explain and rate time-series forecasters"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Endpoint for remote models without one: `cmd:<program> [args]`, `http://host:port` or `mock:<kind>`.
    #[arg(long, global = true)]
    forecaster: Option<String>,
    /// Refit ARIMA coefficients at every rolling origin.
    #[arg(long, global = true)]
    arima_refit: bool,
    /// Overrides the output directory.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum HypothesisArg {
    H1,
    H2,
}

#[derive(Subcommand)]
enum Command {
    /// Fit and score every model on every series.
    Evaluate,
    /// LIME attributions for the configured model.
    ExplainLime,
    /// TreeSHAP attributions for tree models and surrogates.
    ExplainShap,
    /// Fit tree surrogates to black-box forecasters.
    Surrogate,
    /// Causal ratings from the forecasts written by `evaluate`.
    Rate {
        /// Run only this hypothesis.
        #[arg(long, value_enum)]
        hypothesis: Option<HypothesisArg>,
    },
    /// Run every stage in order.
    Report,
    /// Check a config and the conformance of its remote endpoints, or of `--forecaster` alone.
    Validate,
    /// Serve a mock forecaster over stdio or HTTP.
    #[command(hide = true)]
    MockServer {
        #[arg(long, default_value = "echo")]
        kind: MockKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Listen on this address instead of stdio, e.g. `127.0.0.1:0`.
        #[arg(long)]
        http: Option<String>,
    },
}

fn load(global: &Global) -> Result<RunConfig, CliError> {
    let path = global
        .config
        .as_ref()
        .ok_or_else(|| CliError::MissingInput("--config is required for this command".into()))?;
    let overrides = Overrides {
        seed: global.seed,
        forecaster: global.forecaster.clone(),
        arima_refit: global.arima_refit,
        output: global.output.clone(),
    };
    RunConfig::load(path, &overrides)
}

fn mock_server(kind: MockKind, seed: u64, http: Option<&str>) -> Result<Outcome, CliError> {
    let responder = MockResponder::new(kind, seed);
    match http {
        Some(addr) => {
            let server = tiny_http::Server::http(addr)
                .map_err(|e| CliError::MissingInput(format!("cannot listen on {addr}: {e}")))?;
            let bound = server
                .server_addr()
                .to_ip()
                .map(|a| a.to_string())
                .unwrap_or_else(|| addr.to_string());
            println!("listening on http://{bound}");
            std::io::stdout().flush().ok();
            serve_http(&responder, &server, None).map_err(|e| CliError::io(std::path::Path::new(addr), e))?;
        }
        None => {
            let stdin = std::io::stdin();
            serve_stdio(&responder, BufReader::new(stdin.lock()), std::io::stdout().lock())
                .map_err(|e| CliError::io(std::path::Path::new("<stdio>"), e))?;
        }
    }
    Ok(Outcome::default())
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    let g = &cli.global;
    match cli.command {
        Command::Evaluate => evaluate::evaluate(&load(g)?),
        Command::ExplainLime => explain::explain_lime(&load(g)?),
        Command::ExplainShap => explain::explain_shap(&load(g)?),
        Command::Surrogate => explain::surrogate(&load(g)?),
        Command::Rate { hypothesis } => {
            let only = hypothesis.map(|h| match h {
                HypothesisArg::H1 => [HypothesisId::H1],
                HypothesisArg::H2 => [HypothesisId::H2],
            });
            rate::rate(&load(g)?, only.as_ref().map(|a| a.as_slice()))
        }
        Command::Report => chronoscope::report(&load(g)?),
        Command::Validate => match (&g.config, &g.forecaster) {
            (None, Some(f)) => validate::validate_endpoint(f, g.seed.unwrap_or(0)),
            _ => validate::validate_config(&load(g)?),
        },
        Command::MockServer { kind, seed, http } => mock_server(kind, seed, http.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.global.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global() {
            log::warn!("thread pool already initialised: {e}");
        }
    }
    match run(cli) {
        Ok(outcome) => {
            for f in &outcome.failures {
                let series = f.series_id.as_deref().map(|s| format!(" / {s}")).unwrap_or_default();
                eprintln!("failed [{}] {} {}{series}: {}", f.stage, f.dataset, f.model, f.error);
            }
            for p in &outcome.written {
                log::info!("wrote {}", p.display());
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
