use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mofml::commands::{self, BundleSource, Outcome, RunOptions};
use mofml::service::{self, AppState};

#[derive(Parser)]
#[command(
    name = "mofml",
    version,
    about = "Train, compare and serve regression models for MOF properties"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Data CSV; overrides the config's data_path.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory; overrides the config's output_dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Split seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Standardize on all rows before splitting.
    #[arg(long)]
    paper_order: bool,
}

impl RunArgs {
    fn options(&self) -> RunOptions {
        RunOptions {
            config: self.config.clone(),
            data: self.data.clone(),
            out: self.out.clone(),
            seed: self.seed,
            paper_order: self.paper_order,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Clean the data and write correlations, histograms and the PCA scree.
    Analyze(RunArgs),
    /// Train and compare models, writing reports and bundles.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Model kind to train; repeatable. Defaults to every configured model.
        #[arg(long = "model")]
        models: Vec<String>,
        /// Record the current UTC time in bundles.
        #[arg(long)]
        stamp_time: bool,
    },
    /// Predict one sample with a saved bundle.
    Predict {
        /// Bundle file.
        #[arg(long, conflicts_with = "model")]
        bundle: Option<PathBuf>,
        /// Model name to load from --bundle-dir.
        #[arg(long)]
        model: Option<String>,
        #[arg(long, default_value = "mofml-out")]
        bundle_dir: PathBuf,
        /// Inline JSON object or path to a JSON file.
        #[arg(long)]
        features: String,
        /// Print the full response as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Serve predictions over HTTP.
    Serve {
        #[arg(long, default_value = "mofml-out")]
        bundle_dir: PathBuf,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Directory of web UI assets served outside /api.
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Analyze(run) => commands::analyze(&run.options()),
        Command::Train {
            run,
            models,
            stamp_time,
        } => {
            let created_at = stamp_time
                .then(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
            commands::train(&run.options(), &models, created_at)
        }
        Command::Predict {
            bundle,
            model,
            bundle_dir,
            features,
            json,
        } => {
            let source = match (bundle, model) {
                (Some(path), _) => BundleSource::File(path),
                (None, Some(model)) => BundleSource::Named {
                    dir: bundle_dir,
                    model,
                },
                (None, None) => {
                    eprintln!("error: either --bundle or --model is required");
                    return Outcome::InputError.into();
                }
            };
            commands::predict(&source, &features, json)
        }
        Command::Serve {
            bundle_dir,
            host,
            port,
            static_dir,
        } => serve(bundle_dir, SocketAddr::new(host, port), static_dir),
    };
    outcome.into()
}

fn serve(bundle_dir: PathBuf, addr: SocketAddr, static_dir: Option<PathBuf>) -> Outcome {
    let bundles = match service::load_bundle_dir(&bundle_dir) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: {e}");
            return Outcome::InputError;
        }
    };
    let state = AppState::new(bundles);
    log::info!(
        "loaded {} models from {}",
        state.len(),
        bundle_dir.display()
    );
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return Outcome::ModelFailure;
        }
    };
    match runtime.block_on(service::serve(state, addr, static_dir)) {
        Ok(()) => Outcome::Success,
        Err(e) => {
            eprintln!("error: {e}");
            Outcome::InputError
        }
    }
}
