//! `epimix`: fit latent sub-population models to weekly case counts and score them.

mod commands;
mod config;
mod data;
mod error;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use epimix::eval::DICTIONARY_WEEKS;
use epimix::DEFAULT_SEED;

use commands::Family;
use config::{parse_origins, Overrides, Settings, TaskChoice};
use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "epimix",
    version,
    about = "Latent sub-population models for epidemic time series"
)]
struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG takes precedence.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the default Gaussian and/or SIR dictionaries as CSV.
    BuildDict {
        #[arg(long, value_enum, default_value = "all")]
        family: Family,
        /// Last week covered by the atoms (columns are weeks 0..=WEEKS).
        #[arg(long, default_value_t = DICTIONARY_WEEKS)]
        weeks: usize,
        #[arg(long, default_value = "epimix-out")]
        out: PathBuf,
    },
    /// Fit every selected method on the full series of each country.
    Fit(RunArgs),
    /// Walk-forward forecasts: refit at every origin and predict 1..h weeks ahead.
    Forecast(RunArgs),
    /// Run the modeling and/or forecasting task and write report tables.
    Evaluate(RunArgs),
    /// Write the synthetic three-sub-population dataset.
    Synth {
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Multiplicative Gaussian noise level on the observed sum (0 = noiseless).
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value = "epimix-out")]
        out: PathBuf,
    },
    /// Turn an `evaluate` output directory into plot-ready tables.
    Report {
        /// Directory written by `evaluate`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_delimiter = ',')]
        countries: Option<Vec<String>>,
        #[arg(long, default_value = "epimix-report")]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// JSON file with default settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// JHU global confirmed-cases CSV, a weekly CSV, or a directory holding one.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Methods, comma separated: sir, gauss-dict, sir-dict, mix-gauss, mix-sir, slow.
    #[arg(long = "method", alias = "methods", value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Mixture components.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Country names, comma separated.
    #[arg(long, value_delimiter = ',')]
    countries: Option<Vec<String>>,
    #[arg(long, value_enum)]
    task: Option<TaskChoice>,
    #[arg(long, value_delimiter = ',')]
    horizons: Option<Vec<usize>>,
    /// Forecast origins, inclusive, as START:END.
    #[arg(long, value_parser = parse_origins)]
    origins: Option<(usize, usize)>,
    /// First week of the analysis window (JHU input only).
    #[arg(long)]
    window_start: Option<NaiveDate>,
    /// Weeks after the window start (JHU input only).
    #[arg(long)]
    weeks: Option<usize>,
    /// Dictionary CSV from `build-dict`, used instead of the built-in grid.
    #[arg(long)]
    dictionary: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl From<RunArgs> for Overrides {
    fn from(a: RunArgs) -> Self {
        Overrides {
            config: a.config,
            data: a.data,
            methods: a.methods,
            lambda: a.lambda,
            m: a.m,
            seed: a.seed,
            countries: a.countries,
            task: a.task,
            horizons: a.horizons,
            origins: a.origins,
            window_start: a.window_start,
            weeks: a.weeks,
            dictionary: a.dictionary,
            out: a.out,
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::BuildDict { family, weeks, out } => {
            commands::build_dict(family, weeks, &out)?;
            Ok(())
        }
        Command::Synth { seed, noise, out } => commands::synth(seed, noise, &out),
        Command::Report {
            input,
            countries,
            out,
        } => {
            report::report(&input, &out, countries)?;
            Ok(())
        }
        Command::Fit(args) => commands::fit(&Settings::resolve("fit", args.into())?),
        Command::Forecast(args) => commands::forecast(&Settings::resolve("forecast", args.into())?),
        Command::Evaluate(args) => commands::evaluate(&Settings::resolve("evaluate", args.into())?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if !e.use_stderr() {
                // --help and --version
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let err = CliError::Usage(e.to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
