//! Run settings: command-line flags layered over an optional JSON file.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use epimix::dictionary::DEFAULT_LAMBDA;
use epimix::eval::{MethodKind, Task, DEFAULT_HORIZONS, DEFAULT_ORIGINS};
use epimix::ingest::{default_window_start, DEFAULT_WINDOW_WEEKS};
use epimix::mixture::DEFAULT_COMPONENTS;
use epimix::DEFAULT_SEED;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DATA_DIR_ENV: &str = "EPIMIX_DATA_DIR";

/// Which of the two evaluation tasks to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TaskChoice {
    T1,
    T2,
    Both,
}

impl TaskChoice {
    pub fn includes(self, task: Task) -> bool {
        matches!(
            (self, task),
            (TaskChoice::Both, _)
                | (TaskChoice::T1, Task::Modeling)
                | (TaskChoice::T2, Task::Forecasting)
        )
    }
}

/// Keys accepted in `--config` files. Every key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub data: Option<PathBuf>,
    pub methods: Option<Vec<String>>,
    pub lambda: Option<f64>,
    pub m: Option<usize>,
    pub seed: Option<u64>,
    pub countries: Option<Vec<String>>,
    pub task: Option<TaskChoice>,
    pub horizons: Option<Vec<usize>>,
    pub origins: Option<(usize, usize)>,
    pub window_start: Option<NaiveDate>,
    pub weeks: Option<usize>,
    pub dictionary: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
    }
}

/// Fully resolved settings. Serialized into every output header.
#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub command: String,
    pub data: Option<PathBuf>,
    pub methods: Vec<MethodKind>,
    pub lambda: f64,
    pub m: usize,
    pub seed: u64,
    pub countries: Option<Vec<String>>,
    pub task: TaskChoice,
    pub horizons: Vec<usize>,
    pub origins: (usize, usize),
    pub window_start: NaiveDate,
    pub weeks: usize,
    pub dictionary: Option<PathBuf>,
    #[serde(skip)]
    pub out: PathBuf,
    pub version: &'static str,
}

/// Flag values before merging; `None` means "not given".
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub methods: Option<Vec<String>>,
    pub lambda: Option<f64>,
    pub m: Option<usize>,
    pub seed: Option<u64>,
    pub countries: Option<Vec<String>>,
    pub task: Option<TaskChoice>,
    pub horizons: Option<Vec<usize>>,
    pub origins: Option<(usize, usize)>,
    pub window_start: Option<NaiveDate>,
    pub weeks: Option<usize>,
    pub dictionary: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

pub fn parse_methods(names: &[String]) -> Result<Vec<MethodKind>, CliError> {
    let mut out = Vec::new();
    for name in names.iter().map(|n| n.trim()).filter(|n| !n.is_empty()) {
        let kind: MethodKind = name
            .parse()
            .map_err(|e: epimix::eval::UnknownMethod| CliError::Usage(e.to_string()))?;
        if !out.contains(&kind) {
            out.push(kind);
        }
    }
    Ok(out)
}

/// `a:b` or `a..b`, both inclusive.
pub fn parse_origins(text: &str) -> Result<(usize, usize), String> {
    let (a, b) = text
        .split_once(':')
        .or_else(|| text.split_once(".."))
        .ok_or_else(|| format!("expected START:END, got `{text}`"))?;
    let a = a.trim().parse().map_err(|_| format!("bad origin `{a}`"))?;
    let b = b
        .trim()
        .trim_start_matches('=')
        .parse()
        .map_err(|_| format!("bad origin `{b}`"))?;
    Ok((a, b))
}

impl Settings {
    pub fn resolve(command: &str, flags: Overrides) -> Result<Self, CliError> {
        let file = match &flags.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let data = flags
            .data
            .or(file.data)
            .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from));
        let methods = match flags.methods.or(file.methods) {
            Some(names) => parse_methods(&names)?,
            None => Vec::new(),
        };
        let countries = flags.countries.or(file.countries).map(|list| {
            list.into_iter()
                .map(|c| c.trim().to_string())
                .filter(|c| !c.is_empty())
                .collect::<Vec<_>>()
        });
        if countries.as_ref().is_some_and(Vec::is_empty) {
            return Err(CliError::Usage("country filter is empty".into()));
        }
        let default_origins = (*DEFAULT_ORIGINS.start(), *DEFAULT_ORIGINS.end());
        let settings = Settings {
            command: command.to_string(),
            data,
            methods,
            lambda: flags.lambda.or(file.lambda).unwrap_or(DEFAULT_LAMBDA),
            m: flags.m.or(file.m).unwrap_or(DEFAULT_COMPONENTS),
            seed: flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            countries,
            task: flags.task.or(file.task).unwrap_or(TaskChoice::Both),
            horizons: flags
                .horizons
                .or(file.horizons)
                .unwrap_or_else(|| DEFAULT_HORIZONS.to_vec()),
            origins: flags.origins.or(file.origins).unwrap_or(default_origins),
            window_start: flags
                .window_start
                .or(file.window_start)
                .unwrap_or_else(default_window_start),
            weeks: flags.weeks.or(file.weeks).unwrap_or(DEFAULT_WINDOW_WEEKS),
            dictionary: flags.dictionary.or(file.dictionary),
            out: flags
                .out
                .or(file.out)
                .unwrap_or_else(|| PathBuf::from("epimix-out")),
            version: env!("CARGO_PKG_VERSION"),
        };
        settings.validate()?;
        Ok(settings)
    }

    fn validate(&self) -> Result<(), CliError> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(CliError::Usage(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if self.m == 0 {
            return Err(CliError::Usage("--m must be at least 1".into()));
        }
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(CliError::Usage(
                "horizons must be a non-empty list of positive weeks".into(),
            ));
        }
        if self.origins.0 > self.origins.1 {
            return Err(CliError::Usage(format!(
                "origin range {}:{} is empty",
                self.origins.0, self.origins.1
            )));
        }
        if self.weeks < 1 {
            return Err(CliError::Usage("--weeks must be at least 1".into()));
        }
        Ok(())
    }

    pub fn require_methods(&self) -> Result<(), CliError> {
        if self.methods.is_empty() {
            return Err(CliError::Usage("no method selected (use --method)".into()));
        }
        Ok(())
    }

    /// `# config: {...}` line written at the top of every CSV.
    pub fn header(&self) -> String {
        format!(
            "# config: {}",
            serde_json::to_string(self).expect("settings serialize")
        )
    }

    pub fn json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("settings serialize")
    }
}
