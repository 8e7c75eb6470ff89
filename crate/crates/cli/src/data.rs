//! Locating and loading input series.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use epimix::dictionary::Dictionary;
use epimix::eval::{Method, MethodConfig, MethodKind};
use epimix::ingest::{load_jhu_window, read_weekly_csv};
use epimix::mixture::GsaConfig;
use epimix::WeeklySeries;

use crate::config::{Settings, DATA_DIR_ENV};
use crate::error::CliError;

/// File names looked for, in order, when `--data` is a directory.
const CANDIDATES: [&str; 3] = [
    "time_series_covid19_confirmed_global.csv",
    "weekly.csv",
    "synth_weekly.csv",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Jhu,
    Weekly,
}

fn resolve_path(settings: &Settings) -> Result<PathBuf, CliError> {
    let Some(path) = settings.data.clone() else {
        return Err(CliError::Usage(format!(
            "no input data: pass --data or set {DATA_DIR_ENV}"
        )));
    };
    if path.is_dir() {
        return CANDIDATES
            .iter()
            .map(|name| path.join(name))
            .find(|p| p.is_file())
            .ok_or_else(|| {
                CliError::Data(format!(
                    "{} contains none of {}",
                    path.display(),
                    CANDIDATES.join(", ")
                ))
            });
    }
    if !path.is_file() {
        return Err(CliError::Data(format!(
            "data file {} does not exist",
            path.display()
        )));
    }
    Ok(path)
}

fn detect(path: &Path) -> Result<Format, CliError> {
    let file = File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let line = line.trim_start_matches('\u{feff}');
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if line.starts_with("Province/State") {
            return Ok(Format::Jhu);
        }
        if line.starts_with("country,week_index") {
            return Ok(Format::Weekly);
        }
        return Err(CliError::Data(format!(
            "{}: unrecognized header `{line}`",
            path.display()
        )));
    }
    Err(CliError::Data(format!("{} is empty", path.display())))
}

/// Loads the input and applies the country filter. Unknown country names are an error.
pub fn load_series(settings: &Settings) -> Result<Vec<WeeklySeries>, CliError> {
    let path = resolve_path(settings)?;
    let data_err =
        |e: epimix::ingest::IngestError| CliError::Data(format!("{}: {e}", path.display()));
    let series = match detect(&path)? {
        Format::Jhu => {
            load_jhu_window(&path, settings.window_start, settings.weeks).map_err(data_err)?
        }
        Format::Weekly => {
            let file = File::open(&path)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            read_weekly_csv(BufReader::new(file)).map_err(data_err)?
        }
    };
    log::info!("loaded {} series from {}", series.len(), path.display());
    let selected = match &settings.countries {
        None => series,
        Some(wanted) => {
            let missing: Vec<&String> = wanted
                .iter()
                .filter(|c| !series.iter().any(|s| s.country() == *c))
                .collect();
            if !missing.is_empty() {
                return Err(CliError::Data(format!(
                    "countries not in the data: {missing:?}"
                )));
            }
            series
                .into_iter()
                .filter(|s| wanted.iter().any(|c| c == s.country()))
                .collect()
        }
    };
    if selected.is_empty() {
        return Err(CliError::Data("no country series to process".into()));
    }
    Ok(selected)
}

pub fn method_config(settings: &Settings) -> MethodConfig {
    MethodConfig {
        lambda: settings.lambda,
        components: settings.m,
        gsa: GsaConfig {
            seed: settings.seed,
            ..GsaConfig::default()
        },
    }
}

/// Builds a method, using the `--dictionary` file for dictionary methods when given.
pub fn build_method(kind: MethodKind, settings: &Settings) -> Result<Method, CliError> {
    let config = method_config(settings);
    match (&settings.dictionary, kind) {
        (Some(path), MethodKind::GaussDict | MethodKind::SirDict) => {
            let file =
                File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            let dict = Dictionary::read_csv(BufReader::new(file))
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            Ok(Method::with_dictionary(kind, config, Arc::new(dict)))
        }
        _ => Method::new(kind, config).map_err(|e| CliError::Data(format!("building {kind}: {e}"))),
    }
}

/// File-name-safe form of a country name.
pub fn slug(country: &str) -> String {
    let mut out = String::new();
    let mut gap = false;
    for ch in country.chars() {
        if ch.is_ascii_alphanumeric() {
            if gap && !out.is_empty() {
                out.push('_');
            }
            out.push(ch.to_ascii_lowercase());
            gap = false;
        } else {
            gap = true;
        }
    }
    if out.is_empty() {
        out.push_str("country");
    }
    out
}
