//! Plot-ready tables built from an `evaluate` output directory.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use epimix::dictionary::SUPPORT_THRESHOLD;
use epimix::eval::summarize;
use serde_json::json;

use crate::commands::{write_summary, DETAIL_COLUMNS};
use crate::data::slug;
use crate::error::CliError;

struct DetailRow {
    method: String,
    task: String,
    horizon: usize,
    country: String,
    mape: Option<f64>,
}

fn malformed(path: &Path, what: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {what}", path.display()))
}

fn reader(path: &Path) -> Result<csv::Reader<File>, CliError> {
    let file = File::open(path).map_err(|e| malformed(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(file))
}

fn first_line(path: &Path) -> Option<String> {
    let file = File::open(path).ok()?;
    let line = BufReader::new(file).lines().next()?.ok()?;
    line.strip_prefix("# config: ").map(str::to_string)
}

fn expect_header(r: &mut csv::Reader<File>, path: &Path, columns: &[&str]) -> Result<(), CliError> {
    let header = r.headers().map_err(|e| malformed(path, e))?;
    if header.iter().ne(columns.iter().copied()) {
        return Err(malformed(
            path,
            format!("expected columns {columns:?}, found {header:?}"),
        ));
    }
    Ok(())
}

fn parse_opt(path: &Path, line: usize, text: &str) -> Result<Option<f64>, CliError> {
    if text.is_empty() {
        return Ok(None);
    }
    text.parse()
        .map(Some)
        .map_err(|_| malformed(path, format!("row {line}: `{text}` is not a number")))
}

fn read_detail(path: &Path) -> Result<Vec<DetailRow>, CliError> {
    let mut r = reader(path)?;
    expect_header(&mut r, path, &DETAIL_COLUMNS)?;
    let mut rows = Vec::new();
    for (n, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| malformed(path, e))?;
        let horizon = rec[2]
            .parse()
            .map_err(|_| malformed(path, format!("row {}: bad horizon `{}`", n + 1, &rec[2])))?;
        rows.push(DetailRow {
            method: rec[0].to_string(),
            task: rec[1].to_string(),
            horizon,
            country: rec[3].to_string(),
            mape: parse_opt(path, n + 1, &rec[4])?,
        });
    }
    Ok(rows)
}

fn create(path: &Path, header: &str) -> Result<csv::Writer<BufWriter<File>>, CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut out = BufWriter::new(
        File::create(path).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?,
    );
    writeln!(out, "{header}")?;
    Ok(csv::Writer::from_writer(out))
}

/// Per-country curve tables: `week,observed,fitted_<method>...`.
fn write_curves(
    input: &Path,
    out: &Path,
    header: &str,
    keep: &dyn Fn(&str) -> bool,
) -> Result<usize, CliError> {
    let path = input.join("curves_t1.csv");
    if !path.is_file() {
        return Ok(0);
    }
    let mut r = reader(&path)?;
    expect_header(
        &mut r,
        &path,
        &[
            "method",
            "country",
            "week",
            "week_start",
            "observed",
            "fitted",
        ],
    )?;
    // country -> week -> (observed, method -> fitted)
    type Weeks = BTreeMap<usize, (String, BTreeMap<String, String>)>;
    let mut by_country: BTreeMap<String, Weeks> = BTreeMap::new();
    let mut methods: Vec<String> = Vec::new();
    for (n, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| malformed(&path, e))?;
        if !keep(&rec[1]) {
            continue;
        }
        let week: usize = rec[2]
            .parse()
            .map_err(|_| malformed(&path, format!("row {}: bad week `{}`", n + 1, &rec[2])))?;
        if !methods.iter().any(|m| m == &rec[0]) {
            methods.push(rec[0].to_string());
        }
        let entry = by_country
            .entry(rec[1].to_string())
            .or_default()
            .entry(week)
            .or_insert_with(|| (rec[4].to_string(), BTreeMap::new()));
        entry.1.insert(rec[0].to_string(), rec[5].to_string());
    }
    let mut columns = vec!["week".to_string(), "observed".to_string()];
    columns.extend(methods.iter().map(|m| format!("fitted_{m}")));
    for (country, weeks) in &by_country {
        let mut w = create(
            &out.join("curves").join(format!("{}.csv", slug(country))),
            header,
        )?;
        w.write_record(&columns)?;
        for (week, (observed, fitted)) in weeks {
            let mut rec = vec![week.to_string(), observed.clone()];
            rec.extend(
                methods
                    .iter()
                    .map(|m| fitted.get(m).cloned().unwrap_or_default()),
            );
            w.write_record(&rec)?;
        }
        w.flush()?;
    }
    Ok(by_country.len())
}

/// Stem-plot source for the Gaussian dictionary: `(μ, σ, θ)` of every selected atom.
fn write_stems(
    input: &Path,
    out: &Path,
    header: &str,
    countries: &[String],
) -> Result<usize, CliError> {
    let dir = input.join("weights").join("gauss-dict");
    if !dir.is_dir() {
        return Ok(0);
    }
    let mut w = create(&out.join("gauss_dict_stems.csv"), header)?;
    w.write_record(["country", "atom_index", "mu", "sigma", "theta"])?;
    let mut rows = 0;
    for country in countries {
        let path = dir.join(format!("{}.csv", slug(country)));
        if !path.is_file() {
            continue;
        }
        let mut r = reader(&path)?;
        expect_header(&mut r, &path, &["atom_index", "family", "params", "theta"])?;
        let mut atoms = Vec::new();
        for (n, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| malformed(&path, e))?;
            let theta = parse_opt(&path, n + 1, &rec[3])?.unwrap_or(0.0);
            let (mu, sigma) = rec[2].split_once(';').ok_or_else(|| {
                malformed(
                    &path,
                    format!("row {}: params `{}` are not mu;sigma", n + 1, &rec[2]),
                )
            })?;
            atoms.push((rec[0].to_string(), mu.to_string(), sigma.to_string(), theta));
        }
        let peak = atoms.iter().map(|a| a.3).fold(0.0, f64::max);
        for (index, mu, sigma, theta) in atoms {
            if peak > 0.0 && theta > peak * SUPPORT_THRESHOLD {
                w.write_record([country.clone(), index, mu, sigma, theta.to_string()])?;
                rows += 1;
            }
        }
    }
    w.flush()?;
    Ok(rows)
}

pub fn report(
    input: &Path,
    out: &Path,
    countries: Option<Vec<String>>,
) -> Result<Vec<PathBuf>, CliError> {
    let countries = countries.map(|c| {
        c.into_iter()
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect::<Vec<_>>()
    });
    if countries.as_ref().is_some_and(Vec::is_empty) {
        return Err(CliError::Usage("country filter is empty".into()));
    }
    let detail_path = input.join("detail.csv");
    if !detail_path.is_file() {
        return Err(CliError::Data(format!(
            "{} not found",
            detail_path.display()
        )));
    }
    let mut detail = read_detail(&detail_path)?;
    if let Some(wanted) = &countries {
        let missing: Vec<&String> = wanted
            .iter()
            .filter(|c| !detail.iter().any(|d| &d.country == *c))
            .collect();
        if !missing.is_empty() {
            return Err(CliError::Data(format!(
                "countries not in {}: {missing:?}",
                detail_path.display()
            )));
        }
        detail.retain(|d| wanted.contains(&d.country));
    }
    if detail.is_empty() {
        return Err(CliError::Data(format!(
            "{} has no rows",
            detail_path.display()
        )));
    }
    let source = first_line(&detail_path)
        .and_then(|s| serde_json::from_str::<serde_json::Value>(&s).ok())
        .unwrap_or(serde_json::Value::Null);
    let header = format!(
        "# config: {}",
        json!({
            "command": "report",
            "input": input,
            "countries": countries,
            "source": source,
            "version": env!("CARGO_PKG_VERSION"),
        })
    );
    let mut written = Vec::new();

    let boxplot = out.join("boxplot.csv");
    let mut w = create(&boxplot, &header)?;
    w.write_record(["method", "task", "horizon", "country", "mape"])?;
    type Key = (String, String, usize);
    let mut groups: Vec<(Key, Vec<f64>)> = Vec::new();
    for d in &detail {
        let key = (d.method.clone(), d.task.clone(), d.horizon);
        if !groups.iter().any(|(k, _)| k == &key) {
            groups.push((key.clone(), Vec::new()));
        }
        if let Some(m) = d.mape {
            w.write_record([
                d.method.clone(),
                d.task.clone(),
                d.horizon.to_string(),
                d.country.clone(),
                m.to_string(),
            ])?;
            if let Some((_, values)) = groups.iter_mut().find(|(k, _)| k == &key) {
                values.push(m);
            }
        }
    }
    w.flush()?;
    written.push(boxplot);

    let rows: Vec<_> = groups
        .into_iter()
        .map(|((method, task, horizon), values)| (method, task, horizon, summarize(&values)))
        .collect();
    let summary = out.join("summary.csv");
    write_summary(&summary, &header, &rows)?;
    written.push(summary);

    let mut names: Vec<String> = detail.iter().map(|d| d.country.clone()).collect();
    names.sort();
    names.dedup();
    let keep = |c: &str| names.iter().any(|n| n == c);
    if write_curves(input, out, &header, &keep)? > 0 {
        written.push(out.join("curves"));
    }
    if input.join("weights").join("gauss-dict").is_dir() {
        write_stems(input, out, &header, &names)?;
        written.push(out.join("gauss_dict_stems.csv"));
    }
    for p in &written {
        println!("{}", p.display());
    }
    Ok(written)
}
