//! Sub-command implementations. All files are written from the calling thread
//! in a fixed order, so repeated runs produce identical bytes.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use epimix::dictionary::{default_gaussian_dictionary, default_sir_dictionary};
use epimix::eval::{forecasting_over, modeling_over, EvalReport, FittedModel, MethodKind, Task};
use epimix::ingest::write_weekly_csv;
use epimix::synth::{default_components, generate, SYNTH_WEEKS};
use epimix::WeeklySeries;
use serde_json::json;

use crate::config::Settings;
use crate::data::{build_method, load_series, slug};
use crate::error::CliError;

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))?;
    }
    let file =
        File::create(path).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(file))
}

/// CSV writer whose first line is `header`.
fn csv_with_header(
    path: &Path,
    header: &str,
    columns: &[&str],
) -> Result<csv::Writer<BufWriter<File>>, CliError> {
    let mut out = create(path)?;
    writeln!(out, "{header}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(columns)?;
    Ok(w)
}

fn num(v: f64) -> String {
    v.to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Failure rows shared by the fitting commands.
#[derive(Default)]
struct Failures {
    rows: Vec<[String; 5]>,
    non_converged: Vec<String>,
}

impl Failures {
    fn push(
        &mut self,
        method: MethodKind,
        task: Task,
        country: &str,
        origin: Option<usize>,
        message: &str,
    ) {
        self.rows.push([
            method.to_string(),
            task.label().to_string(),
            country.to_string(),
            origin.map(|o| o.to_string()).unwrap_or_default(),
            message.to_string(),
        ]);
    }

    fn write(&self, settings: &Settings) -> Result<(), CliError> {
        let mut w = csv_with_header(
            &settings.out.join("failures.csv"),
            &settings.header(),
            &["method", "task", "country", "origin", "message"],
        )?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    fn check(&self) -> Result<(), CliError> {
        if self.non_converged.is_empty() {
            Ok(())
        } else {
            Err(CliError::NonConvergence(format!(
                "every fit hit the solver's iteration cap for: {}",
                self.non_converged.join(", ")
            )))
        }
    }
}

fn write_model(
    settings: &Settings,
    kind: MethodKind,
    country: &str,
    model: &FittedModel,
    mape: Option<f64>,
) -> Result<(), CliError> {
    let mut record = model.record(kind, settings.seed);
    record.mape = mape;
    let doc = json!({ "config": settings.json(), "country": country, "model": record });
    let path = settings
        .out
        .join("models")
        .join(kind.name())
        .join(format!("{}.json", slug(country)));
    let mut out = create(&path)?;
    serde_json::to_writer_pretty(&mut out, &doc).map_err(|e| CliError::Output(e.to_string()))?;
    writeln!(out)?;
    out.flush()?;
    if let FittedModel::Dictionary {
        dictionary,
        weights,
        ..
    } = model
    {
        let path = settings
            .out
            .join("weights")
            .join(kind.name())
            .join(format!("{}.csv", slug(country)));
        let mut out = create(&path)?;
        writeln!(out, "{}", settings.header())?;
        weights
            .write_csv(dictionary, &mut out)
            .map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
        out.flush()?;
    }
    Ok(())
}

/// Full-series fits: model files, weights, in-sample curves. Returns one report per method.
fn run_modeling(
    settings: &Settings,
    series: &[WeeklySeries],
    failures: &mut Failures,
) -> Result<Vec<EvalReport>, CliError> {
    let mut curves = csv_with_header(
        &settings.out.join("curves_t1.csv"),
        &settings.header(),
        &[
            "method",
            "country",
            "week",
            "week_start",
            "observed",
            "fitted",
        ],
    )?;
    let mut reports = Vec::new();
    for &kind in &settings.methods {
        log::info!("{kind}: fitting {} series", series.len());
        let method = build_method(kind, settings)?;
        let (report, rows) = modeling_over(series, &method);
        for (row, s) in rows.iter().zip(series) {
            match (&row.model, &row.result) {
                (Ok(model), Some(result)) => {
                    write_model(settings, kind, s.country(), model, result.score.mape)?;
                    for (week, &observed) in s.values().iter().enumerate() {
                        let fitted = week.checked_sub(1).map(|i| result.predictions[i]);
                        curves.write_record([
                            kind.to_string(),
                            s.country().to_string(),
                            week.to_string(),
                            s.week_start(week).to_string(),
                            num(observed),
                            opt(fitted),
                        ])?;
                    }
                }
                (Err(message), _) => {
                    failures.push(kind, Task::Modeling, s.country(), None, message)
                }
                (Ok(_), None) => failures.push(
                    kind,
                    Task::Modeling,
                    s.country(),
                    None,
                    "no modeling result",
                ),
            }
        }
        if rows.iter().all(|r| r.non_converged) {
            failures.non_converged.push(format!("{kind} (t1)"));
        }
        reports.push(report);
    }
    curves.flush()?;
    Ok(reports)
}

fn run_forecasting(
    settings: &Settings,
    series: &[WeeklySeries],
    failures: &mut Failures,
) -> Result<Vec<EvalReport>, CliError> {
    let mut out = csv_with_header(
        &settings.out.join("forecasts_t2.csv"),
        &settings.header(),
        &[
            "method", "country", "origin", "horizon", "week", "actual", "forecast",
        ],
    )?;
    let origins = settings.origins.0..=settings.origins.1;
    let mut reports = Vec::new();
    for &kind in &settings.methods {
        log::info!("{kind}: walk-forward over {} series", series.len());
        let method = build_method(kind, settings)?;
        let (method_reports, outcomes) =
            forecasting_over(series, &method, &settings.horizons, origins.clone());
        for o in &outcomes {
            for r in &o.forecasts {
                out.write_record([
                    kind.to_string(),
                    o.country.clone(),
                    r.origin.to_string(),
                    r.horizon.to_string(),
                    (r.origin + r.horizon).to_string(),
                    num(r.actual),
                    opt(r.forecast),
                ])?;
            }
            for (origin, message) in &o.failures {
                failures.push(kind, Task::Forecasting, &o.country, Some(*origin), message);
            }
        }
        if outcomes
            .iter()
            .all(|o| o.origins > 0 && o.non_converged == o.origins)
        {
            failures.non_converged.push(format!("{kind} (t2)"));
        }
        reports.extend(method_reports);
    }
    out.flush()?;
    Ok(reports)
}

pub const SUMMARY_COLUMNS: [&str; 11] = [
    "method",
    "task",
    "horizon",
    "mean",
    "std",
    "min",
    "q25",
    "median",
    "q75",
    "max",
    "countries",
];
pub const DETAIL_COLUMNS: [&str; 7] = [
    "method",
    "task",
    "horizon",
    "country",
    "mape",
    "evaluated_pairs",
    "excluded_pairs",
];

pub fn write_summary(
    path: &Path,
    header: &str,
    rows: &[(String, String, usize, Option<epimix::eval::Summary>)],
) -> Result<(), CliError> {
    let mut w = csv_with_header(path, header, &SUMMARY_COLUMNS)?;
    for (method, task, horizon, summary) in rows {
        let mut rec = vec![method.clone(), task.clone(), horizon.to_string()];
        match summary {
            Some(s) => {
                rec.extend([s.mean, s.std, s.min, s.q25, s.median, s.q75, s.max].map(num));
                rec.push(s.count.to_string());
            }
            None => {
                rec.extend(std::iter::repeat_n(String::new(), 7));
                rec.push("0".into());
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn write_reports(settings: &Settings, reports: &[EvalReport]) -> Result<(), CliError> {
    let rows: Vec<_> = reports
        .iter()
        .map(|r| {
            (
                r.method.to_string(),
                r.task.label().to_string(),
                r.horizon,
                r.summary,
            )
        })
        .collect();
    write_summary(&settings.out.join("summary.csv"), &settings.header(), &rows)?;
    let mut w = csv_with_header(
        &settings.out.join("detail.csv"),
        &settings.header(),
        &DETAIL_COLUMNS,
    )?;
    for r in reports {
        for (country, score) in &r.per_country {
            w.write_record([
                r.method.to_string(),
                r.task.label().to_string(),
                r.horizon.to_string(),
                country.clone(),
                opt(score.mape),
                score.evaluated_pairs.to_string(),
                score.excluded_pairs.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn print_summary(reports: &[EvalReport]) {
    for r in reports {
        let median = r
            .summary
            .map(|s| format!("{:.3}", s.median))
            .unwrap_or_else(|| "-".into());
        let n = r.summary.map_or(0, |s| s.count);
        println!(
            "{:<10} {} h={} median MAPE {median}% over {n} countries",
            r.method,
            r.task.label(),
            r.horizon
        );
    }
}

pub fn fit(settings: &Settings) -> Result<(), CliError> {
    settings.require_methods()?;
    let series = load_series(settings)?;
    let mut failures = Failures::default();
    let reports = run_modeling(settings, &series, &mut failures)?;
    write_reports(settings, &reports)?;
    failures.write(settings)?;
    print_summary(&reports);
    failures.check()
}

pub fn forecast(settings: &Settings) -> Result<(), CliError> {
    settings.require_methods()?;
    let series = load_series(settings)?;
    let mut failures = Failures::default();
    let reports = run_forecasting(settings, &series, &mut failures)?;
    write_reports(settings, &reports)?;
    failures.write(settings)?;
    print_summary(&reports);
    failures.check()
}

pub fn evaluate(settings: &Settings) -> Result<(), CliError> {
    settings.require_methods()?;
    let series = load_series(settings)?;
    let mut failures = Failures::default();
    let mut reports = Vec::new();
    if settings.task.includes(Task::Modeling) {
        reports.extend(run_modeling(settings, &series, &mut failures)?);
    }
    if settings.task.includes(Task::Forecasting) {
        reports.extend(run_forecasting(settings, &series, &mut failures)?);
    }
    write_reports(settings, &reports)?;
    failures.write(settings)?;
    print_summary(&reports);
    failures.check()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gauss,
    Sir,
    All,
}

pub fn build_dict(family: Family, weeks: usize, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let header = format!(
        "# config: {}",
        json!({ "command": "build-dict", "family": family, "weeks": weeks, "version": env!("CARGO_PKG_VERSION") })
    );
    let mut written = Vec::new();
    if matches!(family, Family::Gauss | Family::All) {
        let path = out.join("gauss_dict.csv");
        let mut w = create(&path)?;
        writeln!(w, "{header}")?;
        default_gaussian_dictionary(weeks)
            .write_csv(&mut w)
            .map_err(|e| CliError::Output(e.to_string()))?;
        w.flush()?;
        written.push(path);
    }
    if matches!(family, Family::Sir | Family::All) {
        let dict = default_sir_dictionary(weeks).map_err(|e| CliError::Usage(e.to_string()))?;
        let path = out.join("sir_dict.csv");
        let mut w = create(&path)?;
        writeln!(w, "{header}")?;
        dict.write_csv(&mut w)
            .map_err(|e| CliError::Output(e.to_string()))?;
        w.flush()?;
        written.push(path);
    }
    for p in &written {
        println!("{}", p.display());
    }
    Ok(written)
}

pub fn synth(seed: u64, noise: f64, out: &Path) -> Result<(), CliError> {
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(CliError::Usage(format!(
            "noise must be finite and >= 0, got {noise}"
        )));
    }
    let params = default_components();
    let data =
        generate(&params, SYNTH_WEEKS, noise, seed).map_err(|e| CliError::Data(e.to_string()))?;
    let header = format!(
        "# config: {}",
        json!({
            "command": "synth",
            "seed": seed,
            "noise": noise,
            "weeks": SYNTH_WEEKS,
            "components": params,
            "version": env!("CARGO_PKG_VERSION"),
        })
    );
    let mut w = create(&out.join("synth_weekly.csv"))?;
    writeln!(w, "{header}")?;
    write_weekly_csv(std::slice::from_ref(&data.observed), &mut w)
        .map_err(|e| CliError::Output(e.to_string()))?;
    w.flush()?;

    let mut columns = vec!["week".to_string(), "week_start".to_string()];
    columns.extend((1..=data.components.len()).map(|i| format!("component_{i}")));
    columns.push("observed".into());
    let refs: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut c = csv_with_header(&out.join("synth_components.csv"), &header, &refs)?;
    for (week, &observed) in data.observed.values().iter().enumerate() {
        let mut rec = vec![week.to_string(), data.observed.week_start(week).to_string()];
        rec.extend(data.components.iter().map(|comp| num(comp[week])));
        rec.push(num(observed));
        c.write_record(&rec)?;
    }
    c.flush()?;
    println!("{}", out.join("synth_weekly.csv").display());
    Ok(())
}
