//! JHU CSSE global confirmed-cases ingestion and weekly aggregation.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use thiserror::Error;

use crate::series::{SeriesError, WeeklySeries};

const HEADER_PREFIX: [&str; 4] = ["Province/State", "Country/Region", "Lat", "Long"];

/// First week of the default analysis window.
pub fn default_window_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 7, 30).expect("valid date")
}

/// Weeks after the window start; the series has one more point than this.
pub const DEFAULT_WINDOW_WEEKS: usize = 52;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("cannot parse cell at row {row}, column {column}: `{value}`")]
    UnparseableCell {
        row: usize,
        column: usize,
        value: String,
    },
    #[error("window {start} + {weeks} weeks (with one lead-in week) is outside the table's {first}..={last}")]
    WindowOutOfRange {
        start: NaiveDate,
        weeks: usize,
        first: NaiveDate,
        last: NaiveDate,
    },
    #[error("window must span at least 2 weeks, got {0}")]
    WindowTooShort(usize),
    #[error("weekly csv: {0}")]
    WeeklyFormat(String),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    pub province: Option<String>,
    pub country: String,
    /// Cumulative confirmed cases per day; `None` where the cell is empty.
    pub counts: Vec<Option<u64>>,
}

/// Cumulative counts as read, one row per (province, country), over consecutive days.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCumulativeTable {
    pub dates: Vec<NaiveDate>,
    pub rows: Vec<RawRow>,
}

pub fn parse_jhu_csv(path: impl AsRef<Path>) -> Result<RawCumulativeTable, IngestError> {
    let file = std::fs::File::open(path)?;
    parse_jhu_reader(file)
}

pub fn parse_jhu_reader<R: Read>(input: R) -> Result<RawCumulativeTable, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(input);
    let header = reader.headers()?.clone();
    if header.len() < HEADER_PREFIX.len() + 1 {
        return Err(IngestError::MalformedHeader("no date columns".into()));
    }
    for (i, expected) in HEADER_PREFIX.iter().enumerate() {
        let got = header
            .get(i)
            .unwrap_or_default()
            .trim_start_matches('\u{feff}');
        if got != *expected {
            return Err(IngestError::MalformedHeader(format!(
                "column {i} is `{got}`, expected `{expected}`"
            )));
        }
    }
    let mut dates = Vec::with_capacity(header.len() - 4);
    for (i, field) in header.iter().enumerate().skip(4) {
        let date = NaiveDate::parse_from_str(field.trim(), "%m/%d/%y").map_err(|_| {
            IngestError::MalformedHeader(format!("column {i} `{field}` is not an M/D/YY date"))
        })?;
        if let Some(prev) = dates.last() {
            if date != *prev + chrono::Duration::days(1) {
                return Err(IngestError::MalformedHeader(format!(
                    "date columns must be consecutive ascending days; `{field}` follows {prev}"
                )));
            }
        }
        dates.push(date);
    }

    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = r + 1;
        let province = record
            .get(0)
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from);
        let country = record.get(1).unwrap_or_default().trim().to_string();
        if country.is_empty() {
            return Err(IngestError::UnparseableCell {
                row,
                column: 1,
                value: String::new(),
            });
        }
        let mut counts = Vec::with_capacity(dates.len());
        for (column, cell) in record.iter().enumerate().skip(4) {
            let cell = cell.trim();
            if cell.is_empty() {
                counts.push(None);
                continue;
            }
            let v = cell
                .parse::<u64>()
                .map_err(|_| IngestError::UnparseableCell {
                    row,
                    column,
                    value: cell.to_string(),
                })?;
            counts.push(Some(v));
        }
        rows.push(RawRow {
            province,
            country,
            counts,
        });
    }
    Ok(RawCumulativeTable { dates, rows })
}

/// Weekly counts for one country before filtering; `None` marks a week with
/// a missing daily value.
#[derive(Debug, Clone, PartialEq)]
pub struct CountryWeeks {
    pub country: String,
    pub start_week: NaiveDate,
    pub values: Vec<Option<f64>>,
}

/// Per-row weekly sums. Point `w` covers the 7 days ending at `start + 7w`;
/// daily new cases are first differences with negatives clamped to 0.
fn row_weeks(counts: &[Option<u64>], anchor: usize, weeks: usize) -> Vec<Option<f64>> {
    (0..=weeks)
        .map(|w| {
            let end = anchor + 7 * w;
            let mut total = 0.0;
            for d in end - 6..=end {
                let (prev, cur) = (counts[d - 1]?, counts[d]?);
                total += cur.saturating_sub(prev) as f64;
            }
            Some(total)
        })
        .collect()
}

/// Aggregates provinces into countries over `weeks + 1` weekly points starting at `window_start`.
///
/// Week 0 is the week ending on `window_start`, so the table must also hold
/// the 7 days before it.
pub fn to_weekly_series(
    table: &RawCumulativeTable,
    window_start: NaiveDate,
    weeks: usize,
) -> Result<Vec<CountryWeeks>, IngestError> {
    if weeks < 1 {
        return Err(IngestError::WindowTooShort(weeks + 1));
    }
    let out_of_range = || IngestError::WindowOutOfRange {
        start: window_start,
        weeks,
        first: table.dates.first().copied().unwrap_or(window_start),
        last: table.dates.last().copied().unwrap_or(window_start),
    };
    let first = *table.dates.first().ok_or_else(out_of_range)?;
    let anchor = (window_start - first).num_days();
    if anchor < 7 {
        return Err(out_of_range());
    }
    let anchor = anchor as usize;
    if anchor + 7 * weeks >= table.dates.len() {
        return Err(out_of_range());
    }

    let mut by_country: BTreeMap<&str, Vec<Option<f64>>> = BTreeMap::new();
    for row in &table.rows {
        let weekly = row_weeks(&row.counts, anchor, weeks);
        let entry = by_country
            .entry(row.country.as_str())
            .or_insert_with(|| vec![Some(0.0); weeks + 1]);
        for (acc, v) in entry.iter_mut().zip(weekly) {
            *acc = match (*acc, v) {
                (Some(a), Some(b)) => Some(a + b),
                _ => None,
            };
        }
    }
    Ok(by_country
        .into_iter()
        .map(|(country, values)| CountryWeeks {
            country: country.to_string(),
            start_week: window_start,
            values,
        })
        .collect())
}

/// Keeps countries with every week present and at least one non-zero week, sorted by label.
pub fn filter_countries(series: Vec<CountryWeeks>) -> Vec<WeeklySeries> {
    let mut kept: Vec<WeeklySeries> = series
        .into_iter()
        .filter_map(|c| {
            let values: Option<Vec<f64>> = c.values.into_iter().collect();
            let values = values?;
            if values.iter().all(|&v| v == 0.0) {
                return None;
            }
            WeeklySeries::new(c.country, c.start_week, values).ok()
        })
        .collect();
    kept.sort_by(|a, b| a.country().cmp(b.country()));
    kept
}

/// Parses the feed and returns the filtered country series for a window.
pub fn load_jhu_window(
    path: impl AsRef<Path>,
    window_start: NaiveDate,
    weeks: usize,
) -> Result<Vec<WeeklySeries>, IngestError> {
    let table = parse_jhu_csv(path)?;
    Ok(filter_countries(to_weekly_series(
        &table,
        window_start,
        weeks,
    )?))
}

/// Writes `country,week_index,week_start,value` rows.
pub fn write_weekly_csv<W: Write>(series: &[WeeklySeries], out: W) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["country", "week_index", "week_start", "value"])?;
    for s in series {
        for (i, v) in s.values().iter().enumerate() {
            w.write_record([
                s.country().to_string(),
                i.to_string(),
                s.week_start(i).format("%Y-%m-%d").to_string(),
                v.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads the format written by [`write_weekly_csv`]; lines starting with `#` are skipped.
pub fn read_weekly_csv<R: Read>(input: R) -> Result<Vec<WeeklySeries>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(input);
    let header = reader.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["country", "week_index", "week_start", "value"] {
        return Err(IngestError::WeeklyFormat(format!(
            "unexpected header {header:?}"
        )));
    }
    let mut by_country: BTreeMap<String, (NaiveDate, Vec<f64>)> = BTreeMap::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let bad = |column: usize| IngestError::UnparseableCell {
            row: r + 1,
            column,
            value: record.get(column).unwrap_or_default().to_string(),
        };
        let country = record.get(0).unwrap_or_default().to_string();
        let index: usize = record
            .get(1)
            .unwrap_or_default()
            .parse()
            .map_err(|_| bad(1))?;
        let date = NaiveDate::parse_from_str(record.get(2).unwrap_or_default(), "%Y-%m-%d")
            .map_err(|_| bad(2))?;
        let value: f64 = record
            .get(3)
            .unwrap_or_default()
            .parse()
            .map_err(|_| bad(3))?;
        let entry = by_country
            .entry(country.clone())
            .or_insert((date, Vec::new()));
        if index != entry.1.len() {
            return Err(IngestError::WeeklyFormat(format!(
                "{country}: week {index} out of order"
            )));
        }
        if index == 0 {
            entry.0 = date;
        }
        entry.1.push(value);
    }
    by_country
        .into_iter()
        .map(|(country, (start, values))| {
            WeeklySeries::new(country, start, values).map_err(IngestError::from)
        })
        .collect()
}
