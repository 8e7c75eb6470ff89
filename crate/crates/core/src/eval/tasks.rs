//! In-sample modeling (T1) and walk-forward forecasting (T2).

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::method::{FitError, FittedModel, Method, MethodKind, Predictor};
use super::metrics::{mape, summarize, zero_actuals, Summary};
use crate::rng::SeededRng;
use crate::series::WeeklySeries;

/// Forecast origins `t` for the walk-forward task.
pub const DEFAULT_ORIGINS: RangeInclusive<usize> = 5..=48;
pub const DEFAULT_HORIZONS: [usize; 4] = [1, 2, 3, 4];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "t1")]
    Modeling,
    #[serde(rename = "t2")]
    Forecasting,
}

impl Task {
    pub fn label(self) -> &'static str {
        match self {
            Task::Modeling => "t1",
            Task::Forecasting => "t2",
        }
    }
}

/// MAPE for one country and pair accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryScore {
    /// `None` when no pair could be scored.
    pub mape: Option<f64>,
    pub evaluated_pairs: usize,
    pub excluded_pairs: usize,
    /// Pairs dropped because the fit at their origin failed (a subset of `excluded_pairs`).
    pub failed_pairs: usize,
}

impl CountryScore {
    fn from_pairs(actual: &[f64], forecast: &[f64], failed_pairs: usize) -> Self {
        let zeros = zero_actuals(actual);
        CountryScore {
            mape: mape(actual, forecast).ok(),
            evaluated_pairs: actual.len() - zeros,
            excluded_pairs: zeros + failed_pairs,
            failed_pairs,
        }
    }

    pub fn scheduled_pairs(&self) -> usize {
        self.evaluated_pairs + self.excluded_pairs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: MethodKind,
    pub task: Task,
    /// 0 for the modeling task.
    pub horizon: usize,
    pub per_country: BTreeMap<String, CountryScore>,
    pub summary: Option<Summary<f64>>,
}

impl EvalReport {
    pub fn new(
        method: MethodKind,
        task: Task,
        horizon: usize,
        per_country: BTreeMap<String, CountryScore>,
    ) -> Self {
        let values: Vec<f64> = per_country.values().filter_map(|s| s.mape).collect();
        let summary = summarize(&values);
        Self {
            method,
            task,
            horizon,
            per_country,
            summary,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModelingResult {
    /// Predictions for weeks `1..T`.
    pub predictions: Vec<f64>,
    pub score: CountryScore,
}

/// Scores a model fitted on the full series on its one-week-ahead values.
///
/// Curve models predict week `t + 1` from the curve itself; state models step
/// once from the observed week `t`. Scored over weeks `1..T`.
pub fn run_modeling_task<P: Predictor + ?Sized>(
    series: &WeeklySeries,
    model: &P,
) -> Result<ModelingResult, FitError> {
    let x = series.values();
    let predictions = (0..x.len() - 1)
        .map(|t| model.predict(x, t, 1))
        .collect::<Result<Vec<_>, _>>()?;
    let score = CountryScore::from_pairs(&x[1..], &predictions, 0);
    Ok(ModelingResult { predictions, score })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRecord {
    pub origin: usize,
    pub horizon: usize,
    pub actual: f64,
    /// `None` when the fit at this origin failed.
    pub forecast: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ForecastOutcome {
    pub country: String,
    pub scores: BTreeMap<usize, CountryScore>,
    pub forecasts: Vec<ForecastRecord>,
    pub failures: Vec<(usize, String)>,
    /// Origins that were refitted.
    pub origins: usize,
    /// Origins whose fit hit the solver's iteration cap.
    pub non_converged: usize,
}

/// Records, prediction failures, and whether the fit hit its cap, for one origin.
type OriginOutcome = (Vec<ForecastRecord>, Vec<(usize, String)>, bool);

/// Walk-forward evaluation: for every origin `t`, refit on `x_0..=x_t` and
/// forecast `t + h` for each horizon. Pairs are scheduled only when `t + h`
/// is inside the series.
pub fn run_forecasting_task(
    series: &WeeklySeries,
    method: &Method,
    horizons: &[usize],
    origins: RangeInclusive<usize>,
    country_index: usize,
) -> ForecastOutcome {
    let x = series.values();
    let origins: Vec<usize> = origins.take_while(|&t| t < x.len()).collect();
    // each origin refits independently on its own stream, so order is restored after the parallel map
    let per_origin: Vec<OriginOutcome> = origins
        .par_iter()
        .map(|&t| {
            let history = &x[..=t];
            let fitted = method.fit(history, SeededRng::stream_for(country_index, t + 1));
            let mut records = Vec::new();
            let mut failures = Vec::new();
            for &h in horizons {
                if t + h >= x.len() {
                    continue;
                }
                let forecast = match &fitted {
                    Ok(model) => match model.predict(history, t, h) {
                        Ok(v) => Some(v),
                        Err(e) => {
                            failures.push((t, e.to_string()));
                            None
                        }
                    },
                    Err(_) => None,
                };
                records.push(ForecastRecord {
                    origin: t,
                    horizon: h,
                    actual: x[t + h],
                    forecast,
                });
            }
            let capped = fitted
                .as_ref()
                .err()
                .is_some_and(FitError::is_non_convergence);
            if let Err(e) = fitted {
                failures.push((t, e.to_string()));
            }
            (records, failures, capped)
        })
        .collect();
    let mut forecasts = Vec::new();
    let mut failures = Vec::new();
    let mut non_converged = 0;
    for (r, f, capped) in per_origin {
        forecasts.extend(r);
        failures.extend(f);
        non_converged += usize::from(capped);
    }

    let mut scores = BTreeMap::new();
    for &h in horizons {
        let mut actual = Vec::new();
        let mut predicted = Vec::new();
        let mut failed = 0;
        for r in forecasts.iter().filter(|r| r.horizon == h) {
            match r.forecast {
                Some(f) => {
                    actual.push(r.actual);
                    predicted.push(f);
                }
                None => failed += 1,
            }
        }
        let score = if actual.is_empty() {
            CountryScore {
                mape: None,
                evaluated_pairs: 0,
                excluded_pairs: failed,
                failed_pairs: failed,
            }
        } else {
            CountryScore::from_pairs(&actual, &predicted, failed)
        };
        scores.insert(h, score);
    }
    ForecastOutcome {
        country: series.country().to_string(),
        scores,
        forecasts,
        failures,
        origins: origins.len(),
        non_converged,
    }
}

/// Full-series fit plus its modeling-task score, for one country.
#[derive(Debug, Clone)]
pub struct CountryModeling {
    pub country: String,
    pub model: Result<FittedModel, String>,
    pub result: Option<ModelingResult>,
    /// The fit failed because the solver hit its iteration cap.
    pub non_converged: bool,
}

/// Runs the modeling task over many countries in parallel. Results come back
/// in input order; the RNG stream depends only on the country's position.
pub fn modeling_over(
    series: &[WeeklySeries],
    method: &Method,
) -> (EvalReport, Vec<CountryModeling>) {
    let rows: Vec<CountryModeling> = series
        .par_iter()
        .enumerate()
        .map(|(idx, s)| {
            let country = s.country().to_string();
            let fitted = method.fit(s.values(), SeededRng::stream_for(idx, 0));
            let scored = fitted.and_then(|model| run_modeling_task(s, &model).map(|r| (model, r)));
            match scored {
                Ok((model, r)) => CountryModeling {
                    country,
                    model: Ok(model),
                    result: Some(r),
                    non_converged: false,
                },
                Err(e) => CountryModeling {
                    country,
                    non_converged: e.is_non_convergence(),
                    model: Err(e.to_string()),
                    result: None,
                },
            }
        })
        .collect();
    let per_country = rows
        .iter()
        .zip(series)
        .map(|(r, s)| {
            let score = match &r.result {
                Some(res) => res.score.clone(),
                None => CountryScore {
                    mape: None,
                    evaluated_pairs: 0,
                    excluded_pairs: s.len() - 1,
                    failed_pairs: s.len() - 1,
                },
            };
            (r.country.clone(), score)
        })
        .collect();
    (
        EvalReport::new(method.kind(), Task::Modeling, 0, per_country),
        rows,
    )
}

/// Runs the forecasting task over many countries in parallel; one report per horizon.
pub fn forecasting_over(
    series: &[WeeklySeries],
    method: &Method,
    horizons: &[usize],
    origins: RangeInclusive<usize>,
) -> (Vec<EvalReport>, Vec<ForecastOutcome>) {
    let outcomes: Vec<ForecastOutcome> = series
        .par_iter()
        .enumerate()
        .map(|(idx, s)| run_forecasting_task(s, method, horizons, origins.clone(), idx))
        .collect();
    let reports = horizons
        .iter()
        .map(|&h| {
            let per_country = outcomes
                .iter()
                .filter_map(|o| o.scores.get(&h).map(|s| (o.country.clone(), s.clone())))
                .collect();
            EvalReport::new(method.kind(), Task::Forecasting, h, per_country)
        })
        .collect();
    (reports, outcomes)
}
