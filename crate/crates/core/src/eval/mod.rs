//! Scoring: MAPE, the last-value baseline, and the modeling/forecasting tasks.

pub mod method;
pub mod metrics;
pub mod tasks;

pub use method::{
    FitError, FittedModel, Method, MethodConfig, MethodKind, ModelRecord, Predictor, UnknownMethod,
    DICTIONARY_WEEKS,
};
pub use metrics::{mape, slow_forecast, summarize, MetricError, Summary};
pub use tasks::{
    forecasting_over, modeling_over, run_forecasting_task, run_modeling_task, CountryScore,
    EvalReport, ForecastOutcome, ForecastRecord, ModelingResult, Task, DEFAULT_HORIZONS,
    DEFAULT_ORIGINS,
};
