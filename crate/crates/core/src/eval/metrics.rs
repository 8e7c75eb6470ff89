use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("actual and forecast lengths differ ({actual} vs {forecast})")]
    LengthMismatch { actual: usize, forecast: usize },
    #[error("no points to score")]
    Empty,
    #[error("every actual value is zero")]
    AllZeroActuals,
}

/// Mean absolute percentage error, in percent.
///
/// Points with a zero actual value are left out of both the sum and the count.
pub fn mape<T: Scalar>(actual: &[T], forecast: &[T]) -> Result<T, MetricError> {
    if actual.len() != forecast.len() {
        return Err(MetricError::LengthMismatch {
            actual: actual.len(),
            forecast: forecast.len(),
        });
    }
    if actual.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut total = T::zero();
    let mut n = 0usize;
    for (&a, &f) in actual.iter().zip(forecast) {
        if a != T::zero() {
            total = total + ((a - f) / a).abs();
            n += 1;
        }
    }
    if n == 0 {
        return Err(MetricError::AllZeroActuals);
    }
    Ok(T::lit(100.0) * total / T::from_usize_lossy(n))
}

/// Number of points [`mape`] leaves out.
pub fn zero_actuals<T: Scalar>(actual: &[T]) -> usize {
    actual.iter().filter(|&&a| a == T::zero()).count()
}

/// "Same as last observed week": every horizon gets the last value.
pub fn slow_forecast<T: Scalar>(history: &[T], horizon: usize) -> Option<T> {
    if horizon == 0 {
        return None;
    }
    history.last().copied()
}

/// Cross-country summary row: mean, sample std, min, quartiles, max.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary<T: Scalar = f64> {
    pub mean: T,
    pub std: T,
    pub min: T,
    pub q25: T,
    pub median: T,
    pub q75: T,
    pub max: T,
    pub count: usize,
}

/// Quantile with linear interpolation between order statistics (`pos = q (n - 1)`).
pub fn quantile_sorted<T: Scalar>(sorted: &[T], q: f64) -> T {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = T::lit(pos - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn summarize<T: Scalar>(values: &[T]) -> Option<Summary<T>> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = T::from_usize_lossy(values.len());
    let mean = values.iter().copied().sum::<T>() / n;
    let std = if values.len() > 1 {
        let ss: T = values.iter().map(|&v| (v - mean) * (v - mean)).sum();
        (ss / (n - T::one())).sqrt()
    } else {
        T::zero()
    };
    Some(Summary {
        mean,
        std,
        min: sorted[0],
        q25: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q75: quantile_sorted(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
        count: values.len(),
    })
}
