use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("series for {country} has negative value {value} at week {index}")]
    NegativeValue {
        country: String,
        index: usize,
        value: f64,
    },
    #[error("series for {country} has non-finite value at week {index}")]
    NonFinite { country: String, index: usize },
    #[error("series for {country} has {len} points, need at least 2")]
    TooShort { country: String, len: usize },
}

/// Weekly new-infection counts for one country, week 0 starting at `start_week`.
///
/// Weeks are consecutive by construction; the only calendar information kept
/// is the date of week 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSeries")]
pub struct WeeklySeries {
    country: String,
    start_week: NaiveDate,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct RawSeries {
    country: String,
    start_week: NaiveDate,
    values: Vec<f64>,
}

impl TryFrom<RawSeries> for WeeklySeries {
    type Error = SeriesError;

    fn try_from(raw: RawSeries) -> Result<Self, Self::Error> {
        WeeklySeries::new(raw.country, raw.start_week, raw.values)
    }
}

impl WeeklySeries {
    pub fn new(
        country: impl Into<String>,
        start_week: NaiveDate,
        values: Vec<f64>,
    ) -> Result<Self, SeriesError> {
        let country = country.into();
        if values.len() < 2 {
            return Err(SeriesError::TooShort {
                country,
                len: values.len(),
            });
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(SeriesError::NonFinite { country, index });
            }
            if value < 0.0 {
                return Err(SeriesError::NegativeValue {
                    country,
                    index,
                    value,
                });
            }
        }
        Ok(Self {
            country,
            start_week,
            values,
        })
    }

    pub fn country(&self) -> &str {
        &self.country
    }

    pub fn start_week(&self) -> NaiveDate {
        self.start_week
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false; a valid series has at least two points.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Calendar date of week `index`.
    pub fn week_start(&self, index: usize) -> NaiveDate {
        self.start_week + chrono::Duration::weeks(index as i64)
    }

    /// Series restricted to weeks `0..len`; `len` is clamped to at least 2.
    pub fn prefix(&self, len: usize) -> WeeklySeries {
        let len = len.clamp(2, self.values.len());
        WeeklySeries {
            country: self.country.clone(),
            start_week: self.start_week,
            values: self.values[..len].to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn day() -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 7, 30).unwrap()
    }

    #[test]
    fn accepts_valid_series() {
        let s = WeeklySeries::new("CA", day(), vec![10.0, 20.0, 30.0]).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.values(), &[10.0, 20.0, 30.0]);
        assert_eq!(
            s.week_start(1),
            NaiveDate::from_ymd_opt(2020, 8, 6).unwrap()
        );
    }

    #[test]
    fn rejects_negative() {
        let err = WeeklySeries::new("CA", day(), vec![10.0, -1.0]).unwrap_err();
        assert!(matches!(err, SeriesError::NegativeValue { index: 1, .. }));
    }

    #[test]
    fn rejects_too_short() {
        let err = WeeklySeries::new("CA", day(), vec![5.0]).unwrap_err();
        assert!(matches!(err, SeriesError::TooShort { len: 1, .. }));
    }

    #[test]
    fn deserialize_validates() {
        let json = r#"{"country":"X","start_week":"2020-07-30","values":[1.0,-2.0]}"#;
        assert!(serde_json::from_str::<WeeklySeries>(json).is_err());
    }

    proptest! {
        #[test]
        fn json_round_trip_is_bit_exact(values in prop::collection::vec(0.0f64..1e12, 2..60)) {
            let s = WeeklySeries::new("ZZ", day(), values).unwrap();
            let text = serde_json::to_string(&s).unwrap();
            let back: WeeklySeries = serde_json::from_str(&text).unwrap();
            for (a, b) in s.values().iter().zip(back.values()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
            prop_assert_eq!(back, s);
        }
    }
}
