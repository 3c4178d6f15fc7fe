//! Windowed aggregate functions over one stream.
//!
//! All windows are half-open `[now - window_ms, now)` so a sample stamped
//! exactly `now` belongs to the next evaluation.

use serde::{Deserialize, Serialize};

use super::storage::FactStore;
use super::types::FactsError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "fn")]
pub enum AggregateFn {
    Mean,
    RateOfChange,
    TrendSlope,
    Forecast { horizon_ms: u64 },
}

impl AggregateFn {
    pub fn keyword(&self) -> &'static str {
        match self {
            AggregateFn::Mean => "mean",
            AggregateFn::RateOfChange => "rate_of_change",
            AggregateFn::TrendSlope => "trend_slope",
            AggregateFn::Forecast { .. } => "forecast",
        }
    }
}

/// Arithmetic mean. Exact when every sample in the window is equal, so
/// constant streams aggregate without float summation error.
fn mean_of(values: &[(i64, f64)]) -> f64 {
    let first = values[0].1;
    if values.iter().all(|&(_, v)| v == first) {
        return first;
    }
    values.iter().map(|&(_, v)| v).sum::<f64>() / values.len() as f64
}

/// OLS slope of value against time, in units per millisecond. Zero when the
/// window has no timestamp spread (including a single sample).
fn slope_of(values: &[(i64, f64)]) -> f64 {
    let n = values.len() as f64;
    let t_mean = values.iter().map(|&(t, _)| t as f64).sum::<f64>() / n;
    let v_mean = values.iter().map(|&(_, v)| v).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for &(t, v) in values {
        let dt = t as f64 - t_mean;
        num += dt * (v - v_mean);
        den += dt * dt;
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

impl FactStore {
    /// Evaluate `func` over `[now - window_ms, now)` of one stream.
    ///
    /// * `mean`: arithmetic mean (>= 1 sample).
    /// * `rate_of_change`: relative change between the two half-window
    ///   means, `(m2 - m1) / m1` (>= 1 sample in each half; errors when the
    ///   first half-window mean is zero). The midpoint is
    ///   `now - window_ms / 2`, floored.
    /// * `trend_slope`: OLS slope in units/ms (>= 1 sample).
    /// * `forecast`: last window value plus `trend_slope * horizon_ms`
    ///   (>= 2 samples).
    pub fn aggregate(
        &self,
        stream_id: &str,
        func: &AggregateFn,
        window_ms: u64,
        now: i64,
    ) -> Result<f64, FactsError> {
        let from = now.saturating_sub(window_ms as i64);
        let insufficient = |need: usize, have: usize| FactsError::InsufficientSamples {
            stream: stream_id.to_string(),
            need,
            have,
        };
        match func {
            AggregateFn::Mean => {
                let w = self.window(stream_id, from, now);
                if w.is_empty() {
                    return Err(insufficient(1, 0));
                }
                Ok(mean_of(&w))
            }
            AggregateFn::TrendSlope => {
                let w = self.window(stream_id, from, now);
                if w.is_empty() {
                    return Err(insufficient(1, 0));
                }
                Ok(slope_of(&w))
            }
            AggregateFn::RateOfChange => {
                let mid = now - (window_ms / 2) as i64;
                let first = self.window(stream_id, from, mid);
                let second = self.window(stream_id, mid, now);
                if first.is_empty() || second.is_empty() {
                    return Err(insufficient(2, first.len() + second.len()));
                }
                let m1 = mean_of(&first);
                let m2 = mean_of(&second);
                if m1 == 0.0 {
                    return Err(FactsError::DivisionByZero { stream: stream_id.to_string() });
                }
                Ok((m2 - m1) / m1)
            }
            AggregateFn::Forecast { horizon_ms } => {
                let w = self.window(stream_id, from, now);
                if w.len() < 2 {
                    return Err(insufficient(2, w.len()));
                }
                let last = w[w.len() - 1].1;
                Ok(last + slope_of(&w) * *horizon_ms as f64)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::facts::Sample;

    fn store(samples: &[(i64, f64)]) -> FactStore {
        let mut st = FactStore::default();
        for &(ts, v) in samples {
            st.ingest(Sample { stream_id: "s".into(), timestamp: ts, value: v, unit: "".into() })
                .unwrap();
        }
        st
    }

    #[test]
    fn mean_of_constant_stream_is_exact() {
        let st = store(&[(1000, 5.0), (2000, 5.0), (3000, 5.0)]);
        assert_eq!(st.aggregate("s", &AggregateFn::Mean, 60_000, 10_000).unwrap(), 5.0);
        let st = store(&[(1000, 0.1), (2000, 0.1), (3000, 0.1)]);
        assert_eq!(st.aggregate("s", &AggregateFn::Mean, 60_000, 10_000).unwrap(), 0.1);
    }

    #[test]
    fn mean_window_is_half_open() {
        let st = store(&[(0, 100.0), (5000, 2.0), (10_000, 4.0)]);
        // Window [5000, 10000): excludes both the old sample and ts == now.
        assert_eq!(st.aggregate("s", &AggregateFn::Mean, 5000, 10_000).unwrap(), 2.0);
    }

    #[test]
    fn rate_of_change_matches_worked_example() {
        // First half mean 10, second half mean 12 -> 0.2.
        let st = store(&[(1000, 10.0), (2000, 10.0), (6000, 12.0), (7000, 12.0)]);
        let got = st.aggregate("s", &AggregateFn::RateOfChange, 10_000, 10_000).unwrap();
        assert!((got - 0.2).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn rate_of_change_of_constant_stream_is_exactly_zero() {
        let st = store(&[(1000, 0.1), (2000, 0.1), (3000, 0.1), (6000, 0.1), (7000, 0.1)]);
        let got = st.aggregate("s", &AggregateFn::RateOfChange, 10_000, 10_000).unwrap();
        assert_eq!(got, 0.0);
    }

    #[test]
    fn rate_of_change_division_by_zero() {
        let st = store(&[(1000, 0.0), (6000, 5.0)]);
        let err = st.aggregate("s", &AggregateFn::RateOfChange, 10_000, 10_000).unwrap_err();
        assert_eq!(err.name(), "DivisionByZero");
    }

    #[test]
    fn rate_of_change_needs_both_halves() {
        let st = store(&[(6000, 5.0), (7000, 5.0)]);
        let err = st.aggregate("s", &AggregateFn::RateOfChange, 10_000, 10_000).unwrap_err();
        assert_eq!(err.name(), "InsufficientSamples");
    }

    #[test]
    fn trend_slope_on_exact_line() {
        // value = 2 + 0.003 * t
        let st = store(&[(1000, 5.0), (2000, 8.0), (3000, 11.0), (4000, 14.0)]);
        let got = st.aggregate("s", &AggregateFn::TrendSlope, 10_000, 5000).unwrap();
        assert!((got - 0.003).abs() < 1e-15, "got {got}");
    }

    #[test]
    fn trend_slope_without_time_spread_is_zero() {
        let st = store(&[(1000, 5.0)]);
        assert_eq!(st.aggregate("s", &AggregateFn::TrendSlope, 10_000, 5000).unwrap(), 0.0);
        let st = store(&[(1000, 5.0), (1000, 9.0)]);
        assert_eq!(st.aggregate("s", &AggregateFn::TrendSlope, 10_000, 5000).unwrap(), 0.0);
    }

    #[test]
    fn forecast_extends_last_value_along_slope() {
        let st = store(&[(1000, 5.0), (2000, 8.0), (3000, 11.0)]);
        let got = st
            .aggregate("s", &AggregateFn::Forecast { horizon_ms: 2000 }, 10_000, 4000)
            .unwrap();
        assert!((got - 17.0).abs() < 1e-9, "11 + 0.003 * 2000 = 17, got {got}");
    }

    #[test]
    fn forecast_needs_two_samples() {
        let st = store(&[(1000, 5.0)]);
        let err = st
            .aggregate("s", &AggregateFn::Forecast { horizon_ms: 1000 }, 10_000, 4000)
            .unwrap_err();
        assert_eq!(err.name(), "InsufficientSamples");
    }

    #[test]
    fn empty_window_is_insufficient_even_on_unknown_stream() {
        let st = FactStore::default();
        let err = st.aggregate("raw/never", &AggregateFn::Mean, 1000, 1000).unwrap_err();
        assert_eq!(err.name(), "InsufficientSamples");
    }
}
