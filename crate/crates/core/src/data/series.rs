use std::fmt;
use std::ops::Range;

use chrono::{DateTime, Datelike, Duration, Months, NaiveDate, NaiveDateTime, SecondsFormat, TimeZone, Utc, Weekday};
use serde::{Deserialize, Serialize};

use super::DataError;

/// Sampling frequency of a uniform series.
///
/// Business-daily series are treated as a plain index: rows are taken in
/// order and no calendar gaps (weekends, holidays) are inserted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Freq {
    Minutely,
    Hourly,
    BusinessDaily,
    Monthly,
}

impl fmt::Display for Freq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Freq::Minutely => "minutely",
            Freq::Hourly => "hourly",
            Freq::BusinessDaily => "business-daily",
            Freq::Monthly => "monthly",
        };
        f.write_str(s)
    }
}

impl Freq {
    /// Timestamp of the `index`-th observation of a series starting at `start`.
    pub fn timestamp_at(self, start: DateTime<Utc>, index: usize) -> DateTime<Utc> {
        match self {
            Freq::Minutely => start + Duration::minutes(index as i64),
            Freq::Hourly => start + Duration::hours(index as i64),
            Freq::Monthly => start
                .checked_add_months(Months::new(index as u32))
                .expect("month arithmetic overflow"),
            Freq::BusinessDaily => {
                let mut ts = start;
                let mut left = index;
                while left > 0 {
                    ts += Duration::days(1);
                    if !matches!(ts.weekday(), Weekday::Sat | Weekday::Sun) {
                        left -= 1;
                    }
                }
                ts
            }
        }
    }

    /// Grid position of `ts` relative to `start`, or `None` when `ts` is off
    /// the grid. Business-daily has no grid (positional), so it always
    /// returns `None`.
    pub(crate) fn grid_offset(self, start: DateTime<Utc>, ts: DateTime<Utc>) -> Option<i64> {
        match self {
            Freq::Minutely | Freq::Hourly => {
                let step = if self == Freq::Minutely { 60 } else { 3600 };
                let delta = (ts - start).num_seconds();
                ((ts - start).subsec_nanos() == 0 && delta % step == 0).then_some(delta / step)
            }
            Freq::Monthly => {
                let months =
                    (ts.year() as i64 * 12 + ts.month0() as i64) - (start.year() as i64 * 12 + start.month0() as i64);
                let back = if months >= 0 {
                    start.checked_add_months(Months::new(months as u32))?
                } else {
                    start.checked_sub_months(Months::new((-months) as u32))?
                };
                (back == ts).then_some(months)
            }
            Freq::BusinessDaily => None,
        }
    }
}

/// Parses an RFC 3339 timestamp, `YYYY-MM-DD HH:MM:SS`, `YYYY-MM-DD`, or
/// `YYYY-MM` (first of the month). Naive forms are read as UTC.
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(ts) = DateTime::parse_from_rfc3339(s) {
        return Some(ts.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(Utc.from_utc_datetime(&dt));
        }
    }
    let date = match NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        Ok(d) => d,
        Err(_) => {
            let (y, m) = s.split_once('-')?;
            if y.len() != 4 || m.len() != 2 {
                return None;
            }
            NaiveDate::from_ymd_opt(y.parse().ok()?, m.parse().ok()?, 1)?
        }
    };
    Some(Utc.from_utc_datetime(&date.and_hms_opt(0, 0, 0)?))
}

/// Formats a timestamp the way it is written to CSV for the given frequency.
pub fn format_timestamp(ts: DateTime<Utc>, freq: Freq) -> String {
    match freq {
        Freq::Monthly => ts.format("%Y-%m").to_string(),
        _ => ts.to_rfc3339_opts(SecondsFormat::Secs, true),
    }
}

/// A uniform-frequency univariate series. Values are always finite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSeries {
    series_id: String,
    start: DateTime<Utc>,
    freq: Freq,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(
        series_id: impl Into<String>,
        start: DateTime<Utc>,
        freq: Freq,
        values: Vec<f64>,
    ) -> Result<Self, DataError> {
        let series_id = series_id.into();
        if values.is_empty() {
            return Err(DataError::EmptySeries(series_id));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(DataError::NonFinite(series_id));
        }
        Ok(Self {
            series_id,
            start,
            freq,
            values,
        })
    }

    pub fn series_id(&self) -> &str {
        &self.series_id
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.start
    }

    pub fn freq(&self) -> Freq {
        self.freq
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Timestamp implied by `(start, freq, index)`; `index` may run past the end.
    pub fn timestamp(&self, index: usize) -> DateTime<Utc> {
        self.freq.timestamp_at(self.start, index)
    }

    pub fn timestamps(&self) -> Vec<DateTime<Utc>> {
        (0..self.len()).map(|i| self.timestamp(i)).collect()
    }

    /// Contiguous sub-series; the start timestamp follows the slice.
    pub fn slice(&self, range: Range<usize>) -> Result<Self, DataError> {
        if range.end > self.len() || range.start >= range.end {
            return Err(DataError::TooShort {
                needed: range.end.max(range.start + 1),
                have: self.len(),
            });
        }
        Ok(Self {
            series_id: self.series_id.clone(),
            start: self.timestamp(range.start),
            freq: self.freq,
            values: self.values[range].to_vec(),
        })
    }

    pub fn with_id(mut self, series_id: impl Into<String>) -> Self {
        self.series_id = series_id.into();
        self
    }

    /// Same id, start and frequency with a new value vector.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self, DataError> {
        Self::new(self.series_id.clone(), self.start, self.freq, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_timestamp_accepts_naive_and_partial_forms() {
        let expect = Utc.with_ymd_and_hms(2021, 3, 4, 0, 0, 0).unwrap();
        assert_eq!(parse_timestamp("2021-03-04T00:00:00Z"), Some(expect));
        assert_eq!(parse_timestamp("2021-03-04"), Some(expect));
        assert_eq!(parse_timestamp("2021-03-04 00:00:00"), Some(expect));
        assert_eq!(parse_timestamp(" 2021-03-04T00:00:00 "), Some(expect));
        assert_eq!(
            parse_timestamp("2021-03"),
            Some(Utc.with_ymd_and_hms(2021, 3, 1, 0, 0, 0).unwrap())
        );
        assert_eq!(parse_timestamp("2021-3"), None);
        assert_eq!(parse_timestamp("2021-13-01"), None);
        assert_eq!(parse_timestamp("yesterday"), None);
    }
}
