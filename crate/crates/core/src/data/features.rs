//! Covariate construction: weather plus calendar features per hour.

use super::frame::TimeSeriesFrame;
use super::weather::WeatherTable;
use crate::error::{Error, Result};
use chrono::{Datelike, NaiveDate, Timelike};
use std::collections::BTreeSet;

/// Per-hour covariate order; the first three come from the weather table,
/// the rest from the calendar.
pub const FEATURE_NAMES: [&str; 9] = [
    "temp_c",
    "dewpoint_c",
    "precip_mm",
    "holiday",
    "weekday",
    "sin_hour_of_day",
    "cos_hour_of_day",
    "sin_hour_of_year",
    "cos_hour_of_year",
];

/// The calendar-only subset, known in advance for future steps.
pub const CALENDAR_FEATURES: [&str; 6] = [
    "holiday",
    "weekday",
    "sin_hour_of_day",
    "cos_hour_of_day",
    "sin_hour_of_year",
    "cos_hour_of_year",
];

#[derive(Debug, Clone)]
pub struct CovariateMatrix {
    /// rows[t] has one entry per FEATURE_NAMES column.
    pub rows: Vec<Vec<f64>>,
}

impl CovariateMatrix {
    pub fn width(&self) -> usize {
        FEATURE_NAMES.len()
    }

    /// Calendar-only slice of a row (the features known for future hours).
    pub fn calendar_row(&self, t: usize) -> Vec<f64> {
        self.rows[t][3..9].to_vec()
    }
}

/// One ISO date (YYYY-MM-DD) per line; blank lines ignored.
pub fn parse_holidays(content: &str, path: &str) -> Result<BTreeSet<NaiveDate>> {
    let mut out = BTreeSet::new();
    for (idx, line) in content.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let date = NaiveDate::parse_from_str(t, "%Y-%m-%d").map_err(|e| Error::Parse {
            path: path.into(),
            line: idx + 1,
            msg: format!("bad date `{t}`: {e}"),
        })?;
        out.insert(date);
    }
    Ok(out)
}

pub fn calendar_features(ts: chrono::NaiveDateTime, holidays: &BTreeSet<NaiveDate>) -> [f64; 6] {
    let date = ts.date();
    let holiday = if holidays.contains(&date) { 1.0 } else { 0.0 };
    let weekday = match date.weekday() {
        chrono::Weekday::Sat | chrono::Weekday::Sun => 0.0,
        _ => 1.0,
    };
    let hod = ts.hour() as f64;
    let two_pi = 2.0 * std::f64::consts::PI;
    let sin_hod = (two_pi * hod / 24.0).sin();
    let cos_hod = (two_pi * hod / 24.0).cos();
    let hoy = (date.ordinal0() * 24 + ts.hour()) as f64;
    let sin_hoy = (two_pi * hoy / 8760.0).sin();
    let cos_hoy = (two_pi * hoy / 8760.0).cos();
    [holiday, weekday, sin_hod, cos_hod, sin_hoy, cos_hoy]
}

/// Emit the covariate row for every hour of the frame. The weather table
/// must cover the frame's range.
pub fn build_features(
    frame: &TimeSeriesFrame,
    weather: &WeatherTable,
    holidays: &BTreeSet<NaiveDate>,
) -> Result<CovariateMatrix> {
    if weather.is_empty() {
        return Err(Error::Config("weather table empty".into()));
    }
    let mut rows = Vec::with_capacity(frame.len());
    for t in 0..frame.len() {
        let ts = frame.timestamp(t);
        let wx = weather.at(ts).ok_or_else(|| {
            Error::Config(format!(
                "weather table does not cover {ts} (covers {} to {})",
                weather.start(),
                weather.end()
            ))
        })?;
        let cal = calendar_features(ts, holidays);
        let mut row = Vec::with_capacity(9);
        row.extend_from_slice(&wx);
        row.extend_from_slice(&cal);
        rows.push(row);
    }
    Ok(CovariateMatrix { rows })
}
