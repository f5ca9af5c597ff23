//! Hourly-aligned multi-series table: bottom stations plus the computed
//! aggregate.

use crate::error::{Error, Result};
use chrono::{Duration, NaiveDateTime};

/// The aggregate column is always computed from the stations at
/// construction, never ingested, so coherency holds by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesFrame {
    start: NaiveDateTime,
    station_names: Vec<String>,
    columns: Vec<Vec<f64>>,
    total: Vec<f64>,
}

pub const TOTAL_NAME: &str = "total";

impl TimeSeriesFrame {
    pub fn from_columns(
        start: NaiveDateTime,
        station_names: Vec<String>,
        columns: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if station_names.is_empty() || station_names.len() != columns.len() {
            return Err(Error::Contract("station names and columns must match".into()));
        }
        if station_names.iter().any(|n| n == TOTAL_NAME) {
            return Err(Error::Contract(format!(
                "`{TOTAL_NAME}` is reserved for the aggregate column"
            )));
        }
        let len = columns[0].len();
        if len == 0 {
            return Err(Error::EmptyDataset("time series frame with zero rows".into()));
        }
        if columns.iter().any(|c| c.len() != len) {
            return Err(Error::Contract("ragged columns".into()));
        }
        for (name, col) in station_names.iter().zip(&columns) {
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::Invariant(format!("non-finite value in `{name}`")));
            }
        }
        let mut total = vec![0.0; len];
        for col in &columns {
            for (t, v) in total.iter_mut().zip(col) {
                *t += v;
            }
        }
        Ok(TimeSeriesFrame {
            start,
            station_names,
            columns,
            total,
        })
    }

    pub fn len(&self) -> usize {
        self.total.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total.is_empty()
    }

    pub fn start(&self) -> NaiveDateTime {
        self.start
    }

    pub fn timestamp(&self, idx: usize) -> NaiveDateTime {
        self.start + Duration::hours(idx as i64)
    }

    pub fn station_names(&self) -> &[String] {
        &self.station_names
    }

    /// Station count plus the aggregate.
    pub fn series_count(&self) -> usize {
        self.station_names.len() + 1
    }

    pub fn series(&self, name: &str) -> Option<&[f64]> {
        if name == TOTAL_NAME {
            return Some(&self.total);
        }
        self.station_names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }

    pub fn total(&self) -> &[f64] {
        &self.total
    }

    /// All series names in the fixed order [total, stations...], matching
    /// the cross-sectional vector convention x = [y, z₁..z_n].
    pub fn series_names(&self) -> Vec<String> {
        let mut names = vec![TOTAL_NAME.to_string()];
        names.extend(self.station_names.iter().cloned());
        names
    }

    /// Max |total − Σ stations| over rows.
    pub fn coherency_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for t in 0..self.len() {
            let sum: f64 = self.columns.iter().map(|c| c[t]).sum();
            worst = worst.max((self.total[t] - sum).abs());
        }
        worst
    }

    /// Hourly CSV: `timestamp,<stations...>,total`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("timestamp");
        for name in &self.station_names {
            out.push(',');
            out.push_str(name);
        }
        out.push_str(",total\n");
        for t in 0..self.len() {
            out.push_str(&self.timestamp(t).format("%Y-%m-%dT%H:%M").to_string());
            for col in &self.columns {
                out.push_str(&format!(",{}", col[t]));
            }
            out.push_str(&format!(",{}\n", self.total[t]));
        }
        out
    }

    pub fn from_csv(content: &str, path: &str) -> Result<Self> {
        let mut lines = content.lines().enumerate();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse {
                path: path.into(),
                line: 1,
                msg: "empty hourly file".into(),
            })?
            .1;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 3 || cols[0] != "timestamp" || *cols.last().unwrap() != TOTAL_NAME {
            return Err(Error::Parse {
                path: path.into(),
                line: 1,
                msg: "expected header `timestamp,<stations...>,total`".into(),
            });
        }
        let station_names: Vec<String> =
            cols[1..cols.len() - 1].iter().map(|s| s.to_string()).collect();
        let mut start = None;
        let mut prev: Option<NaiveDateTime> = None;
        let mut columns: Vec<Vec<f64>> = vec![Vec::new(); station_names.len()];
        let mut totals: Vec<f64> = Vec::new();
        for (idx, line) in lines {
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != cols.len() {
                return Err(Error::Parse {
                    path: path.into(),
                    line: lineno,
                    msg: format!("expected {} fields", cols.len()),
                });
            }
            let ts = super::session::parse_timestamp(parts[0]).map_err(|msg| Error::Parse {
                path: path.into(),
                line: lineno,
                msg,
            })?;
            if let Some(p) = prev {
                if ts != p + Duration::hours(1) {
                    return Err(Error::Invariant(format!(
                        "timestamps must be contiguous hourly; gap before {ts}"
                    )));
                }
            } else {
                start = Some(ts);
            }
            prev = Some(ts);
            for (k, col) in columns.iter_mut().enumerate() {
                let v: f64 = parts[1 + k].trim().parse().map_err(|e| Error::Parse {
                    path: path.into(),
                    line: lineno,
                    msg: format!("bad value `{}`: {e}", parts[1 + k]),
                })?;
                col.push(v);
            }
            let total: f64 = parts[cols.len() - 1].trim().parse().map_err(|e| Error::Parse {
                path: path.into(),
                line: lineno,
                msg: format!("bad total: {e}"),
            })?;
            totals.push(total);
        }
        let start = start.ok_or_else(|| Error::EmptyDataset("hourly file has no rows".into()))?;
        let frame = TimeSeriesFrame::from_columns(start, station_names, columns)?;
        // the stored total must agree with the recomputed aggregate
        for (a, b) in frame.total.iter().zip(&totals) {
            if (a - b).abs() > 1e-9 {
                return Err(Error::Invariant(format!(
                    "aggregate column disagrees with station sum: {a} vs {b}"
                )));
            }
        }
        Ok(frame)
    }
}
