//! Charging-session records and their aggregation into hourly demand.

use super::frame::TimeSeriesFrame;
use crate::error::{Error, Result};
use chrono::{NaiveDateTime, Timelike};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq)]
pub struct SessionRecord {
    pub station_id: String,
    pub connect_time: NaiveDateTime,
    pub disconnect_time: NaiveDateTime,
    pub energy_kwh: f64,
}

impl SessionRecord {
    pub fn new(
        station_id: String,
        connect_time: NaiveDateTime,
        disconnect_time: NaiveDateTime,
        energy_kwh: f64,
    ) -> Result<Self> {
        if disconnect_time <= connect_time {
            return Err(Error::Invariant(format!(
                "session for `{station_id}` disconnects at or before it connects"
            )));
        }
        if energy_kwh < 0.0 || !energy_kwh.is_finite() {
            return Err(Error::Invariant(format!(
                "session for `{station_id}` has invalid energy {energy_kwh}"
            )));
        }
        Ok(SessionRecord {
            station_id,
            connect_time,
            disconnect_time,
            energy_kwh,
        })
    }
}

pub(crate) fn parse_timestamp(s: &str) -> std::result::Result<NaiveDateTime, String> {
    NaiveDateTime::parse_from_str(s.trim(), "%Y-%m-%dT%H:%M")
        .or_else(|_| NaiveDateTime::parse_from_str(s.trim(), "%Y-%m-%dT%H:%M:%S"))
        .or_else(|_| NaiveDateTime::parse_from_str(s.trim(), "%Y-%m-%d %H:%M"))
        .or_else(|_| NaiveDateTime::parse_from_str(s.trim(), "%Y-%m-%d %H:%M:%S"))
        .map_err(|e| format!("bad timestamp `{s}`: {e}"))
}

/// Parse the sessions CSV: `station_id,connect_time,disconnect_time,energy_kwh`
/// with ISO 8601 minute-resolution timestamps. The header row is required.
pub fn parse_sessions_csv(content: &str, path: &str) -> Result<Vec<SessionRecord>> {
    let mut lines = content.lines().enumerate();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse {
            path: path.to_string(),
            line: 1,
            msg: "empty file, header required".into(),
        })?
        .1;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols != ["station_id", "connect_time", "disconnect_time", "energy_kwh"] {
        return Err(Error::Parse {
            path: path.to_string(),
            line: 1,
            msg: format!("unexpected header `{header}`"),
        });
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(Error::Parse {
                path: path.to_string(),
                line: lineno,
                msg: format!("expected 4 fields, got {}", parts.len()),
            });
        }
        let connect = parse_timestamp(parts[1]).map_err(|msg| Error::Parse {
            path: path.to_string(),
            line: lineno,
            msg,
        })?;
        let disconnect = parse_timestamp(parts[2]).map_err(|msg| Error::Parse {
            path: path.to_string(),
            line: lineno,
            msg,
        })?;
        let energy: f64 = parts[3].trim().parse().map_err(|e| Error::Parse {
            path: path.to_string(),
            line: lineno,
            msg: format!("bad energy `{}`: {e}", parts[3]),
        })?;
        let record = SessionRecord::new(parts[0].trim().to_string(), connect, disconnect, energy)
            .map_err(|e| Error::Parse {
                path: path.to_string(),
                line: lineno,
                msg: e.to_string(),
            })?;
        out.push(record);
    }
    Ok(out)
}

fn hour_floor(t: NaiveDateTime) -> NaiveDateTime {
    t.with_minute(0).unwrap().with_second(0).unwrap().with_nanosecond(0).unwrap()
}

/// Prorate each session's energy uniformly over its duration and allocate it
/// to hour bins by overlap fraction; the aggregate column is the station sum.
///
/// `known_stations`, when given, fixes the column set; sessions from other
/// stations still get columns, reported back as warnings.
pub fn aggregate_sessions(
    records: &[SessionRecord],
    range: (NaiveDateTime, NaiveDateTime),
    known_stations: Option<&[String]>,
) -> Result<(TimeSeriesFrame, Vec<String>)> {
    let (start, end) = range;
    if start != hour_floor(start) || end != hour_floor(end) {
        return Err(Error::Contract("clock range must be hour-aligned".into()));
    }
    if end <= start {
        return Err(Error::Contract("clock range must be nonempty".into()));
    }
    let hours = (end - start).num_hours() as usize;

    let mut stations: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    if let Some(known) = known_stations {
        for name in known {
            stations.insert(name.clone(), vec![0.0; hours]);
        }
    }
    let mut warnings = Vec::new();

    for (idx, rec) in records.iter().enumerate() {
        if rec.disconnect_time <= rec.connect_time {
            return Err(Error::Contract(format!(
                "record {idx}: disconnect at or before connect"
            )));
        }
        if rec.connect_time < start || rec.disconnect_time > end {
            return Err(Error::Contract(format!(
                "record {idx}: session outside the clock range"
            )));
        }
        if !stations.contains_key(&rec.station_id) {
            if known_stations.is_some() {
                warnings.push(format!(
                    "record {idx}: unknown station `{}`, new column created",
                    rec.station_id
                ));
            }
            stations.insert(rec.station_id.clone(), vec![0.0; hours]);
        }
        let column = stations.get_mut(&rec.station_id).unwrap();

        let duration_min = (rec.disconnect_time - rec.connect_time).num_minutes() as f64;
        let mut bin_start = hour_floor(rec.connect_time);
        while bin_start < rec.disconnect_time {
            let bin_end = bin_start + chrono::Duration::hours(1);
            let ov_start = rec.connect_time.max(bin_start);
            let ov_end = rec.disconnect_time.min(bin_end);
            let overlap_min = (ov_end - ov_start).num_minutes() as f64;
            if overlap_min > 0.0 {
                let share = rec.energy_kwh * overlap_min / duration_min;
                let bin_idx = (bin_start - start).num_hours() as usize;
                column[bin_idx] += share;
            }
            bin_start = bin_end;
        }
    }

    if stations.is_empty() {
        return Err(Error::EmptyDataset("no sessions and no known stations".into()));
    }
    let names: Vec<String> = stations.keys().cloned().collect();
    let columns: Vec<Vec<f64>> = stations.into_values().collect();
    let frame = TimeSeriesFrame::from_columns(start, names, columns)?;
    Ok((frame, warnings))
}
