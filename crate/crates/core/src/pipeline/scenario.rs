//! Scenario files: a one-line JSON header (shape, origin, seed, series
//! order) followed by a CSV body with one row per (scenario, series).
//! Values are kWh.

use crate::error::{Error, Result};
use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioHeader {
    pub version: u32,
    /// [scenario count m, series count, horizon τ]
    pub shape: [usize; 3],
    pub origin: NaiveDateTime,
    pub seed: u64,
    /// Order convention [total, stations...].
    pub series: Vec<String>,
    pub unit: String,
}

#[derive(Debug, Clone)]
pub struct ScenarioFile {
    pub header: ScenarioHeader,
    /// values[s][k][t]: scenario s, series k, horizon step t.
    pub values: Vec<Vec<Vec<f64>>>,
}

impl ScenarioFile {
    pub fn new(
        origin: NaiveDateTime,
        seed: u64,
        series: Vec<String>,
        values: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        if values.is_empty() || values[0].is_empty() || values[0][0].is_empty() {
            return Err(Error::Contract("scenario tensor must be nonempty".into()));
        }
        let shape = [values.len(), values[0].len(), values[0][0].len()];
        if series.len() != shape[1] {
            return Err(Error::Contract("series names must match the tensor".into()));
        }
        for s in &values {
            if s.len() != shape[1] || s.iter().any(|k| k.len() != shape[2]) {
                return Err(Error::Contract("ragged scenario tensor".into()));
            }
        }
        Ok(ScenarioFile {
            header: ScenarioHeader {
                version: 1,
                shape,
                origin,
                seed,
                series,
                unit: "kwh".into(),
            },
            values,
        })
    }

    pub fn render(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        out.push_str("scenario,series");
        for t in 0..self.header.shape[2] {
            out.push_str(&format!(",h{}", t + 1));
        }
        out.push('\n');
        for (s, per_series) in self.values.iter().enumerate() {
            for (k, row) in per_series.iter().enumerate() {
                out.push_str(&format!("{s},{}", self.header.series[k]));
                for v in row {
                    out.push_str(&format!(",{v}"));
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, self.render())?;
        Ok(())
    }

    pub fn parse(content: &str, path: &str) -> Result<Self> {
        let mut lines = content.lines().enumerate();
        let header_line = lines
            .next()
            .ok_or_else(|| Error::Parse {
                path: path.into(),
                line: 1,
                msg: "empty scenario file".into(),
            })?
            .1;
        let header: ScenarioHeader =
            serde_json::from_str(header_line).map_err(|e| Error::Parse {
                path: path.into(),
                line: 1,
                msg: format!("bad scenario header: {e}"),
            })?;
        let [m, s_count, tau] = header.shape;
        let mut values = vec![vec![vec![0.0f64; tau]; s_count]; m];
        let mut seen = 0usize;
        for (idx, line) in lines {
            let lineno = idx + 1;
            if line.trim().is_empty() || line.starts_with("scenario,") {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 2 + tau {
                return Err(Error::Parse {
                    path: path.into(),
                    line: lineno,
                    msg: format!("expected {} fields, got {}", 2 + tau, parts.len()),
                });
            }
            let s_idx: usize = parts[0].parse().map_err(|e| Error::Parse {
                path: path.into(),
                line: lineno,
                msg: format!("bad scenario index: {e}"),
            })?;
            let k_idx = header
                .series
                .iter()
                .position(|n| n == parts[1])
                .ok_or_else(|| Error::Parse {
                    path: path.into(),
                    line: lineno,
                    msg: format!("unknown series `{}`", parts[1]),
                })?;
            if s_idx >= m {
                return Err(Error::Parse {
                    path: path.into(),
                    line: lineno,
                    msg: format!("scenario index {s_idx} out of range {m}"),
                });
            }
            for t in 0..tau {
                values[s_idx][k_idx][t] = parts[2 + t].parse().map_err(|e| Error::Parse {
                    path: path.into(),
                    line: lineno,
                    msg: format!("bad value: {e}"),
                })?;
            }
            seen += 1;
        }
        if seen != m * s_count {
            return Err(Error::Parse {
                path: path.into(),
                line: 1,
                msg: format!("expected {} body rows, got {seen}", m * s_count),
            });
        }
        Ok(ScenarioFile { header, values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let content = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read `{}`: {e}", path.display())))?;
        Self::parse(&content, &path.display().to_string())
    }

    /// Cross-sectional vector [series values...] of one scenario at one step.
    pub fn cross_section(&self, scenario: usize, step: usize) -> Vec<f64> {
        self.values[scenario]
            .iter()
            .map(|row| row[step])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_parse_round_trip() {
        let origin = chrono::NaiveDate::from_ymd_opt(2024, 3, 1)
            .unwrap()
            .and_hms_opt(5, 0, 0)
            .unwrap();
        let values = vec![
            vec![vec![1.5, 2.5], vec![0.5, 1.0]],
            vec![vec![1.0, 2.0], vec![0.25, 0.75]],
        ];
        let f = ScenarioFile::new(origin, 7, vec!["total".into(), "a".into()], values).unwrap();
        assert_eq!(f.header.shape, [2, 2, 2]);
        let text = f.render();
        let back = ScenarioFile::parse(&text, "mem").unwrap();
        assert_eq!(back.header.shape, f.header.shape);
        assert_eq!(back.values, f.values);
        assert_eq!(back.cross_section(0, 1), vec![2.5, 1.0]);
    }

    #[test]
    fn missing_rows_detected() {
        let origin = chrono::NaiveDate::from_ymd_opt(2024, 3, 1)
            .unwrap()
            .and_hms_opt(5, 0, 0)
            .unwrap();
        let values = vec![vec![vec![1.0], vec![2.0]]];
        let f = ScenarioFile::new(origin, 7, vec!["total".into(), "a".into()], values).unwrap();
        let text = f.render();
        let truncated: String = text.lines().take(3).collect::<Vec<_>>().join("\n");
        assert!(ScenarioFile::parse(&truncated, "mem").is_err());
    }
}
