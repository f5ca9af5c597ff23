//! Assembles the training view of ingested data: scaled per-series windows,
//! chronological splits, and the scalers that undo everything at export.

use super::config::RunConfig;
use crate::data::{
    make_windows_over, parse_holidays, split_windows, CovariateMatrix, FeatureWindow,
    MinMaxScaler, SplitIndices, TimeSeriesFrame, WeatherTable, FEATURE_NAMES,
};
use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor;
use chrono::NaiveDateTime;
use std::collections::BTreeMap;

pub struct PreparedData {
    pub frame: TimeSeriesFrame,
    pub covariates: CovariateMatrix,
    /// [total, stations...]
    pub series_names: Vec<String>,
    pub target_scalers: BTreeMap<String, MinMaxScaler>,
    pub covariate_scalers: BTreeMap<String, MinMaxScaler>,
    /// Windows over the scaled target with scaled weather covariates.
    pub windows: BTreeMap<String, Vec<FeatureWindow>>,
    /// Partition indices; identical origin layout for every series.
    pub split: SplitIndices,
}

pub fn features_csv(frame: &TimeSeriesFrame, cov: &CovariateMatrix) -> String {
    let mut out = String::from("timestamp");
    for name in FEATURE_NAMES {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (t, row) in cov.rows.iter().enumerate() {
        out.push_str(&frame.timestamp(t).format("%Y-%m-%dT%H:%M").to_string());
        for v in row {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

pub fn parse_features_csv(content: &str, path: &str, expected_len: usize) -> Result<CovariateMatrix> {
    let mut lines = content.lines().enumerate();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse {
            path: path.into(),
            line: 1,
            msg: "empty features file".into(),
        })?
        .1;
    let expected_header = {
        let mut h = String::from("timestamp");
        for name in FEATURE_NAMES {
            h.push(',');
            h.push_str(name);
        }
        h
    };
    if header != expected_header {
        return Err(Error::Parse {
            path: path.into(),
            line: 1,
            msg: format!("unexpected features header `{header}`"),
        });
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 1 + FEATURE_NAMES.len() {
            return Err(Error::Parse {
                path: path.into(),
                line: idx + 1,
                msg: "wrong field count".into(),
            });
        }
        let row: std::result::Result<Vec<f64>, _> =
            parts[1..].iter().map(|p| p.parse::<f64>()).collect();
        rows.push(row.map_err(|e| Error::Parse {
            path: path.into(),
            line: idx + 1,
            msg: format!("bad value: {e}"),
        })?);
    }
    if rows.len() != expected_len {
        return Err(Error::Contract(format!(
            "features file has {} rows, frame has {expected_len}",
            rows.len()
        )));
    }
    Ok(CovariateMatrix { rows })
}

/// Read the weather CSV from the configured URL or file.
pub fn load_weather(cfg: &RunConfig) -> Result<WeatherTable> {
    match &cfg.weather_url {
        Some(url) => {
            let body = crate::data::fetch_http_csv(url)?;
            WeatherTable::parse_csv(&body, url)
        }
        None => {
            let content = std::fs::read_to_string(&cfg.weather_file).map_err(|e| {
                Error::Config(format!(
                    "cannot read weather file `{}`: {e}",
                    cfg.weather_file.display()
                ))
            })?;
            WeatherTable::parse_csv(&content, &cfg.weather_file.display().to_string())
        }
    }
}

pub fn load_holidays(cfg: &RunConfig) -> Result<std::collections::BTreeSet<chrono::NaiveDate>> {
    let content = std::fs::read_to_string(&cfg.holidays_file).map_err(|e| {
        Error::Config(format!(
            "cannot read holidays file `{}`: {e}",
            cfg.holidays_file.display()
        ))
    })?;
    parse_holidays(&content, &cfg.holidays_file.display().to_string())
}

pub fn hourly_path(cfg: &RunConfig) -> std::path::PathBuf {
    cfg.out_dir.join("hourly.csv")
}

pub fn features_path(cfg: &RunConfig) -> std::path::PathBuf {
    cfg.out_dir.join("features.csv")
}

/// Load ingested files and build the fully prepared dataset.
pub fn prepare(cfg: &RunConfig) -> Result<PreparedData> {
    let hourly = hourly_path(cfg);
    let content = std::fs::read_to_string(&hourly).map_err(|e| {
        Error::Config(format!(
            "cannot read `{}` (run ingest first): {e}",
            hourly.display()
        ))
    })?;
    let frame = TimeSeriesFrame::from_csv(&content, &hourly.display().to_string())?;
    let fpath = features_path(cfg);
    let fcontent = std::fs::read_to_string(&fpath).map_err(|e| {
        Error::Config(format!(
            "cannot read `{}` (run ingest first): {e}",
            fpath.display()
        ))
    })?;
    let covariates = parse_features_csv(&fcontent, &fpath.display().to_string(), frame.len())?;
    prepare_from(cfg, frame, covariates)
}

/// Same as [`prepare`] but from in-memory inputs.
pub fn prepare_from(
    cfg: &RunConfig,
    frame: TimeSeriesFrame,
    covariates: CovariateMatrix,
) -> Result<PreparedData> {
    let series_names = frame.series_names();

    // scalers fit on rows strictly before the training boundary
    let train_rows = (0..frame.len())
        .take_while(|&t| frame.timestamp(t) < cfg.split_train_end)
        .count();
    if train_rows == 0 {
        return Err(Error::Config(
            "no rows before split_train_end; scalers cannot be fit".into(),
        ));
    }

    let mut target_scalers = BTreeMap::new();
    for name in &series_names {
        let series = frame.series(name).expect("known series");
        target_scalers.insert(name.clone(), MinMaxScaler::fit(&series[..train_rows])?);
    }
    // weather columns are scaled; calendar features are already bounded
    let mut covariate_scalers = BTreeMap::new();
    for (k, feat) in FEATURE_NAMES.iter().enumerate().take(3) {
        let col: Vec<f64> = covariates.rows[..train_rows].iter().map(|r| r[k]).collect();
        covariate_scalers.insert(feat.to_string(), MinMaxScaler::fit(&col)?);
    }

    let scaled_cov = CovariateMatrix {
        rows: covariates
            .rows
            .iter()
            .map(|r| {
                let mut row = r.clone();
                for (k, feat) in FEATURE_NAMES.iter().enumerate().take(3) {
                    row[k] = covariate_scalers[*feat].transform(r[k]);
                }
                row
            })
            .collect(),
    };

    let mut windows = BTreeMap::new();
    for name in &series_names {
        let scaler = &target_scalers[name];
        let scaled = scaler.transform_all(frame.series(name).expect("known series"));
        let w = make_windows_over(
            &scaled,
            frame.start(),
            &scaled_cov,
            cfg.context_length,
            cfg.horizon,
        )?;
        windows.insert(name.clone(), w);
    }

    let split = split_windows(&windows[&series_names[0]], &cfg.split_spec()?)?;
    Ok(PreparedData {
        frame,
        covariates,
        series_names,
        target_scalers,
        covariate_scalers,
        windows,
        split,
    })
}

impl PreparedData {
    /// Window index whose origin matches, in the canonical (sorted) order.
    pub fn origin_of(&self, idx: usize) -> NaiveDateTime {
        self.windows[&self.series_names[0]][idx].origin
    }

    pub fn partition_indices(&self, name: &str) -> Result<&[usize]> {
        match name {
            "train" => Ok(&self.split.base_train),
            "val" => Ok(&self.split.base_val),
            "test" => Ok(&self.split.test),
            "dcl-train" => Ok(&self.split.dcl_train),
            "dcl-val" => Ok(&self.split.dcl_val),
            other => Err(Error::Config(format!("unknown partition `{other}`"))),
        }
    }

    /// Context rows of one window as tensors.
    pub fn context_tensors(&self, series: &str, idx: usize) -> Vec<Tensor<f64>> {
        self.windows[series][idx]
            .context
            .iter()
            .map(|row| Tensor::vector(row.clone()).expect("finite features"))
            .collect()
    }

    /// Flattened future calendar covariates of a window.
    pub fn future_flat(&self, series: &str, idx: usize) -> Vec<f64> {
        self.windows[series][idx]
            .future_covariates
            .iter()
            .flatten()
            .copied()
            .collect()
    }
}
