//! Run configuration: flat key=value file, validated defaults, CLI overrides.

use crate::data::SplitSpec;
use crate::error::{Error, Result};
use chrono::NaiveDateTime;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const ALLOWED_HORIZONS: [usize; 4] = [24, 48, 72, 96];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    LstmPicnn,
    MlpQr,
}

impl ModelKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "lstm-picnn" => Ok(ModelKind::LstmPicnn),
            "mlp-qr" => Ok(ModelKind::MlpQr),
            other => Err(Error::Config(format!("unknown model kind `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::LstmPicnn => "lstm-picnn",
            ModelKind::MlpQr => "mlp-qr",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightMode {
    Dcl,
    Coef,
    Id,
}

impl WeightMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "dcl" => Ok(WeightMode::Dcl),
            "coef" => Ok(WeightMode::Coef),
            "id" => Ok(WeightMode::Id),
            other => Err(Error::Config(format!("unknown weight mode `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            WeightMode::Dcl => "dcl",
            WeightMode::Coef => "coef",
            WeightMode::Id => "id",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pairing {
    Index,
    Random,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub sessions_file: PathBuf,
    pub weather_file: PathBuf,
    /// When set, the weather CSV is fetched from this http:// URL instead of
    /// the file.
    pub weather_url: Option<String>,
    pub holidays_file: PathBuf,
    pub out_dir: PathBuf,

    pub context_length: usize,
    pub horizon: usize,
    pub model: ModelKind,
    pub lstm_layers: usize,
    pub lstm_hidden: usize,
    pub picnn_layers: usize,
    pub picnn_hidden: usize,
    pub picnn_u_hidden: usize,
    pub picnn_final_width: usize,
    /// Per-layer convex-path activations as r/g codes, e.g. "rg".
    pub activations: String,
    /// Activation on the unconstrained context path.
    pub picnn_u_activation: String,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Epoch at which the learning rate is scaled down (0 disables).
    pub lr_decay_epoch: usize,
    pub lr_decay_factor: f64,
    pub max_epochs: usize,
    pub beta: f64,
    pub scenarios: usize,
    pub seed: u64,
    pub split_train_end: NaiveDateTime,
    pub split_val_end: NaiveDateTime,
    pub reconciler_fraction: f64,
    pub weight_mode: WeightMode,
    pub workers: usize,

    pub train_scenarios: usize,
    pub val_scenarios: usize,
    pub forecast_stride: usize,
    pub forecast_partition: String,
    pub future_covariates: bool,
    pub dcl_epochs: usize,
    pub dcl_learning_rate: f64,
    pub dcl_scenarios: usize,
    pub sweep_epochs: usize,
    pub mlp_hidden: usize,
    pub mlp_layers: usize,
    /// Candidate depth×width pairs, e.g. "2x100,3x150"; empty means the
    /// single (mlp_layers, mlp_hidden) candidate.
    pub mlp_candidates: String,
    pub early_stop_patience: usize,
    pub scenario_pairing: Pairing,
    pub eval_flat_energy_score: bool,

    /// The key=value view, preserved for artifact snapshots.
    pub raw: BTreeMap<String, String>,
}

fn parse_num<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str, default: T) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    match map.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|e| Error::Config(format!("bad value for `{key}`: {e}"))),
    }
}

fn parse_bool(map: &BTreeMap<String, String>, key: &str, default: bool) -> Result<bool> {
    match map.get(key).map(String::as_str) {
        None => Ok(default),
        Some("true") | Some("1") => Ok(true),
        Some("false") | Some("0") => Ok(false),
        Some(other) => Err(Error::Config(format!("bad boolean for `{key}`: `{other}`"))),
    }
}

fn parse_ts(map: &BTreeMap<String, String>, key: &str) -> Result<NaiveDateTime> {
    let v = map
        .get(key)
        .ok_or_else(|| Error::Config(format!("missing required key `{key}`")))?;
    NaiveDateTime::parse_from_str(v, "%Y-%m-%dT%H:%M")
        .map_err(|e| Error::Config(format!("bad timestamp for `{key}`: {e}")))
}

impl RunConfig {
    /// Parse a `key=value` config file; later CLI overrides may rewrite
    /// individual keys before validation.
    pub fn from_file(path: &Path, overrides: &BTreeMap<String, String>) -> Result<Self> {
        let content = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config `{}`: {e}", path.display()))
        })?;
        let mut map = BTreeMap::new();
        for (idx, line) in content.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let (k, v) = t.split_once('=').ok_or_else(|| Error::Parse {
                path: path.display().to_string(),
                line: idx + 1,
                msg: format!("expected key=value, got `{t}`"),
            })?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        for (k, v) in overrides {
            map.insert(k.clone(), v.clone());
        }
        Self::from_map(map)
    }

    pub fn from_map(map: BTreeMap<String, String>) -> Result<Self> {
        let require_path = |key: &str| -> Result<PathBuf> {
            map.get(key)
                .map(PathBuf::from)
                .ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
        };
        let cfg = RunConfig {
            sessions_file: require_path("sessions_file")?,
            weather_file: require_path("weather_file")?,
            weather_url: map.get("weather_url").cloned(),
            holidays_file: require_path("holidays_file")?,
            out_dir: require_path("out_dir")?,
            context_length: parse_num(&map, "context_length", 168)?,
            horizon: parse_num(&map, "horizon", 24)?,
            model: ModelKind::parse(map.get("model").map(String::as_str).unwrap_or("lstm-picnn"))?,
            lstm_layers: parse_num(&map, "lstm_layers", 2)?,
            lstm_hidden: parse_num(&map, "lstm_hidden", 100)?,
            picnn_layers: parse_num(&map, "picnn_layers", 2)?,
            picnn_hidden: parse_num(&map, "picnn_hidden", 40)?,
            picnn_u_hidden: parse_num(
                &map,
                "picnn_u_hidden",
                parse_num(&map, "picnn_hidden", 40)?,
            )?,
            picnn_final_width: parse_num(
                &map,
                "picnn_final_width",
                parse_num(&map, "picnn_hidden", 40)?,
            )?,
            activations: map.get("activations").cloned().unwrap_or_else(|| "rg".into()),
            picnn_u_activation: map
                .get("picnn_u_activation")
                .cloned()
                .unwrap_or_else(|| "tanh".into()),
            batch_size: parse_num(&map, "batch_size", 64)?,
            learning_rate: parse_num(&map, "learning_rate", 0.001)?,
            lr_decay_epoch: parse_num(&map, "lr_decay_epoch", 0usize)?,
            lr_decay_factor: parse_num(&map, "lr_decay_factor", 0.2)?,
            max_epochs: parse_num(&map, "max_epochs", 200)?,
            beta: parse_num(&map, "beta", 1.0)?,
            scenarios: parse_num(&map, "scenarios", 1000)?,
            seed: parse_num(&map, "seed", 0u64)?,
            split_train_end: parse_ts(&map, "split_train_end")?,
            split_val_end: parse_ts(&map, "split_val_end")?,
            reconciler_fraction: parse_num(&map, "reconciler_fraction", 0.8)?,
            weight_mode: WeightMode::parse(
                map.get("weight_mode").map(String::as_str).unwrap_or("dcl"),
            )?,
            workers: parse_num(&map, "workers", 0usize)?,
            train_scenarios: parse_num(&map, "train_scenarios", 64)?,
            val_scenarios: parse_num(&map, "val_scenarios", 64)?,
            forecast_stride: parse_num(&map, "forecast_stride", 24)?,
            forecast_partition: map
                .get("forecast_partition")
                .cloned()
                .unwrap_or_else(|| "test".into()),
            future_covariates: parse_bool(&map, "future_covariates", true)?,
            dcl_epochs: parse_num(&map, "dcl_epochs", 40)?,
            dcl_learning_rate: parse_num(&map, "dcl_learning_rate", 0.01)?,
            dcl_scenarios: parse_num(&map, "dcl_scenarios", 100)?,
            sweep_epochs: parse_num(&map, "sweep_epochs", 0usize)?,
            mlp_hidden: parse_num(&map, "mlp_hidden", 100)?,
            mlp_layers: parse_num(&map, "mlp_layers", 2)?,
            mlp_candidates: map.get("mlp_candidates").cloned().unwrap_or_default(),
            early_stop_patience: parse_num(&map, "early_stop_patience", 0usize)?,
            scenario_pairing: match map
                .get("scenario_pairing")
                .map(String::as_str)
                .unwrap_or("index")
            {
                "index" => Pairing::Index,
                "random" => Pairing::Random,
                other => {
                    return Err(Error::Config(format!(
                        "unknown scenario pairing `{other}`"
                    )))
                }
            },
            eval_flat_energy_score: parse_bool(&map, "eval_flat_energy_score", false)?,
            raw: map,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if !ALLOWED_HORIZONS.contains(&self.horizon) {
            return Err(Error::Config(format!(
                "horizon must be one of {ALLOWED_HORIZONS:?}, got {}",
                self.horizon
            )));
        }
        if self.activations.len() != self.picnn_layers {
            return Err(Error::Config(format!(
                "activation string `{}` length must equal picnn_layers {}",
                self.activations, self.picnn_layers
            )));
        }
        crate::numerics::parse_combination(&self.activations)?;
        crate::numerics::ActKind::parse(&self.picnn_u_activation)?;
        if self.context_length == 0 {
            return Err(Error::Config("context_length must be positive".into()));
        }
        if !(0.0 < self.reconciler_fraction && self.reconciler_fraction < 1.0) {
            return Err(Error::Config("reconciler_fraction must lie in (0,1)".into()));
        }
        if !(0.0 < self.beta && self.beta < 2.0) {
            return Err(Error::Config("beta must lie in (0,2)".into()));
        }
        if self.split_train_end >= self.split_val_end {
            return Err(Error::Config("split boundaries must increase".into()));
        }
        if self.scenarios == 0 {
            return Err(Error::Config("scenarios must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        Ok(())
    }

    pub fn split_spec(&self) -> Result<SplitSpec> {
        SplitSpec::new(
            self.split_train_end,
            self.split_val_end,
            self.reconciler_fraction,
        )
    }

    /// MLP candidates as (depth, width) pairs.
    pub fn mlp_candidate_list(&self) -> Result<Vec<(usize, usize)>> {
        if self.mlp_candidates.trim().is_empty() {
            return Ok(vec![(self.mlp_layers, self.mlp_hidden)]);
        }
        let mut out = Vec::new();
        for part in self.mlp_candidates.split(',') {
            let (d, w) = part
                .trim()
                .split_once('x')
                .ok_or_else(|| Error::Config(format!("bad mlp candidate `{part}`")))?;
            let depth: usize = d
                .parse()
                .map_err(|e| Error::Config(format!("bad mlp depth `{d}`: {e}")))?;
            let width: usize = w
                .parse()
                .map_err(|e| Error::Config(format!("bad mlp width `{w}`: {e}")))?;
            out.push((depth, width));
        }
        Ok(out)
    }

    pub fn worker_count(&self) -> usize {
        if self.workers > 0 {
            self.workers
        } else {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_map() -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("sessions_file".into(), "s.csv".into());
        m.insert("weather_file".into(), "w.csv".into());
        m.insert("holidays_file".into(), "h.txt".into());
        m.insert("out_dir".into(), "out".into());
        m.insert("split_train_end".into(), "2024-02-01T00:00".into());
        m.insert("split_val_end".into(), "2024-02-15T00:00".into());
        m
    }

    #[test]
    fn defaults_match_documented_values() {
        let cfg = RunConfig::from_map(minimal_map()).unwrap();
        assert_eq!(cfg.context_length, 168);
        assert_eq!(cfg.horizon, 24);
        assert_eq!(cfg.lstm_layers, 2);
        assert_eq!(cfg.lstm_hidden, 100);
        assert_eq!(cfg.picnn_layers, 2);
        assert_eq!(cfg.picnn_hidden, 40);
        assert_eq!(cfg.activations, "rg");
        assert_eq!(cfg.batch_size, 64);
        assert_eq!(cfg.learning_rate, 0.001);
        assert_eq!(cfg.max_epochs, 200);
        assert_eq!(cfg.beta, 1.0);
        assert_eq!(cfg.scenarios, 1000);
        assert_eq!(cfg.reconciler_fraction, 0.8);
    }

    #[test]
    fn horizon_must_be_allowed() {
        let mut m = minimal_map();
        m.insert("horizon".into(), "36".into());
        assert!(RunConfig::from_map(m).is_err());
        for h in ["24", "48", "72", "96"] {
            let mut m = minimal_map();
            m.insert("horizon".into(), h.into());
            assert!(RunConfig::from_map(m).is_ok(), "horizon {h}");
        }
    }

    #[test]
    fn activation_string_length_checked() {
        let mut m = minimal_map();
        m.insert("activations".into(), "rgr".into());
        assert!(RunConfig::from_map(m).is_err());
        let mut m = minimal_map();
        m.insert("activations".into(), "rx".into());
        assert!(RunConfig::from_map(m).is_err());
    }

    #[test]
    fn mlp_candidates_parse() {
        let mut m = minimal_map();
        m.insert("mlp_candidates".into(), "2x100,3x150".into());
        let cfg = RunConfig::from_map(m).unwrap();
        assert_eq!(cfg.mlp_candidate_list().unwrap(), vec![(2, 100), (3, 150)]);
        let cfg = RunConfig::from_map(minimal_map()).unwrap();
        assert_eq!(cfg.mlp_candidate_list().unwrap(), vec![(2, 100)]);
    }
}
