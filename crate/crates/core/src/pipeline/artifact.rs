//! Versioned JSON artifacts for models and reconcilers. serde_json prints
//! f64 values in shortest-round-trip form, so save → load reproduces every
//! parameter bit for bit.

use crate::data::MinMaxScaler;
use crate::error::{Error, Result};
use crate::lstm::LstmParams;
use crate::mlp::MlpParams;
use crate::picnn::PicnnParams;
use crate::reconcile::ReconcilerParams;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ModelWeights {
    LstmPicnn {
        lstm: LstmParams,
        picnn: PicnnParams,
    },
    MlpQr {
        mlp: MlpParams,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_score: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub version: u32,
    pub series: String,
    pub weights: ModelWeights,
    pub target_scaler: MinMaxScaler,
    /// Scalers for the weather covariate columns, by feature name.
    pub covariate_scalers: BTreeMap<String, MinMaxScaler>,
    pub config_snapshot: BTreeMap<String, String>,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReconcilerArtifact {
    pub version: u32,
    pub mode: String,
    /// Cross-sectional series order [total, stations...].
    pub series: Vec<String>,
    pub params: ReconcilerParams,
}

fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let body = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Numerical(format!("serialization failed: {e}")))?;
    std::fs::write(path, body)?;
    Ok(())
}

fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let body = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read `{}`: {e}", path.display())))?;
    serde_json::from_str(&body).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: e.line(),
        msg: e.to_string(),
    })
}

impl ModelArtifact {
    pub fn save(&self, path: &Path) -> Result<()> {
        save_json(self, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let artifact: ModelArtifact = load_json(path)?;
        if artifact.version != ARTIFACT_VERSION {
            return Err(Error::Config(format!(
                "artifact version {} unsupported (expected {ARTIFACT_VERSION})",
                artifact.version
            )));
        }
        Ok(artifact)
    }
}

impl ReconcilerArtifact {
    pub fn save(&self, path: &Path) -> Result<()> {
        save_json(self, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let artifact: ReconcilerArtifact = load_json(path)?;
        if artifact.version != ARTIFACT_VERSION {
            return Err(Error::Config(format!(
                "artifact version {} unsupported (expected {ARTIFACT_VERSION})",
                artifact.version
            )));
        }
        Ok(artifact)
    }

    /// Q = Q_rᵀQ_r as a CSV matrix for heat-map plotting.
    pub fn q_matrix_csv(&self) -> String {
        let q = self.params.q();
        let dim = self.params.dim();
        let mut out = String::new();
        for i in 0..dim {
            for j in 0..dim {
                if j > 0 {
                    out.push(',');
                }
                out.push_str(&format!("{}", q.at(i, j)));
            }
            out.push('\n');
        }
        out
    }
}
