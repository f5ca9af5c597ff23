//! Base-model training: Adam over the energy score for the convex quantile
//! model, or over the summed pinball loss for the MLP baseline, with
//! per-epoch validation scoring and best-checkpoint selection.

use super::artifact::{EpochRecord, ModelArtifact, ModelWeights, ARTIFACT_VERSION};
use super::config::{ModelKind, RunConfig};
use super::dataset::PreparedData;
use crate::error::{Error, Result};
use crate::lstm::{self, BoundLstm, LstmParams};
use crate::mlp::{self, BoundMlp, MlpParams};
use crate::numerics::adam::AdamState;
use crate::numerics::graph::Graph;
use crate::numerics::rng::Rng;
use crate::numerics::tensor::Tensor;
use crate::numerics::{parse_combination, ActKind};
use crate::picnn::{self, BoundPicnn, PicnnParams, QuantileLevel};
use crate::score::{energy_score, EnergyScoreConfig};
use std::collections::BTreeMap;

fn merge_grads(acc: &mut BTreeMap<String, Tensor<f64>>, grads: BTreeMap<String, Tensor<f64>>) {
    for (name, g) in grads {
        match acc.get_mut(&name) {
            Some(existing) => existing.add_assign(&g),
            None => {
                acc.insert(name, g);
            }
        }
    }
}

/// u₀ fed to the convex network: the encoder state, with the horizon's
/// flattened calendar covariates appended when configured.
pub fn conditioning_dim(cfg: &RunConfig, cal_per_step: usize) -> usize {
    if cfg.future_covariates {
        cfg.lstm_hidden + cfg.horizon * cal_per_step
    } else {
        cfg.lstm_hidden
    }
}

pub struct LstmPicnnModel {
    pub lstm: LstmParams<f64>,
    pub picnn: PicnnParams<f64>,
}

impl LstmPicnnModel {
    pub fn condition_eval(
        &self,
        context: &[Tensor<f64>],
        future_flat: &[f64],
        future_covariates: bool,
    ) -> Result<Tensor<f64>> {
        let h = lstm::encode(&self.lstm, context)?;
        if future_covariates {
            let cal = Tensor::vector(future_flat.to_vec())?;
            Ok(Tensor::concat(&[&h, &cal]))
        } else {
            Ok(h)
        }
    }
}

/// Mean validation energy score on the scaled targets; the α stream is
/// re-derived every call so epoch scores are comparable.
pub fn validation_energy_score(
    model: &LstmPicnnModel,
    data: &PreparedData,
    series: &str,
    indices: &[usize],
    m: usize,
    seed: u64,
    cfg: &RunConfig,
    es: &EnergyScoreConfig<f64>,
) -> Result<f64> {
    let mut rng = Rng::derive(seed, &format!("val-alpha/{series}"));
    let mut total = 0.0;
    for &wi in indices {
        let context = data.context_tensors(series, wi);
        let future = data.future_flat(series, wi);
        let u0 = model.condition_eval(&context, &future, cfg.future_covariates)?;
        let mut samples = Vec::with_capacity(m);
        for _ in 0..m {
            let alpha = QuantileLevel::uniform(cfg.horizon, &mut rng);
            let q = picnn::quantile(&model.picnn, &alpha, &u0)?;
            samples.push(q.data().to_vec());
        }
        total += energy_score(&samples, &data.windows[series][wi].horizon, es)?;
    }
    Ok(total / indices.len() as f64)
}

pub fn train_lstm_picnn(
    cfg: &RunConfig,
    data: &PreparedData,
    series: &str,
) -> Result<(LstmPicnnModel, Vec<EpochRecord>, usize)> {
    let windows = &data.windows[series];
    let input_dim = windows[data.split.base_train[0]].context_dim();
    let cal_per_step = windows[data.split.base_train[0]].future_covariates[0].len();
    let u0_dim = conditioning_dim(cfg, cal_per_step);
    let acts = parse_combination(&cfg.activations)?;
    let act_u = ActKind::parse(&cfg.picnn_u_activation)?;
    let es = EnergyScoreConfig::new(cfg.beta)?;

    let mut init_rng = Rng::derive(cfg.seed, &format!("init/{series}"));
    let lstm = LstmParams::init(input_dim, cfg.lstm_hidden, cfg.lstm_layers, &mut init_rng);
    let mut picnn = PicnnParams::init(
        cfg.horizon,
        u0_dim,
        cfg.picnn_hidden,
        cfg.picnn_u_hidden,
        cfg.picnn_final_width,
        &acts,
        act_u,
        &mut init_rng,
    )?;
    picnn.project_weights();
    let mut model = LstmPicnnModel { lstm, picnn };

    let mut adam = AdamState::new(cfg.learning_rate);
    let mut shuffle_rng = Rng::derive(cfg.seed, &format!("shuffle/{series}"));
    let mut alpha_rng = Rng::derive(cfg.seed, &format!("train-alpha/{series}"));

    let mut history = Vec::new();
    let mut best_score = f64::INFINITY;
    let mut best: Option<(LstmParams<f64>, PicnnParams<f64>)> = None;
    let mut best_epoch = 0usize;
    let mut stale = 0usize;

    for epoch in 1..=cfg.max_epochs {
        if cfg.lr_decay_epoch > 0 && epoch == cfg.lr_decay_epoch {
            adam.set_learning_rate(cfg.learning_rate * cfg.lr_decay_factor);
        }
        let mut order = data.split.base_train.clone();
        shuffle_rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let mut acc = BTreeMap::new();
            let mut batch_loss = 0.0;
            for &wi in batch {
                let w = &windows[wi];
                let mut g: Graph<f64> = Graph::new();
                let lstm_bound = BoundLstm::bind(&mut g, &model.lstm, "lstm")?;
                let picnn_bound = BoundPicnn::bind(&mut g, &model.picnn, "picnn")?;
                let context = data.context_tensors(series, wi);
                let h = lstm::encode_node(&mut g, &lstm_bound, &model.lstm, &context)?;
                let u0 = if cfg.future_covariates {
                    let cal = g.constant(Tensor::vector(data.future_flat(series, wi))?);
                    g.concat(&[h, cal])
                } else {
                    h
                };
                let mut qs = Vec::with_capacity(cfg.train_scenarios);
                for _ in 0..cfg.train_scenarios {
                    let alpha = QuantileLevel::uniform(cfg.horizon, &mut alpha_rng);
                    let (_f, q) =
                        picnn::forward_node(&mut g, &picnn_bound, &model.picnn, &alpha, u0)?;
                    qs.push(q);
                }
                let target = Tensor::vector(w.horizon.clone())?;
                let loss = crate::score::energy_score_node(&mut g, &qs, &target, &es)?;
                let loss_val = g.value(loss).item();
                if !loss_val.is_finite() {
                    return Err(Error::Numerical(format!(
                        "training loss diverged at epoch {epoch} for series `{series}`"
                    )));
                }
                batch_loss += loss_val / batch.len() as f64;
                let scaled = g.scale(loss, 1.0 / batch.len() as f64);
                let grads = g.backward(scaled)?;
                merge_grads(&mut acc, grads);
            }
            let mut params = model.lstm.named_params_mut("lstm");
            params.extend(model.picnn.named_params_mut("picnn"));
            adam.step(params, &acc)?;
            model.picnn.project_weights();
            epoch_loss += batch_loss;
            batches += 1;
        }

        let val_score = validation_energy_score(
            &model,
            data,
            series,
            &data.split.base_val,
            cfg.val_scenarios,
            cfg.seed,
            cfg,
            &es,
        )?;
        history.push(EpochRecord {
            epoch,
            train_loss: epoch_loss / batches.max(1) as f64,
            val_score,
        });
        if val_score < best_score {
            best_score = val_score;
            best = Some((model.lstm.clone(), model.picnn.clone()));
            best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if cfg.early_stop_patience > 0 && stale >= cfg.early_stop_patience {
                break;
            }
        }
    }

    if let Some((lstm, picnn)) = best {
        model = LstmPicnnModel { lstm, picnn };
    }
    Ok((model, history, best_epoch))
}

/// Flattened MLP input: context rows then future calendar covariates.
pub fn mlp_input(data: &PreparedData, series: &str, idx: usize) -> Tensor<f64> {
    let w = &data.windows[series][idx];
    let mut flat: Vec<f64> = w.context.iter().flatten().copied().collect();
    flat.extend(w.future_covariates.iter().flatten().copied());
    Tensor::vector(flat).expect("finite features")
}

fn mlp_val_score(params: &MlpParams<f64>, data: &PreparedData, series: &str, idx: &[usize]) -> Result<f64> {
    let mut total = 0.0;
    let g_len = params.alpha_grid.len();
    for &wi in idx {
        let input = mlp_input(data, series, wi);
        let out = mlp::forward_eval(params, &input)?;
        let target = &data.windows[series][wi].horizon;
        for (t, &x) in target.iter().enumerate() {
            for (ai, &alpha) in params.alpha_grid.iter().enumerate() {
                let d = x - out.data()[t * g_len + ai];
                total += (alpha * d).max(0.0) + ((alpha - 1.0) * d).max(0.0);
            }
        }
    }
    Ok(total / idx.len() as f64)
}

pub fn train_mlp(
    cfg: &RunConfig,
    data: &PreparedData,
    series: &str,
) -> Result<(MlpParams<f64>, Vec<EpochRecord>, usize)> {
    let windows = &data.windows[series];
    let sample = &windows[data.split.base_train[0]];
    let input_dim = sample.context.len() * sample.context_dim()
        + sample.future_covariates.len() * sample.future_covariates[0].len();

    let mut overall_best: Option<(MlpParams<f64>, Vec<EpochRecord>, usize, f64)> = None;
    for (depth, width) in cfg.mlp_candidate_list()? {
        let mut init_rng = Rng::derive(cfg.seed, &format!("mlp-init/{series}/{depth}x{width}"));
        let mut params = MlpParams::init(
            input_dim,
            width,
            depth,
            cfg.horizon,
            mlp::default_alpha_grid(),
            &mut init_rng,
        )?;
        let mut adam = AdamState::new(cfg.learning_rate);
        let mut shuffle_rng = Rng::derive(cfg.seed, &format!("mlp-shuffle/{series}"));
        let mut history = Vec::new();
        let mut best_score = f64::INFINITY;
        let mut best: Option<MlpParams<f64>> = None;
        let mut best_epoch = 0usize;
        let mut stale = 0usize;

        for epoch in 1..=cfg.max_epochs {
            if cfg.lr_decay_epoch > 0 && epoch == cfg.lr_decay_epoch {
                adam.set_learning_rate(cfg.learning_rate * cfg.lr_decay_factor);
            }
            let mut order = data.split.base_train.clone();
            shuffle_rng.shuffle(&mut order);
            let mut epoch_loss = 0.0;
            let mut batches = 0usize;
            for batch in order.chunks(cfg.batch_size) {
                let mut acc = BTreeMap::new();
                let mut batch_loss = 0.0;
                for &wi in batch {
                    let input = mlp_input(data, series, wi);
                    let mut g: Graph<f64> = Graph::new();
                    let bound = BoundMlp::bind(&mut g, &params, "mlp")?;
                    let out = mlp::forward_node(&mut g, &bound, &params, &input)?;
                    let loss =
                        mlp::pinball_loss_node(&mut g, out, &windows[wi].horizon, &params)?;
                    let loss_val = g.value(loss).item();
                    if !loss_val.is_finite() {
                        return Err(Error::Numerical(format!(
                            "training loss diverged at epoch {epoch} for series `{series}`"
                        )));
                    }
                    batch_loss += loss_val / batch.len() as f64;
                    let scaled = g.scale(loss, 1.0 / batch.len() as f64);
                    merge_grads(&mut acc, g.backward(scaled)?);
                }
                adam.step(params.named_params_mut("mlp"), &acc)?;
                epoch_loss += batch_loss;
                batches += 1;
            }
            let val_score = mlp_val_score(&params, data, series, &data.split.base_val)?;
            history.push(EpochRecord {
                epoch,
                train_loss: epoch_loss / batches.max(1) as f64,
                val_score,
            });
            if val_score < best_score {
                best_score = val_score;
                best = Some(params.clone());
                best_epoch = epoch;
                stale = 0;
            } else {
                stale += 1;
                if cfg.early_stop_patience > 0 && stale >= cfg.early_stop_patience {
                    break;
                }
            }
        }
        let winner = best.unwrap_or_else(|| params.clone());
        let keep = match &overall_best {
            None => true,
            Some((_, _, _, score)) => best_score < *score,
        };
        if keep {
            overall_best = Some((winner, history, best_epoch, best_score));
        }
    }
    let (params, history, best_epoch, _) = overall_best.expect("at least one candidate");
    Ok((params, history, best_epoch))
}

/// Train one series and wrap the result as a saved artifact.
pub fn train_series(cfg: &RunConfig, data: &PreparedData, series: &str) -> Result<ModelArtifact> {
    let (weights, history, best_epoch) = match cfg.model {
        ModelKind::LstmPicnn => {
            let (model, history, best_epoch) = train_lstm_picnn(cfg, data, series)?;
            (
                ModelWeights::LstmPicnn {
                    lstm: model.lstm,
                    picnn: model.picnn,
                },
                history,
                best_epoch,
            )
        }
        ModelKind::MlpQr => {
            let (params, history, best_epoch) = train_mlp(cfg, data, series)?;
            (ModelWeights::MlpQr { mlp: params }, history, best_epoch)
        }
    };
    Ok(ModelArtifact {
        version: ARTIFACT_VERSION,
        series: series.to_string(),
        weights,
        target_scaler: data.target_scalers[series],
        covariate_scalers: data.covariate_scalers.clone(),
        config_snapshot: cfg.raw.clone(),
        history,
        best_epoch,
        seed: cfg.seed,
    })
}

/// Scaled-space scenario matrix (m × τ) for one window from a trained
/// artifact. Deterministic given the seed.
pub fn scenarios_scaled(
    artifact: &ModelArtifact,
    data: &PreparedData,
    series: &str,
    window_idx: usize,
    m: usize,
    seed: u64,
    cfg: &RunConfig,
) -> Result<Vec<Vec<f64>>> {
    match &artifact.weights {
        ModelWeights::LstmPicnn { lstm, picnn } => {
            let model = LstmPicnnModel {
                lstm: lstm.clone(),
                picnn: picnn.clone(),
            };
            let context = data.context_tensors(series, window_idx);
            let future = data.future_flat(series, window_idx);
            let u0 = model.condition_eval(&context, &future, cfg.future_covariates)?;
            let set = picnn::sample_scenarios(picnn, &u0, m, seed)?;
            Ok(set.samples)
        }
        ModelWeights::MlpQr { mlp: params } => {
            let input = mlp_input(data, series, window_idx);
            mlp::sample_scenarios(params, &input, m, seed)
        }
    }
}

/// Seed for the scenario stream of one (series, origin) pair.
pub fn scenario_seed(base: u64, series: &str, origin: chrono::NaiveDateTime) -> u64 {
    let mut h: u64 = base ^ 0x9e3779b97f4a7c15;
    for b in series.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100000001b3);
    }
    let ords = origin.format("%Y%m%d%H").to_string();
    for b in ords.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}
