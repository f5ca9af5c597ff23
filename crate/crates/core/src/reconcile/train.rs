//! Training of the reconciliation weight Q_r against the energy score.
//!
//! Base models stay frozen; only Q_r moves. Per time step, every scenario's
//! cross-sectional vector is reconciled, the per-step energy score against
//! the actual cross-section is summed over the horizon, and the gradient
//! flows to Q_r through the implicit KKT differentiation of each solve.

use super::{dcl_backward, reconcile, Hierarchy, ReconcilerParams};
use crate::error::{Error, Result};
use crate::numerics::adam::AdamState;
use crate::numerics::real::Real;
use crate::numerics::rng::Rng;
use crate::numerics::tensor::Tensor;
use crate::score::{energy_score, energy_score_grad, EnergyScoreConfig};
use std::collections::BTreeMap;

/// Scenario stack and actuals for one forecast origin.
#[derive(Debug, Clone)]
pub struct OriginData<R: Real = f64> {
    /// scenarios[s][t] is the cross-sectional vector [y, z..] of scenario s
    /// at horizon step t.
    pub scenarios: Vec<Vec<Vec<R>>>,
    /// actuals[t] is the observed cross-section at step t.
    pub actuals: Vec<Vec<R>>,
}

#[derive(Debug, Clone, Default)]
pub struct ReconcilerDataset<R: Real = f64> {
    pub origins: Vec<OriginData<R>>,
}

#[derive(Debug, Clone)]
pub struct ReconcilerTrainConfig<R: Real = f64> {
    pub epochs: usize,
    pub learning_rate: R,
    pub score: EnergyScoreConfig<R>,
    pub seed: u64,
}

impl<R: Real> Default for ReconcilerTrainConfig<R> {
    fn default() -> Self {
        ReconcilerTrainConfig {
            epochs: 40,
            learning_rate: R::cast(0.01),
            score: EnergyScoreConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReconcilerTrainReport<R: Real = f64> {
    pub params: ReconcilerParams<R>,
    /// Validation score per epoch; entry 0 is the untrained (identity) score.
    pub val_history: Vec<R>,
    pub best_epoch: usize,
}

/// Summed per-step energy score of reconciled scenarios over a dataset,
/// averaged across origins.
pub fn reconciled_score<R: Real>(
    data: &ReconcilerDataset<R>,
    params: &ReconcilerParams<R>,
    hier: &Hierarchy<R>,
    score_cfg: &EnergyScoreConfig<R>,
) -> Result<R> {
    if data.origins.is_empty() {
        return Err(Error::EmptyDataset("reconciler scoring set".into()));
    }
    let mut total = R::zero();
    for origin in &data.origins {
        let horizon = origin.actuals.len();
        for t in 0..horizon {
            let reconciled: Vec<Vec<R>> = origin
                .scenarios
                .iter()
                .map(|s| reconcile(&s[t], params, hier).map(|sol| sol.x_star))
                .collect::<Result<_>>()?;
            total = total + energy_score(&reconciled, &origin.actuals[t], score_cfg)?;
        }
    }
    Ok(total / R::cast(data.origins.len() as f64))
}

/// Train Q_r from identity by Adam on the reconciled energy score; returns
/// the parameters with the best validation score across epochs (the
/// untrained identity counts as epoch 0).
pub fn train_reconciler<R: Real>(
    train: &ReconcilerDataset<R>,
    val: &ReconcilerDataset<R>,
    hier: &Hierarchy<R>,
    cfg: &ReconcilerTrainConfig<R>,
) -> Result<ReconcilerTrainReport<R>> {
    if train.origins.is_empty() {
        return Err(Error::Config(
            "reconciler training requires a nonempty training partition".into(),
        ));
    }
    let dim = hier.dim();
    let mut params = ReconcilerParams::<R>::identity(dim);
    let mut adam = AdamState::new(cfg.learning_rate);
    let mut rng = Rng::derive(cfg.seed, "reconciler-train");

    let mut best = params.clone();
    let mut best_score = reconciled_score(val, &params, hier, &cfg.score)?;
    let mut best_epoch = 0usize;
    let mut val_history = vec![best_score];

    let mut order: Vec<usize> = (0..train.origins.len()).collect();
    for epoch in 1..=cfg.epochs {
        rng.shuffle(&mut order);
        for &oi in &order {
            let origin = &train.origins[oi];
            let mut grad_q_r = Tensor::zeros(vec![dim, dim]);
            let horizon = origin.actuals.len();
            for t in 0..horizon {
                let sols: Vec<_> = origin
                    .scenarios
                    .iter()
                    .map(|s| reconcile(&s[t], &params, hier))
                    .collect::<Result<_>>()?;
                let reconciled: Vec<Vec<R>> =
                    sols.iter().map(|sol| sol.x_star.clone()).collect();
                let upstreams =
                    energy_score_grad(&reconciled, &origin.actuals[t], &cfg.score)?;
                for (s, sol) in sols.iter().enumerate() {
                    let (gq, _gx) = dcl_backward(
                        sol,
                        &origin.scenarios[s][t],
                        &params,
                        hier,
                        &upstreams[s],
                    )?;
                    grad_q_r.add_assign(&gq);
                }
            }
            let mut grads = BTreeMap::new();
            grads.insert("q_r".to_string(), grad_q_r);
            let mut q_r = params.q_r().clone();
            adam.step([("q_r".to_string(), &mut q_r)], &grads)?;
            // keep the strictly-lower/diagonal structure and the floor
            for i in 0..dim {
                for j in i + 1..dim {
                    q_r.data_mut()[i * dim + j] = R::zero();
                }
            }
            let floored = {
                let floor = R::cast(super::DIAG_FLOOR);
                for i in 0..dim {
                    let idx = i * dim + i;
                    if q_r.data()[idx] < floor {
                        q_r.data_mut()[idx] = floor;
                    }
                }
                q_r
            };
            params.set_q_r(floored)?;
        }
        let score = reconciled_score(val, &params, hier, &cfg.score)?;
        val_history.push(score);
        if score < best_score {
            best_score = score;
            best = params.clone();
            best_epoch = epoch;
        }
    }

    Ok(ReconcilerTrainReport {
        params: best,
        val_history,
        best_epoch,
    })
}

/// Error-statistics weight: Q = (corr(errors) + ridge·I)⁻¹ over validation
/// base-forecast errors, factored into a lower-triangular Q_r.
pub fn coef_weight_from_errors<R: Real>(errors: &[Vec<R>], ridge: R) -> Result<ReconcilerParams<R>> {
    if errors.is_empty() {
        return Err(Error::EmptyDataset("error rows for the coef weight".into()));
    }
    let dim = errors[0].len();
    if errors.iter().any(|row| row.len() != dim) {
        return Err(Error::Contract("ragged error rows".into()));
    }
    let n = errors.len();
    if n < 2 {
        return Err(Error::Contract(
            "need at least two error observations for a correlation matrix".into(),
        ));
    }
    let n_r = R::cast(n as f64);
    let mut mean = vec![R::zero(); dim];
    for row in errors {
        for (m, v) in mean.iter_mut().zip(row) {
            *m = *m + *v;
        }
    }
    for m in &mut mean {
        *m = *m / n_r;
    }
    let mut cov: Tensor<R> = Tensor::zeros(vec![dim, dim]);
    for row in errors {
        for i in 0..dim {
            let di = row[i] - mean[i];
            for j in 0..dim {
                let dj = row[j] - mean[j];
                cov.data_mut()[i * dim + j] = cov.data()[i * dim + j] + di * dj;
            }
        }
    }
    for v in cov.data_mut() {
        *v = *v / n_r;
    }
    // correlation from covariance; degenerate variances get unit scale
    let mut corr = Tensor::zeros(vec![dim, dim]);
    let std: Vec<R> = (0..dim)
        .map(|i| {
            let v = cov.at(i, i).sqrt();
            if v > R::cast(1e-12) {
                v
            } else {
                R::one()
            }
        })
        .collect();
    for i in 0..dim {
        for j in 0..dim {
            corr.data_mut()[i * dim + j] = cov.at(i, j) / (std[i] * std[j]);
        }
    }
    for i in 0..dim {
        corr.data_mut()[i * dim + i] = corr.at(i, i) + ridge;
    }
    // Q = corr⁻¹ column by column
    let mut q = Tensor::zeros(vec![dim, dim]);
    for j in 0..dim {
        let mut e = vec![R::zero(); dim];
        e[j] = R::one();
        let col = crate::numerics::linalg::lu_solve(&corr, &e)?;
        for i in 0..dim {
            q.data_mut()[i * dim + j] = col[i];
        }
    }
    // symmetrize roundoff before factoring
    for i in 0..dim {
        for j in 0..i {
            let avg = (q.at(i, j) + q.at(j, i)) / R::cast(2.0);
            q.data_mut()[i * dim + j] = avg;
            q.data_mut()[j * dim + i] = avg;
        }
    }
    let mut q_r = crate::numerics::linalg::gram_factor_lower(&q)?;
    let floor = R::cast(super::DIAG_FLOOR);
    for i in 0..dim {
        let idx = i * dim + i;
        if q_r.data()[idx] < floor {
            q_r.data_mut()[idx] = floor;
        }
    }
    ReconcilerParams::new(q_r)
}
