//! Evaluation metrics: point errors (MAE, RMSE, MASE), quantile loss,
//! Winkler score, energy-score reporting, and one-way ANOVA with
//! F-distribution p-values.

use crate::error::{Error, Result};
use crate::numerics::real::Real;
use crate::numerics::special::f_survival;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointMetrics<R: Real = f64> {
    pub mae: R,
    pub rmse: R,
    /// MASE per requested lag; `None` marks an undefined ratio (zero naive
    /// error), which is reported distinctly rather than raised.
    pub mase: Vec<(usize, Option<R>)>,
}

/// MAE, RMSE and MASE(t0) over an evaluation window. `history` holds actuals
/// immediately preceding the window so the naive reference x_{t−t0} exists
/// for early steps; both MASE sums run over exactly the steps where it does.
pub fn point_metrics<R: Real>(
    actual: &[R],
    predicted: &[R],
    history: &[R],
    t0_list: &[usize],
) -> Result<PointMetrics<R>> {
    if actual.len() != predicted.len() {
        return Err(Error::Contract(format!(
            "actual length {} != predicted length {}",
            actual.len(),
            predicted.len()
        )));
    }
    if actual.is_empty() {
        return Err(Error::Contract("point metrics need a nonempty series".into()));
    }
    let n = actual.len();
    let n_r = R::cast(n as f64);
    let mut abs_sum = R::zero();
    let mut sq_sum = R::zero();
    for (a, p) in actual.iter().zip(predicted) {
        let d = *a - *p;
        abs_sum = abs_sum + d.abs();
        sq_sum = sq_sum + d * d;
    }
    let mae = abs_sum / n_r;
    let rmse = (sq_sum / n_r).sqrt();

    let mut mase = Vec::with_capacity(t0_list.len());
    for &t0 in t0_list {
        if t0 == 0 {
            return Err(Error::Contract("MASE lag must be positive".into()));
        }
        let mut model_sum = R::zero();
        let mut naive_sum = R::zero();
        let mut steps = 0usize;
        for t in 0..n {
            let reference = if t >= t0 {
                Some(actual[t - t0])
            } else {
                let back = t0 - t;
                if back <= history.len() {
                    Some(history[history.len() - back])
                } else {
                    None
                }
            };
            let Some(x_ref) = reference else { continue };
            steps += 1;
            model_sum = model_sum + (actual[t] - predicted[t]).abs();
            naive_sum = naive_sum + (actual[t] - x_ref).abs();
        }
        let value = if steps == 0 || naive_sum == R::zero() {
            None
        } else {
            Some(model_sum / naive_sum)
        };
        mase.push((t0, value));
    }

    Ok(PointMetrics { mae, rmse, mase })
}

/// Pinball loss at level α, averaged over steps.
pub fn quantile_loss<R: Real>(actual: &[R], predicted: &[R], alpha: R) -> Result<R> {
    if actual.is_empty() {
        return Err(Error::Contract("quantile loss needs a nonempty series".into()));
    }
    if actual.len() != predicted.len() {
        return Err(Error::Contract("quantile loss length mismatch".into()));
    }
    if !(alpha > R::zero() && alpha < R::one()) {
        return Err(Error::Domain(format!("quantile level must be in (0,1), got {alpha}")));
    }
    let mut acc = R::zero();
    for (x, xh) in actual.iter().zip(predicted) {
        if *x < *xh {
            acc = acc + (R::one() - alpha) * (*xh - *x);
        } else {
            acc = acc + alpha * (*x - *xh);
        }
    }
    Ok(acc / R::cast(actual.len() as f64))
}

/// Winkler interval score at confidence level α, averaged over steps.
pub fn winkler<R: Real>(actual: &[R], lower: &[R], upper: &[R], alpha: R) -> Result<R> {
    if actual.is_empty() {
        return Err(Error::Contract("winkler needs a nonempty series".into()));
    }
    if actual.len() != lower.len() || actual.len() != upper.len() {
        return Err(Error::Contract("winkler length mismatch".into()));
    }
    if !(alpha > R::zero() && alpha < R::one()) {
        return Err(Error::Domain(format!("confidence level must be in (0,1), got {alpha}")));
    }
    let penalty = R::cast(2.0) / (R::one() - alpha);
    let mut acc = R::zero();
    for ((x, l), u) in actual.iter().zip(lower).zip(upper) {
        if *l > *u {
            return Err(Error::Contract(format!("interval lower {l} exceeds upper {u}")));
        }
        let width = *u - *l;
        let contribution = if *x < *l {
            width + penalty * (*l - *x)
        } else if *x > *u {
            width + penalty * (*x - *u)
        } else {
            width
        };
        acc = acc + contribution;
    }
    Ok(acc / R::cast(actual.len() as f64))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AnovaResult {
    pub f_statistic: f64,
    pub p_value: f64,
    pub df_between: usize,
    pub df_within: usize,
}

/// One-way ANOVA. Zero within-group variance with nonzero between is
/// reported as F = +∞, p = 0; fully degenerate data as F = 0, p = 1.
pub fn anova_oneway<R: Real>(groups: &[Vec<R>]) -> Result<AnovaResult> {
    if groups.len() < 2 {
        return Err(Error::Contract("ANOVA requires at least two groups".into()));
    }
    if groups.iter().any(|g| g.len() < 2) {
        return Err(Error::Contract(
            "ANOVA requires at least two observations per group".into(),
        ));
    }
    let k = groups.len();
    let n_total: usize = groups.iter().map(|g| g.len()).sum();
    let grand_mean: f64 =
        groups.iter().flat_map(|g| g.iter().map(|v| v.widen())).sum::<f64>() / n_total as f64;

    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let mean: f64 = g.iter().map(|v| v.widen()).sum::<f64>() / g.len() as f64;
        ss_between += g.len() as f64 * (mean - grand_mean).powi(2);
        for v in g {
            ss_within += (v.widen() - mean).powi(2);
        }
    }
    let df_between = k - 1;
    let df_within = n_total - k;
    let msb = ss_between / df_between as f64;
    let msw = ss_within / df_within as f64;

    let (f_statistic, p_value) = if msw <= 0.0 {
        if msb <= 0.0 {
            (0.0, 1.0) // all groups constant and equal
        } else {
            (f64::INFINITY, 0.0)
        }
    } else {
        let f = msb / msw;
        (f, f_survival(f, df_between as f64, df_within as f64)?)
    };
    Ok(AnovaResult {
        f_statistic,
        p_value,
        df_between,
        df_within,
    })
}

/// Overall ANOVA plus every pairwise comparison, keyed by group indices.
pub fn anova_with_pairwise<R: Real>(
    groups: &[Vec<R>],
) -> Result<(AnovaResult, Vec<((usize, usize), AnovaResult)>)> {
    let overall = anova_oneway(groups)?;
    let mut pairwise = Vec::new();
    for i in 0..groups.len() {
        for j in i + 1..groups.len() {
            let pair = vec![groups[i].clone(), groups[j].clone()];
            pairwise.push(((i, j), anova_oneway(&pair)?));
        }
    }
    Ok((overall, pairwise))
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn empirical_quantile<R: Real>(values: &[R], alpha: R) -> Result<R> {
    if values.is_empty() {
        return Err(Error::Contract("empirical quantile of an empty set".into()));
    }
    let mut sorted: Vec<R> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let h = alpha.widen() * (sorted.len() as f64 - 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        return Ok(sorted[lo]);
    }
    let w = R::cast(h - lo as f64);
    Ok(sorted[lo] * (R::one() - w) + sorted[hi] * w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::Rng;

    #[test]
    fn perfect_prediction_zeroes_point_errors() {
        let a = [1.0f64, 2.0, 3.0];
        let m = point_metrics(&a, &a, &[], &[1]).unwrap();
        assert_eq!(m.mae, 0.0);
        assert_eq!(m.rmse, 0.0);
    }

    #[test]
    fn hand_evaluated_mae_rmse() {
        let m = point_metrics(&[1.0f64, 2.0], &[2.0, 4.0], &[], &[]).unwrap();
        assert!((m.mae - 1.5).abs() < 1e-15);
        assert!((m.rmse - 2.5f64.sqrt()).abs() < 1e-15);
        assert!((m.rmse - 1.5811).abs() < 1e-4);
    }

    #[test]
    fn mase_parity_with_naive() {
        // prediction errors equal to naive-1 errors at every step ⇒ MASE = 1
        let actual = [2.0f64, 4.0, 7.0, 11.0];
        // naive-1 abs errors (with history [1]): |2−1|,|4−2|,|7−4|,|11−7| = 1,2,3,4
        let predicted = [3.0, 2.0, 4.0, 7.0]; // abs errors 1,2,3,4
        let m = point_metrics(&actual, &predicted, &[1.0], &[1]).unwrap();
        assert!((m.mase[0].1.unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mase_zero_denominator_is_undefined_marker() {
        let actual = [5.0f64, 5.0, 5.0];
        let predicted = [4.0, 4.0, 4.0];
        let m = point_metrics(&actual, &predicted, &[5.0], &[1]).unwrap();
        assert!(m.mase[0].1.is_none());
    }

    #[test]
    fn mase_without_history_restricts_steps() {
        let actual = [1.0f64, 2.0, 4.0, 8.0];
        let predicted = [1.5, 2.5, 4.5, 8.5];
        let m = point_metrics(&actual, &predicted, &[], &[2]).unwrap();
        // only t = 2,3 have references: model 0.5+0.5, naive |4−1|+|8−2| = 9
        assert!((m.mase[0].1.unwrap() - 1.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn rmse_dominates_mae() {
        let mut rng = Rng::seed_from(3);
        for _ in 0..100 {
            let n = 2 + (rng.next_u64() % 20) as usize;
            let a: Vec<f64> = (0..n).map(|_| rng.uniform(-5.0, 5.0)).collect();
            let p: Vec<f64> = (0..n).map(|_| rng.uniform(-5.0, 5.0)).collect();
            let m = point_metrics(&a, &p, &[], &[]).unwrap();
            assert!(m.rmse >= m.mae - 1e-12);
        }
    }

    #[test]
    fn quantile_loss_branches() {
        assert_eq!(quantile_loss(&[2.0f64], &[2.0], 0.5).unwrap(), 0.0);
        // under-forecast: x=2, x̂=1 → α·(x−x̂)
        assert!((quantile_loss(&[2.0f64], &[1.0], 0.5).unwrap() - 0.5).abs() < 1e-15);
        assert!((quantile_loss(&[2.0f64], &[1.0], 0.9).unwrap() - 0.9).abs() < 1e-15);
        // over-forecast: x=1, x̂=2 → (1−α)·(x̂−x)
        assert!((quantile_loss(&[1.0f64], &[2.0], 0.9).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn quantile_loss_half_is_half_mae() {
        let mut rng = Rng::seed_from(9);
        for _ in 0..50 {
            let n = 1 + (rng.next_u64() % 30) as usize;
            let a: Vec<f64> = (0..n).map(|_| rng.uniform(-4.0, 4.0)).collect();
            let p: Vec<f64> = (0..n).map(|_| rng.uniform(-4.0, 4.0)).collect();
            let ql = quantile_loss(&a, &p, 0.5).unwrap();
            let m = point_metrics(&a, &p, &[], &[]).unwrap();
            assert!((ql - m.mae / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn winkler_branches() {
        // inside: contribution is the width
        assert!((winkler(&[2.0f64], &[1.0], &[3.0], 0.8).unwrap() - 2.0).abs() < 1e-15);
        // lower violation: 2 + (2/0.2)·1 = 12
        assert!((winkler(&[0.0f64], &[1.0], &[3.0], 0.8).unwrap() - 12.0).abs() < 1e-12);
        // upper violation, symmetric
        assert!((winkler(&[4.0f64], &[1.0], &[3.0], 0.8).unwrap() - 12.0).abs() < 1e-12);
    }

    #[test]
    fn winkler_rejects_inverted_interval() {
        assert!(winkler(&[1.0f64], &[3.0], &[2.0], 0.8).is_err());
    }

    #[test]
    fn winkler_perfect_coverage_is_mean_width() {
        let actual = [1.0f64, 2.0, 3.0];
        let lower = [0.0, 1.0, 2.5];
        let upper = [2.0, 4.0, 3.5];
        let want = (2.0 + 3.0 + 1.0) / 3.0;
        assert!((winkler(&actual, &lower, &upper, 0.6).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn anova_identical_groups() {
        let g = vec![vec![1.0f64, 2.0, 3.0], vec![1.0, 2.0, 3.0]];
        let r = anova_oneway(&g).unwrap();
        assert_eq!(r.f_statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn anova_hand_value() {
        // groups [1,2,3], [4,5,6]: SSB = 13.5, MSW = 1 ⇒ F = 13.5 (df 1, 4)
        let g = vec![vec![1.0f64, 2.0, 3.0], vec![4.0, 5.0, 6.0]];
        let r = anova_oneway(&g).unwrap();
        assert!((r.f_statistic - 13.5).abs() < 1e-12);
        assert_eq!((r.df_between, r.df_within), (1, 4));
        assert!(r.p_value > 0.0 && r.p_value < 0.05);
    }

    #[test]
    fn anova_degenerate_equal_constants() {
        let g = vec![vec![2.0f64, 2.0], vec![2.0, 2.0], vec![2.0, 2.0]];
        let r = anova_oneway(&g).unwrap();
        assert_eq!(r.f_statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn anova_zero_within_nonzero_between() {
        let g = vec![vec![1.0f64, 1.0], vec![2.0, 2.0]];
        let r = anova_oneway(&g).unwrap();
        assert!(r.f_statistic.is_infinite());
        assert_eq!(r.p_value, 0.0);
    }

    #[test]
    fn anova_shift_invariance() {
        let mut rng = Rng::seed_from(12);
        for _ in 0..50 {
            let g1: Vec<f64> = (0..6).map(|_| rng.uniform(-2.0, 2.0)).collect();
            let g2: Vec<f64> = (0..5).map(|_| rng.uniform(-1.0, 3.0)).collect();
            let base = anova_oneway(&[g1.clone(), g2.clone()]).unwrap();
            let c = rng.uniform(-10.0, 10.0);
            let shifted = anova_oneway(&[
                g1.iter().map(|v| v + c).collect(),
                g2.iter().map(|v| v + c).collect(),
            ])
            .unwrap();
            assert!(
                (base.f_statistic - shifted.f_statistic).abs() <= 1e-9 * base.f_statistic.abs().max(1.0)
            );
        }
    }

    #[test]
    fn pairwise_anova_covers_all_pairs() {
        let g = vec![vec![1.0f64, 2.0], vec![2.0, 3.0], vec![4.0, 5.0]];
        let (_overall, pairwise) = anova_with_pairwise(&g).unwrap();
        let keys: Vec<_> = pairwise.iter().map(|(k, _)| *k).collect();
        assert_eq!(keys, vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn empirical_quantile_interpolates() {
        let v = [4.0f64, 1.0, 3.0, 2.0];
        assert_eq!(empirical_quantile(&v, 0.0).unwrap(), 1.0);
        assert_eq!(empirical_quantile(&v, 1.0).unwrap(), 4.0);
        assert!((empirical_quantile(&v, 0.5).unwrap() - 2.5).abs() < 1e-15);
        assert!((empirical_quantile(&v, 0.25).unwrap() - 1.75).abs() < 1e-15);
    }
}
