//! Energy score: the multivariate strictly proper scoring rule used both as
//! the training loss and for scenario evaluation.
//!
//! For a sample set Ω = {w₁..w_m} and observation x, the plug-in estimator
//! over all ordered pairs (including i = j, which contribute zero) is
//!
//!   ES = (1/m)·Σᵢ ‖wᵢ−x‖₂^β − (1/(2m²))·Σᵢ Σⱼ ‖wᵢ−wⱼ‖₂^β

use crate::error::{Error, Result};
use crate::numerics::graph::{norm_pow, Graph, NodeId};
use crate::numerics::real::Real;
use crate::numerics::tensor::Tensor;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EnergyScoreConfig<R: Real = f64> {
    pub beta: R,
}

impl<R: Real> Default for EnergyScoreConfig<R> {
    fn default() -> Self {
        EnergyScoreConfig { beta: R::one() }
    }
}

impl<R: Real> EnergyScoreConfig<R> {
    pub fn new(beta: R) -> Result<Self> {
        if !(beta > R::zero() && beta < R::cast(2.0)) {
            return Err(Error::Config(format!(
                "energy-score exponent must lie in (0, 2), got {beta}"
            )));
        }
        Ok(EnergyScoreConfig { beta })
    }
}

fn check_inputs<R: Real>(samples: &[Vec<R>], x: &[R], cfg: &EnergyScoreConfig<R>) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::Contract("energy score needs at least one sample".into()));
    }
    if x.is_empty() {
        return Err(Error::Contract("energy score needs a nonempty observation".into()));
    }
    if !(cfg.beta > R::zero() && cfg.beta < R::cast(2.0)) {
        return Err(Error::Config(format!(
            "energy-score exponent must lie in (0, 2), got {}",
            cfg.beta
        )));
    }
    for w in samples {
        if w.len() != x.len() {
            return Err(Error::Contract(format!(
                "sample dimension {} does not match observation dimension {}",
                w.len(),
                x.len()
            )));
        }
    }
    Ok(())
}

/// Plug-in estimator of the energy score.
pub fn energy_score<R: Real>(
    samples: &[Vec<R>],
    x: &[R],
    cfg: &EnergyScoreConfig<R>,
) -> Result<R> {
    check_inputs(samples, x, cfg)?;
    let m = samples.len();
    let m_r = R::cast(m as f64);
    let beta = cfg.beta;
    let mut diff = vec![R::zero(); x.len()];

    let mut term1 = R::zero();
    for w in samples {
        for (d, (wi, xi)) in diff.iter_mut().zip(w.iter().zip(x)) {
            *d = *wi - *xi;
        }
        term1 = term1 + norm_pow(&diff, beta);
    }
    term1 = term1 / m_r;

    let mut term2 = R::zero();
    for i in 0..m {
        for j in i + 1..m {
            for (d, (a, b)) in diff.iter_mut().zip(samples[i].iter().zip(&samples[j])) {
                *d = *a - *b;
            }
            term2 = term2 + norm_pow(&diff, beta);
        }
    }
    // unordered pairs counted once; the ordered double sum doubles them
    term2 = term2 / (m_r * m_r);

    Ok(term1 - term2)
}

/// ∂ES/∂wᵢ for every sample, with subgradient 0 where two points coincide
/// (distance below 1e-12).
pub fn energy_score_grad<R: Real>(
    samples: &[Vec<R>],
    x: &[R],
    cfg: &EnergyScoreConfig<R>,
) -> Result<Vec<Vec<R>>> {
    check_inputs(samples, x, cfg)?;
    let m = samples.len();
    let d = x.len();
    let m_r = R::cast(m as f64);
    let beta = cfg.beta;
    let cutoff = R::cast(1e-12);
    let mut grads = vec![vec![R::zero(); d]; m];

    // coefficient of (a−b) in ∇‖a−b‖^β
    let coeff = |dist: R| {
        if dist < cutoff {
            R::zero()
        } else {
            beta * dist.powf(beta - R::cast(2.0))
        }
    };

    for (i, w) in samples.iter().enumerate() {
        let mut dist_sq = R::zero();
        for (a, b) in w.iter().zip(x) {
            let dd = *a - *b;
            dist_sq = dist_sq + dd * dd;
        }
        let c = coeff(dist_sq.sqrt()) / m_r;
        for k in 0..d {
            grads[i][k] = grads[i][k] + c * (w[k] - x[k]);
        }
    }

    for i in 0..m {
        for j in i + 1..m {
            let mut dist_sq = R::zero();
            for (a, b) in samples[i].iter().zip(&samples[j]) {
                let dd = *a - *b;
                dist_sq = dist_sq + dd * dd;
            }
            // ordered pairs double the unordered term; 2·(1/(2m²)) = 1/m²
            let c = coeff(dist_sq.sqrt()) / (m_r * m_r);
            for k in 0..d {
                let delta = c * (samples[i][k] - samples[j][k]);
                grads[i][k] = grads[i][k] - delta;
                grads[j][k] = grads[j][k] + delta;
            }
        }
    }
    Ok(grads)
}

/// Energy score as graph nodes, so the loss differentiates through whatever
/// produced the samples.
pub fn energy_score_node<R: Real>(
    g: &mut Graph<R>,
    samples: &[NodeId],
    x: &Tensor<R>,
    cfg: &EnergyScoreConfig<R>,
) -> Result<NodeId> {
    if samples.is_empty() {
        return Err(Error::Contract("energy score needs at least one sample".into()));
    }
    if !(cfg.beta > R::zero() && cfg.beta < R::cast(2.0)) {
        return Err(Error::Config(format!(
            "energy-score exponent must lie in (0, 2), got {}",
            cfg.beta
        )));
    }
    let m = samples.len();
    let m_r = R::cast(m as f64);
    let x_node = g.constant(x.clone());

    let mut term1_parts = Vec::with_capacity(m);
    for &w in samples {
        let diff = g.sub(w, x_node);
        term1_parts.push(g.norm_pow(diff, cfg.beta));
    }
    let term1_sum = g.add_all(&term1_parts);
    let term1 = g.scale(term1_sum, R::one() / m_r);

    if m == 1 {
        return Ok(term1);
    }
    let mut term2_parts = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in i + 1..m {
            let diff = g.sub(samples[i], samples[j]);
            term2_parts.push(g.norm_pow(diff, cfg.beta));
        }
    }
    let term2_sum = g.add_all(&term2_parts);
    let term2 = g.scale(term2_sum, -R::one() / (m_r * m_r));
    Ok(g.add(term1, term2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::finite_diff::finite_diff_grad;
    use crate::numerics::rng::Rng;

    fn cfg() -> EnergyScoreConfig<f64> {
        EnergyScoreConfig::default()
    }

    #[test]
    fn single_sample_equal_to_truth_scores_zero() {
        let s = vec![vec![1.0, -2.0, 0.5]];
        let x = [1.0, -2.0, 0.5];
        assert_eq!(energy_score(&s, &x, &cfg()).unwrap(), 0.0);
    }

    #[test]
    fn single_sample_is_distance() {
        let s = vec![vec![3.0, 4.0]];
        let x = [0.0, 0.0];
        assert!((energy_score(&s, &x, &cfg()).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn hand_evaluated_two_sample_case() {
        // d=1, Ω={0,2}, x=1, β=1: (1/2)(1+1) − (1/8)(0+2+2+0) = 0.5
        let s = vec![vec![0.0], vec![2.0]];
        let x = [1.0];
        assert!((energy_score(&s, &x, &cfg()).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_sample_set_rejected() {
        let s: Vec<Vec<f64>> = vec![];
        assert!(energy_score(&s, &[1.0], &cfg()).is_err());
    }

    #[test]
    fn beta_outside_open_interval_rejected() {
        assert!(EnergyScoreConfig::new(0.0).is_err());
        assert!(EnergyScoreConfig::new(2.0).is_err());
        assert!(EnergyScoreConfig::new(1.5).is_ok());
    }

    #[test]
    fn translation_invariance() {
        let mut rng = Rng::seed_from(5);
        for _ in 0..50 {
            let d = 1 + (rng.next_u64() % 4) as usize;
            let m = 1 + (rng.next_u64() % 6) as usize;
            let s: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..d).map(|_| rng.uniform(-3.0, 3.0)).collect())
                .collect();
            let x: Vec<f64> = (0..d).map(|_| rng.uniform(-3.0, 3.0)).collect();
            let c: f64 = rng.uniform(-5.0, 5.0);
            let s_shift: Vec<Vec<f64>> = s
                .iter()
                .map(|w| w.iter().map(|v| v + c).collect())
                .collect();
            let x_shift: Vec<f64> = x.iter().map(|v| v + c).collect();
            let a = energy_score(&s, &x, &cfg()).unwrap();
            let b = energy_score(&s_shift, &x_shift, &cfg()).unwrap();
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn homogeneity_in_beta() {
        let mut rng = Rng::seed_from(7);
        for beta in [0.5, 1.0, 1.5] {
            let cfg = EnergyScoreConfig::new(beta).unwrap();
            let s: Vec<Vec<f64>> = (0..5)
                .map(|_| (0..3).map(|_| rng.uniform(-2.0, 2.0)).collect())
                .collect();
            let x: Vec<f64> = (0..3).map(|_| rng.uniform(-2.0, 2.0)).collect();
            let scale: f64 = 1.7;
            let s2: Vec<Vec<f64>> = s
                .iter()
                .map(|w| w.iter().map(|v| v * scale).collect())
                .collect();
            let x2: Vec<f64> = x.iter().map(|v| v * scale).collect();
            let a = energy_score(&s, &x, &cfg).unwrap();
            let b = energy_score(&s2, &x2, &cfg).unwrap();
            assert!((b - a * scale.powf(beta)).abs() < 1e-10, "beta={beta}");
        }
    }

    #[test]
    fn duplicated_samples_reduce_to_distance() {
        let s = vec![vec![2.0, 1.0]; 7];
        let x = [0.0, 0.0];
        let want = 5.0f64.sqrt();
        assert!((energy_score(&s, &x, &cfg()).unwrap() - want).abs() < 1e-12);
    }

    /// Drawing from the true distribution must beat a shifted distribution on
    /// average (propriety, checked at desk scale).
    #[test]
    fn propriety_against_shifted_sampler() {
        let mut rng = Rng::seed_from(99);
        let mut true_total = 0.0;
        let mut shifted_total = 0.0;
        for _ in 0..500 {
            let x: Vec<f64> = (0..3).map(|_| rng.standard_normal()).collect();
            let s_true: Vec<Vec<f64>> = (0..200)
                .map(|_| (0..3).map(|_| rng.standard_normal()).collect())
                .collect();
            let s_shift: Vec<Vec<f64>> = (0..200)
                .map(|_| (0..3).map(|_| rng.standard_normal::<f64>() + 0.5).collect())
                .collect();
            true_total += energy_score(&s_true, &x, &cfg()).unwrap();
            shifted_total += energy_score(&s_shift, &x, &cfg()).unwrap();
        }
        assert!(
            true_total / 500.0 <= shifted_total / 500.0,
            "true {true_total} vs shifted {shifted_total}"
        );
    }

    #[test]
    fn graph_version_matches_plain_and_finite_differences() {
        let mut rng = Rng::seed_from(13);
        for trial in 0..20 {
            let d = 2 + (rng.next_u64() % 3) as usize;
            let m = 2 + (rng.next_u64() % 4) as usize;
            let samples: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..d).map(|_| rng.uniform(-2.0, 2.0)).collect())
                .collect();
            let x: Vec<f64> = (0..d).map(|_| rng.uniform(-2.0, 2.0)).collect();
            let x_t = Tensor::vector(x.clone()).unwrap();

            let mut g: Graph<f64> = Graph::new();
            let nodes: Vec<NodeId> = samples
                .iter()
                .enumerate()
                .map(|(i, w)| {
                    g.param(&format!("w{i}"), Tensor::vector(w.clone()).unwrap())
                        .unwrap()
                })
                .collect();
            let es = energy_score_node(&mut g, &nodes, &x_t, &cfg()).unwrap();
            let plain = energy_score(&samples, &x, &cfg()).unwrap();
            assert!((g.value(es).item() - plain).abs() < 1e-12);

            let graph_grads = g.backward(es).unwrap();
            let analytic = energy_score_grad(&samples, &x, &cfg()).unwrap();

            for (i, an) in analytic.iter().enumerate() {
                let gg = &graph_grads[&format!("w{i}")];
                for (a, b) in an.iter().zip(gg.data()) {
                    assert!((a - b).abs() < 1e-10, "trial {trial}: {a} vs {b}");
                }
                // finite differences on sample i
                let base = Tensor::vector(samples[i].clone()).unwrap();
                let fd = finite_diff_grad(
                    &mut |t: &Tensor<f64>| {
                        let mut s2 = samples.clone();
                        s2[i] = t.data().to_vec();
                        energy_score(&s2, &x, &cfg())
                    },
                    &base,
                    1e-6,
                )
                .unwrap();
                for (a, f) in an.iter().zip(fd.data()) {
                    let scale = a.abs().max(f.abs());
                    assert!(
                        (a - f).abs() <= 1e-4 * scale.max(1e-4),
                        "trial {trial} sample {i}: {a} vs {f}"
                    );
                }
            }
        }
    }
}
