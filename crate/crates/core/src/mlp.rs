//! MLP quantile-regression baseline: a fully-connected network mapping the
//! flattened context to one quantile value per (horizon step, level), trained
//! with a summed pinball loss. Unlike the convex quantile map, nothing stops
//! its quantiles from crossing — that is the point of the comparison.

use crate::error::{Error, Result};
use crate::numerics::activation::ActKind;
use crate::numerics::graph::{Graph, NodeId};
use crate::numerics::real::Real;
use crate::numerics::rng::Rng;
use crate::numerics::tensor::Tensor;
use serde::{Deserialize, Serialize};

/// Training grid of quantile levels.
pub fn default_alpha_grid<R: Real>() -> Vec<R> {
    [0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95]
        .iter()
        .map(|&a| R::cast(a))
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpParams<R: Real = f64> {
    /// (weight, bias) per layer; hidden layers use ReLU, the last is linear.
    pub layers: Vec<(Tensor<R>, Tensor<R>)>,
    pub input_dim: usize,
    pub tau: usize,
    pub alpha_grid: Vec<R>,
}

impl<R: Real> MlpParams<R> {
    pub fn init(
        input_dim: usize,
        hidden: usize,
        depth: usize,
        tau: usize,
        alpha_grid: Vec<R>,
        rng: &mut Rng,
    ) -> Result<Self> {
        if depth == 0 {
            return Err(Error::Config("MLP needs at least one hidden layer".into()));
        }
        if alpha_grid.is_empty() {
            return Err(Error::Config("MLP needs a nonempty quantile grid".into()));
        }
        let output_dim = tau * alpha_grid.len();
        let mut layers = Vec::with_capacity(depth + 1);
        let mut d_in = input_dim;
        for _ in 0..depth {
            let bound = R::one() / R::cast(d_in as f64).sqrt();
            let w = Tensor::matrix(
                hidden,
                d_in,
                (0..hidden * d_in).map(|_| rng.uniform(-bound, bound)).collect(),
            )
            .expect("finite init");
            let b = Tensor::vector((0..hidden).map(|_| rng.uniform(-bound, bound)).collect())
                .expect("finite init");
            layers.push((w, b));
            d_in = hidden;
        }
        let bound = R::one() / R::cast(d_in as f64).sqrt();
        let w = Tensor::matrix(
            output_dim,
            d_in,
            (0..output_dim * d_in).map(|_| rng.uniform(-bound, bound)).collect(),
        )
        .expect("finite init");
        let b = Tensor::vector((0..output_dim).map(|_| rng.uniform(-bound, bound)).collect())
            .expect("finite init");
        layers.push((w, b));
        Ok(MlpParams {
            layers,
            input_dim,
            tau,
            alpha_grid,
        })
    }

    pub fn named_params_mut(&mut self, prefix: &str) -> Vec<(String, &mut Tensor<R>)> {
        let mut out = Vec::new();
        for (l, (w, b)) in self.layers.iter_mut().enumerate() {
            out.push((format!("{prefix}.l{l}.w"), w));
            out.push((format!("{prefix}.l{l}.b"), b));
        }
        out
    }
}

pub struct BoundMlp {
    layers: Vec<(NodeId, NodeId)>,
}

impl BoundMlp {
    pub fn bind<R: Real>(g: &mut Graph<R>, params: &MlpParams<R>, prefix: &str) -> Result<Self> {
        let mut layers = Vec::with_capacity(params.layers.len());
        for (l, (w, b)) in params.layers.iter().enumerate() {
            layers.push((
                g.param(&format!("{prefix}.l{l}.w"), w.clone())?,
                g.param(&format!("{prefix}.l{l}.b"), b.clone())?,
            ));
        }
        Ok(BoundMlp { layers })
    }
}

/// Graph forward: flattened input to the τ×|grid| quantile vector.
pub fn forward_node<R: Real>(
    g: &mut Graph<R>,
    bound: &BoundMlp,
    params: &MlpParams<R>,
    input: &Tensor<R>,
) -> Result<NodeId> {
    if input.len() != params.input_dim {
        return Err(Error::Contract(format!(
            "MLP input dimension {} != {}",
            input.len(),
            params.input_dim
        )));
    }
    let mut x = g.constant(input.clone());
    let last = bound.layers.len() - 1;
    for (l, (w, b)) in bound.layers.iter().enumerate() {
        x = g.matvec(*w, x);
        x = g.add(x, *b);
        if l < last {
            x = g.act(ActKind::Relu, x);
        }
    }
    Ok(x)
}

/// Plain forward, bit-identical to the graph path.
pub fn forward_eval<R: Real>(params: &MlpParams<R>, input: &Tensor<R>) -> Result<Tensor<R>> {
    if input.len() != params.input_dim {
        return Err(Error::Contract(format!(
            "MLP input dimension {} != {}",
            input.len(),
            params.input_dim
        )));
    }
    let mut x = input.clone();
    let last = params.layers.len() - 1;
    for (l, (w, b)) in params.layers.iter().enumerate() {
        x = w.matvec(&x).add(b);
        if l < last {
            x = x.map(|v| ActKind::Relu.apply(v));
        }
    }
    Ok(x)
}

/// Summed pinball loss over all horizon steps and grid levels.
/// Each term is relu(α·d) + relu((α−1)·d) with d = x − x̂.
pub fn pinball_loss_node<R: Real>(
    g: &mut Graph<R>,
    output: NodeId,
    target: &[R],
    params: &MlpParams<R>,
) -> Result<NodeId> {
    if target.len() != params.tau {
        return Err(Error::Contract("target length must equal tau".into()));
    }
    let grid_len = params.alpha_grid.len();
    let mut parts = Vec::with_capacity(params.tau * grid_len);
    for (t, &x_t) in target.iter().enumerate() {
        let x_node = g.constant_scalar(x_t);
        for (a_idx, &alpha) in params.alpha_grid.iter().enumerate() {
            let pred = g.entry(output, t * grid_len + a_idx);
            let d = g.sub(x_node, pred);
            let up = g.scale(d, alpha);
            let up = g.act(ActKind::Relu, up);
            let down = g.scale(d, alpha - R::one());
            let down = g.act(ActKind::Relu, down);
            parts.push(g.add(up, down));
        }
    }
    Ok(g.add_all(&parts))
}

/// The quantile curve for one horizon step from the flat output vector.
pub fn step_quantiles<R: Real>(params: &MlpParams<R>, output: &Tensor<R>, t: usize) -> Vec<R> {
    let g = params.alpha_grid.len();
    output.data()[t * g..(t + 1) * g].to_vec()
}

/// Scenario generation by independent uniform-level lookup with linear
/// interpolation on the trained grid (clamped at the grid ends).
pub fn sample_scenarios<R: Real>(
    params: &MlpParams<R>,
    input: &Tensor<R>,
    m: usize,
    seed: u64,
) -> Result<Vec<Vec<R>>> {
    if m == 0 {
        return Err(Error::Contract("scenario count must be at least 1".into()));
    }
    let output = forward_eval(params, input)?;
    let mut rng = Rng::seed_from(seed);
    let grid = &params.alpha_grid;
    let mut out = Vec::with_capacity(m);
    for _ in 0..m {
        let mut row = Vec::with_capacity(params.tau);
        for t in 0..params.tau {
            let q = step_quantiles(params, &output, t);
            let u: R = rng.open01();
            let v = if u <= grid[0] {
                q[0]
            } else if u >= grid[grid.len() - 1] {
                q[grid.len() - 1]
            } else {
                let mut k = 0;
                while grid[k + 1] < u {
                    k += 1;
                }
                let w = (u - grid[k]) / (grid[k + 1] - grid[k]);
                q[k] * (R::one() - w) + q[k + 1] * w
            };
            row.push(v);
        }
        out.push(row);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> MlpParams<f64> {
        let mut rng = Rng::seed_from(5);
        MlpParams::init(4, 6, 2, 3, default_alpha_grid(), &mut rng).unwrap()
    }

    #[test]
    fn output_dimension_is_tau_times_grid() {
        let p = tiny();
        let x = Tensor::vector(vec![0.1, -0.2, 0.3, 0.4]).unwrap();
        let y = forward_eval(&p, &x).unwrap();
        assert_eq!(y.len(), 3 * 11);
    }

    #[test]
    fn graph_matches_eval_bitwise() {
        let p = tiny();
        let x = Tensor::vector(vec![0.1, -0.2, 0.3, 0.4]).unwrap();
        let y_eval = forward_eval(&p, &x).unwrap();
        let mut g: Graph<f64> = Graph::new();
        let bound = BoundMlp::bind(&mut g, &p, "mlp").unwrap();
        let y_node = forward_node(&mut g, &bound, &p, &x).unwrap();
        assert_eq!(g.value(y_node).data(), y_eval.data());
    }

    #[test]
    fn pinball_gradients_match_finite_differences() {
        use crate::numerics::finite_diff::finite_diff_grad;
        let p = tiny();
        let x = Tensor::vector(vec![0.5, -0.1, 0.2, 0.9]).unwrap();
        let target = [0.3, 0.7, 0.1];

        let mut g: Graph<f64> = Graph::new();
        let bound = BoundMlp::bind(&mut g, &p, "mlp").unwrap();
        let y = forward_node(&mut g, &bound, &p, &x).unwrap();
        let loss = pinball_loss_node(&mut g, y, &target, &p).unwrap();
        let grads = g.backward(loss).unwrap();

        let mut pc = p.clone();
        let names: Vec<String> = pc
            .named_params_mut("mlp")
            .into_iter()
            .map(|(n, _)| n)
            .collect();
        for name in names {
            let base_t = pc
                .named_params_mut("mlp")
                .into_iter()
                .find(|(n, _)| *n == name)
                .map(|(_, t)| t.clone())
                .unwrap();
            let fd = finite_diff_grad(
                &mut |t: &Tensor<f64>| {
                    let mut probe = p.clone();
                    for (n, slot) in probe.named_params_mut("mlp") {
                        if n == name {
                            *slot = t.clone();
                        }
                    }
                    let out = forward_eval(&probe, &x)?;
                    let mut acc = 0.0;
                    let g_len = probe.alpha_grid.len();
                    for (ti, &xt) in target.iter().enumerate() {
                        for (ai, &alpha) in probe.alpha_grid.iter().enumerate() {
                            let d = xt - out.data()[ti * g_len + ai];
                            acc += (alpha * d).max(0.0) + ((alpha - 1.0) * d).max(0.0);
                        }
                    }
                    Ok(acc)
                },
                &base_t,
                1e-6,
            )
            .unwrap();
            let an = &grads[&name];
            for (a, f) in an.data().iter().zip(fd.data()) {
                let scale = a.abs().max(f.abs());
                if scale < 1e-7 {
                    continue;
                }
                assert!((a - f).abs() / scale <= 1e-3, "{name}: {a} vs {f}");
            }
        }
    }

    #[test]
    fn scenarios_deterministic_and_within_grid_range() {
        let p = tiny();
        let x = Tensor::vector(vec![0.5, -0.1, 0.2, 0.9]).unwrap();
        let s1 = sample_scenarios(&p, &x, 40, 3).unwrap();
        let s2 = sample_scenarios(&p, &x, 40, 3).unwrap();
        assert_eq!(s1, s2);
        let out = forward_eval(&p, &x).unwrap();
        for row in &s1 {
            for (t, v) in row.iter().enumerate() {
                let q = step_quantiles(&p, &out, t);
                let lo = q.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                assert!(*v >= lo - 1e-12 && *v <= hi + 1e-12);
            }
        }
    }
}
