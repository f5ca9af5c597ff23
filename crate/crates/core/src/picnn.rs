//! Partially input-convex network f(α, h): convex in the quantile-level
//! block α, unconstrained in the context block h.
//!
//! Layer i (i = 0..k−1, u₀ = h, v₀ = α):
//!
//!   u_{i+1} = g⁽ᵘ⁾(W⁽ᵘᵘ⁾uᵢ + b⁽ᵘᵘ⁾)
//!   v_{i+1} = g⁽ᵛ⁾( W⁽ᵛ⁾(vᵢ ⊗ ReLU(W⁽ᵛᵘ⁾uᵢ + b⁽ᵛᵘ⁾))
//!           + W⁽ᵅ⁾(α ⊗ ReLU(W⁽ᵅᵘ⁾uᵢ + b⁽ᵅᵘ⁾)) + W⁽ᵘ⁾uᵢ + b⁽ᵛ⁾ )
//!
//! with W⁽ᵛ⁾, W⁽ᵅ⁾ ≥ 0 and every g⁽ᵛ⁾ convex non-decreasing; the scalar
//! output is f = 1ᵀv_k. The conditional quantile map is q(α|h) = ∇_α f,
//! computed by propagating the τ tangent directions of α through the layers
//! as explicit values — exact, and (on the graph path) itself differentiable
//! w.r.t. the parameters.

use crate::error::{Error, Result};
use crate::numerics::activation::ActKind;
use crate::numerics::graph::{Graph, NodeId};
use crate::numerics::real::Real;
use crate::numerics::rng::Rng;
use crate::numerics::tensor::Tensor;
use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PicnnLayer<R: Real = f64> {
    /// Context-path update; absent on the final layer, whose u output has no
    /// consumer.
    pub w_uu: Option<Tensor<R>>,
    pub b_uu: Option<Tensor<R>>,
    /// Nonnegative weight on the gated previous convex state.
    pub w_v: Tensor<R>,
    /// Nonnegative weight on the gated quantile level.
    pub w_alpha: Tensor<R>,
    pub w_vu: Tensor<R>,
    pub b_vu: Tensor<R>,
    pub w_alphau: Tensor<R>,
    pub b_alphau: Tensor<R>,
    pub w_u: Tensor<R>,
    pub b_v: Tensor<R>,
    pub act_u: ActKind,
    pub act_v: ActKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PicnnParams<R: Real = f64> {
    pub layers: Vec<PicnnLayer<R>>,
    /// Quantile-level dimension (the forecasting horizon τ).
    pub tau: usize,
    /// Dimension of u₀ (the conditioning vector fed in).
    pub context_dim: usize,
    pub hidden: usize,
    pub u_hidden: usize,
    pub final_width: usize,
}

/// Quantile level strictly inside (0,1)^τ.
#[derive(Debug, Clone)]
pub struct QuantileLevel<R: Real = f64>(Tensor<R>);

impl<R: Real> QuantileLevel<R> {
    pub fn new(alpha: Tensor<R>) -> Result<Self> {
        if alpha.data().iter().any(|&a| a <= R::zero() || a >= R::one()) {
            return Err(Error::Domain(
                "quantile levels must lie strictly inside (0,1)".into(),
            ));
        }
        Ok(QuantileLevel(alpha))
    }

    pub fn uniform(tau: usize, rng: &mut Rng) -> Self {
        QuantileLevel(
            Tensor::vector((0..tau).map(|_| rng.open01()).collect()).expect("finite draw"),
        )
    }

    pub fn tensor(&self) -> &Tensor<R> {
        &self.0
    }
}

/// Sampled demand trajectories for one series at one forecast origin.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSet<R: Real = f64> {
    /// m × τ, row per scenario.
    pub samples: Vec<Vec<R>>,
    pub origin: Option<NaiveDateTime>,
    pub seed: u64,
}

impl<R: Real> PicnnParams<R> {
    /// Seeded initialization. The convex-path weights start nonnegative; the
    /// rest are symmetric uniform scaled by fan-in.
    pub fn init(
        tau: usize,
        context_dim: usize,
        hidden: usize,
        u_hidden: usize,
        final_width: usize,
        acts_v: &[ActKind],
        act_u: ActKind,
        rng: &mut Rng,
    ) -> Result<Self> {
        let k = acts_v.len();
        if k == 0 {
            return Err(Error::Config("PICNN needs at least one layer".into()));
        }
        for a in acts_v {
            if !a.is_convex_nondecreasing() {
                return Err(Error::Config(format!(
                    "convex-path activation {a:?} is not convex non-decreasing"
                )));
            }
        }
        let mut layers = Vec::with_capacity(k);
        for i in 0..k {
            let v_in = if i == 0 { tau } else { hidden };
            let out = if i == k - 1 { final_width } else { hidden };
            let u_in = if i == 0 { context_dim } else { u_hidden };
            let b_vin = R::one() / R::cast(v_in as f64).sqrt();
            let b_tau = R::one() / R::cast(tau as f64).sqrt();
            let b_uin = R::one() / R::cast(u_in as f64).sqrt();
            let unif =
                |rows: usize, cols: usize, b: R, rng: &mut Rng| -> Tensor<R> {
                    Tensor::matrix(
                        rows,
                        cols,
                        (0..rows * cols).map(|_| rng.uniform(-b, b)).collect(),
                    )
                    .expect("finite init")
                };
            let unif_pos = |rows: usize, cols: usize, b: R, rng: &mut Rng| -> Tensor<R> {
                Tensor::matrix(
                    rows,
                    cols,
                    (0..rows * cols).map(|_| rng.uniform(R::zero(), b)).collect(),
                )
                .expect("finite init")
            };
            let vecu = |len: usize, b: R, rng: &mut Rng| -> Tensor<R> {
                Tensor::vector((0..len).map(|_| rng.uniform(-b, b)).collect())
                    .expect("finite init")
            };
            // gate biases start near one so the ReLU gates open and the
            // quantile map has usable scale from the first step
            let gate_bias = |len: usize, rng: &mut Rng| -> Tensor<R> {
                Tensor::vector(
                    (0..len)
                        .map(|_| R::one() + rng.uniform(-R::cast(0.1), R::cast(0.1)))
                        .collect(),
                )
                .expect("finite init")
            };
            let last = i == k - 1;
            layers.push(PicnnLayer {
                w_uu: if last {
                    None
                } else {
                    Some(unif(u_hidden, u_in, b_uin, rng))
                },
                b_uu: if last { None } else { Some(vecu(u_hidden, b_uin, rng)) },
                w_v: unif_pos(out, v_in, b_vin, rng),
                w_alpha: unif_pos(out, tau, b_tau, rng),
                w_vu: unif(v_in, u_in, b_uin, rng),
                b_vu: gate_bias(v_in, rng),
                w_alphau: unif(tau, u_in, b_uin, rng),
                b_alphau: gate_bias(tau, rng),
                w_u: unif(out, u_in, b_uin, rng),
                b_v: vecu(out, b_uin, rng),
                act_u,
                act_v: acts_v[i],
            });
        }
        Ok(PicnnParams {
            layers,
            tau,
            context_dim,
            hidden,
            u_hidden,
            final_width,
        })
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    /// Clamp the convex-path weights at zero. Idempotent; all other
    /// parameters untouched.
    pub fn project_weights(&mut self) {
        for layer in &mut self.layers {
            for t in [&mut layer.w_v, &mut layer.w_alpha] {
                for v in t.data_mut() {
                    if *v < R::zero() {
                        *v = R::zero();
                    }
                }
            }
        }
    }

    /// The nonnegativity invariant on W⁽ᵛ⁾ and W⁽ᵅ⁾.
    pub fn check_nonneg(&self) -> Result<()> {
        for (i, layer) in self.layers.iter().enumerate() {
            for (name, t) in [("w_v", &layer.w_v), ("w_alpha", &layer.w_alpha)] {
                if t.data().iter().any(|&v| v < R::zero()) {
                    return Err(Error::Invariant(format!(
                        "layer {i}: {name} has negative entries"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn named_params_mut(&mut self, prefix: &str) -> Vec<(String, &mut Tensor<R>)> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            let p = |name: &str| format!("{prefix}.v{i}.{name}");
            if let Some(w) = layer.w_uu.as_mut() {
                out.push((p("w_uu"), w));
            }
            if let Some(b) = layer.b_uu.as_mut() {
                out.push((p("b_uu"), b));
            }
            out.push((p("w_v"), &mut layer.w_v));
            out.push((p("w_alpha"), &mut layer.w_alpha));
            out.push((p("w_vu"), &mut layer.w_vu));
            out.push((p("b_vu"), &mut layer.b_vu));
            out.push((p("w_alphau"), &mut layer.w_alphau));
            out.push((p("b_alphau"), &mut layer.b_alphau));
            out.push((p("w_u"), &mut layer.w_u));
            out.push((p("b_v"), &mut layer.b_v));
        }
        out
    }
}

/// Graph-bound PICNN parameters.
pub struct BoundPicnn {
    layers: Vec<BoundPicnnLayer>,
}

struct BoundPicnnLayer {
    w_uu: Option<NodeId>,
    b_uu: Option<NodeId>,
    w_v: NodeId,
    w_alpha: NodeId,
    w_vu: NodeId,
    b_vu: NodeId,
    w_alphau: NodeId,
    b_alphau: NodeId,
    w_u: NodeId,
    b_v: NodeId,
    act_u: ActKind,
    act_v: ActKind,
}

impl BoundPicnn {
    pub fn bind<R: Real>(
        g: &mut Graph<R>,
        params: &PicnnParams<R>,
        prefix: &str,
    ) -> Result<Self> {
        let mut layers = Vec::with_capacity(params.layers.len());
        for (i, layer) in params.layers.iter().enumerate() {
            let p = |name: &str| format!("{prefix}.v{i}.{name}");
            layers.push(BoundPicnnLayer {
                w_uu: match &layer.w_uu {
                    Some(t) => Some(g.param(&p("w_uu"), t.clone())?),
                    None => None,
                },
                b_uu: match &layer.b_uu {
                    Some(t) => Some(g.param(&p("b_uu"), t.clone())?),
                    None => None,
                },
                w_v: g.param(&p("w_v"), layer.w_v.clone())?,
                w_alpha: g.param(&p("w_alpha"), layer.w_alpha.clone())?,
                w_vu: g.param(&p("w_vu"), layer.w_vu.clone())?,
                b_vu: g.param(&p("b_vu"), layer.b_vu.clone())?,
                w_alphau: g.param(&p("w_alphau"), layer.w_alphau.clone())?,
                b_alphau: g.param(&p("b_alphau"), layer.b_alphau.clone())?,
                w_u: g.param(&p("w_u"), layer.w_u.clone())?,
                b_v: g.param(&p("b_v"), layer.b_v.clone())?,
                act_u: layer.act_u,
                act_v: layer.act_v,
            });
        }
        Ok(BoundPicnn { layers })
    }
}

/// Potential value and quantile map on the graph. Returns (f, q) nodes,
/// where q is the stacked α-gradient and a full participant in backward.
pub fn forward_node<R: Real>(
    g: &mut Graph<R>,
    bound: &BoundPicnn,
    params: &PicnnParams<R>,
    alpha: &QuantileLevel<R>,
    u0: NodeId,
) -> Result<(NodeId, NodeId)> {
    params.check_nonneg()?;
    let tau = params.tau;
    if alpha.tensor().len() != tau {
        return Err(Error::Contract(format!(
            "alpha has dimension {}, expected {tau}",
            alpha.tensor().len()
        )));
    }
    if g.value(u0).len() != params.context_dim {
        return Err(Error::Contract(format!(
            "context vector has dimension {}, expected {}",
            g.value(u0).len(),
            params.context_dim
        )));
    }

    let alpha_node = g.constant(alpha.tensor().clone());
    let basis: Vec<NodeId> = (0..tau)
        .map(|j| g.constant(Tensor::basis(tau, j)))
        .collect();

    let mut u = u0;
    let mut v = alpha_node;
    let mut dv: Vec<NodeId> = basis.clone();

    for layer in &bound.layers {
        let pre_rv = g.matvec(layer.w_vu, u);
        let pre_rv = g.add(pre_rv, layer.b_vu);
        let r_v = g.act(ActKind::Relu, pre_rv);

        let pre_ra = g.matvec(layer.w_alphau, u);
        let pre_ra = g.add(pre_ra, layer.b_alphau);
        let r_alpha = g.act(ActKind::Relu, pre_ra);

        let gated_v = g.mul(v, r_v);
        let term_v = g.matvec(layer.w_v, gated_v);
        let gated_a = g.mul(alpha_node, r_alpha);
        let term_a = g.matvec(layer.w_alpha, gated_a);
        let term_u = g.matvec(layer.w_u, u);
        let pre = g.add(term_v, term_a);
        let pre = g.add(pre, term_u);
        let pre = g.add(pre, layer.b_v);
        let v_next = g.act(layer.act_v, pre);

        // tangent propagation: dv_next[j] = g'(pre) ⊗ (W_v(dv[j]⊗r_v) + W_α(e_j⊗r_α))
        let dact_kind = layer.act_v.derivative_kind()?;
        let dact = g.act(dact_kind, pre);
        let mut dv_next = Vec::with_capacity(tau);
        for j in 0..tau {
            let g1 = g.mul(dv[j], r_v);
            let t1 = g.matvec(layer.w_v, g1);
            let g2 = g.mul(basis[j], r_alpha);
            let t2 = g.matvec(layer.w_alpha, g2);
            let dpre = g.add(t1, t2);
            dv_next.push(g.mul(dact, dpre));
        }
        v = v_next;
        dv = dv_next;

        if let (Some(w_uu), Some(b_uu)) = (layer.w_uu, layer.b_uu) {
            let pre_u = g.matvec(w_uu, u);
            let pre_u = g.add(pre_u, b_uu);
            u = g.act(layer.act_u, pre_u);
        }
    }

    let f = g.sum(v);
    let q_parts: Vec<NodeId> = dv.iter().map(|&d| g.sum(d)).collect();
    let q = g.stack(&q_parts);
    Ok((f, q))
}

/// Plain-tensor forward: returns (f, q). Bit-identical to the graph path.
pub fn forward_eval<R: Real>(
    params: &PicnnParams<R>,
    alpha: &QuantileLevel<R>,
    u0: &Tensor<R>,
) -> Result<(R, Tensor<R>)> {
    params.check_nonneg()?;
    let tau = params.tau;
    if alpha.tensor().len() != tau {
        return Err(Error::Contract(format!(
            "alpha has dimension {}, expected {tau}",
            alpha.tensor().len()
        )));
    }
    if u0.len() != params.context_dim {
        return Err(Error::Contract(format!(
            "context vector has dimension {}, expected {}",
            u0.len(),
            params.context_dim
        )));
    }

    let alpha_t = alpha.tensor();
    let basis: Vec<Tensor<R>> = (0..tau).map(|j| Tensor::basis(tau, j)).collect();

    let mut u = u0.clone();
    let mut v = alpha_t.clone();
    let mut dv: Vec<Tensor<R>> = basis.clone();

    for layer in &params.layers {
        let pre_rv = layer.w_vu.matvec(&u).add(&layer.b_vu);
        let r_v = pre_rv.map(|x| ActKind::Relu.apply(x));
        let pre_ra = layer.w_alphau.matvec(&u).add(&layer.b_alphau);
        let r_alpha = pre_ra.map(|x| ActKind::Relu.apply(x));

        let term_v = layer.w_v.matvec(&v.mul(&r_v));
        let term_a = layer.w_alpha.matvec(&alpha_t.mul(&r_alpha));
        let term_u = layer.w_u.matvec(&u);
        let pre = term_v.add(&term_a).add(&term_u).add(&layer.b_v);
        let v_next = pre.map(|x| layer.act_v.apply(x));

        let dact_kind = layer.act_v.derivative_kind()?;
        let dact = pre.map(|x| dact_kind.apply(x));
        let mut dv_next = Vec::with_capacity(tau);
        for (j, dvj) in dv.iter().enumerate() {
            let t1 = layer.w_v.matvec(&dvj.mul(&r_v));
            let t2 = layer.w_alpha.matvec(&basis[j].mul(&r_alpha));
            dv_next.push(dact.mul(&t1.add(&t2)));
        }
        v = v_next;
        dv = dv_next;

        if let (Some(w_uu), Some(b_uu)) = (&layer.w_uu, &layer.b_uu) {
            let pre_u = w_uu.matvec(&u).add(b_uu);
            u = pre_u.map(|x| layer.act_u.apply(x));
        }
    }

    let f = v.sum();
    let q = Tensor::vector(dv.iter().map(|d| d.sum()).collect())?;
    Ok((f, q))
}

/// f(α, h) alone.
pub fn picnn_forward<R: Real>(
    params: &PicnnParams<R>,
    alpha: &QuantileLevel<R>,
    u0: &Tensor<R>,
) -> Result<R> {
    forward_eval(params, alpha, u0).map(|(f, _)| f)
}

/// q(α|h) = ∇_α f(α, h), exact through tangent propagation.
pub fn quantile<R: Real>(
    params: &PicnnParams<R>,
    alpha: &QuantileLevel<R>,
    u0: &Tensor<R>,
) -> Result<Tensor<R>> {
    forward_eval(params, alpha, u0).map(|(_, q)| q)
}

/// Draw m i.i.d. α ~ U(0,1)^τ from the seeded generator and return the
/// corresponding quantile-map values. Deterministic given the seed.
pub fn sample_scenarios<R: Real>(
    params: &PicnnParams<R>,
    u0: &Tensor<R>,
    m: usize,
    seed: u64,
) -> Result<ScenarioSet<R>> {
    if m == 0 {
        return Err(Error::Contract("scenario count must be at least 1".into()));
    }
    let mut rng = Rng::seed_from(seed);
    let mut samples = Vec::with_capacity(m);
    for _ in 0..m {
        let alpha = QuantileLevel::uniform(params.tau, &mut rng);
        let q = quantile(params, &alpha, u0)?;
        samples.push(q.data().to_vec());
    }
    Ok(ScenarioSet {
        samples,
        origin: None,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::finite_diff::finite_diff_grad;

    fn small_params(tau: usize, acts: &[ActKind], seed: u64) -> PicnnParams<f64> {
        let mut rng = Rng::seed_from(seed);
        let mut p = PicnnParams::init(tau, 3, 5, 4, 5, acts, ActKind::Tanh, &mut rng).unwrap();
        p.project_weights();
        p
    }

    fn rigged_identity() -> PicnnParams<f64> {
        // 1 layer, τ=1, final width 1: v₁ = relu(α·1) = α on (0,1).
        let mut rng = Rng::seed_from(0);
        let mut p =
            PicnnParams::init(1, 2, 1, 1, 1, &[ActKind::Relu], ActKind::Tanh, &mut rng).unwrap();
        let layer = &mut p.layers[0];
        layer.w_v = Tensor::matrix(1, 1, vec![0.0]).unwrap();
        layer.w_alpha = Tensor::matrix(1, 1, vec![1.0]).unwrap();
        layer.w_vu = Tensor::matrix(1, 2, vec![0.0, 0.0]).unwrap();
        layer.b_vu = Tensor::vector(vec![0.0]).unwrap();
        // force the α gate to ReLU(0·u + 1) = 1
        layer.w_alphau = Tensor::matrix(1, 2, vec![0.0, 0.0]).unwrap();
        layer.b_alphau = Tensor::vector(vec![1.0]).unwrap();
        layer.w_u = Tensor::matrix(1, 2, vec![0.0, 0.0]).unwrap();
        layer.b_v = Tensor::vector(vec![0.0]).unwrap();
        p
    }

    fn constant_net(c: f64) -> PicnnParams<f64> {
        // all weights zero, final bias c, ReLU output ⇒ f = Σ relu(c)
        let mut rng = Rng::seed_from(0);
        let mut p =
            PicnnParams::init(2, 3, 4, 4, 4, &[ActKind::Relu, ActKind::Relu], ActKind::Tanh, &mut rng)
                .unwrap();
        for (_, t) in p.named_params_mut("p") {
            for v in t.data_mut() {
                *v = 0.0;
            }
        }
        for v in p.layers.last_mut().unwrap().b_v.data_mut() {
            *v = c;
        }
        p
    }

    #[test]
    fn constant_network_is_alpha_independent() {
        let p = constant_net(0.7);
        let u0 = Tensor::vector(vec![0.3, -0.2, 0.9]).unwrap();
        let mut rng = Rng::seed_from(4);
        let f1 = picnn_forward(&p, &QuantileLevel::uniform(2, &mut rng), &u0).unwrap();
        let f2 = picnn_forward(&p, &QuantileLevel::uniform(2, &mut rng), &u0).unwrap();
        assert!((f1 - 4.0 * 0.7).abs() < 1e-12, "f = Σ relu(c) = {f1}");
        assert_eq!(f1, f2);
        // gradient of a constant is zero
        let q = quantile(&p, &QuantileLevel::uniform(2, &mut rng), &u0).unwrap();
        assert_eq!(q.data(), &[0.0, 0.0]);
    }

    #[test]
    fn rigged_net_is_identity_with_unit_gradient() {
        let p = rigged_identity();
        let u0 = Tensor::vector(vec![0.4, -1.0]).unwrap();
        for a in [0.1, 0.5, 0.93] {
            let alpha = QuantileLevel::new(Tensor::vector(vec![a]).unwrap()).unwrap();
            let f = picnn_forward(&p, &alpha, &u0).unwrap();
            assert!((f - a).abs() < 1e-15, "f({a}) = {f}");
            let q = quantile(&p, &alpha, &u0).unwrap();
            assert!((q.item() - 1.0).abs() < 1e-15, "q({a}) = {}", q.item());
        }
    }

    #[test]
    fn alpha_outside_open_cube_rejected() {
        assert!(QuantileLevel::new(Tensor::vector(vec![0.0, 0.5]).unwrap()).is_err());
        assert!(QuantileLevel::new(Tensor::vector(vec![0.5, 1.0]).unwrap()).is_err());
        assert!(QuantileLevel::new(Tensor::vector(vec![0.5, 0.9]).unwrap()).is_ok());
    }

    #[test]
    fn negative_convex_weights_rejected() {
        let mut p = small_params(2, &[ActKind::Relu, ActKind::GaussianSoftplus], 3);
        p.layers[0].w_v.data_mut()[0] = -0.1;
        let u0 = Tensor::vector(vec![0.0, 0.0, 0.0]).unwrap();
        let mut rng = Rng::seed_from(1);
        let alpha = QuantileLevel::uniform(2, &mut rng);
        assert!(picnn_forward(&p, &alpha, &u0).is_err());
    }

    #[test]
    fn projection_clamps_and_is_idempotent() {
        let mut p = small_params(2, &[ActKind::Relu, ActKind::Relu], 5);
        p.layers[0].w_v.data_mut()[0] = -0.3;
        p.layers[1].w_alpha.data_mut()[1] = -0.8;
        p.layers[0].w_u.data_mut()[0] = -0.7; // unconstrained path stays put
        p.project_weights();
        assert_eq!(p.layers[0].w_v.data()[0], 0.0);
        assert_eq!(p.layers[1].w_alpha.data()[1], 0.0);
        assert_eq!(p.layers[0].w_u.data()[0], -0.7);
        let snapshot = format!("{:?}", p);
        p.project_weights();
        assert_eq!(snapshot, format!("{:?}", p), "projection must be idempotent");
        assert!(p.check_nonneg().is_ok());
    }

    #[test]
    fn positive_entries_survive_projection() {
        let mut p = small_params(1, &[ActKind::Relu], 6);
        p.layers[0].w_v.data_mut()[0] = 0.7;
        p.project_weights();
        assert_eq!(p.layers[0].w_v.data()[0], 0.7);
    }

    #[test]
    fn midpoint_convexity_in_alpha() {
        let mut rng = Rng::seed_from(77);
        for acts in [
            vec![ActKind::Relu, ActKind::GaussianSoftplus],
            vec![ActKind::GaussianSoftplus, ActKind::Relu],
            vec![ActKind::Relu, ActKind::Relu, ActKind::GaussianSoftplus],
        ] {
            let p = small_params(3, &acts, rng.next_u64());
            for _ in 0..500 {
                let u0 =
                    Tensor::vector((0..3).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap();
                let a1 = QuantileLevel::uniform(3, &mut rng);
                let a2 = QuantileLevel::uniform(3, &mut rng);
                let mid = QuantileLevel::new(
                    a1.tensor().add(a2.tensor()).scale(0.5),
                )
                .unwrap();
                let f1 = picnn_forward(&p, &a1, &u0).unwrap();
                let f2 = picnn_forward(&p, &a2, &u0).unwrap();
                let fm = picnn_forward(&p, &mid, &u0).unwrap();
                assert!(
                    fm <= 0.5 * f1 + 0.5 * f2 + 1e-9,
                    "convexity violated: {fm} vs {}",
                    0.5 * f1 + 0.5 * f2
                );
            }
        }
    }

    #[test]
    fn quantile_map_is_monotone() {
        let mut rng = Rng::seed_from(88);
        let p = small_params(3, &[ActKind::Relu, ActKind::GaussianSoftplus], 11);
        for _ in 0..2000 {
            let u0 = Tensor::vector((0..3).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap();
            let a1 = QuantileLevel::uniform(3, &mut rng);
            let a2 = QuantileLevel::uniform(3, &mut rng);
            let q1 = quantile(&p, &a1, &u0).unwrap();
            let q2 = quantile(&p, &a2, &u0).unwrap();
            let dq = q1.sub(&q2);
            let da = a1.tensor().sub(a2.tensor());
            assert!(
                dq.dot(&da) >= -1e-8,
                "monotonicity violated: {}",
                dq.dot(&da)
            );
        }
    }

    #[test]
    fn scalar_quantile_nondecreasing_on_grid() {
        let mut rng = Rng::seed_from(101);
        let p = small_params(1, &[ActKind::Relu, ActKind::GaussianSoftplus], 13);
        for _ in 0..100 {
            let u0 = Tensor::vector((0..3).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap();
            let mut prev = f64::NEG_INFINITY;
            for i in 1..100 {
                let a = i as f64 / 100.0;
                let alpha = QuantileLevel::new(Tensor::vector(vec![a]).unwrap()).unwrap();
                let q = quantile(&p, &alpha, &u0).unwrap().item();
                assert!(q >= prev - 1e-10, "crossing at α={a}: {q} < {prev}");
                prev = q;
            }
        }
    }

    #[test]
    fn quantile_is_exact_alpha_gradient() {
        let mut rng = Rng::seed_from(55);
        for trial in 0..30 {
            let p = small_params(3, &[ActKind::GaussianSoftplus, ActKind::GaussianSoftplus], trial);
            let u0 = Tensor::vector((0..3).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap();
            let alpha_t =
                Tensor::vector((0..3).map(|_| rng.uniform(0.2, 0.8)).collect()).unwrap();
            let q = quantile(
                &p,
                &QuantileLevel::new(alpha_t.clone()).unwrap(),
                &u0,
            )
            .unwrap();
            let fd = finite_diff_grad(
                &mut |a: &Tensor<f64>| {
                    picnn_forward(&p, &QuantileLevel::new(a.clone()).unwrap(), &u0)
                },
                &alpha_t,
                1e-6,
            )
            .unwrap();
            for (an, f) in q.data().iter().zip(fd.data()) {
                let scale = an.abs().max(f.abs()).max(1e-8);
                assert!(
                    (an - f).abs() / scale <= 1e-6,
                    "trial {trial}: {an} vs {f}"
                );
            }
        }
    }

    #[test]
    fn graph_path_matches_eval_path_bitwise() {
        let mut rng = Rng::seed_from(31);
        let p = small_params(3, &[ActKind::Relu, ActKind::GaussianSoftplus], 17);
        for _ in 0..10 {
            let u0 = Tensor::vector((0..3).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap();
            let alpha = QuantileLevel::uniform(3, &mut rng);
            let (f_eval, q_eval) = forward_eval(&p, &alpha, &u0).unwrap();
            let mut g: Graph<f64> = Graph::new();
            let bound = BoundPicnn::bind(&mut g, &p, "picnn").unwrap();
            let u0_node = g.constant(u0.clone());
            let (f_node, q_node) = forward_node(&mut g, &bound, &p, &alpha, u0_node).unwrap();
            assert_eq!(g.value(f_node).item(), f_eval);
            assert_eq!(g.value(q_node).data(), q_eval.data());
        }
    }

    #[test]
    fn scenario_sampling_is_seed_deterministic() {
        let p = small_params(4, &[ActKind::Relu, ActKind::GaussianSoftplus], 23);
        let u0 = Tensor::vector(vec![0.1, 0.2, -0.3]).unwrap();
        let s1 = sample_scenarios(&p, &u0, 50, 999).unwrap();
        let s2 = sample_scenarios(&p, &u0, 50, 999).unwrap();
        assert_eq!(s1.samples, s2.samples, "same seed, same scenarios");
        let s3 = sample_scenarios(&p, &u0, 50, 1000).unwrap();
        assert_ne!(s1.samples, s3.samples);
        assert_eq!(s1.samples.len(), 50);
        assert_eq!(s1.samples[0].len(), 4);
    }

    #[test]
    fn zero_scenarios_rejected() {
        let p = small_params(2, &[ActKind::Relu], 29);
        let u0 = Tensor::vector(vec![0.0, 0.0, 0.0]).unwrap();
        assert!(sample_scenarios(&p, &u0, 0, 1).is_err());
    }

    #[test]
    fn constant_network_scenarios_are_identical() {
        let p = constant_net(1.0);
        let u0 = Tensor::vector(vec![0.0, 0.5, 0.2]).unwrap();
        let s = sample_scenarios(&p, &u0, 20, 7).unwrap();
        for row in &s.samples {
            assert_eq!(row, &vec![0.0, 0.0], "constant net ⇒ q = 0");
        }
    }

    #[test]
    fn parameter_gradients_flow_through_quantile() {
        // loss = Σ q; check a couple of parameter gradients against finite
        // differences through the eval path.
        let p = small_params(2, &[ActKind::GaussianSoftplus, ActKind::GaussianSoftplus], 37);
        let u0 = Tensor::vector(vec![0.3, -0.5, 0.1]).unwrap();
        let alpha =
            QuantileLevel::new(Tensor::vector(vec![0.3, 0.7]).unwrap()).unwrap();

        let mut g: Graph<f64> = Graph::new();
        let bound = BoundPicnn::bind(&mut g, &p, "picnn").unwrap();
        let u0_node = g.constant(u0.clone());
        let (_f, q) = forward_node(&mut g, &bound, &p, &alpha, u0_node).unwrap();
        let loss = g.sum(q);
        let grads = g.backward(loss).unwrap();

        let mut pc = p.clone();
        let names: Vec<String> = pc
            .named_params_mut("picnn")
            .into_iter()
            .map(|(n, _)| n)
            .collect();
        for name in names {
            let base = pc
                .named_params_mut("picnn")
                .into_iter()
                .find(|(n, _)| *n == name)
                .map(|(_, t)| t.clone())
                .unwrap();
            let fd = finite_diff_grad(
                &mut |t: &Tensor<f64>| {
                    let mut probe = p.clone();
                    for (n, slot) in probe.named_params_mut("picnn") {
                        if n == name {
                            *slot = t.clone();
                        }
                    }
                    let q = quantile(&probe, &alpha, &u0)?;
                    Ok(q.sum())
                },
                &base,
                1e-5,
            )
            .unwrap();
            let an = &grads[&name];
            for (a, f) in an.data().iter().zip(fd.data()) {
                let scale = a.abs().max(f.abs());
                if scale < 1e-7 {
                    continue;
                }
                assert!((a - f).abs() / scale <= 1e-4, "{name}: {a} vs {f}");
            }
        }
    }
}
