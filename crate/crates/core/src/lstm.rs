//! Stacked LSTM encoder: folds a context block into the hidden state that
//! conditions the convex quantile network.
//!
//! Two forward paths exist: a graph path used in training, and a plain
//! evaluation path for inference. Both run the same kernels in the same
//! order, so their outputs are bit-identical (covered by tests).

use crate::error::{Error, Result};
use crate::numerics::activation::ActKind;
use crate::numerics::graph::{Graph, NodeId};
use crate::numerics::real::Real;
use crate::numerics::rng::Rng;
use crate::numerics::tensor::Tensor;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LstmLayer<R: Real = f64> {
    pub w_ix: Tensor<R>,
    pub w_ih: Tensor<R>,
    pub b_i: Tensor<R>,
    pub w_fx: Tensor<R>,
    pub w_fh: Tensor<R>,
    pub b_f: Tensor<R>,
    pub w_ox: Tensor<R>,
    pub w_oh: Tensor<R>,
    pub b_o: Tensor<R>,
    pub w_cx: Tensor<R>,
    pub w_ch: Tensor<R>,
    pub b_c: Tensor<R>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LstmParams<R: Real = f64> {
    pub layers: Vec<LstmLayer<R>>,
    pub input_dim: usize,
    pub hidden: usize,
}

/// Per-layer hidden and cell vectors.
#[derive(Debug, Clone)]
pub struct HiddenState<R: Real = f64> {
    pub states: Vec<(Tensor<R>, Tensor<R>)>,
}

impl<R: Real> HiddenState<R> {
    pub fn zeros(layer_count: usize, hidden: usize) -> Self {
        HiddenState {
            states: (0..layer_count)
                .map(|_| (Tensor::zeros(vec![hidden]), Tensor::zeros(vec![hidden])))
                .collect(),
        }
    }
}

fn init_matrix<R: Real>(rows: usize, cols: usize, bound: R, rng: &mut Rng) -> Tensor<R> {
    Tensor::matrix(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.uniform(-bound, bound)).collect(),
    )
    .expect("finite init")
}

fn init_vector<R: Real>(len: usize, bound: R, rng: &mut Rng) -> Tensor<R> {
    Tensor::vector((0..len).map(|_| rng.uniform(-bound, bound)).collect()).expect("finite init")
}

impl<R: Real> LstmParams<R> {
    /// Seeded initialization, uniform in ±1/√hidden.
    pub fn init(input_dim: usize, hidden: usize, layer_count: usize, rng: &mut Rng) -> Self {
        let bound = R::one() / R::cast(hidden as f64).sqrt();
        let layers = (0..layer_count)
            .map(|l| {
                let d_in = if l == 0 { input_dim } else { hidden };
                LstmLayer {
                    w_ix: init_matrix(hidden, d_in, bound, rng),
                    w_ih: init_matrix(hidden, hidden, bound, rng),
                    b_i: init_vector(hidden, bound, rng),
                    w_fx: init_matrix(hidden, d_in, bound, rng),
                    w_fh: init_matrix(hidden, hidden, bound, rng),
                    b_f: init_vector(hidden, bound, rng),
                    w_ox: init_matrix(hidden, d_in, bound, rng),
                    w_oh: init_matrix(hidden, hidden, bound, rng),
                    b_o: init_vector(hidden, bound, rng),
                    w_cx: init_matrix(hidden, d_in, bound, rng),
                    w_ch: init_matrix(hidden, hidden, bound, rng),
                    b_c: init_vector(hidden, bound, rng),
                }
            })
            .collect();
        LstmParams {
            layers,
            input_dim,
            hidden,
        }
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    /// Check the weight shapes stay consistent across stacked layers.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Invariant("LSTM needs at least one layer".into()));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            let d_in = if l == 0 { self.input_dim } else { self.hidden };
            let pairs: [(&Tensor<R>, Vec<usize>); 12] = [
                (&layer.w_ix, vec![self.hidden, d_in]),
                (&layer.w_ih, vec![self.hidden, self.hidden]),
                (&layer.b_i, vec![self.hidden]),
                (&layer.w_fx, vec![self.hidden, d_in]),
                (&layer.w_fh, vec![self.hidden, self.hidden]),
                (&layer.b_f, vec![self.hidden]),
                (&layer.w_ox, vec![self.hidden, d_in]),
                (&layer.w_oh, vec![self.hidden, self.hidden]),
                (&layer.b_o, vec![self.hidden]),
                (&layer.w_cx, vec![self.hidden, d_in]),
                (&layer.w_ch, vec![self.hidden, self.hidden]),
                (&layer.b_c, vec![self.hidden]),
            ];
            for (t, shape) in pairs {
                if !t.has_shape(&shape) {
                    return Err(Error::Invariant(format!(
                        "LSTM layer {l}: weight shape {:?} expected {:?}",
                        t.shape(),
                        shape
                    )));
                }
            }
        }
        Ok(())
    }

    /// Named views of all parameters, for optimizers and serialization checks.
    pub fn named_params_mut(&mut self, prefix: &str) -> Vec<(String, &mut Tensor<R>)> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter_mut().enumerate() {
            let p = |name: &str| format!("{prefix}.l{l}.{name}");
            out.push((p("w_ix"), &mut layer.w_ix));
            out.push((p("w_ih"), &mut layer.w_ih));
            out.push((p("b_i"), &mut layer.b_i));
            out.push((p("w_fx"), &mut layer.w_fx));
            out.push((p("w_fh"), &mut layer.w_fh));
            out.push((p("b_f"), &mut layer.b_f));
            out.push((p("w_ox"), &mut layer.w_ox));
            out.push((p("w_oh"), &mut layer.w_oh));
            out.push((p("b_o"), &mut layer.b_o));
            out.push((p("w_cx"), &mut layer.w_cx));
            out.push((p("w_ch"), &mut layer.w_ch));
            out.push((p("b_c"), &mut layer.b_c));
        }
        out
    }
}

/// Graph-bound LSTM parameters: node ids, one per weight.
pub struct BoundLstm {
    layers: Vec<[NodeId; 12]>,
}

impl BoundLstm {
    pub fn bind<R: Real>(g: &mut Graph<R>, params: &LstmParams<R>, prefix: &str) -> Result<Self> {
        let mut layers = Vec::with_capacity(params.layers.len());
        for (l, layer) in params.layers.iter().enumerate() {
            let mut ids = [NodeId::default(); 12];
            let tensors = [
                ("w_ix", &layer.w_ix),
                ("w_ih", &layer.w_ih),
                ("b_i", &layer.b_i),
                ("w_fx", &layer.w_fx),
                ("w_fh", &layer.w_fh),
                ("b_f", &layer.b_f),
                ("w_ox", &layer.w_ox),
                ("w_oh", &layer.w_oh),
                ("b_o", &layer.b_o),
                ("w_cx", &layer.w_cx),
                ("w_ch", &layer.w_ch),
                ("b_c", &layer.b_c),
            ];
            for (k, (name, t)) in tensors.into_iter().enumerate() {
                ids[k] = g.param(&format!("{prefix}.l{l}.{name}"), (*t).clone())?;
            }
            layers.push(ids);
        }
        Ok(BoundLstm { layers })
    }
}

fn gate_node<R: Real>(
    g: &mut Graph<R>,
    kind: ActKind,
    wx: NodeId,
    x: NodeId,
    wh: NodeId,
    h: NodeId,
    b: NodeId,
) -> NodeId {
    let a = g.matvec(wx, x);
    let c = g.matvec(wh, h);
    let s = g.add(a, c);
    let s = g.add(s, b);
    g.act(kind, s)
}

/// One forward step of the full stack on the graph. `state` holds (h, c)
/// node pairs per layer and is replaced with the new state.
pub fn lstm_step_node<R: Real>(
    g: &mut Graph<R>,
    bound: &BoundLstm,
    x: NodeId,
    state: &mut Vec<(NodeId, NodeId)>,
) {
    let mut input = x;
    for (ids, (h_prev, c_prev)) in bound.layers.iter().zip(state.iter_mut()) {
        let [w_ix, w_ih, b_i, w_fx, w_fh, b_f, w_ox, w_oh, b_o, w_cx, w_ch, b_c] = *ids;
        let i_t = gate_node(g, ActKind::Sigmoid, w_ix, input, w_ih, *h_prev, b_i);
        let f_t = gate_node(g, ActKind::Sigmoid, w_fx, input, w_fh, *h_prev, b_f);
        let o_t = gate_node(g, ActKind::Sigmoid, w_ox, input, w_oh, *h_prev, b_o);
        let c_tilde = gate_node(g, ActKind::Tanh, w_cx, input, w_ch, *h_prev, b_c);
        let ic = g.mul(i_t, c_tilde);
        let fc = g.mul(f_t, *c_prev);
        let c_t = g.add(ic, fc);
        let tanh_c = g.act(ActKind::Tanh, c_t);
        let h_t = g.mul(o_t, tanh_c);
        *h_prev = h_t;
        *c_prev = c_t;
        input = h_t;
    }
}

/// Consume every context row in chronological order and return the top-layer
/// hidden node. Initial state is zeros.
pub fn encode_node<R: Real>(
    g: &mut Graph<R>,
    bound: &BoundLstm,
    params: &LstmParams<R>,
    context: &[Tensor<R>],
) -> Result<NodeId> {
    if context.is_empty() {
        return Err(Error::Contract("encode requires a nonempty context".into()));
    }
    let zero = Tensor::zeros(vec![params.hidden]);
    let mut state: Vec<(NodeId, NodeId)> = (0..params.layers.len())
        .map(|_| (g.constant(zero.clone()), g.constant(zero.clone())))
        .collect();
    for (t, row) in context.iter().enumerate() {
        if row.len() != params.input_dim {
            return Err(Error::Contract(format!(
                "context row {t} has dimension {}, expected {}",
                row.len(),
                params.input_dim
            )));
        }
        let x = g.constant(row.clone());
        lstm_step_node(g, bound, x, &mut state);
    }
    Ok(state.last().unwrap().0)
}

fn gate_eval<R: Real>(
    kind: ActKind,
    wx: &Tensor<R>,
    x: &Tensor<R>,
    wh: &Tensor<R>,
    h: &Tensor<R>,
    b: &Tensor<R>,
) -> Tensor<R> {
    let a = wx.matvec(x);
    let c = wh.matvec(h);
    let s = a.add(&c);
    let s = s.add(b);
    s.map(|v| kind.apply(v))
}

/// Plain-tensor counterpart of [`lstm_step_node`]: one step of the stack,
/// exactly Eq-style gate arithmetic.
pub fn lstm_step<R: Real>(
    params: &LstmParams<R>,
    x: &Tensor<R>,
    state: &HiddenState<R>,
) -> Result<HiddenState<R>> {
    if x.len() != params.input_dim {
        return Err(Error::Contract(format!(
            "input dimension {} does not match layer 1 input size {}",
            x.len(),
            params.input_dim
        )));
    }
    if state.states.len() != params.layers.len() {
        return Err(Error::Contract(format!(
            "state has {} layers, params have {}",
            state.states.len(),
            params.layers.len()
        )));
    }
    let mut next = Vec::with_capacity(params.layers.len());
    let mut input = x.clone();
    for (layer, (h_prev, c_prev)) in params.layers.iter().zip(&state.states) {
        if h_prev.len() != params.hidden || c_prev.len() != params.hidden {
            return Err(Error::Contract("hidden state dimension mismatch".into()));
        }
        let i_t = gate_eval(ActKind::Sigmoid, &layer.w_ix, &input, &layer.w_ih, h_prev, &layer.b_i);
        let f_t = gate_eval(ActKind::Sigmoid, &layer.w_fx, &input, &layer.w_fh, h_prev, &layer.b_f);
        let o_t = gate_eval(ActKind::Sigmoid, &layer.w_ox, &input, &layer.w_oh, h_prev, &layer.b_o);
        let c_tilde =
            gate_eval(ActKind::Tanh, &layer.w_cx, &input, &layer.w_ch, h_prev, &layer.b_c);
        let ic = i_t.mul(&c_tilde);
        let fc = f_t.mul(c_prev);
        let c_t = ic.add(&fc);
        let tanh_c = c_t.map(|v| ActKind::Tanh.apply(v));
        let h_t = o_t.mul(&tanh_c);
        input = h_t.clone();
        next.push((h_t, c_t));
    }
    Ok(HiddenState { states: next })
}

/// Plain-tensor encode: fold [`lstm_step`] over the context from zeros.
pub fn encode<R: Real>(params: &LstmParams<R>, context: &[Tensor<R>]) -> Result<Tensor<R>> {
    if context.is_empty() {
        return Err(Error::Contract("encode requires a nonempty context".into()));
    }
    let mut state = HiddenState::zeros(params.layers.len(), params.hidden);
    for row in context {
        state = lstm_step(params, row, &state)?;
    }
    Ok(state.states.last().unwrap().0.clone())
}
