//! Reverse-mode differentiation over an append-only operation tape.
//!
//! Nodes are tensor-valued. Parents always precede children, so one reverse
//! sweep over the node list accumulates adjoints for every parameter leaf.
//! Forward-mode tangents (needed because the quantile map is itself a
//! gradient) are not a graph feature: callers build tangent values out of
//! ordinary ops, so the reverse sweep differentiates through them for free.

use super::activation::ActKind;
use super::real::Real;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op<R: Real> {
    Leaf,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    /// Elementwise product.
    Mul(NodeId, NodeId),
    /// Multiply by a compile-time-known scalar constant.
    Scale(NodeId, R),
    /// Matrix [m, n] times n-vector.
    MatVec(NodeId, NodeId),
    Act(ActKind, NodeId),
    /// Sum of all entries, yielding a scalar.
    Sum(NodeId),
    /// Assemble scalars into a vector.
    Stack(Vec<NodeId>),
    /// Concatenate vectors end to end.
    Concat(Vec<NodeId>),
    /// One entry of a vector, as a scalar.
    Entry(NodeId, usize),
    /// ‖v‖₂^β with subgradient 0 at the origin.
    NormPow(NodeId, R),
}

struct Node<R: Real> {
    op: Op<R>,
    value: Tensor<R>,
}

pub struct Graph<R: Real = f64> {
    nodes: Vec<Node<R>>,
    params: BTreeMap<String, NodeId>,
    backward_done: bool,
}

/// ‖v‖₂^β, shared by the graph op and the plain scoring path so both produce
/// bit-identical values.
pub fn norm_pow<R: Real>(v: &[R], beta: R) -> R {
    let mut sq = R::zero();
    for &x in v {
        sq = sq + x * x;
    }
    let norm = sq.sqrt();
    if beta == R::one() {
        norm
    } else if beta == R::cast(2.0) {
        sq
    } else {
        norm.powf(beta)
    }
}

impl<R: Real> Default for Graph<R> {
    fn default() -> Self {
        Self::new()
    }
}

impl<R: Real> Graph<R> {
    pub fn new() -> Self {
        Graph {
            nodes: Vec::new(),
            params: BTreeMap::new(),
            backward_done: false,
        }
    }

    fn push(&mut self, op: Op<R>, value: Tensor<R>) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { op, value });
        id
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor<R> {
        &self.nodes[id.0].value
    }

    /// Non-trainable leaf.
    pub fn constant(&mut self, value: Tensor<R>) -> NodeId {
        self.push(Op::Leaf, value)
    }

    pub fn constant_scalar(&mut self, v: R) -> NodeId {
        self.constant(Tensor::scalar(v))
    }

    /// Named trainable leaf. Names must be unique within a graph.
    pub fn param(&mut self, name: &str, value: Tensor<R>) -> Result<NodeId> {
        if self.params.contains_key(name) {
            return Err(Error::Contract(format!("duplicate parameter name `{name}`")));
        }
        let id = self.push(Op::Leaf, value);
        self.params.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = {
            let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
            assert!(ta.same_shape(tb), "add: shape mismatch");
            ta.add(tb)
        };
        self.push(Op::Add(a, b), v)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = {
            let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
            assert!(ta.same_shape(tb), "sub: shape mismatch");
            ta.sub(tb)
        };
        self.push(Op::Sub(a, b), v)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = {
            let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
            assert!(ta.same_shape(tb), "mul: shape mismatch");
            ta.mul(tb)
        };
        self.push(Op::Mul(a, b), v)
    }

    pub fn scale(&mut self, a: NodeId, c: R) -> NodeId {
        let v = self.nodes[a.0].value.scale(c);
        self.push(Op::Scale(a, c), v)
    }

    pub fn matvec(&mut self, w: NodeId, x: NodeId) -> NodeId {
        let v = {
            let (tw, tx) = (&self.nodes[w.0].value, &self.nodes[x.0].value);
            assert_eq!(tw.shape().len(), 2, "matvec: first operand must be a matrix");
            assert_eq!(
                tw.shape()[1],
                tx.len(),
                "matvec: inner dimension mismatch"
            );
            tw.matvec(tx)
        };
        self.push(Op::MatVec(w, x), v)
    }

    pub fn act(&mut self, kind: ActKind, a: NodeId) -> NodeId {
        let v = self.nodes[a.0].value.map(|x| kind.apply(x));
        self.push(Op::Act(kind, a), v)
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let v = Tensor::scalar(self.nodes[a.0].value.sum());
        self.push(Op::Sum(a), v)
    }

    pub fn stack(&mut self, parts: &[NodeId]) -> NodeId {
        let mut data = Vec::with_capacity(parts.len());
        for &p in parts {
            let t = &self.nodes[p.0].value;
            assert!(t.is_scalar(), "stack: all parts must be scalars");
            data.push(t.item());
        }
        let v = Tensor::new(vec![parts.len()], data).expect("finite scalars");
        self.push(Op::Stack(parts.to_vec()), v)
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty(), "concat: empty list");
        let mut data = Vec::new();
        for &p in parts {
            data.extend_from_slice(self.nodes[p.0].value.data());
        }
        let v = Tensor::new(vec![data.len()], data).expect("finite parts");
        self.push(Op::Concat(parts.to_vec()), v)
    }

    pub fn entry(&mut self, a: NodeId, idx: usize) -> NodeId {
        let v = Tensor::scalar(self.nodes[a.0].value.data()[idx]);
        self.push(Op::Entry(a, idx), v)
    }

    pub fn norm_pow(&mut self, a: NodeId, beta: R) -> NodeId {
        let v = Tensor::scalar(norm_pow(self.nodes[a.0].value.data(), beta));
        self.push(Op::NormPow(a, beta), v)
    }

    /// Fold a list of scalars into their sum (left to right).
    pub fn add_all(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty(), "add_all: empty list");
        let mut acc = parts[0];
        for &p in &parts[1..] {
            acc = self.add(acc, p);
        }
        acc
    }

    /// Reverse sweep from a scalar output; returns the gradient of every
    /// parameter leaf (zeros for parameters the output does not depend on).
    pub fn backward(&mut self, output: NodeId) -> Result<BTreeMap<String, Tensor<R>>> {
        if self.backward_done {
            return Err(Error::Contract(
                "backward may run once per forward evaluation".into(),
            ));
        }
        if !self.nodes[output.0].value.is_scalar() {
            return Err(Error::Contract(format!(
                "backward requires a scalar output, got shape {:?}",
                self.nodes[output.0].value.shape()
            )));
        }
        self.backward_done = true;

        let mut grads: Vec<Option<Tensor<R>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Tensor::scalar(R::one()));

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            match &self.nodes[idx].op {
                Op::Leaf => {
                    grads[idx] = Some(g); // keep for parameter collection
                    continue;
                }
                Op::Add(a, b) => {
                    let (a, b) = (*a, *b);
                    accum(&mut grads, a, &g);
                    accum(&mut grads, b, &g);
                }
                Op::Sub(a, b) => {
                    let (a, b) = (*a, *b);
                    accum(&mut grads, a, &g);
                    let neg = g.scale(-R::one());
                    accum(&mut grads, b, &neg);
                }
                Op::Mul(a, b) => {
                    let (a, b) = (*a, *b);
                    let ga = g.mul(&self.nodes[b.0].value);
                    let gb = g.mul(&self.nodes[a.0].value);
                    accum(&mut grads, a, &ga);
                    accum(&mut grads, b, &gb);
                }
                Op::Scale(a, c) => {
                    let (a, c) = (*a, *c);
                    let ga = g.scale(c);
                    accum(&mut grads, a, &ga);
                }
                Op::MatVec(w, x) => {
                    let (w, x) = (*w, *x);
                    let (m, n) = {
                        let tw = &self.nodes[w.0].value;
                        (tw.shape()[0], tw.shape()[1])
                    };
                    let mut gw = Tensor::zeros(vec![m, n]);
                    let mut gx = Tensor::zeros(vec![n]);
                    {
                        let tw = self.nodes[w.0].value.data();
                        let tx = self.nodes[x.0].value.data();
                        let gd = g.data();
                        let gwd = gw.data_mut();
                        for i in 0..m {
                            let gi = gd[i];
                            let row = &tw[i * n..(i + 1) * n];
                            let grow = &mut gwd[i * n..(i + 1) * n];
                            for j in 0..n {
                                grow[j] = gi * tx[j];
                            }
                            for (j, wv) in row.iter().enumerate() {
                                gx.data_mut()[j] = gx.data()[j] + *wv * gi;
                            }
                        }
                    }
                    accum(&mut grads, w, &gw);
                    accum(&mut grads, x, &gx);
                }
                Op::Act(kind, a) => {
                    let (kind, a) = (*kind, *a);
                    let input = &self.nodes[a.0].value;
                    let output_v = &self.nodes[idx].value;
                    let local = input.zip(output_v, |x, y| kind.derivative(x, y));
                    let ga = g.mul(&local);
                    accum(&mut grads, a, &ga);
                }
                Op::Sum(a) => {
                    let a = *a;
                    let shape = self.nodes[a.0].value.shape().to_vec();
                    let n: usize = shape.iter().product();
                    let gv = g.item();
                    let ga = Tensor::new(shape, vec![gv; n]).expect("finite grad");
                    accum(&mut grads, a, &ga);
                }
                Op::Stack(parts) => {
                    let parts = parts.clone();
                    for (k, p) in parts.iter().enumerate() {
                        let gp = Tensor::scalar(g.data()[k]);
                        accum(&mut grads, *p, &gp);
                    }
                }
                Op::Concat(parts) => {
                    let parts = parts.clone();
                    let mut offset = 0usize;
                    for p in parts {
                        let len = self.nodes[p.0].value.len();
                        let seg = Tensor::new(
                            vec![len],
                            g.data()[offset..offset + len].to_vec(),
                        )
                        .expect("finite grad");
                        accum(&mut grads, p, &seg);
                        offset += len;
                    }
                }
                Op::Entry(a, idx) => {
                    let (a, idx) = (*a, *idx);
                    let shape = self.nodes[a.0].value.shape().to_vec();
                    let mut ga = Tensor::zeros(shape);
                    ga.data_mut()[idx] = g.item();
                    accum(&mut grads, a, &ga);
                }
                Op::NormPow(a, beta) => {
                    let (a, beta) = (*a, *beta);
                    let v = &self.nodes[a.0].value;
                    let norm = v.norm2();
                    let ga = if norm < R::cast(1e-12) {
                        Tensor::zeros(v.shape().to_vec())
                    } else {
                        // d‖v‖^β/dv = β‖v‖^{β−2} v
                        let c = g.item() * beta * norm.powf(beta - R::cast(2.0));
                        v.scale(c)
                    };
                    accum(&mut grads, a, &ga);
                }
            }
        }

        let mut out = BTreeMap::new();
        for (name, id) in &self.params {
            let shape = self.nodes[id.0].value.shape().to_vec();
            let g = grads[id.0].take().unwrap_or_else(|| Tensor::zeros(shape));
            out.insert(name.clone(), g);
        }
        Ok(out)
    }
}

fn accum<R: Real>(grads: &mut [Option<Tensor<R>>], id: NodeId, delta: &Tensor<R>) {
    match &mut grads[id.0] {
        Some(existing) => existing.add_assign(delta),
        slot => *slot = Some(delta.clone()),
    }
}
