//! Dense row-major tensors over a [`Real`] scalar.
//!
//! Construction rejects non-finite entries; every value flowing through the
//! models is therefore finite by induction.

use super::real::Real;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor<R: Real = f64> {
    shape: Vec<usize>,
    data: Vec<R>,
}

impl<R: Real> Tensor<R> {
    pub fn new(shape: Vec<usize>, data: Vec<R>) -> Result<Self> {
        let count: usize = shape.iter().product();
        if count != data.len() {
            return Err(Error::Contract(format!(
                "tensor shape {:?} implies {} elements, got {}",
                shape,
                count,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invariant("tensor entries must be finite".into()));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let count = shape.iter().product();
        Tensor {
            shape,
            data: vec![R::zero(); count],
        }
    }

    pub fn scalar(v: R) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![v],
        }
    }

    pub fn vector(data: Vec<R>) -> Result<Self> {
        let n = data.len();
        Tensor::new(vec![n], data)
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<R>) -> Result<Self> {
        Tensor::new(vec![rows, cols], data)
    }

    /// Basis vector e_j of the given length.
    pub fn basis(len: usize, j: usize) -> Self {
        let mut t = Tensor::zeros(vec![len]);
        t.data[j] = R::one();
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[R] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [R] {
        &mut self.data
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// The single entry of a scalar tensor.
    pub fn item(&self) -> R {
        debug_assert_eq!(self.data.len(), 1);
        self.data[0]
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape[1]
    }

    pub fn at(&self, r: usize, c: usize) -> R {
        self.data[r * self.shape[1] + c]
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.shape == other.shape
    }

    pub fn map(&self, f: impl Fn(R) -> R) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip(&self, other: &Self, f: impl Fn(R, R) -> R) -> Self {
        debug_assert!(self.same_shape(other));
        Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a * b)
    }

    pub fn scale(&self, c: R) -> Self {
        self.map(|v| v * c)
    }

    pub fn sum(&self) -> R {
        let mut acc = R::zero();
        for &v in &self.data {
            acc = acc + v;
        }
        acc
    }

    pub fn dot(&self, other: &Self) -> R {
        debug_assert_eq!(self.data.len(), other.data.len());
        let mut acc = R::zero();
        for (&a, &b) in self.data.iter().zip(&other.data) {
            acc = acc + a * b;
        }
        acc
    }

    pub fn norm2(&self) -> R {
        self.dot(self).sqrt()
    }

    /// y = W x for a [m, n] matrix and an n-vector.
    pub fn matvec(&self, x: &Self) -> Self {
        let (m, n) = (self.shape[0], self.shape[1]);
        debug_assert_eq!(x.data.len(), n);
        let mut out = vec![R::zero(); m];
        for i in 0..m {
            let row = &self.data[i * n..(i + 1) * n];
            let mut acc = R::zero();
            for (w, xv) in row.iter().zip(&x.data) {
                acc = acc + *w * *xv;
            }
            out[i] = acc;
        }
        Tensor {
            shape: vec![m],
            data: out,
        }
    }

    /// self += other, in place.
    pub fn add_assign(&mut self, other: &Self) {
        debug_assert!(self.same_shape(other));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + *b;
        }
    }

    pub fn scale_assign(&mut self, c: R) {
        for a in self.data.iter_mut() {
            *a = *a * c;
        }
    }

    pub fn has_shape(&self, shape: &[usize]) -> bool {
        self.shape == shape
    }

    /// Concatenate vectors end to end.
    pub fn concat(parts: &[&Tensor<R>]) -> Self {
        let mut data = Vec::new();
        for p in parts {
            data.extend_from_slice(p.data());
        }
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }
}
