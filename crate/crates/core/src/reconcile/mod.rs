//! Differentiable reconciliation layer.
//!
//! Maps an incoherent forecast vector x̂ = [y, z₁..z_n] onto the coherent
//! nonnegative subspace by the weighted projection
//!
//!   x* = argmin (x̂−x)ᵀQ(x̂−x)   s.t.  y = S·z,  x ≥ 0,   Q = Q_rᵀQ_r
//!
//! solved by a dense active-set iteration, differentiated implicitly through
//! the KKT conditions, and trained against the energy score through the
//! lower-triangular factor Q_r.

mod backward;
mod cone;
mod qp;
mod train;

pub use backward::dcl_backward;
pub use cone::{assemble_cone, check_cone_feasibility, ConeData, ConeDims};
pub use qp::{objective, reconcile};
pub use train::{
    coef_weight_from_errors, train_reconciler, OriginData, ReconcilerDataset,
    ReconcilerTrainConfig, ReconcilerTrainReport,
};

use crate::error::{Error, Result};
use crate::numerics::linalg::{mat_mul, transpose};
use crate::numerics::real::Real;
use crate::numerics::tensor::Tensor;
use serde::{Deserialize, Serialize};

/// Smallest admissible Q_r diagonal entry; keeps Q positive definite.
pub const DIAG_FLOOR: f64 = 1e-6;

/// One-level hierarchy: aggregates = S · bottom, with the series order
/// convention x = [aggregates..., bottom...]. The common grand-total case
/// is a single all-ones row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Hierarchy<R: Real = f64> {
    s: Tensor<R>,
}

impl<R: Real> Hierarchy<R> {
    pub fn new(s: Tensor<R>) -> Result<Self> {
        if s.shape().len() != 2 {
            return Err(Error::Contract("summing matrix must be 2-dimensional".into()));
        }
        for row in 0..s.rows() {
            let mut any = false;
            for col in 0..s.cols() {
                let v = s.at(row, col);
                if v != R::zero() && v != R::one() {
                    return Err(Error::Invariant(
                        "summing matrix entries must be 0 or 1".into(),
                    ));
                }
                any = any || v == R::one();
            }
            if !any {
                return Err(Error::Invariant("summing matrix has a zero row".into()));
            }
        }
        Ok(Hierarchy { s })
    }

    /// Single aggregate over n bottom series, S = [1, 1, ..., 1].
    pub fn single_total(n: usize) -> Self {
        Hierarchy {
            s: Tensor::matrix(1, n, vec![R::one(); n]).expect("ones row"),
        }
    }

    pub fn summing(&self) -> &Tensor<R> {
        &self.s
    }

    /// Number of aggregate series.
    pub fn aggregates(&self) -> usize {
        self.s.rows()
    }

    /// Number of bottom series.
    pub fn bottom(&self) -> usize {
        self.s.cols()
    }

    /// Full vector dimension r + n.
    pub fn dim(&self) -> usize {
        self.aggregates() + self.bottom()
    }

    /// T = [S; I]: bottom vector to full stacked vector.
    pub fn total_matrix(&self) -> Tensor<R> {
        let (r, n) = (self.aggregates(), self.bottom());
        let mut t = Tensor::zeros(vec![r + n, n]);
        for i in 0..r {
            for j in 0..n {
                t.data_mut()[i * n + j] = self.s.at(i, j);
            }
        }
        for j in 0..n {
            t.data_mut()[(r + j) * n + j] = R::one();
        }
        t
    }

    /// E = [I | −S]: rows vanish exactly on the coherent subspace.
    pub fn equality_matrix(&self) -> Tensor<R> {
        let (r, n) = (self.aggregates(), self.bottom());
        let dim = r + n;
        let mut e = Tensor::zeros(vec![r, dim]);
        for i in 0..r {
            e.data_mut()[i * dim + i] = R::one();
            for j in 0..n {
                e.data_mut()[i * dim + r + j] = -self.s.at(i, j);
            }
        }
        e
    }

    /// Max |y − S·z| over aggregate rows for a full vector x. The bottom
    /// values are summed left to right, matching how aggregate columns are
    /// built, so exactly coherent inputs report exactly zero.
    pub fn coherency_residual(&self, x: &[R]) -> R {
        let (r, n) = (self.aggregates(), self.bottom());
        let mut worst = R::zero();
        for i in 0..r {
            let mut sum = R::zero();
            for j in 0..n {
                if self.s.at(i, j) == R::one() {
                    sum = sum + x[r + j];
                }
            }
            let residual = (x[i] - sum).abs();
            if residual > worst {
                worst = residual;
            }
        }
        worst
    }
}

/// Trainable reconciliation weight: lower-triangular Q_r with floored
/// positive diagonal, inducing Q = Q_rᵀQ_r ≻ 0.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReconcilerParams<R: Real = f64> {
    q_r: Tensor<R>,
}

impl<R: Real> ReconcilerParams<R> {
    pub fn new(q_r: Tensor<R>) -> Result<Self> {
        let dim = q_r.rows();
        if q_r.shape().len() != 2 || q_r.cols() != dim {
            return Err(Error::Contract("Q_r must be square".into()));
        }
        for i in 0..dim {
            for j in i + 1..dim {
                if q_r.at(i, j) != R::zero() {
                    return Err(Error::Invariant("Q_r must be lower-triangular".into()));
                }
            }
            if q_r.at(i, i) < R::cast(DIAG_FLOOR) {
                return Err(Error::Invariant(format!(
                    "Q_r diagonal must be at least {DIAG_FLOOR}"
                )));
            }
        }
        Ok(ReconcilerParams { q_r })
    }

    pub fn identity(dim: usize) -> Self {
        let mut q_r = Tensor::zeros(vec![dim, dim]);
        for i in 0..dim {
            q_r.data_mut()[i * dim + i] = R::one();
        }
        ReconcilerParams { q_r }
    }

    pub fn dim(&self) -> usize {
        self.q_r.rows()
    }

    pub fn q_r(&self) -> &Tensor<R> {
        &self.q_r
    }

    /// Q = Q_rᵀ Q_r.
    pub fn q(&self) -> Tensor<R> {
        mat_mul(&transpose(&self.q_r), &self.q_r)
    }

    /// Apply a raw additive update to the lower triangle, then floor the
    /// diagonal. Used by the training loop.
    pub fn update_lower(&mut self, delta: &Tensor<R>) {
        let dim = self.dim();
        for i in 0..dim {
            for j in 0..=i {
                let idx = i * dim + j;
                self.q_r.data_mut()[idx] = self.q_r.data()[idx] + delta.data()[idx];
            }
        }
        self.floor_diagonal();
    }

    pub fn set_q_r(&mut self, q_r: Tensor<R>) -> Result<()> {
        *self = ReconcilerParams::new(q_r)?;
        Ok(())
    }

    pub fn floor_diagonal(&mut self) {
        let dim = self.dim();
        let floor = R::cast(DIAG_FLOOR);
        for i in 0..dim {
            let idx = i * dim + i;
            if self.q_r.data()[idx] < floor {
                self.q_r.data_mut()[idx] = floor;
            }
        }
    }
}

/// Solution of the reconciliation QP with its KKT certificates.
#[derive(Debug, Clone)]
pub struct QpSolution<R: Real = f64> {
    /// Coherent nonnegative vector [y, z].
    pub x_star: Vec<R>,
    /// Indices (into x) of binding nonnegativity constraints.
    pub active_set: Vec<usize>,
    /// Multipliers of the equality rows y = S·z.
    pub eq_multipliers: Vec<R>,
    /// Multipliers of the x ≥ 0 constraints (zero off the active set).
    pub ineq_multipliers: Vec<R>,
}
