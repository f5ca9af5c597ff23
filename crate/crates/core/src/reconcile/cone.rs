//! Cone canonicalization of the reconciliation QP.
//!
//! With the auxiliary variable ξ pinned to x̂ and an epigraph scalar η, the
//! QP is equivalent to the conic program
//!
//!   min  cᵀ(η, ξ, x)   s.t.  b − A·(η, ξ, x) ∈ K,
//!   K = Q_{dim+1} × {0}^dim × (S ∩ ℝ₊^dim)
//!
//! where the second-order-cone block carries (η, Q_r(ξ − x)) and both A and
//! b are affine in (Q_r, x̂). The active-set path is the production solver;
//! this form exists as an independently checkable certificate.

use super::{Hierarchy, ReconcilerParams};
use crate::error::Result;
use crate::numerics::real::Real;
use crate::numerics::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConeDims {
    /// Second-order cone dimension (1 + dim).
    pub soc: usize,
    /// Zero-cone rows (ξ = x̂).
    pub zero: usize,
    /// Rows constrained to the coherent nonnegative set.
    pub coherent: usize,
}

#[derive(Debug, Clone)]
pub struct ConeData<R: Real = f64> {
    pub a: Tensor<R>,
    pub b: Vec<R>,
    pub c: Vec<R>,
    pub dims: ConeDims,
}

/// Assemble (A, b, c, K) for the given problem data. Variable layout is
/// (η, ξ, x) of dimension 1 + 2·dim.
pub fn assemble_cone<R: Real>(
    x_hat: &[R],
    params: &ReconcilerParams<R>,
    hier: &Hierarchy<R>,
) -> ConeData<R> {
    let dim = hier.dim();
    debug_assert_eq!(x_hat.len(), dim);
    let nvar = 1 + 2 * dim;
    let nrow = 1 + dim + dim + dim;
    let q_r = params.q_r();
    let mut a = Tensor::zeros(vec![nrow, nvar]);

    // SOC head: residual row 0 must equal η ⇒ A[0][0] = −1.
    a.data_mut()[0] = -R::one();
    // SOC tail rows i=1..dim: residual = (Q_r ξ − Q_r x)_i ⇒ A = [0, −Q_r, +Q_r]
    for i in 0..dim {
        for j in 0..dim {
            let v = q_r.at(i, j);
            a.data_mut()[(1 + i) * nvar + 1 + j] = -v;
            a.data_mut()[(1 + i) * nvar + 1 + dim + j] = v;
        }
    }
    // zero cone rows: residual = ξ − x̂ ⇒ b = −x̂, A = [0, −I, 0]
    for i in 0..dim {
        a.data_mut()[(1 + dim + i) * nvar + 1 + i] = -R::one();
    }
    // coherent cone rows: residual = x ⇒ A = [0, 0, −I]
    for i in 0..dim {
        a.data_mut()[(1 + 2 * dim + i) * nvar + 1 + dim + i] = -R::one();
    }

    let mut b = vec![R::zero(); nrow];
    for i in 0..dim {
        b[1 + dim + i] = -x_hat[i];
    }

    let mut c = vec![R::zero(); nvar];
    c[0] = R::one();

    ConeData {
        a,
        b,
        c,
        dims: ConeDims {
            soc: 1 + dim,
            zero: dim,
            coherent: dim,
        },
    }
}

/// Max cone-membership violation of b − A·(η, ξ, x) for a candidate point.
pub fn check_cone_feasibility<R: Real>(
    data: &ConeData<R>,
    hier: &Hierarchy<R>,
    eta: R,
    xi: &[R],
    x: &[R],
) -> Result<R> {
    let dim = hier.dim();
    let nvar = 1 + 2 * dim;
    let mut var = Vec::with_capacity(nvar);
    var.push(eta);
    var.extend_from_slice(xi);
    var.extend_from_slice(x);

    let nrow = data.b.len();
    let mut residual = vec![R::zero(); nrow];
    for i in 0..nrow {
        let mut acc = data.b[i];
        for j in 0..nvar {
            acc = acc - data.a.at(i, j) * var[j];
        }
        residual[i] = acc;
    }

    let mut worst = R::zero();
    let mut track = |v: R| {
        if v > worst {
            worst = v;
        }
    };

    // SOC block: head ≥ ‖tail‖
    let head = residual[0];
    let mut tail_sq = R::zero();
    for v in &residual[1..1 + dim] {
        tail_sq = tail_sq + *v * *v;
    }
    track(tail_sq.sqrt() - head);

    // zero block
    for v in &residual[1 + dim..1 + 2 * dim] {
        track(v.abs());
    }

    // coherent nonnegative block
    let x_block = &residual[1 + 2 * dim..1 + 3 * dim];
    track(hier.coherency_residual(x_block));
    for v in x_block {
        track(-*v);
    }

    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::super::{objective, reconcile};
    use super::*;
    use crate::numerics::rng::Rng;

    #[test]
    fn variable_dimension_and_cost_vector() {
        let h: Hierarchy = Hierarchy::single_total(2);
        let p = ReconcilerParams::identity(3);
        let data = assemble_cone(&[1.0, 2.0, 3.0], &p, &h);
        // n = 2 ⇒ variable dimension 1 + 3 + 3 = 7, c = e₁
        assert_eq!(data.a.cols(), 7);
        assert_eq!(data.c.len(), 7);
        assert_eq!(data.c[0], 1.0);
        assert!(data.c[1..].iter().all(|&v| v == 0.0));
        assert_eq!(data.dims, ConeDims { soc: 4, zero: 3, coherent: 3 });
    }

    #[test]
    fn b_is_affine_in_x_hat_and_a_is_unchanged() {
        let h: Hierarchy = Hierarchy::single_total(2);
        let p = ReconcilerParams::identity(3);
        let x1 = [1.0, -2.0, 0.5];
        let x2: Vec<f64> = x1.iter().map(|v| v * 2.0).collect();
        let d1 = assemble_cone(&x1, &p, &h);
        let d2 = assemble_cone(&x2, &p, &h);
        assert_eq!(d1.a.data(), d2.a.data(), "A must not depend on x̂");
        assert_eq!(d1.c, d2.c);
        for (i, (b1, b2)) in d1.b.iter().zip(&d2.b).enumerate() {
            let in_zero_block = (4..7).contains(&i);
            if in_zero_block {
                assert_eq!(*b2, 2.0 * *b1, "−x̂ block must double");
            } else {
                assert_eq!(*b1, 0.0);
                assert_eq!(*b2, 0.0);
            }
        }
    }

    #[test]
    fn qp_solution_is_cone_feasible_with_matching_objective() {
        let mut rng = Rng::seed_from(777);
        for _ in 0..100 {
            let n = 1 + (rng.next_u64() % 5) as usize;
            let h: Hierarchy = Hierarchy::single_total(n);
            let mut q_r = Tensor::zeros(vec![n + 1, n + 1]);
            for i in 0..=n {
                for j in 0..i {
                    q_r.data_mut()[i * (n + 1) + j] = rng.uniform(-0.4, 0.4);
                }
                q_r.data_mut()[i * (n + 1) + i] = rng.uniform(0.3, 2.0);
            }
            let p = ReconcilerParams::new(q_r).unwrap();
            let x_hat: Vec<f64> = (0..=n).map(|_| rng.uniform(-2.0, 3.0)).collect();
            let sol = reconcile(&x_hat, &p, &h).unwrap();

            // η* = ‖Q_r(x̂ − x*)‖₂ = √objective
            let eta = objective(&x_hat, &sol.x_star, &p.q()).max(0.0).sqrt();
            let data = assemble_cone(&x_hat, &p, &h);
            let violation =
                check_cone_feasibility(&data, &h, eta, &x_hat, &sol.x_star).unwrap();
            assert!(violation <= 1e-7, "cone violation {violation}");

            // objective of the cone program is η itself
            let cone_obj = eta;
            assert!((cone_obj * cone_obj - objective(&x_hat, &sol.x_star, &p.q())).abs() < 1e-7);
        }
    }
}
