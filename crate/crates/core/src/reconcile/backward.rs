//! Implicit differentiation of the reconciliation QP at its solution.
//!
//! The KKT residual at a non-degenerate optimum,
//!
//!   R(x, ν, λ_A) = [ 2Q(x−x̂) + Eᵀν − Sel_Aᵀ λ_A ;  E x ;  x_A ]
//!
//! defines (x, ν, λ_A) implicitly in (Q_r, x̂). Solving the transposed
//! Jacobian system against the upstream adjoint yields ∂L/∂x̂ and, through
//! Q = Q_rᵀQ_r, ∂L/∂Q_r. Weakly-active constraints (slack and multiplier
//! both ≤ 1e-8) make the Jacobian singular; those instances fall back to a
//! ridge-regularized least-squares solve.

use super::{Hierarchy, QpSolution, ReconcilerParams};
use crate::error::{Error, Result};
use crate::numerics::linalg::{least_squares_ridge, lu_solve};
use crate::numerics::real::Real;
use crate::numerics::tensor::Tensor;

const WEAK_TOL: f64 = 1e-8;

/// Gradients of a scalar loss through the QP solution: returns
/// (∂L/∂Q_r restricted to the lower triangle, ∂L/∂x̂).
pub fn dcl_backward<R: Real>(
    sol: &QpSolution<R>,
    x_hat: &[R],
    params: &ReconcilerParams<R>,
    hier: &Hierarchy<R>,
    upstream: &[R],
) -> Result<(Tensor<R>, Vec<R>)> {
    let dim = hier.dim();
    let r = hier.aggregates();
    if sol.x_star.len() != dim || upstream.len() != dim || x_hat.len() != dim {
        return Err(Error::Contract(
            "dcl_backward dimensions do not match the hierarchy".into(),
        ));
    }
    let q = params.q();
    let active = &sol.active_set;
    let na = active.len();
    let size = dim + r + na;

    // transposed KKT Jacobian:
    //   [2Q   Eᵀ   Selᵀ]
    //   [E    0    0   ]
    //   [−Sel 0    0   ]
    let e = hier.equality_matrix();
    let mut m = Tensor::zeros(vec![size, size]);
    for i in 0..dim {
        for j in 0..dim {
            m.data_mut()[i * size + j] = q.at(i, j) + q.at(i, j);
        }
        for a in 0..r {
            m.data_mut()[i * size + dim + a] = e.at(a, i);
        }
    }
    for (k, &idx) in active.iter().enumerate() {
        m.data_mut()[idx * size + dim + r + k] = R::one();
        m.data_mut()[(dim + r + k) * size + idx] = -R::one();
    }
    for a in 0..r {
        for j in 0..dim {
            m.data_mut()[(dim + a) * size + j] = e.at(a, j);
        }
    }

    let mut rhs = vec![R::zero(); size];
    rhs[..dim].copy_from_slice(upstream);

    let weakly_active = active
        .iter()
        .any(|&i| sol.ineq_multipliers[i] <= R::cast(WEAK_TOL));
    let w = if weakly_active {
        least_squares_ridge(&m, &rhs, R::cast(1e-12))?
    } else {
        match lu_solve(&m, &rhs) {
            Ok(w) => w,
            Err(_) => least_squares_ridge(&m, &rhs, R::cast(1e-12)).map_err(|_| {
                Error::Numerical(
                    "KKT Jacobian rank-deficient beyond the least-squares fallback".into(),
                )
            })?,
        }
    };
    let w_x = &w[..dim];

    // ∂L/∂x̂ = 2Q w_x
    let mut grad_x_hat = vec![R::zero(); dim];
    for i in 0..dim {
        let mut acc = R::zero();
        for j in 0..dim {
            acc = acc + q.at(i, j) * w_x[j];
        }
        grad_x_hat[i] = acc + acc;
    }

    // ∂L/∂Q = −2 w_x (x*−x̂)ᵀ, chained through Q = Q_rᵀ Q_r:
    // ∂L/∂Q_r = Q_r (G + Gᵀ), lower triangle only.
    let q_r = params.q_r();
    let mut grad_q_r = Tensor::zeros(vec![dim, dim]);
    let two = R::cast(2.0);
    for i in 0..dim {
        for j in 0..=i {
            let mut acc = R::zero();
            for k in 0..dim {
                // (G + Gᵀ)[i... sum over k: Q_r[i][k] (G[k][j] + G[j][k])
                let g_kj = -two * w_x[k] * (sol.x_star[j] - x_hat[j]);
                let g_jk = -two * w_x[j] * (sol.x_star[k] - x_hat[k]);
                acc = acc + q_r.at(i, k) * (g_kj + g_jk);
            }
            grad_q_r.data_mut()[i * dim + j] = acc;
        }
    }

    Ok((grad_q_r, grad_x_hat))
}

#[cfg(test)]
mod tests {
    use super::super::{reconcile, ReconcilerParams};
    use super::*;
    use crate::numerics::rng::Rng;

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let h: Hierarchy = Hierarchy::single_total(2);
        let p = ReconcilerParams::identity(3);
        let x_hat = [3.0, 1.0, 1.0];
        let sol = reconcile(&x_hat, &p, &h).unwrap();
        let (gq, gx) = dcl_backward(&sol, &x_hat, &p, &h, &[0.0; 3]).unwrap();
        assert!(gq.data().iter().all(|&v| v == 0.0));
        assert!(gx.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_weight_without_actives_is_orthogonal_projector() {
        // Q = I, no active bounds: ∂L/∂x̂ = P·u with P = I − Eᵀ(EEᵀ)⁻¹E.
        let h: Hierarchy = Hierarchy::single_total(2);
        let p = ReconcilerParams::identity(3);
        let x_hat = [3.0, 1.0, 1.0];
        let sol = reconcile(&x_hat, &p, &h).unwrap();
        assert!(sol.active_set.is_empty());
        let u = [0.7, -0.2, 0.4];
        let (_gq, gx) = dcl_backward(&sol, &x_hat, &p, &h, &u).unwrap();
        // E = [1, −1, −1], EEᵀ = 3 ⇒ P u = u − (Eu/3)·Eᵀ
        let eu = u[0] - u[1] - u[2];
        let want = [u[0] - eu / 3.0, u[1] + eu / 3.0, u[2] + eu / 3.0];
        for (g, w) in gx.iter().zip(want) {
            assert!((g - w).abs() < 1e-10, "{g} vs {w}");
        }
    }

    fn random_lower(dim: usize, rng: &mut Rng) -> ReconcilerParams<f64> {
        let mut q_r = Tensor::zeros(vec![dim, dim]);
        for i in 0..dim {
            for j in 0..i {
                q_r.data_mut()[i * dim + j] = rng.uniform(-0.4, 0.4);
            }
            q_r.data_mut()[i * dim + i] = rng.uniform(0.4, 1.6);
        }
        ReconcilerParams::new(q_r).unwrap()
    }

    /// Non-degenerate random instances: both gradients must match central
    /// finite differences of L = uᵀ x*(Q_r, x̂).
    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = Rng::seed_from(4242);
        let mut tested = 0;
        while tested < 100 {
            let n = 1 + (rng.next_u64() % 5) as usize;
            let dim = n + 1;
            let h: Hierarchy = Hierarchy::single_total(n);
            let p = random_lower(dim, &mut rng);
            let x_hat: Vec<f64> = (0..dim).map(|_| rng.uniform(-2.0, 3.0)).collect();
            let sol = reconcile(&x_hat, &p, &h).unwrap();

            // require strict complementarity so the active set is stable
            let degenerate = (0..dim).any(|i| {
                let slack = sol.x_star[i];
                let lam = sol.ineq_multipliers[i];
                (slack < 1e-4 && lam < 1e-4) || (slack < 1e-4 && !sol.active_set.contains(&i))
            });
            if degenerate {
                continue;
            }
            tested += 1;

            let u: Vec<f64> = (0..dim).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let (gq, gx) = dcl_backward(&sol, &x_hat, &p, &h, &u).unwrap();

            let loss = |pp: &ReconcilerParams<f64>, xh: &[f64]| -> f64 {
                let s = reconcile(xh, pp, &h).unwrap();
                s.x_star.iter().zip(&u).map(|(a, b)| a * b).sum()
            };

            let eps = 1e-6;
            for i in 0..dim {
                let mut hi = x_hat.clone();
                hi[i] += eps;
                let mut lo = x_hat.clone();
                lo[i] -= eps;
                let fd = (loss(&p, &hi) - loss(&p, &lo)) / (2.0 * eps);
                let an = gx[i];
                let scale = an.abs().max(fd.abs()).max(1e-6);
                assert!(
                    (an - fd).abs() / scale <= 1e-3,
                    "x̂[{i}]: {an} vs {fd} (n={n})"
                );
            }
            for i in 0..dim {
                for j in 0..=i {
                    let mut qp = p.q_r().clone();
                    qp.data_mut()[i * dim + j] += eps;
                    let p_hi = ReconcilerParams::new(qp).unwrap();
                    let mut qm = p.q_r().clone();
                    qm.data_mut()[i * dim + j] -= eps;
                    let p_lo = ReconcilerParams::new(qm).unwrap();
                    let fd = (loss(&p_hi, &x_hat) - loss(&p_lo, &x_hat)) / (2.0 * eps);
                    let an = gq.at(i, j);
                    let scale = an.abs().max(fd.abs()).max(1e-6);
                    assert!(
                        (an - fd).abs() / scale <= 1e-3,
                        "Q_r[{i}][{j}]: {an} vs {fd} (n={n})"
                    );
                }
            }
        }
    }
}
