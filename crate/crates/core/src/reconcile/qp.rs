//! Active-set solver for the reconciliation QP.
//!
//! The coherent subspace is parameterized exactly by the bottom vector
//! (x = T·z with T = [S; I]), which reduces the projection to a
//! bound-constrained strictly convex QP in z:
//!
//!   min  (x̂ − Tz)ᵀ Q (x̂ − Tz)   s.t.  z ≥ 0
//!
//! Aggregates inherit nonnegativity from z ≥ 0 because S is a 0/1 matrix
//! with no zero rows. Working-set subproblems are solved by Cholesky on the
//! positive-definite reduced Hessian, so no degenerate KKT factorizations
//! arise in the forward pass.

use super::{Hierarchy, QpSolution, ReconcilerParams, DIAG_FLOOR};
use crate::error::{Error, Result};
use crate::numerics::linalg::{cholesky_solve, mat_mul, transpose};
use crate::numerics::real::Real;
use crate::numerics::tensor::Tensor;

/// QP objective (x̂−x)ᵀQ(x̂−x).
pub fn objective<R: Real>(x_hat: &[R], x: &[R], q: &Tensor<R>) -> R {
    let n = x_hat.len();
    let mut diff = vec![R::zero(); n];
    for i in 0..n {
        diff[i] = x_hat[i] - x[i];
    }
    let mut acc = R::zero();
    for i in 0..n {
        let mut row = R::zero();
        for j in 0..n {
            row = row + q.at(i, j) * diff[j];
        }
        acc = acc + diff[i] * row;
    }
    acc
}

fn is_feasible_exact<R: Real>(x_hat: &[R], hier: &Hierarchy<R>) -> bool {
    if x_hat.iter().any(|&v| v < R::zero()) {
        return false;
    }
    hier.coherency_residual(x_hat) == R::zero()
}

/// Solve the reconciliation QP. Feasible inputs are returned unchanged.
pub fn reconcile<R: Real>(
    x_hat: &[R],
    params: &ReconcilerParams<R>,
    hier: &Hierarchy<R>,
) -> Result<QpSolution<R>> {
    let dim = hier.dim();
    let (r, n) = (hier.aggregates(), hier.bottom());
    if x_hat.len() != dim {
        return Err(Error::Contract(format!(
            "input dimension {} does not match hierarchy dimension {dim}",
            x_hat.len()
        )));
    }
    if params.dim() != dim {
        return Err(Error::Contract(format!(
            "Q_r dimension {} does not match hierarchy dimension {dim}",
            params.dim()
        )));
    }

    if is_feasible_exact(x_hat, hier) {
        let active_set = (0..dim).filter(|&i| x_hat[i] == R::zero()).collect();
        return Ok(QpSolution {
            x_star: x_hat.to_vec(),
            active_set,
            eq_multipliers: vec![R::zero(); r],
            ineq_multipliers: vec![R::zero(); dim],
        });
    }

    let q = params.q();
    let t = hier.total_matrix();
    // H = TᵀQT (n×n, PD), b = TᵀQ x̂
    let tt = transpose(&t);
    let h = mat_mul(&tt, &mat_mul(&q, &t));
    let qx: Vec<R> = (0..dim)
        .map(|i| {
            let mut acc = R::zero();
            for j in 0..dim {
                acc = acc + q.at(i, j) * x_hat[j];
            }
            acc
        })
        .collect();
    let b: Vec<R> = (0..n)
        .map(|i| {
            let mut acc = R::zero();
            for j in 0..dim {
                acc = acc + tt.at(i, j) * qx[j];
            }
            acc
        })
        .collect();

    // start from the clipped bottom block
    let mut z: Vec<R> = (0..n)
        .map(|i| {
            let v = x_hat[r + i];
            if v > R::zero() {
                v
            } else {
                R::zero()
            }
        })
        .collect();
    let mut working: Vec<bool> = z.iter().map(|&v| v == R::zero()).collect();

    let grad_tol = R::cast(1e-10);
    let step_tol = R::cast(1e-13);
    let max_iter = 6 * n + 20;
    let mut iter = 0usize;

    loop {
        iter += 1;
        if iter > max_iter {
            return Err(Error::Numerical(format!(
                "active-set iteration limit reached; Q may be near-singular despite the {DIAG_FLOOR} diagonal floor"
            )));
        }

        // equality-constrained subproblem on the free coordinates
        let free: Vec<usize> = (0..n).filter(|&i| !working[i]).collect();
        let mut z_cand = vec![R::zero(); n];
        if !free.is_empty() {
            let nf = free.len();
            let mut h_ff = Tensor::zeros(vec![nf, nf]);
            let mut b_f = vec![R::zero(); nf];
            for (a, &i) in free.iter().enumerate() {
                b_f[a] = b[i];
                for (c, &j) in free.iter().enumerate() {
                    h_ff.data_mut()[a * nf + c] = h.at(i, j);
                }
            }
            let sol = cholesky_solve(&h_ff, &b_f).map_err(|_| {
                Error::Numerical(format!(
                    "reduced Hessian not positive definite; check the Q_r diagonal floor {DIAG_FLOOR}"
                ))
            })?;
            for (a, &i) in free.iter().enumerate() {
                z_cand[i] = sol[a];
            }
        }

        let max_move = free
            .iter()
            .map(|&i| (z_cand[i] - z[i]).abs())
            .fold(R::zero(), |acc, v| if v > acc { v } else { acc });

        if max_move <= step_tol {
            // stationary on the working set: check bound multipliers
            // λ_z = ∇J(z) = 2(Hz − b)
            let mut worst: Option<(usize, R)> = None;
            for i in 0..n {
                if !working[i] {
                    continue;
                }
                let mut gi = -b[i];
                for j in 0..n {
                    gi = gi + h.at(i, j) * z[j];
                }
                let lambda = gi + gi;
                if lambda < -grad_tol {
                    match worst {
                        Some((_, l)) if lambda >= l => {}
                        _ => worst = Some((i, lambda)),
                    }
                }
            }
            match worst {
                Some((i, _)) => {
                    working[i] = false;
                    continue;
                }
                None => break,
            }
        }

        // line step toward the candidate, blocked by bounds on free coords
        let mut t_max = R::one();
        let mut blocker: Option<usize> = None;
        for &i in &free {
            let d = z_cand[i] - z[i];
            if d < R::zero() {
                let step = -z[i] / d;
                if step < t_max {
                    t_max = step;
                    blocker = Some(i);
                }
            }
        }
        if t_max < R::one() {
            for &i in &free {
                z[i] = z[i] + t_max * (z_cand[i] - z[i]);
            }
            let blk = blocker.expect("blocking index exists when t < 1");
            z[blk] = R::zero();
            working[blk] = true;
        } else {
            for &i in &free {
                z[i] = z_cand[i];
            }
        }
    }

    // exact zeros on the working set, aggregates as exact sums
    for i in 0..n {
        if working[i] {
            z[i] = R::zero();
        }
    }
    let s = hier.summing();
    let mut x_star = vec![R::zero(); dim];
    for i in 0..r {
        let mut acc = R::zero();
        for j in 0..n {
            if s.at(i, j) == R::one() {
                acc = acc + z[j];
            }
        }
        x_star[i] = acc;
    }
    x_star[r..].copy_from_slice(&z);

    // x-space multipliers: g = 2Q(x*−x̂); ν = −g_y; λ = [0; g_z + Sᵀg_y]
    let mut g = vec![R::zero(); dim];
    for i in 0..dim {
        let mut acc = R::zero();
        for j in 0..dim {
            acc = acc + q.at(i, j) * (x_star[j] - x_hat[j]);
        }
        g[i] = acc + acc;
    }
    let eq_multipliers: Vec<R> = (0..r).map(|i| -g[i]).collect();
    let mut ineq_multipliers = vec![R::zero(); dim];
    let mut active_set = Vec::new();
    for i in 0..r {
        if x_star[i] == R::zero() {
            active_set.push(i); // weakly active aggregate, multiplier 0
        }
    }
    for i in 0..n {
        if working[i] {
            let mut lam = g[r + i];
            for a in 0..r {
                if s.at(a, i) == R::one() {
                    lam = lam + g[a];
                }
            }
            // stationarity guarantees λ ≥ −grad_tol; clamp roundoff
            ineq_multipliers[r + i] = if lam > R::zero() { lam } else { R::zero() };
            active_set.push(r + i);
        }
    }

    Ok(QpSolution {
        x_star,
        active_set,
        eq_multipliers,
        ineq_multipliers,
    })
}
