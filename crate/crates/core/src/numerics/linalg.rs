//! Small dense linear algebra: LU and Cholesky solves, transposes, products,
//! and a ridge-regularized least-squares fallback. Everything here targets
//! systems of a few dozen unknowns at most.

use super::real::Real;
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub fn transpose<R: Real>(a: &Tensor<R>) -> Tensor<R> {
    let (m, n) = (a.rows(), a.cols());
    let mut out = Tensor::zeros(vec![n, m]);
    for i in 0..m {
        for j in 0..n {
            out.data_mut()[j * m + i] = a.data()[i * n + j];
        }
    }
    out
}

pub fn mat_mul<R: Real>(a: &Tensor<R>, b: &Tensor<R>) -> Tensor<R> {
    let (m, k) = (a.rows(), a.cols());
    let n = b.cols();
    debug_assert_eq!(b.rows(), k);
    let mut out = Tensor::zeros(vec![m, n]);
    for i in 0..m {
        for p in 0..k {
            let av = a.data()[i * k + p];
            if av == R::zero() {
                continue;
            }
            for j in 0..n {
                out.data_mut()[i * n + j] =
                    out.data()[i * n + j] + av * b.data()[p * n + j];
            }
        }
    }
    out
}

/// Solve A x = b by LU with partial pivoting. A is consumed as a working copy.
pub fn lu_solve<R: Real>(a: &Tensor<R>, b: &[R]) -> Result<Vec<R>> {
    let n = a.rows();
    if a.cols() != n || b.len() != n {
        return Err(Error::Contract("lu_solve expects square A and matching b".into()));
    }
    let mut m = a.data().to_vec();
    let mut x = b.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        // pivot
        let mut best = col;
        let mut best_val = m[perm[col] * n + col].abs();
        for row in col + 1..n {
            let v = m[perm[row] * n + col].abs();
            if v > best_val {
                best = row;
                best_val = v;
            }
        }
        if best_val < R::cast(1e-300) {
            return Err(Error::Numerical("singular system in lu_solve".into()));
        }
        perm.swap(col, best);
        let p = perm[col];
        let pivot = m[p * n + col];
        for row in col + 1..n {
            let r = perm[row];
            let factor = m[r * n + col] / pivot;
            if factor == R::zero() {
                continue;
            }
            m[r * n + col] = factor;
            for j in col + 1..n {
                m[r * n + j] = m[r * n + j] - factor * m[p * n + j];
            }
            x[r] = x[r] - factor * x[p];
        }
    }
    // back substitution
    let mut out = vec![R::zero(); n];
    for col in (0..n).rev() {
        let p = perm[col];
        let mut acc = x[p];
        for j in col + 1..n {
            acc = acc - m[p * n + j] * out[j];
        }
        out[col] = acc / m[p * n + col];
    }
    Ok(out)
}

/// Cholesky factor L (lower) of a symmetric positive-definite matrix.
pub fn cholesky_lower<R: Real>(a: &Tensor<R>) -> Result<Tensor<R>> {
    let n = a.rows();
    debug_assert_eq!(a.cols(), n);
    let mut l = Tensor::zeros(vec![n, n]);
    for i in 0..n {
        for j in 0..=i {
            let mut acc = a.data()[i * n + j];
            for k in 0..j {
                acc = acc - l.data()[i * n + k] * l.data()[j * n + k];
            }
            if i == j {
                if acc <= R::zero() {
                    return Err(Error::Numerical(
                        "matrix not positive definite in cholesky".into(),
                    ));
                }
                l.data_mut()[i * n + j] = acc.sqrt();
            } else {
                l.data_mut()[i * n + j] = acc / l.data()[j * n + j];
            }
        }
    }
    Ok(l)
}

/// Solve A x = b for symmetric positive-definite A via Cholesky.
pub fn cholesky_solve<R: Real>(a: &Tensor<R>, b: &[R]) -> Result<Vec<R>> {
    let n = a.rows();
    let l = cholesky_lower(a)?;
    // forward: L y = b
    let mut y = vec![R::zero(); n];
    for i in 0..n {
        let mut acc = b[i];
        for k in 0..i {
            acc = acc - l.data()[i * n + k] * y[k];
        }
        y[i] = acc / l.data()[i * n + i];
    }
    // backward: Lᵀ x = y
    let mut x = vec![R::zero(); n];
    for i in (0..n).rev() {
        let mut acc = y[i];
        for k in i + 1..n {
            acc = acc - l.data()[k * n + i] * x[k];
        }
        x[i] = acc / l.data()[i * n + i];
    }
    Ok(x)
}

/// Lower-triangular M with MᵀM = Q for symmetric positive-definite Q.
///
/// This is the factorization the reconciliation weight is parameterized by;
/// it runs the Cholesky recurrence from the bottom-right corner.
pub fn gram_factor_lower<R: Real>(q: &Tensor<R>) -> Result<Tensor<R>> {
    let n = q.rows();
    debug_assert_eq!(q.cols(), n);
    let mut m = Tensor::zeros(vec![n, n]);
    for i in (0..n).rev() {
        // diagonal: Q[i][i] = Σ_{k≥i} M[k][i]²
        let mut acc = q.data()[i * n + i];
        for k in i + 1..n {
            let v = m.data()[k * n + i];
            acc = acc - v * v;
        }
        if acc <= R::zero() {
            return Err(Error::Numerical(
                "matrix not positive definite in gram_factor_lower".into(),
            ));
        }
        let d = acc.sqrt();
        m.data_mut()[i * n + i] = d;
        // off-diagonal row entries M[i][j], j < i
        for j in 0..i {
            let mut acc = q.data()[i * n + j];
            for k in i + 1..n {
                acc = acc - m.data()[k * n + i] * m.data()[k * n + j];
            }
            m.data_mut()[i * n + j] = acc / d;
        }
    }
    Ok(m)
}

/// Minimum-residual solve of A x = b through the ridge-regularized normal
/// equations (AᵀA + ridge·I) x = Aᵀ b. Used as the least-squares fallback for
/// weakly-active KKT systems.
pub fn least_squares_ridge<R: Real>(a: &Tensor<R>, b: &[R], ridge: R) -> Result<Vec<R>> {
    let (m, n) = (a.rows(), a.cols());
    debug_assert_eq!(b.len(), m);
    let at = transpose(a);
    let mut ata = mat_mul(&at, a);
    for i in 0..n {
        ata.data_mut()[i * n + i] = ata.data()[i * n + i] + ridge;
    }
    let mut atb = vec![R::zero(); n];
    for i in 0..n {
        let mut acc = R::zero();
        for k in 0..m {
            acc = acc + at.data()[i * m + k] * b[k];
        }
        atb[i] = acc;
    }
    cholesky_solve(&ata, &atb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::Rng;

    #[test]
    fn lu_solves_random_systems() {
        let mut rng = Rng::seed_from(17);
        for _ in 0..50 {
            let n = 1 + (rng.next_u64() % 6) as usize;
            let a = Tensor::matrix(
                n,
                n,
                (0..n * n).map(|_| rng.uniform(-2.0, 2.0)).collect(),
            )
            .unwrap();
            let x_true: Vec<f64> = (0..n).map(|_| rng.uniform(-3.0, 3.0)).collect();
            let b: Vec<f64> = (0..n)
                .map(|i| (0..n).map(|j| a.at(i, j) * x_true[j]).sum())
                .collect();
            match lu_solve(&a, &b) {
                Ok(x) => {
                    for (xi, ti) in x.iter().zip(&x_true) {
                        assert!((xi - ti).abs() < 1e-8, "{xi} vs {ti}");
                    }
                }
                Err(_) => {} // singular draws are acceptable to skip
            }
        }
    }

    #[test]
    fn cholesky_round_trip() {
        let mut rng = Rng::seed_from(23);
        for _ in 0..30 {
            let n = 1 + (rng.next_u64() % 5) as usize;
            // A = BᵀB + I is SPD.
            let b: Tensor<f64> = Tensor::matrix(
                n,
                n,
                (0..n * n).map(|_| rng.uniform(-1.0, 1.0)).collect(),
            )
            .unwrap();
            let mut a = mat_mul(&transpose(&b), &b);
            for i in 0..n {
                a.data_mut()[i * n + i] += 1.0;
            }
            let l = cholesky_lower(&a).unwrap();
            let back = mat_mul(&l, &transpose(&l));
            for (x, y) in back.data().iter().zip(a.data()) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn gram_factor_is_lower_and_reproduces_q() {
        let mut rng = Rng::seed_from(31);
        for _ in 0..30 {
            let n = 1 + (rng.next_u64() % 5) as usize;
            let b: Tensor<f64> = Tensor::matrix(
                n,
                n,
                (0..n * n).map(|_| rng.uniform(-1.0, 1.0)).collect(),
            )
            .unwrap();
            let mut q = mat_mul(&transpose(&b), &b);
            for i in 0..n {
                q.data_mut()[i * n + i] += 0.5;
            }
            let m = gram_factor_lower(&q).unwrap();
            for i in 0..n {
                for j in i + 1..n {
                    assert_eq!(m.at(i, j), 0.0, "upper triangle must be zero");
                }
                assert!(m.at(i, i) > 0.0);
            }
            let back = mat_mul(&transpose(&m), &m);
            for (x, y) in back.data().iter().zip(q.data()) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn least_squares_recovers_consistent_solution() {
        // Overdetermined consistent system.
        let a: Tensor<f64> = Tensor::matrix(3, 2, vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        let b = vec![2.0, 3.0, 5.0];
        let x = least_squares_ridge(&a, &b, 1e-12).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-6);
        assert!((x[1] - 3.0).abs() < 1e-6);
    }
}
