//! Central finite differences, the gradient oracle the autodiff paths are
//! tested against.

use super::real::Real;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// (f(x+eps·eᵢ) − f(x−eps·eᵢ)) / (2·eps) per coordinate.
pub fn finite_diff_grad<R: Real>(
    f: &mut dyn FnMut(&Tensor<R>) -> Result<R>,
    x: &Tensor<R>,
    eps: R,
) -> Result<Tensor<R>> {
    if eps <= R::zero() {
        return Err(Error::Contract("finite_diff_grad requires eps > 0".into()));
    }
    let mut out = Tensor::zeros(x.shape().to_vec());
    let mut probe = x.clone();
    for i in 0..x.len() {
        let orig = x.data()[i];
        probe.data_mut()[i] = orig + eps;
        let hi = f(&probe)?;
        probe.data_mut()[i] = orig - eps;
        let lo = f(&probe)?;
        probe.data_mut()[i] = orig;
        out.data_mut()[i] = (hi - lo) / (R::cast(2.0) * eps);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_quadratics() {
        let x = Tensor::scalar(3.0);
        let g = finite_diff_grad(&mut |t: &Tensor<f64>| Ok(t.item() * t.item()), &x, 1e-4)
            .unwrap();
        assert!((g.item() - 6.0).abs() < 1e-6);
    }

    #[test]
    fn zero_for_constants() {
        let x = Tensor::vector(vec![1.0, -2.0, 0.5]).unwrap();
        let g = finite_diff_grad(&mut |_t: &Tensor<f64>| Ok(42.0), &x, 1e-4).unwrap();
        assert_eq!(g.data(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn abs_away_from_kink() {
        let x = Tensor::scalar(1.0);
        let g =
            finite_diff_grad(&mut |t: &Tensor<f64>| Ok(t.item().abs()), &x, 1e-4).unwrap();
        assert!((g.item() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn nonpositive_eps_rejected() {
        let x = Tensor::scalar(1.0);
        assert!(finite_diff_grad(&mut |t: &Tensor<f64>| Ok(t.item()), &x, 0.0).is_err());
    }
}
