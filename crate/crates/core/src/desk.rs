//! Reference operators used by the tests, the benchmarks and the shipped configs.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::coeffs::{compute_m_norm, FourierMatrixSeries, OperatorSpec};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn sigma_x() -> DMatrix<Complex64> {
    DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
}

fn sigma_z() -> DMatrix<Complex64> {
    DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)])
}

/// Unscaled cosine operator of order 3 on `C^2`:
///
/// ```text
/// P_2(x) = 2i cos(2 pi x) sigma_x
/// P_3(x) = P_2'(x) / 2 + sigma_z = -2 pi i sin(2 pi x) sigma_x + sigma_z
/// ```
///
/// `P_2` is anti-Hermitian and `P_3 - P_3^H = P_2'`, which is what makes the
/// third-order expression formally self-adjoint.
pub fn cosine_base() -> OperatorSpec {
    let i_sx = sigma_x() * c(0.0, 1.0);
    let p2 = FourierMatrixSeries::zero(2)
        .with_term(1, i_sx.clone())
        .and_then(|s| s.with_term(-1, i_sx))
        .expect("2x2 terms");
    let p3 = FourierMatrixSeries::zero(2)
        .with_term(1, sigma_x() * c(-PI, 0.0))
        .and_then(|s| s.with_term(-1, sigma_x() * c(PI, 0.0)))
        .and_then(|s| s.with_term(0, sigma_z()))
        .expect("2x2 terms");
    OperatorSpec::free(3, 2)
        .and_then(|s| s.with_coefficient(2, p2))
        .and_then(|s| s.with_coefficient(3, p3))
        .expect("valid operator")
}

/// [`cosine_base`] scaled so that its coefficient norm equals `m_norm`.
pub fn cosine_example(m_norm: f64) -> OperatorSpec {
    let base = cosine_base();
    let m0 = compute_m_norm(&base).m_value;
    base.scaled(m_norm / m0)
}

/// `P_2(x) = 2 cos(2 pi x) I` on `C^2`, order 3. Not self-adjoint; used for
/// the coefficient norm and the raw Galerkin block structure.
pub fn cosine_identity_p2() -> OperatorSpec {
    let id = DMatrix::identity(2, 2);
    let p2 = FourierMatrixSeries::zero(2)
        .with_term(1, id.clone())
        .and_then(|s| s.with_term(-1, id))
        .expect("2x2 terms");
    OperatorSpec::free(3, 2)
        .and_then(|s| s.with_coefficient(2, p2))
        .expect("valid operator")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::check_formal_self_adjointness;

    #[test]
    fn cosine_example_has_requested_norm() {
        for target in [1.0, PI * PI, 0.25] {
            let m = compute_m_norm(&cosine_example(target)).m_value;
            assert!((m - target).abs() < 1e-12 * target);
        }
        // sqrt(2) from P_2 plus sqrt(2 pi^2 + 1) from P_3.
        let m0 = compute_m_norm(&cosine_base()).m_value;
        assert!((m0 - (2f64.sqrt() + (2.0 * PI * PI + 1.0).sqrt())).abs() < 1e-12);
    }

    #[test]
    fn cosine_example_is_self_adjoint() {
        let ts: Vec<f64> = (0..9).map(|j| -0.875 + 0.234 * j as f64).collect();
        let r = check_formal_self_adjointness(&cosine_example(PI * PI), &ts, 10, 1e-12).unwrap();
        assert!(r.hermitian, "{}", r.max_deviation);
    }

    #[test]
    fn matches_symmetrized_first_order_form() {
        // P_3 must equal P_2'/2 + sigma_z pointwise.
        let spec = cosine_base();
        let p2 = spec.coefficient(2).unwrap();
        let p3 = spec.coefficient(3).unwrap();
        let h = 1e-5;
        for &x in &[0.0, 0.13, 0.5, 0.77] {
            let deriv = (p2.evaluate(x + h) - p2.evaluate(x - h)) / c(2.0 * h, 0.0);
            let expected = deriv * c(0.5, 0.0) + sigma_z();
            assert!((p3.evaluate(x) - expected).norm() < 1e-8);
        }
    }
}
