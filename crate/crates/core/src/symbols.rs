//! Fourier multipliers of the reduced slip-plane problem.
//!
//! All multipliers here are real and even in `k`, so operators built from
//! them are symmetric and map real fields to real fields. The zero mode is
//! defined by continuity as 0; solvers pin the mean of periodic
//! perturbations instead of inverting it.

use crate::error::{Error, Result};
use crate::params::ElasticParams;
use nalgebra::Matrix2;

/// Parameter handle for symbol evaluation.
#[derive(Debug, Clone, Copy)]
pub struct SymbolContext {
    pub params: ElasticParams,
}

impl SymbolContext {
    pub fn new(params: ElasticParams) -> Self {
        Self { params }
    }
}

/// Dirichlet-to-Neumann matrix symbol
///
/// ```text
/// A(k) = 2G [ k2^2/|k| + k1^2/((1-nu)|k|)    nu k1 k2 / ((1-nu)|k|)   ]
///           [ nu k1 k2 / ((1-nu)|k|)         k1^2/|k| + k2^2/((1-nu)|k|) ]
/// ```
///
/// mapping slip-plane displacement traces to (minus) the summed tractions.
/// Symmetric, and positive definite for `nu` in `(-1, 1/2)`.
pub fn d2n_matrix(k: (f64, f64), ctx: &SymbolContext) -> Result<Matrix2<f64>> {
    let (k1, k2) = k;
    let norm = (k1 * k1 + k2 * k2).sqrt();
    if norm == 0.0 {
        return Err(Error::Domain(
            "D2N symbol at k = 0 is defined by continuity as 0; handle the zero mode explicitly"
                .into(),
        ));
    }
    let p = &ctx.params;
    let two_g = 2.0 * p.shear_modulus;
    let inv = 1.0 / (1.0 - p.nu);
    let a11 = (k2 * k2 + inv * k1 * k1) / norm;
    let a22 = (k1 * k1 + inv * k2 * k2) / norm;
    let a12 = p.nu * inv * k1 * k2 / norm;
    Ok(two_g * Matrix2::new(a11, a12, a12, a22))
}

/// Ratio `u2_hat / u1_hat = -nu k1 k2 / ((1-nu) k1^2 + k2^2)` eliminating the
/// second displacement component when the misfit potential depends on the
/// first one only.
pub fn u2_ratio(k: (f64, f64), ctx: &SymbolContext) -> Result<f64> {
    let (k1, k2) = k;
    if k1 == 0.0 && k2 == 0.0 {
        return Err(Error::Domain("u2 ratio undefined at k = 0".into()));
    }
    let nu = ctx.params.nu;
    Ok(-nu * k1 * k2 / ((1.0 - nu) * k1 * k1 + k2 * k2))
}

/// Scalar symbol of the reduced nonlocal operator,
/// `m(k) = |k|^3 / (beta k1^2 + k2^2)`, with `m(0) = 0` by continuity.
/// Sandwiched between `|k|/2` and `2|k|` for `beta` in `[1/2, 2]`.
pub fn scalar_symbol(k: (f64, f64), ctx: &SymbolContext) -> f64 {
    let (k1, k2) = k;
    let q2 = k1 * k1 + k2 * k2;
    if q2 == 0.0 {
        return 0.0;
    }
    q2 * q2.sqrt() / (ctx.params.beta * k1 * k1 + k2 * k2)
}

/// Symbol of the operator in rescaled (barred) coordinates
/// `x1 -> x1/sqrt(beta)`, whose kernel is `9 v(theta)/|y|^3`:
/// `mbar(k) = (k1^2/beta + k2^2)^{3/2} / (sqrt(beta) |k|^2)`.
pub fn scalar_symbol_barred(k: (f64, f64), ctx: &SymbolContext) -> f64 {
    let (k1, k2) = k;
    let q2 = k1 * k1 + k2 * k2;
    if q2 == 0.0 {
        return 0.0;
    }
    let beta = ctx.params.beta;
    (k1 * k1 / beta + k2 * k2).powf(1.5) / (beta.sqrt() * q2)
}

/// Effective 1D coefficient of a profile rotated by `alpha`:
/// `beta_tilde = beta cos^2 alpha + sin^2 alpha`.
pub fn effective_beta(alpha: f64, ctx: &SymbolContext) -> f64 {
    let c = alpha.cos();
    let s = alpha.sin();
    ctx.params.beta * c * c + s * s
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
    use nalgebra::Vector2;

    fn ctx(nu: f64) -> SymbolContext {
        SymbolContext::new(ElasticParams::with_nu(nu).unwrap())
    }

    #[test]
    fn d2n_examples() {
        let c = ctx(0.0);
        let a = d2n_matrix((1.0, 0.0), &c).unwrap();
        assert!((a - Matrix2::identity()).norm() < 1e-14);
        let a = d2n_matrix((0.0, 3.0), &c).unwrap();
        assert!((a - 3.0 * Matrix2::<f64>::identity()).norm() < 1e-14);

        let c = ctx(0.25);
        let a = d2n_matrix((1.0, 1.0), &c).unwrap();
        assert!((a.m11 - 1.649915823).abs() < 1e-8);
        assert!((a.m12 - 0.2357022604).abs() < 1e-8);
        assert!((a.m22 - a.m11).abs() < 1e-15);
        assert!(a.determinant() > 0.0);

        assert!(d2n_matrix((0.0, 0.0), &c).is_err());
    }

    #[test]
    fn d2n_positive_definite_sampled() {
        for nu in [-0.9, -0.5, 0.0, 0.25, 0.45] {
            let c = ctx(nu);
            for j in 0..200 {
                let t = 2.0 * PI * (j as f64 + 0.3) / 200.0;
                let r = 0.1 + 10.0 * ((j * 7919) % 97) as f64 / 97.0;
                let k = (r * t.cos(), r * t.sin());
                let a = d2n_matrix(k, &c).unwrap();
                assert!(a.trace() > 0.0 && a.determinant() > 0.0, "nu={nu}, k={k:?}");
            }
        }
    }

    #[test]
    fn u2_ratio_examples() {
        assert_eq!(u2_ratio((1.0, 0.0), &ctx(0.3)).unwrap(), 0.0);
        assert_eq!(u2_ratio((1.0, 1.0), &ctx(0.0)).unwrap(), 0.0);
        let r = u2_ratio((1.0, 1.0), &ctx(0.25)).unwrap();
        assert!((r + 1.0 / 7.0).abs() < 1e-15);
        assert!(u2_ratio((0.0, 0.0), &ctx(0.25)).is_err());
    }

    #[test]
    fn scalar_symbol_examples_and_bracket() {
        let c = ctx(0.0);
        for k in [(0.3_f64, -1.2_f64), (2.0, 0.7)] {
            let norm = (k.0 * k.0 + k.1 * k.1).sqrt();
            assert!((scalar_symbol(k, &c) - norm).abs() < 1e-14);
        }
        let c = SymbolContext::new(ElasticParams::with_beta(4.0 / 3.0).unwrap());
        assert!((scalar_symbol((1.0, 0.0), &c) - 0.75).abs() < 1e-15);
        assert!((scalar_symbol((0.0, 5.0), &c) - 5.0).abs() < 1e-14);
        assert_eq!(scalar_symbol((0.0, 0.0), &c), 0.0);

        for beta in [0.5, 0.8, 1.3, 2.0] {
            let c = SymbolContext::new(ElasticParams::with_beta(beta).unwrap());
            for j in 0..100 {
                let t = PI * j as f64 / 50.0 + 0.1;
                let k = (3.0 * t.cos(), 3.0 * t.sin());
                let m = scalar_symbol(k, &c);
                assert!(m >= 1.5 - 1e-12 && m <= 6.0 + 1e-12);
            }
        }
    }

    #[test]
    fn elimination_reproduces_scalar_symbol() {
        for nu in [-0.4, 0.0, 0.25] {
            let c = ctx(nu);
            let two_g = 2.0 * c.params.shear_modulus;
            for j in 0..500 {
                let t = 2.0 * PI * (j as f64 + 0.17) / 500.0;
                let r = 0.05 + 20.0 * ((j * 31) % 101) as f64 / 101.0;
                let k = (r * t.cos(), r * t.sin());
                let a = d2n_matrix(k, &c).unwrap();
                let r12 = u2_ratio(k, &c).unwrap();
                let lhs = a.m11 + a.m12 * r12;
                let rhs = two_g * scalar_symbol(k, &c);
                assert!(
                    (lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0),
                    "nu={nu}, k={k:?}"
                );
            }
        }
    }

    #[test]
    fn rotated_restriction_law() {
        let c = SymbolContext::new(ElasticParams::with_beta(4.0 / 3.0).unwrap());
        for j in 0..200 {
            let alpha = -1.5 + 3.0 * j as f64 / 200.0;
            let t = 0.1 + 5.0 * ((j * 13) % 17) as f64 / 17.0;
            let e = (alpha.cos(), alpha.sin());
            let m = scalar_symbol((t * e.0, t * e.1), &c);
            let expected = t / effective_beta(alpha, &c);
            assert!((m - expected).abs() <= 1e-12 * expected.max(1.0));
        }
    }

    #[test]
    fn effective_beta_examples() {
        let c = SymbolContext::new(ElasticParams::with_beta(4.0 / 3.0).unwrap());
        assert!((effective_beta(0.0, &c) - 4.0 / 3.0).abs() < 1e-15);
        assert!((effective_beta(FRAC_PI_2, &c) - 1.0).abs() < 1e-12);
        assert!((effective_beta(FRAC_PI_4, &c) - 7.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn d2n_applied_to_vector_matches_rows() {
        let c = ctx(0.25);
        let a = d2n_matrix((0.4, -1.1), &c).unwrap();
        let v = Vector2::new(1.0, u2_ratio((0.4, -1.1), &c).unwrap());
        let prod = a * v;
        assert!((prod.x - (a.m11 * v.x + a.m12 * v.y)).abs() < 1e-15);
    }
}
