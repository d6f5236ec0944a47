//! Pointwise Schouten eigenvalues of rotationally symmetric conformal metrics
//! on the round unit sphere.
//!
//! A conformal factor `u = u(s)` depends only on the height `s = x_{n+1}`,
//! for which `|grad s|^2 = 1 - s^2` and `hess s = -s g_0`. The Schouten
//! endomorphism `g_0^{-1} A` of the conformal metric then has one radial
//! eigenvalue and one tangential eigenvalue of multiplicity `n - 1`, both
//! polynomial in `(s, u', u'')`. Two sign conventions are in circulation
//! (`e^{-2u} g_0` vs `e^{+2u} g_0`) and both are carried explicitly; they are
//! exchanged by `u -> -u`.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("height coordinate s = {0} is outside the open interval (-1, 1)")]
    InvalidHeight(f64),
    #[error("sphere dimension n = {0} must be at least 5")]
    DimensionTooSmall(usize),
}

/// Which exponent the conformal metric uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convention {
    /// `g = e^{-2u} g_0` (the flow-side convention).
    MinusTwoU,
    /// `g = e^{+2u} g_0` (the explicit-example convention).
    PlusTwoU,
}

impl Convention {
    pub fn flipped(self) -> Self {
        match self {
            Convention::MinusTwoU => Convention::PlusTwoU,
            Convention::PlusTwoU => Convention::MinusTwoU,
        }
    }
}

/// Height-coordinate 2-jet of a rotationally symmetric conformal factor:
/// `u`, `du/ds` and `d2u/ds2` at a single interior point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointJet {
    pub s: f64,
    pub u: f64,
    pub du: f64,
    pub d2u: f64,
    pub n: usize,
}

impl PointJet {
    pub fn new(s: f64, u: f64, du: f64, d2u: f64, n: usize) -> Result<Self, GeometryError> {
        if !(s > -1.0 && s < 1.0) {
            return Err(GeometryError::InvalidHeight(s));
        }
        if n < 5 {
            return Err(GeometryError::DimensionTooSmall(n));
        }
        Ok(PointJet { s, u, du, d2u, n })
    }
}

/// Radial (multiplicity 1) and tangential (multiplicity n-1) eigenvalues of
/// the conformal Schouten endomorphism relative to `g_0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchoutenEigs {
    pub lambda_r: f64,
    pub lambda_t: f64,
}

/// Eigenvalues from the rotationally invariant combinations
///   `hess_r = (1 - s^2) u'' - s u'` (radial Hessian eigenvalue),
///   `hess_t = -s u'`               (tangential Hessian eigenvalue),
///   `grad_sq = (u')^2 (1 - s^2)`.
///
/// On a collocation grid in the polar angle these are `u_tt`,
/// `cot(t) * u_t` and `u_t^2`, which stay well conditioned near the poles;
/// this entry point lets grid code avoid the removable `1/sin` singularities
/// entirely.
pub fn schouten_eigs_from_hessian(
    hess_r: f64,
    hess_t: f64,
    grad_sq: f64,
    conv: Convention,
) -> SchoutenEigs {
    match conv {
        Convention::MinusTwoU => SchoutenEigs {
            lambda_r: 0.5 + hess_r + 0.5 * grad_sq,
            lambda_t: 0.5 + hess_t - 0.5 * grad_sq,
        },
        Convention::PlusTwoU => SchoutenEigs {
            lambda_r: 0.5 - hess_r + 0.5 * grad_sq,
            lambda_t: 0.5 - hess_t - 0.5 * grad_sq,
        },
    }
}

/// Schouten eigenvalues of the conformal metric at the jet's point.
pub fn schouten_eigs(jet: &PointJet, conv: Convention) -> SchoutenEigs {
    let one_minus = 1.0 - jet.s * jet.s;
    let hess_r = one_minus * jet.d2u - jet.s * jet.du;
    let hess_t = -jet.s * jet.du;
    let grad_sq = jet.du * jet.du * one_minus;
    schouten_eigs_from_hessian(hess_r, hess_t, grad_sq, conv)
}

/// `sigma_2` of the rotationally symmetric eigenvalue profile:
/// `(n-1)(n-2)/2 * lambda_t^2 + (n-1) * lambda_r * lambda_t`.
pub fn sigma2_point(eigs: &SchoutenEigs, n: usize) -> f64 {
    let nf = n as f64;
    0.5 * (nf - 1.0) * (nf - 2.0) * eigs.lambda_t * eigs.lambda_t
        + (nf - 1.0) * eigs.lambda_r * eigs.lambda_t
}

/// `sigma_1 = lambda_r + (n-1) lambda_t`; scalar curvature is `2(n-1)` times
/// this.
pub fn scalar_sigma1(eigs: &SchoutenEigs, n: usize) -> f64 {
    eigs.lambda_r + (n as f64 - 1.0) * eigs.lambda_t
}

pub fn scalar_curvature(eigs: &SchoutenEigs, n: usize) -> f64 {
    2.0 * (n as f64 - 1.0) * scalar_sigma1(eigs, n)
}

/// Polar density `(1 - s^2)^{(n-2)/2}`; the round-sphere volume element is
/// `omega_{n-1} * weight(s) ds`.
pub fn weight(s: f64, n: usize) -> f64 {
    debug_assert!(s.abs() <= 1.0);
    (1.0 - s * s).powf(0.5 * (n as f64 - 2.0))
}

/// Surface area of the unit m-sphere, `2 pi^{(m+1)/2} / Gamma((m+1)/2)`,
/// via the two-step recurrence `omega_m = 2 pi / (m - 1) * omega_{m-2}`.
pub fn sphere_area(m: usize) -> f64 {
    assert!(m >= 1, "sphere dimension must be at least 1");
    let two_pi = 2.0 * std::f64::consts::PI;
    let (mut k, mut a) = if m.is_multiple_of(2) { (0, 2.0) } else { (1, two_pi) };
    while k < m {
        k += 2;
        a *= two_pi / (k as f64 - 1.0);
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn jet(s: f64, u: f64, du: f64, d2u: f64) -> PointJet {
        PointJet::new(s, u, du, d2u, 5).unwrap()
    }

    #[test]
    fn jet_validation() {
        assert!(PointJet::new(1.0, 0.0, 0.0, 0.0, 5).is_err());
        assert!(PointJet::new(0.0, 0.0, 0.0, 0.0, 4).is_err());
    }

    #[test]
    fn round_sphere_eigs() {
        for conv in [Convention::MinusTwoU, Convention::PlusTwoU] {
            let e = schouten_eigs(&jet(0.3, 0.0, 0.0, 0.0), conv);
            assert_eq!(e.lambda_r, 0.5);
            assert_eq!(e.lambda_t, 0.5);
        }
    }

    #[test]
    fn quadratic_factor_matches_displayed_polynomials() {
        // u = -l s^2 in the e^{+2u} convention:
        //   lambda_r = 1/2 + 2l - 4l s^2 + 2 l^2 s^2 (1 - s^2)
        //   lambda_t = 1/2 - 2l s^2 - 2 l^2 s^2 (1 - s^2)
        for i in 0..100 {
            let ell = 10.0 * (i as f64) / 99.0;
            for j in 0..100 {
                let s = -0.999 + 1.998 * (j as f64) / 99.0;
                let e = schouten_eigs(
                    &jet(s, -ell * s * s, -2.0 * ell * s, -2.0 * ell),
                    Convention::PlusTwoU,
                );
                let x = s * s * (1.0 - s * s);
                let lr = 0.5 + 2.0 * ell - 4.0 * ell * s * s + 2.0 * ell * ell * x;
                let lt = 0.5 - 2.0 * ell * s * s - 2.0 * ell * ell * x;
                assert!((e.lambda_r - lr).abs() <= 1e-12 * lr.abs().max(1.0));
                assert!((e.lambda_t - lt).abs() <= 1e-12 * lt.abs().max(1.0));
            }
        }
        // spot value from the display: l = 1, s = 0
        let e = schouten_eigs(&jet(0.0, 0.0, 0.0, -2.0), Convention::PlusTwoU);
        assert_eq!(e.lambda_r, 2.5);
        assert_eq!(e.lambda_t, 0.5);
    }

    #[test]
    fn conventions_exchange_under_negation() {
        for i in 0..50 {
            let s = -0.95 + 1.9 * (i as f64) / 49.0;
            let (u, du, d2u) = (0.3 * s * s - 0.1, 0.6 * s, 0.6);
            let plus = schouten_eigs(&jet(s, u, du, d2u), Convention::PlusTwoU);
            let minus = schouten_eigs(&jet(s, -u, -du, -d2u), Convention::MinusTwoU);
            assert!((plus.lambda_r - minus.lambda_r).abs() < 1e-13);
            assert!((plus.lambda_t - minus.lambda_t).abs() < 1e-13);
        }
    }

    #[test]
    fn sigma2_point_agrees_with_symfunc() {
        use crate::symfunc::{sigma_k, EigenProfile};
        let cases = [
            (SchoutenEigs { lambda_r: 0.5, lambda_t: 0.5 }, 5, 2.5),
            (SchoutenEigs { lambda_r: 2.5, lambda_t: 0.5 }, 5, 6.5),
        ];
        for (e, n, want) in cases {
            assert!((sigma2_point(&e, n) - want).abs() < 1e-14);
        }
        for i in 0..100 {
            let e = SchoutenEigs {
                lambda_r: -3.0 + 0.07 * i as f64,
                lambda_t: 2.0 - 0.05 * i as f64,
            };
            for n in 5..=10 {
                let p = EigenProfile::rotational(e.lambda_r, e.lambda_t, n);
                let via_profile = sigma_k(&p, 2).unwrap();
                let direct = sigma2_point(&e, n);
                assert!((via_profile - direct).abs() <= 1e-13 * direct.abs().max(1.0));
                assert!(
                    (scalar_sigma1(&e, n) - sigma_k(&p, 1).unwrap()).abs()
                        <= 1e-13 * scalar_sigma1(&e, n).abs().max(1.0)
                );
            }
        }
    }

    #[test]
    fn sigma1_and_scalar_curvature() {
        let e = SchoutenEigs { lambda_r: 0.5, lambda_t: 0.5 };
        assert_eq!(scalar_sigma1(&e, 5), 2.5);
        assert_eq!(scalar_curvature(&e, 5), 20.0); // R = n(n-1) on round S^5
        let f = SchoutenEigs { lambda_r: 2.5, lambda_t: 0.5 };
        assert_eq!(scalar_sigma1(&f, 5), 4.5);
    }

    #[test]
    fn weight_endpoints() {
        assert_eq!(weight(0.0, 5), 1.0);
        assert_eq!(weight(1.0, 5), 0.0);
        assert_eq!(weight(-1.0, 5), 0.0);
    }

    #[test]
    fn sphere_area_values() {
        assert!((sphere_area(1) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(2) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((sphere_area(4) - 8.0 * PI * PI / 3.0).abs() < 1e-13);
        assert!((sphere_area(5) - PI.powi(3)).abs() < 1e-12);
    }
}
