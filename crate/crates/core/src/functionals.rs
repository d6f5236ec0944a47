//! Integral functionals of a rotationally symmetric conformal metric
//! `g = e^{-2u} g_0`: the total sigma_2 curvature `F2`, the perturbed volume
//! `F0_eps = int e^{2 eps u} dvol(g)`, the normalization constants `r_eps`
//! and `s_eps` of the volume-preserving flow, the scale-normalized objective
//! `tilde F2_eps = F0_eps^{-(n-4)/(n-2eps)} F2`, plain volume and total
//! scalar curvature.
//!
//! With `W`-eigenvalues taken relative to `g_0`, the conformal factor enters
//! only through explicit exponential weights: `sigma_k(g) = e^{2ku} sigma_k`
//! and `dvol(g) = e^{-nu} dvol(g_0)`, so all integrands reduce to
//! exponentially weighted polynomials of the pointwise eigenvalues.

use thiserror::Error;

use crate::grid::{gauss_legendre, ConformalFactor};
use crate::sphere::{
    scalar_sigma1, schouten_eigs_from_hessian, sigma2_point, sphere_area, Convention,
};

pub const DEFAULT_QUAD_ORDER: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FunctionalError {
    #[error("eps = {0} must lie in [0, 1)")]
    InvalidEps(f64),
    #[error("cone violation at s = {s:.6}: sigma_1 = {sigma1:e}")]
    ConeViolation { s: f64, sigma1: f64 },
    #[error("non-finite integrand sample at s = {s:.6}")]
    NonFinite { s: f64 },
}

/// All scalar diagnostics of one metric at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalReport {
    pub f2: f64,
    pub f0_eps: f64,
    pub r_eps: f64,
    pub s_eps: f64,
    pub tilde_f2_eps: f64,
    pub vol: f64,
    pub total_scalar: f64,
    /// Minimum over quadrature nodes of sigma_1 of the g0-relative eigenvalues.
    pub min_sigma1: f64,
    pub min_sigma2: f64,
}

/// Pointwise sigma_1 and sigma_2 of the g0-relative Schouten eigenvalues of
/// `e^{-2u} g_0` from theta-side derivatives of `u` (the `e^{-2u}` sign).
pub(crate) fn sigma_fields_theta(
    u_t: &[f64],
    u_tt: &[f64],
    cot: &[f64],
    n: usize,
) -> (Vec<f64>, Vec<f64>) {
    let m = u_t.len();
    let mut s1 = vec![0.0; m];
    let mut s2 = vec![0.0; m];
    for q in 0..m {
        let eigs = schouten_eigs_from_hessian(
            u_tt[q],
            cot[q] * u_t[q],
            u_t[q] * u_t[q],
            Convention::MinusTwoU,
        );
        s1[q] = scalar_sigma1(&eigs, n);
        s2[q] = sigma2_point(&eigs, n);
    }
    (s1, s2)
}

/// Per-quadrature-node fields of one metric, shared by the functional
/// evaluation, the flow velocity and the dissipation integral.
pub(crate) struct QuadEval {
    pub u: Vec<f64>,      // e^{-2u} convention values at quad nodes
    pub sigma1: Vec<f64>, // of the g0-relative eigenvalues
    #[cfg_attr(not(test), allow(dead_code))]
    pub sigma2: Vec<f64>,
    pub f_pt: Vec<f64>, // (sigma2 - nu) / sigma1 with nu = r e^{(2eps-4)u}
    pub report: FunctionalReport,
}

pub(crate) fn quad_eval(u: &ConformalFactor, eps: f64) -> Result<QuadEval, FunctionalError> {
    if !(0.0..1.0).contains(&eps) {
        return Err(FunctionalError::InvalidEps(eps));
    }
    let grid = u.grid();
    let n = grid.dim_n() as f64;
    let um = u.minus_two_u_values();
    let jet = grid.quad_jet(&um);
    let (sigma1, sigma2) = sigma_fields_theta(&jet.u_t, &jet.u_tt, grid.quad_cot(), grid.dim_n());

    let s_nodes = grid.quad_s();
    let area = sphere_area(grid.dim_n() - 1);

    // first pass: the integrals that do not involve r_eps
    let mut f2 = 0.0;
    let mut f0 = 0.0;
    let mut vol = 0.0;
    let mut s1_int = 0.0;
    let mut min_sigma1 = f64::INFINITY;
    let mut min_sigma2 = f64::INFINITY;
    let mut argmin = 0usize;
    for q in 0..s_nodes.len() {
        let uu = jet.u[q];
        if !uu.is_finite() {
            return Err(FunctionalError::NonFinite { s: s_nodes[q] });
        }
        let m = grid.quad_weights()[q] * grid.pole_weight()[q];
        f2 += ((4.0 - n) * uu).exp() * sigma2[q] * m;
        f0 += ((2.0 * eps - n) * uu).exp() * m;
        vol += (-n * uu).exp() * m;
        s1_int += ((2.0 - n) * uu).exp() * sigma1[q] * m;
        if sigma1[q] < min_sigma1 {
            min_sigma1 = sigma1[q];
            argmin = q;
        }
        min_sigma2 = min_sigma2.min(sigma2[q]);
    }
    if min_sigma1 <= 0.0 {
        return Err(FunctionalError::ConeViolation {
            s: s_nodes[argmin],
            sigma1: min_sigma1,
        });
    }
    f2 *= area;
    f0 *= area;
    vol *= area;
    let total_scalar = 2.0 * (n - 1.0) * area * s1_int;
    let r_eps = f2 / f0;

    // second pass: the quotient field and the s_eps normalization
    let mut f_pt = vec![0.0; s_nodes.len()];
    let mut s_num = 0.0;
    for q in 0..s_nodes.len() {
        let uu = jet.u[q];
        let nu = r_eps * ((2.0 * eps - 4.0) * uu).exp();
        f_pt[q] = (sigma2[q] - nu) / sigma1[q];
        s_num += ((2.0 * eps - n) * uu).exp() * f_pt[q] * grid.quad_weights()[q] * grid.pole_weight()[q];
    }
    let s_eps = -area * s_num / f0;

    let tilde_f2_eps = f0.powf(-(n - 4.0) / (n - 2.0 * eps)) * f2;
    if !(f2.is_finite() && f0.is_finite() && vol.is_finite() && tilde_f2_eps.is_finite()) {
        return Err(FunctionalError::NonFinite { s: f64::NAN });
    }

    Ok(QuadEval {
        u: jet.u,
        sigma1,
        sigma2,
        f_pt,
        report: FunctionalReport {
            f2,
            f0_eps: f0,
            r_eps,
            s_eps,
            tilde_f2_eps,
            vol,
            total_scalar,
            min_sigma1,
            min_sigma2,
        },
    })
}

/// Evaluate every integral functional of the metric defined by `u`.
pub fn evaluate_functionals(
    u: &ConformalFactor,
    eps: f64,
) -> Result<FunctionalReport, FunctionalError> {
    Ok(quad_eval(u, eps)?.report)
}

/// The normalized objective `tilde F2_eps` whose infimum over the
/// positive-scalar-curvature class is the subcritical constant.
pub fn quotient_yeps_value(u: &ConformalFactor, eps: f64) -> Result<f64, FunctionalError> {
    Ok(quad_eval(u, eps)?.report.tilde_f2_eps)
}

/// `2 int e^{2u} sigma_1(g) ( e^{-2u} (sigma_2(g) - r e^{2 eps u}) / sigma_1(g) )^2 dvol(g)`,
/// the exact rate of decrease of `F2` scaled by `2/(n-4)`.
pub fn flow_dissipation(u: &ConformalFactor, eps: f64) -> Result<f64, FunctionalError> {
    let ev = quad_eval(u, eps)?;
    let grid = u.grid();
    let n = grid.dim_n() as f64;
    let area = sphere_area(grid.dim_n() - 1);
    let mut acc = 0.0;
    for q in 0..ev.u.len() {
        let m = grid.quad_weights()[q] * grid.pole_weight()[q];
        acc += ((4.0 - n) * ev.u[q]).exp() * ev.sigma1[q] * ev.f_pt[q] * ev.f_pt[q] * m;
    }
    Ok(2.0 * area * acc)
}

/// Lower bound `tilde F2_0(g) * vol(g_0)^{-2 eps (n-4) / (n (n-2 eps))}` that
/// Hoelder's inequality imposes on `tilde F2_eps(g)` whenever `F2(g) >= 0`.
pub fn holder_lower_bound(f2: f64, vol: f64, n: usize, eps: f64) -> f64 {
    let nf = n as f64;
    let tilde0 = f2 * vol.powf(-(nf - 4.0) / nf);
    let vol0 = sphere_area(n);
    tilde0 * vol0.powf(-2.0 * eps * (nf - 4.0) / (nf * (nf - 2.0 * eps)))
}

/// `omega_{n-1} * int_{-1}^{1} f(s) (1 - s^2)^{(n-2)/2} ds` by Gauss-Legendre
/// of the given order with the polar density folded into the integrand.
pub fn integrate_with_order(
    f: impl Fn(f64) -> f64,
    n: usize,
    order: usize,
) -> Result<f64, FunctionalError> {
    let (nodes, weights) = gauss_legendre(order);
    let area = sphere_area(n - 1);
    let p = 0.5 * (n as f64 - 2.0);
    let mut acc = 0.0;
    for (&s, &w) in nodes.iter().zip(&weights) {
        let v = f(s);
        if !v.is_finite() {
            return Err(FunctionalError::NonFinite { s });
        }
        acc += v * (1.0 - s * s).powf(p) * w;
    }
    Ok(area * acc)
}

pub fn integrate(f: impl Fn(f64) -> f64, n: usize) -> Result<f64, FunctionalError> {
    integrate_with_order(f, n, DEFAULT_QUAD_ORDER)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use std::f64::consts::PI;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn integrate_examples() {
        let v5 = integrate(|_| 1.0, 5).unwrap();
        assert!(rel(v5, PI.powi(3)) < 1e-10);
        let v6 = integrate(|_| 1.0, 6).unwrap();
        assert!(rel(v6, 16.0 * PI.powi(3) / 15.0) < 1e-12);
        assert!(integrate(|s| s, 5).unwrap().abs() < 1e-13);
        // weight integral: int (1-s^2)^{3/2} = 3 pi / 8
        let w = integrate(|_| 1.0, 5).unwrap() / sphere_area(4);
        assert!(rel(w, 3.0 * PI / 8.0) < 1e-10);
    }

    #[test]
    fn integrate_reports_bad_samples() {
        let err = integrate(|s| if s > 0.5 { f64::NAN } else { 1.0 }, 5).unwrap_err();
        assert!(matches!(err, FunctionalError::NonFinite { .. }));
    }

    #[test]
    fn integrate_is_exact_on_polynomials() {
        // even n makes the whole integrand polynomial: s^2 (1-s^2)^2 against
        // omega_5 integrates to 16 pi^3 / 105
        let got = integrate(|s| s * s, 6).unwrap();
        let want = sphere_area(5) * 16.0 / 105.0;
        assert!(rel(got, want) < 1e-14);

        // high but sub-Q/2 degree
        let got = integrate(|s| s.powi(40), 6).unwrap();
        let fine = integrate_with_order(|s| s.powi(40), 6, 400).unwrap();
        assert!(rel(got, fine) < 1e-13);
    }

    #[test]
    fn round_sphere_report() {
        let grid = Grid::new(5, 64, 200).unwrap();
        for eps in [0.0, 0.1, 0.5] {
            let rep = evaluate_functionals(&ConformalFactor::round(grid.clone()), eps).unwrap();
            let v = PI.powi(3);
            assert!(rel(rep.f2, 2.5 * v) < 1e-10);
            assert!(rel(rep.f0_eps, v) < 1e-10);
            assert!(rel(rep.vol, v) < 1e-10);
            assert!(rel(rep.r_eps, 2.5) < 1e-12);
            assert!(rep.s_eps.abs() < 1e-13);
            assert!(rel(rep.total_scalar, 20.0 * v) < 1e-10);
            assert!((rep.min_sigma1 - 2.5).abs() < 1e-12);
            assert!((rep.min_sigma2 - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_factor_is_pointwise_stationary() {
        let grid = Grid::new(5, 48, 200).unwrap();
        for eps in [0.0, 0.1] {
            for c in [-0.7, 0.4] {
                let u = ConformalFactor::constant(grid.clone(), c, Convention::MinusTwoU);
                let ev = quad_eval(&u, eps).unwrap();
                assert!(ev.report.s_eps.abs() < 1e-13);
                // sigma_2(g) = r e^{2 eps u} pointwise; the quotient field only
                // carries the spectral-differentiation noise floor, which the
                // cot(theta) factor amplifies at the pole-adjacent nodes
                let fmax = ev.f_pt.iter().fold(0.0f64, |a, b| a.max(b.abs()));
                assert!(fmax < 1e-10, "fmax = {fmax}");
            }
        }
    }

    #[test]
    fn report_is_self_consistent() {
        let grid = Grid::new(5, 64, 200).unwrap();
        let u = ConformalFactor::preset_cos2(grid, 0.2);
        let rep = evaluate_functionals(&u, 0.1).unwrap();
        assert!(rep.f0_eps > 0.0 && rep.vol > 0.0);
        assert!(rel(rep.r_eps * rep.f0_eps, rep.f2) < 1e-15);
    }

    #[test]
    fn quadrature_refinement_is_converged() {
        let grid = Grid::new(5, 64, 200).unwrap();
        let u = ConformalFactor::preset_cos2(grid, 0.2);
        let u2 = u.with_quad_order(400).unwrap();
        let a = evaluate_functionals(&u, 0.1).unwrap();
        let b = evaluate_functionals(&u2, 0.1).unwrap();
        assert!(rel(a.f2, b.f2) < 1e-9);
        assert!(rel(a.f0_eps, b.f0_eps) < 1e-9);
        assert!(rel(a.vol, b.vol) < 1e-9);
        assert!(rel(a.total_scalar, b.total_scalar) < 1e-9);
        assert!(rel(a.tilde_f2_eps, b.tilde_f2_eps) < 1e-9);
        assert!((a.s_eps - b.s_eps).abs() < 1e-9 * a.f0_eps);
    }

    #[test]
    fn r_eps_matches_high_order_oracle() {
        let grid = Grid::new(5, 64, 200).unwrap();
        let u = ConformalFactor::preset_cos2(grid, 0.1);
        let base = evaluate_functionals(&u, 0.1).unwrap();
        let oracle = evaluate_functionals(&u.with_quad_order(800).unwrap(), 0.1).unwrap();
        assert!(rel(base.r_eps, oracle.r_eps) < 1e-9);
    }

    #[test]
    fn s_eps_constraint_plugs_back() {
        // freeze (r, s) from the working order, re-evaluate the constraint
        // integral on a refined rule
        let grid = Grid::new(5, 64, 200).unwrap();
        let u = ConformalFactor::preset_cos2(grid, 0.2);
        let eps = 0.1;
        let ev = quad_eval(&u, eps).unwrap();
        let fine = u.with_quad_order(400).unwrap();
        let fe = quad_eval(&fine, eps).unwrap();
        let g = fine.grid();
        let n = g.dim_n() as f64;
        let mut acc = 0.0;
        for q in 0..fe.u.len() {
            let nu = ev.report.r_eps * ((2.0 * eps - 4.0) * fe.u[q]).exp();
            let f_pt = (fe.sigma2[q] - nu) / fe.sigma1[q];
            acc += ((2.0 * eps - n) * fe.u[q]).exp()
                * (f_pt + ev.report.s_eps)
                * g.quad_weights()[q]
                * g.pole_weight()[q];
        }
        let constraint = sphere_area(g.dim_n() - 1) * acc;
        assert!(constraint.abs() <= 1e-10 * ev.report.f0_eps);
    }

    #[test]
    fn cone_violation_carries_node() {
        let grid = Grid::new(5, 64, 200).unwrap();
        let u = ConformalFactor::preset_cos2(grid, 5.0);
        match evaluate_functionals(&u, 0.1) {
            Err(FunctionalError::ConeViolation { sigma1, .. }) => assert!(sigma1 <= 0.0),
            other => panic!("expected cone violation, got {other:?}"),
        }
    }

    #[test]
    fn yeps_round_sphere_and_shift_invariance() {
        let grid = Grid::new(5, 48, 200).unwrap();
        let v = PI.powi(3);
        let y = quotient_yeps_value(&ConformalFactor::round(grid.clone()), 0.0).unwrap();
        assert!(rel(y, 2.5 * v / v.powf(0.2)) < 1e-10);

        // one-parameter scaling invariance of the normalized objective
        let base = ConformalFactor::preset_cos2(grid, 0.15);
        for eps in [0.0, 0.1] {
            let y0 = quotient_yeps_value(&base, eps).unwrap();
            for c in [-0.5, 0.8] {
                let yc = quotient_yeps_value(&base.shifted(c), eps).unwrap();
                assert!(rel(y0, yc) < 1e-10, "eps={eps} c={c}: {y0} vs {yc}");
            }
        }
    }

    #[test]
    fn holder_chain_on_admissible_samples() {
        let grid = Grid::new(5, 64, 200).unwrap();
        let samples = [
            ConformalFactor::preset_cos2(grid.clone(), 0.05),
            ConformalFactor::preset_cos2(grid.clone(), 0.2),
            ConformalFactor::preset_cos2(grid.clone(), 0.3),
            ConformalFactor::constant(grid.clone(), 0.4, Convention::MinusTwoU),
            ConformalFactor::from_fn(grid, Convention::MinusTwoU, |_, s| 0.1 * s).unwrap(),
        ];
        for u in &samples {
            for eps in [0.05, 0.1, 0.3, 0.9] {
                let rep = evaluate_functionals(u, eps).unwrap();
                assert!(rep.f2 > 0.0, "sample must have positive total sigma_2");
                let bound = holder_lower_bound(rep.f2, rep.vol, 5, eps);
                assert!(
                    rep.tilde_f2_eps >= bound - 1e-10 * bound.abs(),
                    "eps={eps}: {} < {bound}",
                    rep.tilde_f2_eps
                );
            }
        }
    }

    #[test]
    fn eps_to_zero_continuity() {
        let grid = Grid::new(5, 64, 200).unwrap();
        let u = ConformalFactor::preset_cos2(grid, 0.2);
        let y0 = quotient_yeps_value(&u, 0.0).unwrap();
        let mut last_gap = f64::INFINITY;
        for eps in [0.1, 0.01, 0.001] {
            let gap = (quotient_yeps_value(&u, eps).unwrap() - y0).abs();
            assert!(gap < last_gap, "gap must shrink monotonically in eps");
            last_gap = gap;
        }
        assert!(last_gap < 1e-3 * y0.abs());
    }

    #[test]
    fn eps_validation() {
        let grid = Grid::new(5, 16, 40).unwrap();
        let u = ConformalFactor::round(grid);
        assert!(matches!(
            evaluate_functionals(&u, 1.0),
            Err(FunctionalError::InvalidEps(_))
        ));
        assert!(matches!(
            evaluate_functionals(&u, -0.1),
            Err(FunctionalError::InvalidEps(_))
        ));
    }
}
