//! Scripted experiments: the explicit concentrating family
//! `g_l = e^{-2 l s^2} g_{S^n}` with its large-`l` asymptotics (the
//! demonstration that the unconstrained sigma_2 quotients are unbounded
//! below), and the sweep of the flow over a list of subcritical exponents.


// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use thiserror::Error;

use crate::flow::{self, DiagnosticsSink, FlowConfig, FlowError, NoopSink, TrajectoryStatus};
use crate::functionals::holder_lower_bound;
use crate::grid::{gauss_legendre, ConformalFactor};
use crate::sphere::{
    scalar_sigma1, schouten_eigs, sigma2_point, sphere_area, Convention, GeometryError, PointJet,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("ell = {0} must be positive")]
    BadEll(f64),
    #[error("requires n >= 5, got {0}")]
    BadDimension(usize),
    #[error("ell values must be strictly increasing and all > 10")]
    BadEllSequence,
    #[error("eps = {0} must lie in (0, 1)")]
    BadEps(f64),
    #[error("quadrature failure at ell = {0}")]
    QuadratureFailure(f64),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Integrals of one member of the family, with the two normalized quotients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyPoint {
    pub ell: f64,
    pub n: usize,
    pub f2: f64,
    pub vol: f64,
    pub total_scalar: f64,
    /// `F2 / vol^{(n-4)/n}`
    pub quotient_vol: f64,
    /// `F2 / total_scalar^{(n-4)/(n-2)}`
    pub quotient_scalar: f64,
}

/// Above this the integrands concentrate in an `O(ell^{-1/2})` window and a
/// plain rule on `[-1, 1]` underresolves them.
const CONCENTRATION_THRESHOLD: f64 = 50.0;

/// Integrate an even function of `s` against plain `ds` over `[-1, 1]`,
/// resolving the `exp(-c * ell * s^2)` concentration: for large `ell` the
/// substitution `t = sqrt(ell) * s` is applied and `[0, sqrt(ell)]` is covered
/// by dyadically growing Gauss-Legendre panels.
fn integrate_concentrated(f: impl Fn(f64) -> f64, ell: f64, order: usize) -> f64 {
    if ell <= CONCENTRATION_THRESHOLD {
        let (nodes, weights) = gauss_legendre(order.max(64));
        return nodes.iter().zip(&weights).map(|(&s, &w)| w * f(s)).sum();
    }
    let sqrt_ell = ell.sqrt();
    let panel_order = (order / 3).max(32);
    let (x, w) = gauss_legendre(panel_order);
    let mut total = 0.0;
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    while lo < sqrt_ell {
        let b = hi.min(sqrt_ell);
        let half = 0.5 * (b - lo);
        let mid = 0.5 * (b + lo);
        let mut acc = 0.0;
        for (&xi, &wi) in x.iter().zip(&w) {
            let t = mid + half * xi;
            acc += wi * f(t / sqrt_ell);
        }
        total += half * acc;
        lo = b;
        hi *= 2.0;
    }
    2.0 * total / sqrt_ell
}

fn family_integrals(ell: f64, n: usize, order: usize) -> (f64, f64, f64) {
    let nf = n as f64;
    let eigs_at = move |s: f64| {
        let jet = PointJet {
            s,
            u: -ell * s * s,
            du: -2.0 * ell * s,
            d2u: -2.0 * ell,
            n,
        };
        schouten_eigs(&jet, Convention::PlusTwoU)
    };
    let pole = move |s: f64| (1.0 - s * s).powf(0.5 * (nf - 2.0));
    let area = sphere_area(n - 1);

    let f2 = area
        * integrate_concentrated(
            |s| (-(nf - 4.0) * ell * s * s).exp() * sigma2_point(&eigs_at(s), n) * pole(s),
            ell,
            order,
        );
    let vol = area * integrate_concentrated(|s| (-nf * ell * s * s).exp() * pole(s), ell, order);
    let s1int = area
        * integrate_concentrated(
            |s| (-(nf - 2.0) * ell * s * s).exp() * scalar_sigma1(&eigs_at(s), n) * pole(s),
            ell,
            order,
        );
    (f2, vol, 2.0 * (nf - 1.0) * s1int)
}

/// Evaluate the three integrals of `g_l` and the two normalized quotients.
pub fn family_point(ell: f64, n: usize) -> Result<FamilyPoint, ExperimentError> {
    family_point_with_order(ell, n, 200)
}

/// Same with an explicit quadrature order (the refinement oracle runs at 4x).
pub fn family_point_with_order(
    ell: f64,
    n: usize,
    order: usize,
) -> Result<FamilyPoint, ExperimentError> {
    if !(ell > 0.0) {
        return Err(ExperimentError::BadEll(ell));
    }
    if n < 5 {
        return Err(ExperimentError::BadDimension(n));
    }
    let nf = n as f64;
    let (f2, vol, total_scalar) = family_integrals(ell, n, order);
    if !(f2.is_finite() && vol.is_finite() && total_scalar.is_finite() && vol > 0.0) {
        return Err(ExperimentError::QuadratureFailure(ell));
    }
    Ok(FamilyPoint {
        ell,
        n,
        f2,
        vol,
        total_scalar,
        quotient_vol: f2 / vol.powf((nf - 4.0) / nf),
        quotient_scalar: f2 / total_scalar.powf((nf - 4.0) / (nf - 2.0)),
    })
}

/// Leading large-`l` terms of `(F2, vol, total_scalar)`:
/// `-(n-1) w sqrt(pi) l^{3/2} / (2 (n-4)^{3/2})`, `w sqrt(pi / (n l))`,
/// `2 (n-1) w sqrt(pi l / (n-2))`, with `w` the equator area.
pub fn leading_terms(ell: f64, n: usize) -> (f64, f64, f64) {
    let nf = n as f64;
    let w = sphere_area(n - 1);
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let f2 = -(nf - 1.0) * w * ell.powf(1.5) * sqrt_pi / (2.0 * (nf - 4.0).powf(1.5));
    let vol = w * sqrt_pi / (nf * ell).sqrt();
    let scal = 2.0 * (nf - 1.0) * w * ell.sqrt() * sqrt_pi / (nf - 2.0).sqrt();
    (f2, vol, scal)
}

/// One row of the asymptotic-ratio table: the integrals, their ratios to the
/// leading terms, and the two quotients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioRow {
    pub ell: f64,
    pub f2: f64,
    pub vol: f64,
    pub total_scalar: f64,
    pub f2_ratio: f64,
    pub vol_ratio: f64,
    pub scalar_ratio: f64,
    pub quotient_vol: f64,
    pub quotient_scalar: f64,
}

/// Computed-over-leading ratio table along an increasing list of `ell > 10`.
pub fn asymptotic_ratios(ells: &[f64], n: usize) -> Result<Vec<RatioRow>, ExperimentError> {
    if n < 5 {
        return Err(ExperimentError::BadDimension(n));
    }
    if ells.is_empty() || ells.windows(2).any(|w| w[1] <= w[0]) || ells.iter().any(|&l| l <= 10.0)
    {
        return Err(ExperimentError::BadEllSequence);
    }
    ells.iter()
        .map(|&ell| {
            let p = family_point(ell, n)?;
            let (f2l, voll, scall) = leading_terms(ell, n);
            Ok(RatioRow {
                ell,
                f2: p.f2,
                vol: p.vol,
                total_scalar: p.total_scalar,
                f2_ratio: p.f2 / f2l,
                vol_ratio: p.vol / voll,
                scalar_ratio: p.total_scalar / scall,
                quotient_vol: p.quotient_vol,
                quotient_scalar: p.quotient_scalar,
            })
        })
        .collect()
}

/// Frozen deviation caps for the n = 5 ratio table, measured by an
/// independent 50-digit quadrature (tools/calibrate_asymptotics.py) and
/// padded by roughly 30%.
#[derive(Debug, Clone, Copy)]
pub struct RatioFixture {
    pub ell: f64,
    pub max_f2_dev: f64,
    pub max_vol_dev: f64,
    pub max_scalar_dev: f64,
}

pub const N5_RATIO_FIXTURES: [RatioFixture; 3] = [
    // measured: f2 7.473e-2, vol 1.499e-3, scalar 1.252e-2
    RatioFixture { ell: 100.0, max_f2_dev: 0.10, max_vol_dev: 2.0e-3, max_scalar_dev: 1.6e-2 },
    // measured: f2 7.722e-3, vol 1.500e-4, scalar 1.250e-3
    RatioFixture { ell: 1000.0, max_f2_dev: 0.010, max_vol_dev: 2.0e-4, max_scalar_dev: 1.6e-3 },
    // measured: f2 7.747e-4, vol 1.500e-5, scalar 1.250e-4
    RatioFixture { ell: 10000.0, max_f2_dev: 0.0010, max_vol_dev: 2.0e-5, max_scalar_dev: 1.6e-4 },
];

/// Check a ratio row against the frozen fixture for its `ell`, if any.
/// Returns `None` when no fixture applies, `Some(true)` when all three
/// deviations are inside their caps.
pub fn check_against_fixture(row: &RatioRow, n: usize) -> Option<bool> {
    if n != 5 {
        return None;
    }
    let fx = N5_RATIO_FIXTURES
        .iter()
        .find(|f| (f.ell - row.ell).abs() <= 1e-9 * f.ell)?;
    let ok = (row.f2_ratio - 1.0).abs() <= fx.max_f2_dev
        && (row.vol_ratio - 1.0).abs() <= fx.max_vol_dev
        && (row.scalar_ratio - 1.0).abs() <= fx.max_scalar_dev;
    Some(ok)
}

/// One row of the eps sweep: the converged functionals at that exponent and
/// the Hoelder lower bound they must satisfy.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub eps: f64,
    pub status: TrajectoryStatus,
    pub f2: f64,
    pub f0_eps: f64,
    pub r_eps: f64,
    pub s_eps: f64,
    pub tilde_f2_eps: f64,
    pub holder_bound: f64,
    pub residual: f64,
}

impl SweepRow {
    pub fn converged(&self) -> bool {
        self.status == TrajectoryStatus::Converged
    }
}

/// Run the flow once per exponent, from the same initial factor, and record
/// the final normalized objective. Non-converged runs are flagged in the
/// row, not fatal.
pub fn eps_sweep(
    template: &FlowConfig,
    u0: &ConformalFactor,
    eps_list: &[f64],
) -> Result<Vec<SweepRow>, ExperimentError> {
    eps_sweep_with_sink(template, u0, eps_list, &mut NoopSink)
}

pub fn eps_sweep_with_sink(
    template: &FlowConfig,
    u0: &ConformalFactor,
    eps_list: &[f64],
    sink: &mut dyn DiagnosticsSink,
) -> Result<Vec<SweepRow>, ExperimentError> {
    for &eps in eps_list {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(ExperimentError::BadEps(eps));
        }
    }
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let mut config = template.clone();
        config.eps = eps;
        let traj = flow::run(&config, u0, sink)?;
        let rep = &traj.final_state.report;
        let last = traj.rows.last().expect("trajectory has at least one row");
        rows.push(SweepRow {
            eps,
            status: traj.status.clone(),
            f2: rep.f2,
            f0_eps: rep.f0_eps,
            r_eps: rep.r_eps,
            s_eps: rep.s_eps,
            tilde_f2_eps: rep.tilde_f2_eps,
            holder_bound: holder_lower_bound(rep.f2, rep.vol, config.n, eps),
            residual: last.residual,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn validation() {
        assert!(matches!(family_point(-1.0, 5), Err(ExperimentError::BadEll(_))));
        assert!(matches!(family_point(1.0, 4), Err(ExperimentError::BadDimension(4))));
        assert!(matches!(
            asymptotic_ratios(&[100.0, 50.0], 5),
            Err(ExperimentError::BadEllSequence)
        ));
        assert!(matches!(
            asymptotic_ratios(&[5.0, 50.0], 5),
            Err(ExperimentError::BadEllSequence)
        ));
        assert!(matches!(
            asymptotic_ratios(&[], 5),
            Err(ExperimentError::BadEllSequence)
        ));
    }

    #[test]
    fn round_sphere_limit() {
        let p = family_point(1e-8, 5).unwrap();
        let v = PI.powi(3);
        assert!(rel(p.f2, 2.5 * v) < 1e-6);
        assert!(rel(p.vol, v) < 1e-6);
        assert!(rel(p.total_scalar, 20.0 * v) < 1e-6);

        // deviation from the round values shrinks like O(ell)
        let p1 = family_point(1e-3, 5).unwrap();
        let p2 = family_point(1e-4, 5).unwrap();
        let d1 = rel(p1.vol, v);
        let d2 = rel(p2.vol, v);
        assert!(d2 < 0.2 * d1, "O(ell) continuity: {d1} vs {d2}");
    }

    #[test]
    fn oracle_anchor_values() {
        // 50-digit quadrature anchors (tools/calibrate_asymptotics.py), n = 5
        let cases = [
            (100.0, -86325.97002, 2.0830849, 2181.596739),
            (1000.0, -2927567.178, 0.6596191684, 6822.05742),
            (1600.0, -5942230.216, 0.5215040739, 8625.255158),
            (10000.0, -93225951.33, 0.2086180576, 21548.99685),
        ];
        for (ell, f2, vol, scal) in cases {
            let p = family_point(ell, 5).unwrap();
            assert!(rel(p.f2, f2) < 1e-6, "F2({ell}): {} vs {f2}", p.f2);
            assert!(rel(p.vol, vol) < 1e-6, "vol({ell}): {} vs {vol}", p.vol);
            assert!(
                rel(p.total_scalar, scal) < 1e-6,
                "scal({ell}): {} vs {scal}",
                p.total_scalar
            );
        }
    }

    #[test]
    fn refinement_oracle_reproduces_points() {
        for ell in [1e-6, 0.5, 30.0, 100.0, 1600.0, 10000.0] {
            let base = family_point_with_order(ell, 5, 200).unwrap();
            let fine = family_point_with_order(ell, 5, 800).unwrap();
            assert!(rel(base.f2, fine.f2) < 1e-9, "F2 at ell={ell}");
            assert!(rel(base.vol, fine.vol) < 1e-9, "vol at ell={ell}");
            assert!(
                rel(base.total_scalar, fine.total_scalar) < 1e-9,
                "scal at ell={ell}"
            );
        }
    }

    #[test]
    fn volume_matches_gaussian_closed_form_at_1600() {
        let p = family_point(1600.0, 5).unwrap();
        let lead = sphere_area(4) * PI.sqrt() / (5.0 * 1600.0f64).sqrt();
        assert!(rel(p.vol, lead) < 0.01, "vol {} lead {lead}", p.vol);
        assert!(p.f2 < 0.0);
    }

    #[test]
    fn ratio_table_against_fixtures() {
        let rows = asymptotic_ratios(&[100.0, 1000.0, 10000.0], 5).unwrap();
        for row in &rows {
            assert_eq!(check_against_fixture(row, 5), Some(true), "ell={}", row.ell);
        }
        assert_eq!(check_against_fixture(&rows[0], 6), None);

        // all three deviations approach zero monotonically, shrinking like
        // O(1/ell) within a factor of 3 per decade
        for pair in rows.windows(2) {
            for pick in [
                |r: &RatioRow| r.f2_ratio,
                |r: &RatioRow| r.vol_ratio,
                |r: &RatioRow| r.scalar_ratio,
            ] {
                let shrink = (pick(&pair[0]) - 1.0).abs() / (pick(&pair[1]) - 1.0).abs();
                assert!(shrink > 10.0 / 3.0 && shrink < 30.0, "shrink {shrink}");
            }
        }

        // unboundedness: both quotients negative and strictly decreasing
        for pair in rows.windows(2) {
            assert!(pair[1].quotient_vol < pair[0].quotient_vol);
            assert!(pair[1].quotient_scalar < pair[0].quotient_scalar);
        }
        assert!(rows[0].quotient_vol < 0.0 && rows[0].quotient_scalar < 0.0);
        assert!(rows.iter().all(|r| r.total_scalar > 0.0));
    }

    #[test]
    fn sweep_on_round_sphere_gives_closed_form() {
        let config = FlowConfig::new(5, 0.1).with_grid_size(64);
        let grid = config.build_grid().unwrap();
        let u0 = ConformalFactor::round(grid);
        let rows = eps_sweep(&config, &u0, &[0.2, 0.1, 0.05]).unwrap();
        let v = PI.powi(3);
        for row in &rows {
            assert!(row.converged());
            let want = 2.5 * v.powf(1.0 - 1.0 / (5.0 - 2.0 * row.eps));
            assert!(
                rel(row.tilde_f2_eps, want) < 1e-9,
                "eps={}: {} vs {want}",
                row.eps,
                row.tilde_f2_eps
            );
        }
    }

    #[test]
    fn sweep_rejects_bad_eps() {
        let config = FlowConfig::new(5, 0.1).with_grid_size(64);
        let grid = config.build_grid().unwrap();
        let u0 = ConformalFactor::round(grid);
        assert!(matches!(
            eps_sweep(&config, &u0, &[0.0]),
            Err(ExperimentError::BadEps(_))
        ));
    }
}
