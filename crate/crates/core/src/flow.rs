//! Time integrator for the volume-normalized sigma_2 flow
//!
//! ```text
//!   du/dt = e^{-2u} (sigma_2(g) - r_eps e^{2 eps u}) / sigma_1(g) + s_eps,
//!   g = e^{-2u} g_0,
//! ```
//!
//! where `r_eps` and `s_eps` are recomputed from the current metric at every
//! stage so that the perturbed volume `F0_eps` is a first integral and `F2`
//! decreases. Stationary states satisfy `sigma_2(g) = r_eps e^{2 eps u}`
//! pointwise with `s_eps = 0`.
//!
//! Stepping is explicit (classical RK4 by default; Heun and Euler are
//! available) with an accept/reject policy: a step that increases `F2` beyond
//! a relative slack of 1e-12, or that drags the minimum of sigma_1 below the
//! configured floor, is rejected and retried with half the step size.
//! Conservation of `F0_eps` is monitored, never enforced; a re-projection
//! would hide exactly the discretization errors the diagnostics are meant to
//! expose.


// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::sync::Arc;

use thiserror::Error;

use crate::functionals::{self, FunctionalError, FunctionalReport};
use crate::grid::{ConformalFactor, Grid, GridError};
use crate::sphere::Convention;

/// Relative slack allowed on the per-step monotonicity of `F2`.
pub const F2_SLACK: f64 = 1e-12;

const MAX_HALVINGS: u32 = 40;

/// Fraction of the RK4 real-axis stability interval (2.79 / lambda) that the
/// run is allowed to use; the linearization estimate is approximate, so keep
/// a wide margin.
const STABILITY_SAFETY: f64 = 0.6;

fn dt_stability_cap(lambda_est: f64, scheme: Scheme) -> f64 {
    let interval = match scheme {
        Scheme::Euler => 2.0,
        Scheme::Heun => 2.0,
        Scheme::Rk4 => 2.79,
    };
    if lambda_est <= 0.0 {
        f64::INFINITY
    } else {
        STABILITY_SAFETY * interval / lambda_est
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("initial data outside C_1: min sigma_1 = {sigma1:e} at s = {s:.4}")]
    InitialDataOutsideCone { s: f64, sigma1: f64 },
    #[error("cone violation at s = {s:.4}: sigma_1 = {sigma1:e}")]
    ConeViolation { s: f64, sigma1: f64 },
    #[error("dt = {0} must be positive")]
    InvalidDt(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Functional(FunctionalError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

impl From<FunctionalError> for FlowError {
    fn from(e: FunctionalError) -> Self {
        match e {
            FunctionalError::ConeViolation { s, sigma1 } => FlowError::ConeViolation { s, sigma1 },
            other => FlowError::Functional(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DtPolicy {
    /// Keep `dt_init` for the whole run; any rejected step aborts.
    Fixed,
    /// Halve the step on rejection, up to 40 times; the reduced step is kept.
    AdaptiveHalving,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Euler,
    Heun,
    Rk4,
}

#[derive(Debug, Clone)]
pub struct FlowConfig {
    pub n: usize,
    pub eps: f64,
    pub grid_size: usize,
    pub quad_order: usize,
    pub dt_init: f64,
    pub dt_policy: DtPolicy,
    pub scheme: Scheme,
    pub max_time: f64,
    pub residual_tol: f64,
    /// Allowed per-step drift of `F0_eps`, relative, per unit time.
    pub conservation_tol: f64,
    pub sigma1_floor: f64,
}

impl FlowConfig {
    pub fn new(n: usize, eps: f64) -> Self {
        FlowConfig {
            n,
            eps,
            grid_size: 128,
            quad_order: functionals::DEFAULT_QUAD_ORDER,
            dt_init: Self::default_dt(128),
            dt_policy: DtPolicy::AdaptiveHalving,
            scheme: Scheme::Rk4,
            max_time: 50.0,
            residual_tol: 1e-6,
            conservation_tol: 1e-8,
            sigma1_floor: 0.0,
        }
    }

    /// Stability-limited default step for the explicit schemes; the
    /// linearization at the round metric behaves like `0.8 * Laplacian`, so
    /// the spectral radius grows like the square of the mode count.
    pub fn default_dt(grid_size: usize) -> f64 {
        2.5 / (grid_size * grid_size) as f64
    }

    pub fn with_grid_size(mut self, grid_size: usize) -> Self {
        self.grid_size = grid_size;
        self.dt_init = Self::default_dt(grid_size);
        self
    }

    pub fn build_grid(&self) -> Result<Arc<Grid>, GridError> {
        Grid::new(self.n, self.grid_size, self.quad_order)
    }

    pub fn validate(&self) -> Result<(), FlowError> {
        let bad = |m: String| Err(FlowError::InvalidConfig(m));
        if self.n < 5 {
            return bad(format!("n = {} must be at least 5", self.n));
        }
        if !(0.0..1.0).contains(&self.eps) {
            return bad(format!("eps = {} must lie in [0, 1)", self.eps));
        }
        if self.grid_size < 32 {
            return bad(format!("grid_size = {} must be at least 32", self.grid_size));
        }
        if self.quad_order < 16 {
            return bad(format!("quad_order = {} must be at least 16", self.quad_order));
        }
        if !(self.dt_init > 0.0) {
            return bad(format!("dt_init = {} must be positive", self.dt_init));
        }
        if !(self.residual_tol > 0.0) {
            return bad(format!("residual_tol = {} must be positive", self.residual_tol));
        }
        if !(self.max_time >= 0.0) {
            return bad(format!("max_time = {} must be non-negative", self.max_time));
        }
        if !(self.conservation_tol > 0.0) {
            return bad(format!(
                "conservation_tol = {} must be positive",
                self.conservation_tol
            ));
        }
        if !(self.sigma1_floor >= 0.0) {
            return bad(format!(
                "sigma1_floor = {} must be non-negative",
                self.sigma1_floor
            ));
        }
        Ok(())
    }
}

/// One point on the flow trajectory; the report always matches `u`.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub u: ConformalFactor,
    pub time: f64,
    pub eps: f64,
    pub report: FunctionalReport,
}

impl FlowState {
    /// Diagnose the metric defined by `u` and package it as a flow state.
    pub fn diagnose(u: &ConformalFactor, eps: f64, time: f64) -> Result<Self, FlowError> {
        let report = functionals::evaluate_functionals(u, eps)?;
        Ok(FlowState {
            u: u.clone(),
            time,
            eps,
            report,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRow {
    pub time: f64,
    pub dt: f64,
    pub f2: f64,
    pub f0_eps: f64,
    pub r_eps: f64,
    pub s_eps: f64,
    pub min_sigma1: f64,
    pub min_sigma2: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrajectoryStatus {
    Converged,
    MaxTimeReached,
    ConeViolation { s: f64, min_sigma1: f64 },
    StepFailure { dt: f64 },
}

#[derive(Debug)]
pub struct Trajectory {
    pub rows: Vec<DiagnosticsRow>,
    pub final_state: FlowState,
    pub status: TrajectoryStatus,
    /// `|F0(final) - F0(initial)| / F0(initial)`.
    pub f0_drift: f64,
    /// Worst per-step conservation rate `|dF0| / (dt * F0)`.
    pub max_step_drift_rate: f64,
    pub conservation_violations: usize,
    pub r_eps_violations: usize,
    pub min_sigma1_over_run: f64,
    /// Running maximum of `|u|_inf + |u_t|_inf + |u_tt|_inf` per accepted step.
    pub bound_history: Vec<(f64, f64)>,
}

/// Receives one record per accepted time step.
pub trait DiagnosticsSink {
    fn record(&mut self, row: &DiagnosticsRow);
}

pub struct NoopSink;

impl DiagnosticsSink for NoopSink {
    fn record(&mut self, _row: &DiagnosticsRow) {}
}

impl DiagnosticsSink for Vec<DiagnosticsRow> {
    fn record(&mut self, row: &DiagnosticsRow) {
        self.push(*row);
    }
}

/// Everything the stepper needs about one metric: diagnostics plus the
/// velocity field and cone margins on the collocation nodes.
struct Prepared {
    values: Vec<f64>, // e^{-2u} convention, collocation nodes
    report: FunctionalReport,
    velocity: Vec<f64>,
    /// max-norm of the quotient field (velocity - s_eps): the stationarity
    /// residual.
    residual: f64,
    /// min sigma_1 over quadrature and collocation nodes.
    min_sigma1: f64,
    min_sigma2: f64,
    /// `|u|_inf + |u_t|_inf + |u_tt|_inf`.
    sup_c2: f64,
    /// Estimated spectral radius of the linearized right-hand side.
    lambda_est: f64,
}

fn prepare(grid: &Arc<Grid>, values: &[f64], eps: f64) -> Result<Prepared, FlowError> {
    let u = ConformalFactor::from_values(grid.clone(), values.to_vec(), Convention::MinusTwoU)?;
    let ev = functionals::quad_eval(&u, eps)?;
    let (u_t, u_tt) = grid.collocation_derivatives(values);
    let (sig1, sig2) =
        functionals::sigma_fields_theta(&u_t, &u_tt, grid.cot_collocation(), grid.dim_n());

    let mut min_sigma1 = ev.report.min_sigma1;
    let mut min_sigma2 = ev.report.min_sigma2;
    let mut argmin = None;
    for (j, &s1) in sig1.iter().enumerate() {
        if s1 < min_sigma1 {
            min_sigma1 = s1;
            argmin = Some(j);
        }
        min_sigma2 = min_sigma2.min(sig2[j]);
    }
    if min_sigma1 <= 0.0 {
        let s = argmin.map_or(f64::NAN, |j| grid.s_collocation()[j]);
        return Err(FlowError::ConeViolation {
            s,
            sigma1: min_sigma1,
        });
    }

    let eps4 = 2.0 * eps - 4.0;
    let r = ev.report.r_eps;
    let s_eps = ev.report.s_eps;
    let nf = grid.dim_n() as f64;
    let mut velocity = vec![0.0; values.len()];
    let mut residual = 0.0f64;
    let mut sup_u = 0.0f64;
    let mut sup_t = 0.0f64;
    let mut sup_tt = 0.0f64;
    let mut diffusivity = 0.0f64;
    for j in 0..values.len() {
        let nu = r * (eps4 * values[j]).exp();
        let f_pt = (sig2[j] - nu) / sig1[j];
        velocity[j] = f_pt + s_eps;
        residual = residual.max(f_pt.abs());
        sup_u = sup_u.max(values[j].abs());
        sup_t = sup_t.max(u_t[j].abs());
        sup_tt = sup_tt.max(u_tt[j].abs());
        // Derivatives of the quotient with respect to the radial and the
        // tangential eigenvalue. The principal part of the linearized flow
        // is their maximum times the zonal Laplacian, whose top eigenvalue
        // on the resolved modes is k_max (k_max + n - 1).
        let lam_r = 0.5 + u_tt[j] + 0.5 * u_t[j] * u_t[j];
        let lam_t = (sig1[j] - lam_r) / (nf - 1.0);
        let a_r = ((sig1[j] - lam_r) * sig1[j] - (sig2[j] - nu)) / (sig1[j] * sig1[j]);
        let a_t = ((sig1[j] - lam_t) * sig1[j] - (sig2[j] - nu)) / (sig1[j] * sig1[j]);
        diffusivity = diffusivity.max(a_r.max(a_t).max(0.0));
    }
    let k_max = (values.len() - 1) as f64;
    let lambda_est = diffusivity * k_max * (k_max + nf - 1.0);

    Ok(Prepared {
        values: values.to_vec(),
        report: ev.report,
        velocity,
        residual,
        min_sigma1,
        min_sigma2,
        sup_c2: sup_u + sup_t + sup_tt,
        lambda_est,
    })
}

/// Right-hand side of the flow at the given state, on the collocation nodes.
///
/// The field integrates to zero against `e^{2 eps u} dvol(g)` by the choice
/// of `s_eps`.
pub fn velocity(state: &FlowState) -> Result<Vec<f64>, FlowError> {
    let grid = state.u.grid().clone();
    let values = state.u.minus_two_u_values();
    Ok(prepare(&grid, &values, state.eps)?.velocity)
}

fn integrate_stage(base: &[f64], k: &[f64], dt: f64) -> Vec<f64> {
    base.iter().zip(k).map(|(u, v)| u + dt * v).collect()
}

fn rk_combine(base: &[f64], ks: &[&[f64]], coeffs: &[f64], dt: f64) -> Vec<f64> {
    let mut out = base.to_vec();
    for (k, c) in ks.iter().zip(coeffs) {
        for (o, v) in out.iter_mut().zip(*k) {
            *o += dt * c * v;
        }
    }
    out
}

fn propose(
    grid: &Arc<Grid>,
    from: &Prepared,
    eps: f64,
    dt: f64,
    scheme: Scheme,
) -> Result<Vec<f64>, FlowError> {
    let k1 = &from.velocity;
    match scheme {
        Scheme::Euler => Ok(integrate_stage(&from.values, k1, dt)),
        Scheme::Heun => {
            let end = prepare(grid, &integrate_stage(&from.values, k1, dt), eps)?;
            Ok(rk_combine(
                &from.values,
                &[k1, &end.velocity],
                &[0.5, 0.5],
                dt,
            ))
        }
        Scheme::Rk4 => {
            let k2 = prepare(grid, &integrate_stage(&from.values, k1, 0.5 * dt), eps)?.velocity;
            let k3 = prepare(grid, &integrate_stage(&from.values, &k2, 0.5 * dt), eps)?.velocity;
            let k4 = prepare(grid, &integrate_stage(&from.values, &k3, dt), eps)?.velocity;
            Ok(rk_combine(
                &from.values,
                &[k1, &k2, &k3, &k4],
                &[1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
                dt,
            ))
        }
    }
}

fn state_from_prepared(grid: &Arc<Grid>, p: &Prepared, eps: f64, time: f64) -> FlowState {
    FlowState {
        u: ConformalFactor::from_values(grid.clone(), p.values.clone(), Convention::MinusTwoU)
            .expect("prepared values are finite"),
        time,
        eps,
        report: p.report,
    }
}

/// One explicit step of the flow, no accept/reject logic. The returned state
/// has freshly computed diagnostics. Errors if any stage leaves `C_1`.
pub fn step(state: &FlowState, dt: f64, scheme: Scheme) -> Result<FlowState, FlowError> {
    if !(dt > 0.0) {
        return Err(FlowError::InvalidDt(dt));
    }
    let grid = state.u.grid().clone();
    let from = prepare(&grid, &state.u.minus_two_u_values(), state.eps)?;
    let next = propose(&grid, &from, state.eps, dt, scheme)?;
    let p = prepare(&grid, &next, state.eps)?;
    Ok(state_from_prepared(&grid, &p, state.eps, state.time + dt))
}

/// Relative mismatch between the realized `(F2(after) - F2(before)) / dt` and
/// the dissipation integral `-(n-4) int e^{2u} sigma_1(g) (..)^2 dvol(g)`
/// evaluated at the midpoint factor. Returns 0 when both sides sit at the
/// round-metric noise floor.
pub fn dissipation_check(
    before: &FlowState,
    after: &FlowState,
    dt: f64,
) -> Result<f64, FlowError> {
    let grid = before.u.grid().clone();
    let ub = before.u.minus_two_u_values();
    let ua = after.u.minus_two_u_values();
    let mid: Vec<f64> = ub.iter().zip(&ua).map(|(b, a)| 0.5 * (b + a)).collect();
    let u_mid = ConformalFactor::from_values(grid, mid, Convention::MinusTwoU)?;
    let n = u_mid.n() as f64;
    let lhs = (after.report.f2 - before.report.f2) / dt;
    let rhs = -(n - 4.0) * 0.5 * functionals::flow_dissipation(&u_mid, before.eps)?;
    if lhs.abs() < 1e-14 && rhs.abs() < 1e-14 {
        return Ok(0.0);
    }
    Ok((lhs - rhs).abs() / lhs.abs().max(rhs.abs()))
}

/// Run the flow from `u0` until stationarity, the time horizon, or failure.
///
/// `u0` may be given in either sign convention; it is converted internally.
/// Before the first step the factor is shifted by a constant so that
/// `F0_eps = 1`; the shift changes neither the velocity field nor the
/// normalized objective. Returns an error only when the initial data or the
/// configuration is rejected; everything that happens during the run is
/// reported through the trajectory status.
pub fn run(
    config: &FlowConfig,
    u0: &ConformalFactor,
    sink: &mut dyn DiagnosticsSink,
) -> Result<Trajectory, FlowError> {
    config.validate()?;
    let grid = u0.grid().clone();
    if grid.dim_n() != config.n {
        return Err(FlowError::InvalidConfig(format!(
            "initial data lives on an n = {} grid, config says n = {}",
            grid.dim_n(),
            config.n
        )));
    }
    if grid.len_theta() != config.grid_size {
        return Err(FlowError::InvalidConfig(format!(
            "initial data has {} theta nodes, config says {}",
            grid.len_theta(),
            config.grid_size
        )));
    }
    let eps = config.eps;

    let raw = u0.minus_two_u_values();
    let p0 = match prepare(&grid, &raw, eps) {
        Ok(p) => p,
        Err(FlowError::ConeViolation { s, sigma1 }) => {
            return Err(FlowError::InitialDataOutsideCone { s, sigma1 })
        }
        Err(e) => return Err(e),
    };
    // renormalize F0_eps to 1 by a constant shift
    let shift = p0.report.f0_eps.ln() / (config.n as f64 - 2.0 * eps);
    let shifted: Vec<f64> = raw.iter().map(|v| v + shift).collect();
    let mut cur = prepare(&grid, &shifted, eps)?;
    let mut time = 0.0;
    let mut dt = config.dt_init;

    let mut rows: Vec<DiagnosticsRow> = Vec::new();
    let mut bound_history: Vec<(f64, f64)> = Vec::new();
    let f0_initial = cur.report.f0_eps;
    let mut max_drift_rate = 0.0f64;
    let mut conservation_violations = 0usize;
    let mut r_eps_violations = 0usize;
    let mut min_sigma1_over_run = f64::INFINITY;
    let mut sup_c2_max = 0.0f64;

    macro_rules! record {
        ($p:expr, $time:expr, $dt_used:expr) => {{
            let p: &Prepared = $p;
            let row = DiagnosticsRow {
                time: $time,
                dt: $dt_used,
                f2: p.report.f2,
                f0_eps: p.report.f0_eps,
                r_eps: p.report.r_eps,
                s_eps: p.report.s_eps,
                min_sigma1: p.min_sigma1,
                min_sigma2: p.min_sigma2,
                residual: p.residual,
            };
            sink.record(&row);
            rows.push(row);
            sup_c2_max = sup_c2_max.max(p.sup_c2);
            bound_history.push(($time, sup_c2_max));
            min_sigma1_over_run = min_sigma1_over_run.min(p.min_sigma1);
        }};
    }

    record!(&cur, time, 0.0);

    let status = loop {
        if cur.residual <= config.residual_tol {
            break TrajectoryStatus::Converged;
        }
        if time >= config.max_time - 1e-14 {
            break TrajectoryStatus::MaxTimeReached;
        }

        // the fixed policy trusts dt_init; the adaptive one additionally
        // respects the stability estimate of the current state
        let mut dt_try = match config.dt_policy {
            DtPolicy::Fixed => dt.min(config.max_time - time),
            DtPolicy::AdaptiveHalving => dt
                .min(dt_stability_cap(cur.lambda_est, config.scheme))
                .min(config.max_time - time),
        };
        let mut halvings = 0u32;

        enum Reject {
            Stage(FlowError),
            F2Increase,
            Sigma1Floor,
        }

        let accepted = loop {
            let attempt = propose(&grid, &cur, eps, dt_try, config.scheme)
                .and_then(|next| prepare(&grid, &next, eps));
            let reject = match &attempt {
                Err(e) => Some(Reject::Stage(e.clone())),
                Ok(p) => {
                    if p.report.f2 - cur.report.f2 > F2_SLACK * cur.report.f2.abs() {
                        Some(Reject::F2Increase)
                    } else if p.min_sigma1 < config.sigma1_floor {
                        Some(Reject::Sigma1Floor)
                    } else {
                        None
                    }
                }
            };
            match reject {
                None => break Ok((attempt.unwrap(), dt_try)),
                Some(reason) => {
                    if config.dt_policy == DtPolicy::Fixed || halvings >= MAX_HALVINGS {
                        break Err(reason);
                    }
                    halvings += 1;
                    dt_try *= 0.5;
                }
            }
        };

        match accepted {
            // a stage that actually left the cone is a geometric failure;
            // everything else that exhausts the policy is a step failure
            Err(Reject::Stage(FlowError::ConeViolation { s, sigma1 })) => {
                break TrajectoryStatus::ConeViolation {
                    s,
                    min_sigma1: sigma1,
                };
            }
            Err(_) => {
                break TrajectoryStatus::StepFailure { dt: dt_try };
            }
            Ok((next, dt_used)) => {
                time += dt_used;
                if halvings > 0 {
                    dt = dt_used; // keep a rejection-forced reduction
                }
                let drift = (next.report.f0_eps - cur.report.f0_eps).abs();
                let rate = drift / (dt_used * cur.report.f0_eps);
                max_drift_rate = max_drift_rate.max(rate);
                if rate > config.conservation_tol {
                    conservation_violations += 1;
                }
                if next.report.r_eps - cur.report.r_eps > 1e-12 * cur.report.r_eps.abs() {
                    r_eps_violations += 1;
                }
                cur = next;
                record!(&cur, time, dt_used);
            }
        }
    };

    let f0_drift = (cur.report.f0_eps - f0_initial).abs() / f0_initial;
    Ok(Trajectory {
        final_state: state_from_prepared(&grid, &cur, eps, time),
        rows,
        status,
        f0_drift,
        max_step_drift_rate: max_drift_rate,
        conservation_violations,
        r_eps_violations,
        min_sigma1_over_run,
        bound_history,
    })
}

/// `run` without a sink.
pub fn run_collect(config: &FlowConfig, u0: &ConformalFactor) -> Result<Trajectory, FlowError> {
    run(config, u0, &mut NoopSink)
}
