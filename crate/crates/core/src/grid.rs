//! Collocation grid and quadrature rule for rotationally symmetric fields.
//!
//! Fields live on midpoint nodes `theta_j = pi (j + 1/2) / N` of the polar
//! angle, strictly inside `(0, pi)`. The interpolant is the discrete cosine
//! series through those nodes, so the even extension across both poles is
//! built in and theta-differentiation is spectral. Integrals use a
//! Gauss-Legendre rule in the height `s = cos(theta)` with the polar density
//! `(1 - s^2)^{(n-2)/2}` folded into the integrand.
//!
//! Everything derivative-like is expressed through `u_theta` and
//! `u_thetatheta`; the conversions that would divide by `sin(theta)` are
//! avoided because the curvature formulas only ever need the combinations
//! `u_tt`, `cot(theta) u_t` and `u_t^2` (see `sphere::schouten_eigs_from_hessian`).

use std::f64::consts::PI;
use std::sync::Arc;

use thiserror::Error;

use crate::sphere::Convention;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("need at least 4 theta nodes, got {0}")]
    TooFewNodes(usize),
    #[error("quadrature order {0} too small")]
    QuadOrderTooSmall(usize),
    #[error("sphere dimension n = {0} must be at least 2")]
    BadDimension(usize),
    #[error("value count {0} does not match grid size {1}")]
    SizeMismatch(usize, usize),
    #[error("non-finite value at node {0}")]
    NonFinite(usize),
}

/// Nodes and weights of the Gauss-Legendre rule of the given order on
/// `[-1, 1]`, nodes ascending. Newton iteration on the Legendre recurrence.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 2);
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi-style initial guess for the i-th largest root
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_pair(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-15 * x.abs().max(1.0) {
                let (p2, d2) = legendre_pair(n, x);
                dp = d2;
                x -= p2 / d2;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

#[derive(Debug, Clone)]
struct DenseMat {
    rows: usize,
    cols: usize,
    a: Vec<f64>,
}

impl DenseMat {
    fn zeros(rows: usize, cols: usize) -> Self {
        DenseMat {
            rows,
            cols,
            a: vec![0.0; rows * cols],
        }
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.cols + j] = v;
    }

    fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        let mut out = vec![0.0; self.rows];
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.a[i * self.cols..(i + 1) * self.cols];
            let mut acc = 0.0;
            for (r, v) in row.iter().zip(x) {
                acc += r * v;
            }
            *o = acc;
        }
        out
    }

    fn matmul(&self, rhs: &DenseMat) -> DenseMat {
        debug_assert_eq!(self.cols, rhs.rows);
        let mut out = DenseMat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.a[i * self.cols + k];
                if aik == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.a[i * rhs.cols + j] += aik * rhs.a[k * rhs.cols + j];
                }
            }
        }
        out
    }
}

/// Field values at the quadrature nodes: the conformal factor and its first
/// two theta-derivatives, plus the precomputed `cot(theta)`.
pub struct QuadJet<'g> {
    pub u: Vec<f64>,
    pub u_t: Vec<f64>,
    pub u_tt: Vec<f64>,
    pub grid: &'g Grid,
}

/// Collocation grid plus quadrature rule for a fixed sphere dimension.
#[derive(Debug, Clone)]
pub struct Grid {
    n: usize,
    theta: Vec<f64>,
    s_col: Vec<f64>,
    cot_col: Vec<f64>,
    quad_s: Vec<f64>,
    quad_w: Vec<f64>,
    quad_cot: Vec<f64>,
    pole_w: Vec<f64>, // (1 - s^2)^{(n-2)/2} at quad nodes
    d1: DenseMat,     // values -> u_theta at collocation nodes
    d2: DenseMat,     // values -> u_thetatheta at collocation nodes
    e0: DenseMat,     // values -> u at quad nodes
    e1: DenseMat,     // values -> u_theta at quad nodes
    e2: DenseMat,     // values -> u_thetatheta at quad nodes
}

impl Grid {
    pub fn new(n: usize, n_theta: usize, quad_order: usize) -> Result<Arc<Grid>, GridError> {
        if n < 2 {
            return Err(GridError::BadDimension(n));
        }
        if n_theta < 4 {
            return Err(GridError::TooFewNodes(n_theta));
        }
        if quad_order < 4 {
            return Err(GridError::QuadOrderTooSmall(quad_order));
        }
        let nt = n_theta;
        let theta: Vec<f64> = (0..nt).map(|j| PI * (j as f64 + 0.5) / nt as f64).collect();
        let s_col: Vec<f64> = theta.iter().map(|t| t.cos()).collect();
        let cot_col: Vec<f64> = theta.iter().map(|t| t.cos() / t.sin()).collect();

        let (quad_s, quad_w) = gauss_legendre(quad_order);
        let quad_theta: Vec<f64> = quad_s.iter().map(|s| s.acos()).collect();
        let quad_cot: Vec<f64> = quad_theta.iter().map(|t| t.cos() / t.sin()).collect();
        let pole_w: Vec<f64> = quad_s
            .iter()
            .map(|s| (1.0 - s * s).powf(0.5 * (n as f64 - 2.0)))
            .collect();

        // forward DCT-II: values at theta_j -> cosine coefficients a_k
        let mut fwd = DenseMat::zeros(nt, nt);
        for k in 0..nt {
            let ck = if k == 0 { 1.0 } else { 2.0 };
            for (j, &t) in theta.iter().enumerate() {
                fwd.set(k, j, ck / nt as f64 * (k as f64 * t).cos());
            }
        }
        let synth = |points: &[f64], deriv: u8| -> DenseMat {
            let mut b = DenseMat::zeros(points.len(), nt);
            for (i, &t) in points.iter().enumerate() {
                for k in 0..nt {
                    let kf = k as f64;
                    let v = match deriv {
                        0 => (kf * t).cos(),
                        1 => -kf * (kf * t).sin(),
                        _ => -kf * kf * (kf * t).cos(),
                    };
                    b.set(i, k, v);
                }
            }
            b.matmul(&fwd)
        };

        let d1 = synth(&theta, 1);
        let d2 = synth(&theta, 2);
        let e0 = synth(&quad_theta, 0);
        let e1 = synth(&quad_theta, 1);
        let e2 = synth(&quad_theta, 2);

        Ok(Arc::new(Grid {
            n,
            theta,
            s_col,
            cot_col,
            quad_s,
            quad_w,
            quad_cot,
            pole_w,
            d1,
            d2,
            e0,
            e1,
            e2,
        }))
    }

    pub fn dim_n(&self) -> usize {
        self.n
    }

    pub fn len_theta(&self) -> usize {
        self.theta.len()
    }

    pub fn quad_order(&self) -> usize {
        self.quad_s.len()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn s_collocation(&self) -> &[f64] {
        &self.s_col
    }

    pub fn cot_collocation(&self) -> &[f64] {
        &self.cot_col
    }

    pub fn quad_s(&self) -> &[f64] {
        &self.quad_s
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.quad_w
    }

    pub fn quad_cot(&self) -> &[f64] {
        &self.quad_cot
    }

    pub fn pole_weight(&self) -> &[f64] {
        &self.pole_w
    }

    /// First and second theta-derivatives at the collocation nodes.
    pub fn collocation_derivatives(&self, values: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (self.d1.matvec(values), self.d2.matvec(values))
    }

    /// Interpolated value and first two theta-derivatives at the quadrature
    /// nodes.
    pub fn quad_jet(&self, values: &[f64]) -> QuadJet<'_> {
        QuadJet {
            u: self.e0.matvec(values),
            u_t: self.e1.matvec(values),
            u_tt: self.e2.matvec(values),
            grid: self,
        }
    }

    /// `omega_{n-1} * sum_q w_q * (1-s_q^2)^{(n-2)/2} * f_q` for samples `f_q`
    /// at the quadrature nodes.
    pub fn integrate_weighted(&self, f_at_quad: &[f64]) -> f64 {
        debug_assert_eq!(f_at_quad.len(), self.quad_s.len());
        let area = crate::sphere::sphere_area(self.n - 1);
        let mut acc = 0.0;
        for ((f, w), pw) in f_at_quad.iter().zip(&self.quad_w).zip(&self.pole_w) {
            acc += f * w * pw;
        }
        area * acc
    }
}

/// A rotationally symmetric conformal factor sampled on a grid, together
/// with the sign convention that turns it into a metric.
#[derive(Debug, Clone)]
pub struct ConformalFactor {
    grid: Arc<Grid>,
    values: Vec<f64>,
    convention: Convention,
}

impl ConformalFactor {
    pub fn from_values(
        grid: Arc<Grid>,
        values: Vec<f64>,
        convention: Convention,
    ) -> Result<Self, GridError> {
        if values.len() != grid.len_theta() {
            return Err(GridError::SizeMismatch(values.len(), grid.len_theta()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(i));
        }
        Ok(ConformalFactor {
            grid,
            values,
            convention,
        })
    }

    pub fn from_fn(
        grid: Arc<Grid>,
        convention: Convention,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self, GridError> {
        let values: Vec<f64> = grid
            .theta()
            .iter()
            .zip(grid.s_collocation())
            .map(|(&t, &s)| f(t, s))
            .collect();
        Self::from_values(grid, values, convention)
    }

    pub fn constant(grid: Arc<Grid>, c: f64, convention: Convention) -> Self {
        let n = grid.len_theta();
        ConformalFactor {
            grid,
            values: vec![c; n],
            convention,
        }
    }

    /// The round metric itself.
    pub fn round(grid: Arc<Grid>) -> Self {
        Self::constant(grid, 0.0, Convention::MinusTwoU)
    }

    /// `u = amp * cos(2 theta)` in the `e^{+2u}` convention.
    pub fn preset_cos2(grid: Arc<Grid>, amp: f64) -> Self {
        Self::from_fn(grid, Convention::PlusTwoU, |t, _| amp * (2.0 * t).cos()).unwrap()
    }

    /// `u = -ell * s^2` in the `e^{+2u}` convention, the explicit
    /// concentrating family.
    pub fn preset_ell_family(grid: Arc<Grid>, ell: f64) -> Self {
        Self::from_fn(grid, Convention::PlusTwoU, |_, s| -ell * s * s).unwrap()
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.dim_n()
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Values of the factor written in the `e^{-2u}` convention (negated if
    /// stored with the opposite sign).
    pub fn minus_two_u_values(&self) -> Vec<f64> {
        match self.convention {
            Convention::MinusTwoU => self.values.clone(),
            Convention::PlusTwoU => self.values.iter().map(|v| -v).collect(),
        }
    }

    pub fn to_convention(&self, convention: Convention) -> Self {
        if convention == self.convention {
            self.clone()
        } else {
            ConformalFactor {
                grid: self.grid.clone(),
                values: self.values.iter().map(|v| -v).collect(),
                convention,
            }
        }
    }

    /// Add a constant to the factor (conformal rescaling by a homothety).
    pub fn shifted(&self, c: f64) -> Self {
        ConformalFactor {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v + c).collect(),
            convention: self.convention,
        }
    }

    /// Same nodal values on a grid with a different quadrature order.
    pub fn with_quad_order(&self, quad_order: usize) -> Result<Self, GridError> {
        let grid = Grid::new(self.grid.dim_n(), self.grid.len_theta(), quad_order)?;
        Ok(ConformalFactor {
            grid,
            values: self.values.clone(),
            convention: self.convention,
        })
    }
}
