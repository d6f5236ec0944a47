//! Elementary symmetric functions, Garding cones, Newton transformations and
//! the quotient operator `(sigma_2 - nu) / sigma_1` on symmetric matrices.
//!
//! Eigenvalue profiles evaluate `sigma_k` through the stable coefficient
//! recurrence (incrementally expanding `prod_i (1 + t*lambda_i)`), never by
//! subset enumeration. Matrix quotients only need `sigma_1` and `sigma_2`,
//! which reduce to traces.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymfuncError {
    #[error("k = {k} out of range for dimension {n}")]
    KOutOfRange { k: usize, n: usize },
    #[error("cone violation: sigma_1 = {sigma1:e} is not positive")]
    ConeViolation { sigma1: f64 },
    #[error("matrix is not symmetric at ({i},{j}): {a} != {b}")]
    NotSymmetric { i: usize, j: usize, a: f64, b: f64 },
    #[error("matrix dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}

/// Eigenvalues of a symmetric endomorphism, either listed in full or stored
/// as one radial value plus a tangential value of multiplicity `m`.
#[derive(Debug, Clone, PartialEq)]
pub enum EigenProfile {
    Expanded(Vec<f64>),
    Compressed {
        radial: f64,
        tangential: f64,
        multiplicity: usize,
    },
}

impl EigenProfile {
    pub fn expanded(values: Vec<f64>) -> Self {
        assert!(!values.is_empty(), "eigenvalue profile must be non-empty");
        EigenProfile::Expanded(values)
    }

    /// Profile of a rotationally symmetric tensor in dimension `n`: one
    /// radial eigenvalue and a tangential one with multiplicity `n - 1`.
    pub fn rotational(radial: f64, tangential: f64, n: usize) -> Self {
        assert!(n >= 1);
        EigenProfile::Compressed {
            radial,
            tangential,
            multiplicity: n - 1,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            EigenProfile::Expanded(v) => v.len(),
            EigenProfile::Compressed { multiplicity, .. } => multiplicity + 1,
        }
    }

    /// Eigenvalues in storage order (radial first for the compressed form).
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        let (slice, rep) = match self {
            EigenProfile::Expanded(v) => (v.as_slice(), None),
            EigenProfile::Compressed {
                radial,
                tangential,
                multiplicity,
            } => (std::slice::from_ref(radial), Some((*tangential, *multiplicity))),
        };
        slice
            .iter()
            .copied()
            .chain(rep.into_iter().flat_map(|(t, m)| std::iter::repeat_n(t, m)))
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.iter().collect()
    }
}

/// `sigma_k` of the profile, with `sigma_0 = 1`.
pub fn sigma_k(profile: &EigenProfile, k: usize) -> Result<f64, SymfuncError> {
    let n = profile.dim();
    if k > n {
        return Err(SymfuncError::KOutOfRange { k, n });
    }
    let mut e = vec![0.0; k + 1];
    e[0] = 1.0;
    let mut seen = 0usize;
    for lam in profile.iter() {
        seen += 1;
        for j in (1..=k.min(seen)).rev() {
            e[j] += lam * e[j - 1];
        }
    }
    Ok(e[k])
}

/// All of `sigma_0 .. sigma_k` in one pass.
pub fn sigma_all(profile: &EigenProfile, k: usize) -> Result<Vec<f64>, SymfuncError> {
    let n = profile.dim();
    if k > n {
        return Err(SymfuncError::KOutOfRange { k, n });
    }
    let mut e = vec![0.0; k + 1];
    e[0] = 1.0;
    let mut seen = 0usize;
    for lam in profile.iter() {
        seen += 1;
        for j in (1..=k.min(seen)).rev() {
            e[j] += lam * e[j - 1];
        }
    }
    Ok(e)
}

/// Membership decision for the cone `Gamma_k^+` (all `sigma_j > 0`, `j <= k`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConeLabel {
    pub k: usize,
    pub member: bool,
}

/// Strict test, no tolerance: the cones are open and any margin policy
/// belongs to the caller.
pub fn in_gamma_plus(profile: &EigenProfile, k: usize) -> Result<ConeLabel, SymfuncError> {
    let n = profile.dim();
    if k < 1 || k > n {
        return Err(SymfuncError::KOutOfRange { k, n });
    }
    let sig = sigma_all(profile, k)?;
    let member = sig[1..=k].iter().all(|&s| s > 0.0);
    Ok(ConeLabel { k, member })
}

/// Quotient `sigma_k / sigma_{k-1}` on an eigenvalue profile, `1 <= k <= n`.
///
/// Requires `sigma_{k-1} > 0`, which holds on `Gamma_{k-1}^+`.
pub fn sigma_quotient(profile: &EigenProfile, k: usize) -> Result<f64, SymfuncError> {
    let n = profile.dim();
    if k < 1 || k > n {
        return Err(SymfuncError::KOutOfRange { k, n });
    }
    let sig = sigma_all(profile, k)?;
    if sig[k - 1] <= 0.0 {
        return Err(SymfuncError::ConeViolation { sigma1: sig[k - 1] });
    }
    Ok(sig[k] / sig[k - 1])
}

/// Dense symmetric matrix; the storage only admits symmetric writes, so
/// `w_ij == w_ji` holds exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>, // row-major n*n
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1);
        SymMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m.data[i * d.len() + i] = v;
        }
        m
    }

    /// Build from full row-major entries, rejecting any asymmetry.
    pub fn from_rows(n: usize, entries: &[f64]) -> Result<Self, SymfuncError> {
        if entries.len() != n * n {
            return Err(SymfuncError::DimensionMismatch(entries.len(), n * n));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (entries[i * n + j], entries[j * n + i]);
                if a != b {
                    return Err(SymfuncError::NotSymmetric { i, j, a, b });
                }
            }
        }
        Ok(SymMatrix {
            n,
            data: entries.to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Set `w_ij` and `w_ji` together.
    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn sigma1(&self) -> f64 {
        self.trace()
    }

    /// `sigma_2` of the eigenvalues via `(tr^2 - tr(W^2)) / 2`.
    pub fn sigma2(&self) -> f64 {
        let t = self.trace();
        0.5 * (t * t - self.frobenius_sq())
    }

    /// Linear combination `a*self + b*other`.
    pub fn axpy(&self, a: f64, other: &SymMatrix, b: f64) -> SymMatrix {
        assert_eq!(self.n, other.n);
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| a * x + b * y)
            .collect();
        SymMatrix { n: self.n, data }
    }

    /// Eigenvalues by the cyclic Jacobi method, ascending. Intended for the
    /// small dimensions (n <= 16) this crate works with.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let n = self.n;
        let mut a = self.data.clone();
        let idx = |i: usize, j: usize| i * n + j;
        for _sweep in 0..64 {
            let mut off = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    off += a[idx(i, j)] * a[idx(i, j)];
                }
            }
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[idx(p, q)];
                    if apq.abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[idx(q, q)] - a[idx(p, p)]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[idx(k, p)];
                        let akq = a[idx(k, q)];
                        a[idx(k, p)] = c * akp - s * akq;
                        a[idx(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[idx(p, k)];
                        let aqk = a[idx(q, k)];
                        a[idx(p, k)] = c * apk - s * aqk;
                        a[idx(q, k)] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut eigs: Vec<f64> = (0..n).map(|i| a[idx(i, i)]).collect();
        eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
        eigs
    }
}

/// First Newton transformation `T = sigma_1(W) I - W`.
pub fn newton_transform(w: &SymMatrix) -> SymMatrix {
    let t = w.trace();
    let mut out = w.clone();
    for x in &mut out.data {
        *x = -*x;
    }
    for i in 0..out.n {
        out.data[i * out.n + i] += t;
    }
    out
}

/// Quotient operator `F(W) = (sigma_2(W) - nu) / sigma_1(W)`.
pub fn quotient_f(w: &SymMatrix, nu: f64) -> Result<f64, SymfuncError> {
    let s1 = w.sigma1();
    if s1 <= 0.0 {
        return Err(SymfuncError::ConeViolation { sigma1: s1 });
    }
    Ok((w.sigma2() - nu) / s1)
}

/// Derivative matrix `F^{ij} = (sigma_1 T^{ij} - sigma_2 d^{ij} + nu d^{ij}) / sigma_1^2`.
///
/// Positive semidefinite on `Gamma_1^+` for `nu = 0`, positive definite for
/// `nu > 0`.
pub fn quotient_grad(w: &SymMatrix, nu: f64) -> Result<SymMatrix, SymfuncError> {
    let s1 = w.sigma1();
    if s1 <= 0.0 {
        return Err(SymfuncError::ConeViolation { sigma1: s1 });
    }
    let s2 = w.sigma2();
    // (sigma_1^2 - sigma_2 + nu) I - sigma_1 W, all over sigma_1^2
    let diag = s1 * s1 - s2 + nu;
    let inv = 1.0 / (s1 * s1);
    let mut out = w.clone();
    for x in &mut out.data {
        *x *= -s1 * inv;
    }
    for i in 0..out.n {
        out.data[i * out.n + i] += diag * inv;
    }
    Ok(out)
}

/// Second derivative of `sigma_2/sigma_1` at `W` in direction `R`:
/// `-sum_ij (sigma_1(W) r_ij - sigma_1(R) w_ij)^2 / sigma_1(W)^3`.
///
/// Always `<= 0` on `sigma_1 > 0` (concavity), and `0` exactly when `R` is
/// proportional to `W` (the quotient is 1-homogeneous).
pub fn quotient_hessian_form(w: &SymMatrix, r: &SymMatrix) -> Result<f64, SymfuncError> {
    if w.n != r.n {
        return Err(SymfuncError::DimensionMismatch(w.n, r.n));
    }
    let s1w = w.sigma1();
    if s1w <= 0.0 {
        return Err(SymfuncError::ConeViolation { sigma1: s1w });
    }
    let s1r = r.sigma1();
    let mut num = 0.0;
    for (wij, rij) in w.data.iter().zip(&r.data) {
        let d = s1w * rij - s1r * wij;
        num += d * d;
    }
    Ok(-num / (s1w * s1w * s1w))
}

/// Second derivative of the perturbed quotient `(sigma_2 - nu)/sigma_1` in
/// direction `R`; bounded above by `-2 nu (tr R)^2 / sigma_1(W)^3`.
pub fn perturbed_hessian_form(w: &SymMatrix, r: &SymMatrix, nu: f64) -> Result<f64, SymfuncError> {
    let base = quotient_hessian_form(w, r)?;
    let s1w = w.sigma1();
    let s1r = r.sigma1();
    Ok(base - 2.0 * nu * s1r * s1r / (s1w * s1w * s1w))
}
