//! Quadric cones `A = {z : z^T Q z = 0}` with `Q` complex symmetric and invertible.
//!
//! For every pair `j < k` the linear field
//! `V_{j,k} = dP/dz_j d/dz_k - dP/dz_k d/dz_j` is tangent to `A`; its matrix is
//! `M_{j,k} = 2 (e_k e_j^T - e_j e_k^T) Q`. These fields span `T_z A` at every
//! `z in A \ {0}`, and their flows `exp(t M_{j,k})` preserve `P` exactly.
//!
//! `M_{j,k}` has rank two, so its exponential has a closed form: writing
//! `M = U W^T` with `U = [2 e_k, -2 e_j]` and `W^T = [Q_j; Q_k]` (rows of `Q`),
//! `exp(tM) = I + t U phi(t W^T U) W^T` where `phi(X) = (e^X - I)/X`, and the
//! 2x2 matrix `B = W^T U` is traceless, so `B^2 = -det(B) I`.

use thiserror::Error;

use crate::linalg::{bilinear, bilinear_complement, singular_values, takagi_leading};
use crate::{CMatrix, CVector, C64, I};

/// Default scale-normalized membership tolerance.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConeError {
    #[error("ambient dimension must be at least 3, got {0}")]
    DimensionTooSmall(usize),
    #[error("quadratic form must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("quadratic form is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("quadratic form is singular (sigma_min/sigma_max = {ratio:.3e}); the cone would be singular away from 0")]
    Singular { ratio: f64 },
    #[error("invalid field pair ({j}, {k}) for dimension {n}: need j < k < n")]
    InvalidPair { j: usize, k: usize, n: usize },
    #[error("vector has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("point is (numerically) the origin")]
    Origin,
    #[error("point is not on the cone: scaled residual {residual:.3e} exceeds {tol:.1e}")]
    NotOnCone { residual: f64, tol: f64 },
    #[error("cannot decompose target: restricted form is degenerate (sigma = {sigma:.3e}) in the complement of Q*target")]
    DegenerateComplement { sigma: f64 },
    #[error("null quadric parametrization needs w != 0")]
    ZeroScale,
}

/// Index pair `(j, k)`, `j < k`, selecting the tangential field `V_{j,k}`.
/// Indices are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldPair {
    j: usize,
    k: usize,
}

impl FieldPair {
    pub fn new(j: usize, k: usize, n: usize) -> Result<Self, ConeError> {
        if j < k && k < n {
            Ok(Self { j, k })
        } else {
            Err(ConeError::InvalidPair { j, k, n })
        }
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn touches(&self, component: usize) -> bool {
        self.j == component || self.k == component
    }
}

/// A nonzero point of the cone, checked at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ConePoint(CVector);

impl ConePoint {
    pub fn new(variety: &ConeVariety, z: CVector) -> Result<Self, ConeError> {
        variety.check_member(&z, MEMBERSHIP_TOL)?;
        Ok(Self(z))
    }

    pub fn as_vector(&self) -> &CVector {
        &self.0
    }

    pub fn into_vector(self) -> CVector {
        self.0
    }
}

/// Homogeneous quadratic cone `{z^T Q z = 0}` in `C^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeVariety {
    q: CMatrix,
    identity: bool,
}

impl ConeVariety {
    pub fn new(q: CMatrix) -> Result<Self, ConeError> {
        let (rows, cols) = q.shape();
        if rows != cols {
            return Err(ConeError::NotSquare { rows, cols });
        }
        if rows < 3 {
            return Err(ConeError::DimensionTooSmall(rows));
        }
        for r in 0..rows {
            for c in (r + 1)..cols {
                if q[(r, c)] != q[(c, r)] {
                    return Err(ConeError::NotSymmetric { row: r, col: c });
                }
            }
        }
        let s = singular_values(&q);
        let ratio = s.last().copied().unwrap_or(0.0) / s[0].max(f64::MIN_POSITIVE);
        if !(ratio > 1e-12) {
            return Err(ConeError::Singular { ratio });
        }
        let identity = q == CMatrix::identity(rows, cols);
        Ok(Self { q, identity })
    }

    /// The null quadric `z_1^2 + ... + z_n^2 = 0`.
    pub fn null_quadric(n: usize) -> Result<Self, ConeError> {
        Self::new(CMatrix::identity(n, n))
    }

    /// The classical null quadric in `C^3`.
    pub fn null3() -> Self {
        Self::null_quadric(3).expect("identity is a valid form")
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn form(&self) -> &CMatrix {
        &self.q
    }

    /// True for `Q = I_3`.
    pub fn is_null3(&self) -> bool {
        self.identity && self.dim() == 3
    }

    /// `P(z) = z^T Q z`.
    pub fn membership_residual(&self, z: &CVector) -> C64 {
        bilinear(z, &(&self.q * z))
    }

    /// `|P(z)| / (1 + |z|^2)`.
    pub fn scaled_residual(&self, z: &CVector) -> f64 {
        self.membership_residual(z).norm() / (1.0 + z.norm_squared())
    }

    pub fn check_member(&self, z: &CVector, tol: f64) -> Result<(), ConeError> {
        self.check_len(z)?;
        if z.norm() == 0.0 {
            return Err(ConeError::Origin);
        }
        let residual = self.scaled_residual(z);
        if residual > tol || !residual.is_finite() {
            return Err(ConeError::NotOnCone { residual, tol });
        }
        Ok(())
    }

    fn check_len(&self, z: &CVector) -> Result<(), ConeError> {
        if z.len() != self.dim() {
            return Err(ConeError::LengthMismatch { expected: self.dim(), got: z.len() });
        }
        Ok(())
    }

    /// All pairs `j < k` in lexicographic order.
    pub fn pairs(&self) -> Vec<FieldPair> {
        let n = self.dim();
        (0..n).flat_map(|j| ((j + 1)..n).map(move |k| FieldPair { j, k })).collect()
    }

    /// Matrix `M_{j,k} = 2 (e_k e_j^T - e_j e_k^T) Q` of the field `V_{j,k}`.
    pub fn field_matrix(&self, pair: FieldPair) -> CMatrix {
        let n = self.dim();
        let mut m = CMatrix::zeros(n, n);
        for c in 0..n {
            m[(pair.k, c)] += self.q[(pair.j, c)] * 2.0;
            m[(pair.j, c)] -= self.q[(pair.k, c)] * 2.0;
        }
        m
    }

    /// `V_{j,k}(z) = M_{j,k} z`.
    pub fn field(&self, pair: FieldPair, z: &CVector) -> CVector {
        let (a, b) = self.row_products(pair, z);
        let mut out = CVector::zeros(self.dim());
        out[pair.k] = a * 2.0;
        out[pair.j] = -b * 2.0;
        out
    }

    fn row_products(&self, pair: FieldPair, z: &CVector) -> (C64, C64) {
        let a: C64 = (0..self.dim()).map(|c| self.q[(pair.j, c)] * z[c]).sum();
        let b: C64 = (0..self.dim()).map(|c| self.q[(pair.k, c)] * z[c]).sum();
        (a, b)
    }

    /// `exp(t M_{j,k}) z`, the time-`t` flow of `V_{j,k}` (complex time).
    pub fn tangent_flow(&self, pair: FieldPair, t: C64, z: &CVector) -> CVector {
        let mut out = z.clone();
        self.apply_flow_in_place(pair, t, &mut out);
        out
    }

    /// In-place version of [`ConeVariety::tangent_flow`].
    pub fn apply_flow_in_place(&self, pair: FieldPair, t: C64, z: &mut CVector) {
        if t == C64::from(0.0) {
            return;
        }
        let (j, k) = (pair.j, pair.k);
        let (qjj, qjk, qkk) = (self.q[(j, j)], self.q[(j, k)], self.q[(k, k)]);
        let (y0, y1) = self.row_products(pair, z);
        // tB with B = 2 [[q_jk, -q_jj], [q_kk, -q_jk]], (tB)^2 = mu I
        let b00 = t * qjk * 2.0;
        let b01 = -t * qjj * 2.0;
        let b10 = t * qkk * 2.0;
        let mu = t * t * (qjk * qjk - qjj * qkk) * 4.0;
        let (s, c) = phi_coefficients(mu);
        // phi(tB) y = s y + c (tB) y
        let by0 = b00 * y0 + b01 * y1;
        let by1 = b10 * y0 - b00 * y1;
        let p0 = s * y0 + c * by0;
        let p1 = s * y1 + c * by1;
        // z += t U p with U = [2 e_k, -2 e_j]
        z[k] += t * p0 * 2.0;
        z[j] -= t * p1 * 2.0;
    }

    /// Orthonormal basis of `T_z A = {w : (Qz)^T w = 0}` (dimension `n - 1`).
    pub fn tangent_basis(&self, z: &CVector) -> Result<Vec<CVector>, ConeError> {
        self.check_member(z, MEMBERSHIP_TOL)?;
        let grad = &self.q * z;
        bilinear_complement(&grad).ok_or(ConeError::Origin)
    }

    /// Write `target = (a + b) / 2` with `a, b` in `A \ {0}`.
    ///
    /// `a = target + w`, `b = target - w` where `w` lies in the bilinear complement
    /// of `Q target` and solves `P(w) = -P(target)`. Among such `w` the one of
    /// minimal norm is returned: with `S` the form restricted to the complement,
    /// `w` is the leading Takagi vector of `S` scaled by `sqrt(-P(target)/sigma_1)`.
    pub fn null_pair_decompose(&self, target: &CVector) -> Result<(CVector, CVector), ConeError> {
        self.check_len(target)?;
        let scale = target.norm();
        if scale == 0.0 {
            return Err(ConeError::Origin);
        }
        let rhs = -self.membership_residual(target);
        if rhs.norm() <= 1e-15 * scale * scale * self.form_norm() {
            return Ok((target.clone(), target.clone()));
        }
        let basis = bilinear_complement(&(&self.q * target)).ok_or(ConeError::Origin)?;
        let b = CMatrix::from_columns(&basis);
        let restricted = b.transpose() * &self.q * &b;
        let (sigma, u) = takagi_leading(&restricted);
        if sigma <= 1e-12 * self.form_norm() {
            return Err(ConeError::DegenerateComplement { sigma });
        }
        let coeffs = u.map(|x| x.conj()) * (rhs / sigma).sqrt();
        let w = b * coeffs;
        Ok((target + &w, target - &w))
    }

    fn form_norm(&self) -> f64 {
        self.q.norm()
    }
}

/// Series-safe evaluation of `sinh(l)/l` and `(cosh(l) - 1)/l^2` as entire
/// functions of `mu = l^2`.
fn phi_coefficients(mu: C64) -> (C64, C64) {
    if mu.norm() < 1.0 {
        // sum mu^m/(2m+1)! and sum mu^m/(2m+2)!
        let mut s = C64::from(0.0);
        let mut c = C64::from(0.0);
        let mut term_s = C64::from(1.0);
        let mut term_c = C64::from(0.5);
        for m in 0..20 {
            s += term_s;
            c += term_c;
            let m = m as f64;
            term_s *= mu / ((2.0 * m + 2.0) * (2.0 * m + 3.0));
            term_c *= mu / ((2.0 * m + 3.0) * (2.0 * m + 4.0));
        }
        (s, c)
    } else {
        let l = mu.sqrt();
        let half = (l * 0.5).sinh();
        (l.sinh() / l, half * half * 2.0 / mu)
    }
}

/// `w ((1 - g^2)/2, i (1 + g^2)/2, g)`, a point of the null quadric in `C^3`.
pub fn parametrize_null_quadric(g: C64, w: C64) -> Result<CVector, ConeError> {
    if w == C64::from(0.0) {
        return Err(ConeError::ZeroScale);
    }
    let g2 = g * g;
    Ok(CVector::from_vec(vec![
        w * (C64::from(1.0) - g2) * 0.5,
        w * I * (C64::from(1.0) + g2) * 0.5,
        w * g,
    ]))
}

/// Inverse chart of [`parametrize_null_quadric`]: `w = z_1 - i z_2`, `g = z_3 / w`.
/// `None` when `w` vanishes relative to `|z|` (the point at `g = infinity`).
pub fn null_quadric_chart(z: &CVector) -> Option<(C64, C64)> {
    let w = z[0] - I * z[1];
    if w.norm() <= 1e-8 * z.norm() {
        return None;
    }
    Some((z[2] / w, w))
}
