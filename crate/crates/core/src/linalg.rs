//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::{CMatrix, CVector, C64};

/// Bilinear (non-Hermitian) dot product `a^T b`.
pub fn bilinear(a: &CVector, b: &CVector) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Singular values in descending order.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Numerical rank with a threshold relative to the largest singular value.
pub fn numerical_rank(m: &CMatrix, rel_tol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&smax) if smax > 0.0 => s.iter().filter(|&&x| x > rel_tol * smax).count(),
        _ => 0,
    }
}

/// Truncated-SVD pseudoinverse, factorized once and applied to many right-hand sides.
#[derive(Debug, Clone)]
pub struct Pseudoinverse {
    u: CMatrix,
    sigma: Vec<f64>,
    v_t: CMatrix,
    cols: usize,
    rank: usize,
}

impl Pseudoinverse {
    /// Singular values at or below `rel_cutoff * sigma_max` are treated as zero.
    pub fn new(m: &CMatrix, rel_cutoff: f64) -> Self {
        let cols = m.ncols();
        if m.nrows() == 0 || cols == 0 {
            return Self { u: CMatrix::zeros(m.nrows(), 0), sigma: Vec::new(), v_t: CMatrix::zeros(0, cols), cols, rank: 0 };
        }
        let svd = m.clone().svd(true, true);
        let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
        let sigma: Vec<f64> = svd
            .singular_values
            .iter()
            .map(|&s| if smax > 0.0 && s > rel_cutoff * smax { s } else { 0.0 })
            .collect();
        let rank = sigma.iter().filter(|&&s| s > 0.0).count();
        Self { u: svd.u.expect("svd computed with u"), sigma, v_t: svd.v_t.expect("svd computed with v_t"), cols, rank }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Least-norm least-squares solution of `m x = b`.
    pub fn solve(&self, b: &CVector) -> CVector {
        let mut x = CVector::zeros(self.cols);
        for (k, &s) in self.sigma.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            let coeff = self.u.column(k).dotc(b) / s;
            for c in 0..self.cols {
                x[c] += self.v_t[(k, c)].conj() * coeff;
            }
        }
        x
    }
}

/// Least-norm least-squares solution of `m x = b` through a truncated SVD
/// pseudoinverse; singular values below `rel_cutoff * sigma_max` are dropped.
///
/// Returns the solution and the retained rank.
pub fn pinv_solve(m: &CMatrix, b: &CVector, rel_cutoff: f64) -> (CVector, usize) {
    let p = Pseudoinverse::new(m, rel_cutoff);
    (p.solve(b), p.rank())
}

/// Orthonormal (Hermitian) basis of `{w : a^T w = 0}`, the kernel of the row
/// vector `a^T` under the bilinear pairing.
///
/// Modified Gram-Schmidt against `conj(a)`, seeded with the standard basis
/// vectors in order of increasing overlap with `a`. Returns `None` if `a = 0`.
pub fn bilinear_complement(a: &CVector) -> Option<Vec<CVector>> {
    let n = a.len();
    let norm = a.norm();
    if norm == 0.0 || !norm.is_finite() {
        return None;
    }
    let lead = a.map(|x| x.conj()) / C64::from(norm);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| lead[i].norm().total_cmp(&lead[j].norm()).then(i.cmp(&j)));

    let mut accepted: Vec<CVector> = vec![lead];
    for &i in &order {
        if accepted.len() == n {
            break;
        }
        let mut v = CVector::zeros(n);
        v[i] = C64::from(1.0);
        // two passes keep the basis orthonormal to working precision
        for _ in 0..2 {
            for u in &accepted {
                let proj = u.dotc(&v);
                v -= u * proj;
            }
        }
        let vn = v.norm();
        if vn > 1e-8 {
            accepted.push(v / C64::from(vn));
        }
    }
    if accepted.len() != n {
        return None;
    }
    accepted.remove(0);
    Some(accepted)
}

/// Leading Takagi pair of a complex symmetric matrix: the largest `sigma >= 0`
/// and a unit vector `u` with `S conj(u) = sigma u`, so that
/// `conj(u)^T S conj(u) = sigma`.
///
/// Computed from the real symmetric embedding `[[Re S, Im S], [Im S, -Re S]]`,
/// whose eigenvalues are `+-sigma_k`.
pub fn takagi_leading(s: &CMatrix) -> (f64, CVector) {
    let k = s.nrows();
    let mut emb = DMatrix::<f64>::zeros(2 * k, 2 * k);
    for r in 0..k {
        for c in 0..k {
            let v = s[(r, c)];
            emb[(r, c)] = v.re;
            emb[(r, c + k)] = v.im;
            emb[(r + k, c)] = v.im;
            emb[(r + k, c + k)] = -v.re;
        }
    }
    let eig = SymmetricEigen::new(emb);
    let (best, sigma) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, x)| if x > acc.1 { (i, x) } else { acc });
    let vec = eig.eigenvectors.column(best);
    // sign convention: largest-magnitude entry positive
    let pivot = vec
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0f64), |acc, (i, x)| if x.abs() > acc.1.abs() + 1e-14 { (i, x) } else { acc })
        .1;
    let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
    let u = CVector::from_fn(k, |i, _| C64::new(sign * vec[i], sign * vec[i + k]));
    (sigma.max(0.0), u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::I;

    #[test]
    fn complement_is_bilinear_orthogonal_and_orthonormal() {
        let a = CVector::from_vec(vec![C64::new(1.0, 0.5), I, C64::new(-0.3, 2.0), C64::from(0.7)]);
        let basis = bilinear_complement(&a).unwrap();
        assert_eq!(basis.len(), 3);
        for (i, u) in basis.iter().enumerate() {
            assert!(bilinear(&a, u).norm() < 1e-13);
            for (j, w) in basis.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((u.dotc(w) - C64::from(expected)).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn complement_of_zero_is_none() {
        assert!(bilinear_complement(&CVector::zeros(3)).is_none());
    }

    #[test]
    fn takagi_pair_satisfies_defining_relation() {
        let s = CMatrix::from_row_slice(
            2,
            2,
            &[C64::new(1.0, 2.0), C64::new(0.5, -1.0), C64::new(0.5, -1.0), C64::new(-0.3, 0.1)],
        );
        let (sigma, u) = takagi_leading(&s);
        let lhs = &s * u.map(|x| x.conj());
        assert!((lhs - &u * C64::from(sigma)).norm() < 1e-12);
        let smax = singular_values(&s)[0];
        assert!((sigma - smax).abs() < 1e-12);
    }

    #[test]
    fn pinv_gives_least_norm_solution() {
        // x0 + x1 = 2 has least-norm solution (1, 1)
        let m = CMatrix::from_row_slice(1, 2, &[C64::from(1.0), C64::from(1.0)]);
        let b = CVector::from_vec(vec![C64::from(2.0)]);
        let (x, rank) = pinv_solve(&m, &b, 1e-10);
        assert_eq!(rank, 1);
        assert!((x[0] - C64::from(1.0)).norm() < 1e-14);
        assert!((x[1] - C64::from(1.0)).norm() < 1e-14);
    }
}
