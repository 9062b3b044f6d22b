//! `C^n`-valued Laurent maps on circular domains.
//!
//! A map is a polynomial part in `(z - c_0)` plus, for every hole `i`, a principal
//! part in `(z - c_i)^{-1}`. Every holomorphic map on the closed domain is a uniform
//! limit of such maps, and their periods are read off from residues: the loop
//! around hole `j` encloses only the pole at `c_j`, so
//! `\oint_{gamma_j} f dz = 2 pi i * res_{c_j} f`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::PlanarDomain;
use crate::linalg::Pseudoinverse;
use crate::{CMatrix, CVector, C64, I};

/// Default degree cap for fitted maps.
pub const DEFAULT_FIT_DEGREE: usize = 64;
/// Relative singular-value cutoff for least-squares fitting.
pub const FIT_SVD_CUTOFF: f64 = 1e-12;
/// Change under node doubling above which quadrature periods are flagged.
pub const QUADRATURE_DRIFT_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HoloError {
    #[error("point {z} is outside the closed domain")]
    OutsideDomain { z: C64 },
    #[error("period obstruction at hole {hole}, component {component}: residue {residue}")]
    PeriodObstruction { hole: usize, component: usize, residue: C64 },
    #[error("map has {map} principal parts but the domain has {domain} holes")]
    HoleCountMismatch { map: usize, domain: usize },
    #[error("map center {map} does not match domain center {domain}")]
    CenterMismatch { map: C64, domain: C64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("underdetermined fit: {samples} samples for {coefficients} coefficients")]
    Underdetermined { samples: usize, coefficients: usize },
    #[error("rank-deficient fit: numerical rank {rank} < {coefficients} coefficients (samples poorly distributed)")]
    RankDeficient { rank: usize, coefficients: usize },
    #[error("invalid map description: {0}")]
    Invalid(String),
    #[error(transparent)]
    Domain(#[from] crate::domain::DomainError),
}

/// Principal part at one hole: `coeffs[p - 1]` multiplies `(z - center)^{-p}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalPart {
    pub center: C64,
    pub coeffs: Vec<CVector>,
}

/// `f(z) = sum_p a_p (z - c_0)^p + sum_i sum_{p >= 1} b_{i,p} (z - c_i)^{-p}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaurentMap {
    dim: usize,
    center: C64,
    poly: Vec<CVector>,
    principal: Vec<PrincipalPart>,
}

impl LaurentMap {
    /// The zero map with the centers of `domain`.
    pub fn zeros(dim: usize, domain: &PlanarDomain) -> Self {
        Self::zeros_with_centers(dim, domain.outer().center, &domain.hole_centers())
    }

    pub fn zeros_with_centers(dim: usize, center: C64, hole_centers: &[C64]) -> Self {
        Self {
            dim,
            center,
            poly: Vec::new(),
            principal: hole_centers.iter().map(|&c| PrincipalPart { center: c, coeffs: Vec::new() }).collect(),
        }
    }

    pub fn constant(domain: &PlanarDomain, value: CVector) -> Self {
        let mut f = Self::zeros(value.len(), domain);
        f.poly.push(value);
        f
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn center(&self) -> C64 {
        self.center
    }

    pub fn principal_parts(&self) -> &[PrincipalPart] {
        &self.principal
    }

    pub fn poly_coeffs(&self) -> &[CVector] {
        &self.poly
    }

    /// Largest power appearing in either part.
    pub fn degree(&self) -> usize {
        let pd = self.poly.len().saturating_sub(1);
        self.principal.iter().map(|p| p.coeffs.len()).fold(pd, usize::max)
    }

    /// Coefficient of `(z - c_0)^power`.
    pub fn poly_coeff(&self, power: usize) -> CVector {
        self.poly.get(power).cloned().unwrap_or_else(|| CVector::zeros(self.dim))
    }

    /// Coefficient of `(z - c_hole)^{-power}`, `power >= 1`.
    pub fn principal_coeff(&self, hole: usize, power: usize) -> CVector {
        assert!(power >= 1, "principal powers start at 1");
        self.principal
            .get(hole)
            .and_then(|p| p.coeffs.get(power - 1))
            .cloned()
            .unwrap_or_else(|| CVector::zeros(self.dim))
    }

    pub fn set_poly(&mut self, power: usize, value: CVector) {
        assert_eq!(value.len(), self.dim);
        if self.poly.len() <= power {
            self.poly.resize(power + 1, CVector::zeros(self.dim));
        }
        self.poly[power] = value;
    }

    pub fn set_principal(&mut self, hole: usize, power: usize, value: CVector) {
        assert!(power >= 1, "principal powers start at 1");
        assert_eq!(value.len(), self.dim);
        let part = &mut self.principal[hole];
        if part.coeffs.len() < power {
            part.coeffs.resize(power, CVector::zeros(self.dim));
        }
        part.coeffs[power - 1] = value;
    }

    /// Residue vector at hole `i` (the `(z - c_i)^{-1}` coefficient).
    pub fn residue(&self, hole: usize) -> CVector {
        self.principal_coeff(hole, 1)
    }

    /// Sum of all Laurent terms at `z` (no domain check).
    pub fn eval(&self, z: C64) -> CVector {
        let mut out = vec![C64::from(0.0); self.dim];
        let u = z - self.center;
        for a in self.poly.iter().rev() {
            for (o, &c) in out.iter_mut().zip(a.iter()) {
                *o = *o * u + c;
            }
        }
        for part in &self.principal {
            if part.coeffs.is_empty() {
                continue;
            }
            let inv = 1.0 / (z - part.center);
            let mut acc = vec![C64::from(0.0); self.dim];
            for b in part.coeffs.iter().rev() {
                for (o, &c) in acc.iter_mut().zip(b.iter()) {
                    *o = (*o + c) * inv;
                }
            }
            for (o, a) in out.iter_mut().zip(acc) {
                *o += a;
            }
        }
        CVector::from_vec(out)
    }

    /// Evaluation restricted to the closed domain.
    pub fn eval_in(&self, domain: &PlanarDomain, z: C64) -> Result<CVector, HoloError> {
        if !domain.contains(z) {
            return Err(HoloError::OutsideDomain { z });
        }
        Ok(self.eval(z))
    }

    /// Termwise derivative.
    pub fn derivative(&self) -> Self {
        let poly = self.poly.iter().enumerate().skip(1).map(|(p, a)| a * C64::from(p as f64)).collect();
        let principal = self
            .principal
            .iter()
            .map(|part| {
                // d/dz (z-c)^{-p} = -p (z-c)^{-p-1}
                let mut coeffs = vec![CVector::zeros(self.dim)];
                coeffs.extend(part.coeffs.iter().enumerate().map(|(i, b)| b * C64::from(-((i + 1) as f64))));
                if part.coeffs.is_empty() {
                    coeffs.clear();
                }
                PrincipalPart { center: part.center, coeffs }
            })
            .collect();
        Self { dim: self.dim, center: self.center, poly, principal }
    }

    /// Termwise antiderivative with zero constant term. Fails if any residue is
    /// nonzero, since then `f dz` has a nonzero period around that hole.
    pub fn antiderivative(&self) -> Result<Self, HoloError> {
        for (hole, part) in self.principal.iter().enumerate() {
            if let Some(res) = part.coeffs.first() {
                if let Some((component, &residue)) = res.iter().enumerate().find(|(_, r)| r.norm() != 0.0) {
                    return Err(HoloError::PeriodObstruction { hole, component, residue });
                }
            }
        }
        Ok(self.antiderivative_dropping_residues())
    }

    /// Antiderivative ignoring the `(z - c_i)^{-1}` terms.
    pub fn antiderivative_dropping_residues(&self) -> Self {
        let mut poly = vec![CVector::zeros(self.dim)];
        poly.extend(self.poly.iter().enumerate().map(|(p, a)| a / C64::from((p + 1) as f64)));
        if self.poly.is_empty() {
            poly.clear();
        }
        let principal = self
            .principal
            .iter()
            .map(|part| {
                // (z-c)^{-p} integrates to (z-c)^{-(p-1)} / (1-p) for p >= 2
                let coeffs = part
                    .coeffs
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(i, b)| b / C64::from(-(i as f64)))
                    .collect();
                PrincipalPart { center: part.center, coeffs }
            })
            .collect();
        Self { dim: self.dim, center: self.center, poly, principal }
    }

    /// `c * f`.
    pub fn scaled(&self, c: C64) -> Self {
        let mut out = self.clone();
        out.poly.iter_mut().for_each(|a| *a *= c);
        out.principal.iter_mut().for_each(|p| p.coeffs.iter_mut().for_each(|b| *b *= c));
        out
    }

    /// `f + w` for a constant vector `w`.
    pub fn translated(&self, w: &CVector) -> Self {
        let mut out = self.clone();
        let a0 = out.poly_coeff(0) + w;
        out.set_poly(0, a0);
        out
    }

    /// Replace component `k` of every coefficient with the one from `other`.
    pub fn copy_component_from(&mut self, other: &Self, k: usize) {
        let deg_poly = self.poly.len().max(other.poly.len());
        for p in 0..deg_poly {
            let mut a = self.poly_coeff(p);
            a[k] = other.poly_coeff(p)[k];
            self.set_poly(p, a);
        }
        for hole in 0..self.principal.len() {
            let len = self.principal[hole].coeffs.len().max(other.principal.get(hole).map_or(0, |p| p.coeffs.len()));
            for p in 1..=len {
                let mut b = self.principal_coeff(hole, p);
                b[k] = other.principal_coeff(hole, p)[k];
                self.set_principal(hole, p, b);
            }
        }
    }

    /// Largest coefficientwise difference in component `k` (all components when `None`).
    pub fn max_coeff_diff(&self, other: &Self, component: Option<usize>) -> f64 {
        let comps: Vec<usize> = component.map_or_else(|| (0..self.dim).collect(), |k| vec![k]);
        let mut worst: f64 = 0.0;
        let deg = self.poly.len().max(other.poly.len());
        for p in 0..deg {
            let d = self.poly_coeff(p) - other.poly_coeff(p);
            worst = comps.iter().fold(worst, |w, &k| w.max(d[k].norm()));
        }
        for hole in 0..self.principal.len().max(other.principal.len()) {
            let len = self.principal.get(hole).map_or(0, |p| p.coeffs.len())
                .max(other.principal.get(hole).map_or(0, |p| p.coeffs.len()));
            for p in 1..=len {
                let d = self.principal_coeff(hole, p) - other.principal_coeff(hole, p);
                worst = comps.iter().fold(worst, |w, &k| w.max(d[k].norm()));
            }
        }
        worst
    }

    fn check_domain(&self, domain: &PlanarDomain) -> Result<(), HoloError> {
        if self.principal.len() != domain.homology_rank() {
            return Err(HoloError::HoleCountMismatch { map: self.principal.len(), domain: domain.homology_rank() });
        }
        if self.center != domain.outer().center {
            return Err(HoloError::CenterMismatch { map: self.center, domain: domain.outer().center });
        }
        for (part, hole) in self.principal.iter().zip(domain.holes()) {
            if part.center != hole.center {
                return Err(HoloError::CenterMismatch { map: part.center, domain: hole.center });
            }
        }
        Ok(())
    }

    /// Periods of `f dz` around every homology loop.
    pub fn periods(&self, domain: &PlanarDomain, mode: PeriodMode) -> Result<PeriodVector, HoloError> {
        self.check_domain(domain)?;
        let l = domain.homology_rank();
        match mode {
            PeriodMode::Exact => {
                let mut entries = CMatrix::zeros(l, self.dim);
                for j in 0..l {
                    let res = self.residue(j);
                    for c in 0..self.dim {
                        entries[(j, c)] = res[c] * (2.0 * PI * I);
                    }
                }
                Ok(PeriodVector { entries, drift: None })
            }
            PeriodMode::Quadrature(count) => {
                let coarse = self.quadrature_periods(domain, count)?;
                let fine = self.quadrature_periods(domain, 2 * count)?;
                let drift = (&fine - &coarse).iter().map(|x| x.norm()).fold(0.0, f64::max);
                if drift > QUADRATURE_DRIFT_TOL {
                    log::warn!("quadrature periods with {count} nodes changed by {drift:.3e} when doubled");
                }
                Ok(PeriodVector { entries: coarse, drift: Some(drift) })
            }
        }
    }

    fn quadrature_periods(&self, domain: &PlanarDomain, count: usize) -> Result<CMatrix, HoloError> {
        let l = domain.homology_rank();
        let mut entries = CMatrix::zeros(l, self.dim);
        for j in 0..l {
            let nodes = domain.loop_nodes(j, count)?;
            for (&z, &w) in nodes.nodes.iter().zip(&nodes.weights) {
                let v = self.eval(z);
                for c in 0..self.dim {
                    entries[(j, c)] += w * v[c];
                }
            }
        }
        Ok(entries)
    }
}

impl std::ops::Add for &LaurentMap {
    type Output = LaurentMap;

    fn add(self, rhs: &LaurentMap) -> LaurentMap {
        assert_eq!(self.dim, rhs.dim);
        assert_eq!(self.principal.len(), rhs.principal.len());
        let mut out = self.clone();
        for p in 0..rhs.poly.len() {
            let a = out.poly_coeff(p) + &rhs.poly[p];
            out.set_poly(p, a);
        }
        for (hole, part) in rhs.principal.iter().enumerate() {
            for p in 1..=part.coeffs.len() {
                let b = out.principal_coeff(hole, p) + &part.coeffs[p - 1];
                out.set_principal(hole, p, b);
            }
        }
        out
    }
}

/// How periods are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeriodMode {
    /// From residues.
    Exact,
    /// Trapezoidal rule with the given node count per loop (compared against twice as many).
    Quadrature(usize),
}

/// Row `j` holds `\oint_{gamma_j} f dz`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodVector {
    pub entries: CMatrix,
    /// Largest change under node doubling (quadrature mode only).
    pub drift: Option<f64>,
}

impl PeriodVector {
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// Whether `f dz` is exact up to `tol`.
    pub fn is_exact(&self, tol: f64) -> bool {
        self.max_abs() < tol
    }

    /// First entry exceeding `tol` as `(loop, component, value)`.
    pub fn first_violation(&self, tol: f64) -> Option<(usize, usize, C64)> {
        let (l, n) = self.entries.shape();
        (0..l).flat_map(|j| (0..n).map(move |c| (j, c))).find_map(|(j, c)| {
            let v = self.entries[(j, c)];
            (v.norm() >= tol).then_some((j, c, v))
        })
    }
}

/// Diagnostics of a least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub max_residual: f64,
    pub rank: usize,
    pub coefficients: usize,
    pub samples: usize,
}

/// Least-squares Laurent fit of degree `degree` to `(z, value)` samples.
///
/// Basis functions are scaled to unit size on their own boundary circle,
/// `((z - c_0)/R_0)^p` and `(r_i/(z - c_i))^p`, and the system is solved by a
/// truncated SVD (cutoff `1e-12 sigma_max`).
pub fn fit_map(
    samples: &[(C64, CVector)],
    domain: &PlanarDomain,
    degree: usize,
) -> Result<(LaurentMap, FitReport), HoloError> {
    let dim = samples.first().map(|s| s.1.len()).ok_or(HoloError::Underdetermined {
        samples: 0,
        coefficients: degree + 1,
    })?;
    let holes = domain.holes();
    let n_coeffs = degree + 1 + holes.len() * degree;
    if samples.len() < n_coeffs {
        return Err(HoloError::Underdetermined { samples: samples.len(), coefficients: n_coeffs });
    }
    if let Some(bad) = samples.iter().find(|s| s.1.len() != dim) {
        return Err(HoloError::DimensionMismatch { expected: dim, got: bad.1.len() });
    }
    let outer = domain.outer();
    let mut a = CMatrix::zeros(samples.len(), n_coeffs);
    for (row, (z, _)) in samples.iter().enumerate() {
        let u = (z - outer.center) / outer.radius;
        let mut pw = C64::from(1.0);
        for p in 0..=degree {
            a[(row, p)] = pw;
            pw *= u;
        }
        for (i, h) in holes.iter().enumerate() {
            let v = h.radius / (z - h.center);
            let mut pw = v;
            for p in 1..=degree {
                a[(row, degree + 1 + i * degree + (p - 1))] = pw;
                pw *= v;
            }
        }
    }
    let pinv = Pseudoinverse::new(&a, FIT_SVD_CUTOFF);
    if pinv.rank() < n_coeffs {
        return Err(HoloError::RankDeficient { rank: pinv.rank(), coefficients: n_coeffs });
    }
    let mut sol = CMatrix::zeros(n_coeffs, dim);
    for c in 0..dim {
        let rhs = CVector::from_iterator(samples.len(), samples.iter().map(|s| s.1[c]));
        sol.set_column(c, &pinv.solve(&rhs));
    }
    let fitted = &a * &sol;
    let max_residual = samples
        .iter()
        .enumerate()
        .flat_map(|(r, s)| (0..dim).map(move |c| (r, c, s.1[c])))
        .map(|(r, c, v)| (fitted[(r, c)] - v).norm())
        .fold(0.0, f64::max);

    let mut map = LaurentMap::zeros(dim, domain);
    for p in 0..=degree {
        let scale = outer.radius.powi(-(p as i32));
        map.set_poly(p, sol.row(p).transpose() * C64::from(scale));
    }
    for (i, h) in holes.iter().enumerate() {
        for p in 1..=degree {
            let scale = h.radius.powi(p as i32);
            map.set_principal(i, p, sol.row(degree + 1 + i * degree + (p - 1)).transpose() * C64::from(scale));
        }
    }
    map.trim();
    Ok((map, FitReport { max_residual, rank: pinv.rank(), coefficients: n_coeffs, samples: samples.len() }))
}

/// Fit a function sampled on every boundary circle (`4 degree + 8` points each).
pub fn fit_function<F>(domain: &PlanarDomain, degree: usize, f: F) -> Result<(LaurentMap, FitReport), HoloError>
where
    F: Fn(C64) -> CVector + Sync,
{
    use rayon::prelude::*;
    let points = domain.boundary_points(4 * degree + 8);
    let samples: Vec<(C64, CVector)> = points.par_iter().map(|&z| (z, f(z))).collect();
    fit_map(&samples, domain, degree)
}

impl LaurentMap {
    /// Drop trailing coefficients that are exactly zero.
    fn trim(&mut self) {
        while self.poly.last().is_some_and(|a| a.iter().all(|x| *x == C64::from(0.0))) {
            self.poly.pop();
        }
        for part in &mut self.principal {
            while part.coeffs.last().is_some_and(|b| b.iter().all(|x| *x == C64::from(0.0))) {
                part.coeffs.pop();
            }
        }
    }
}

/// External JSON form of a [`LaurentMap`]; complex numbers are `[re, im]` pairs.
///
/// `poly[p]` is the coefficient vector of `(z - center)^p`; each principal entry
/// lists the coefficient vectors of `(z - c_hole)^{-1}, (z - c_hole)^{-2}, ...`.
/// Centers may be omitted when the map is read against a known domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaurentMapJson {
    pub n: usize,
    #[serde(rename = "D")]
    pub degree: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<C64>,
    #[serde(default)]
    pub poly: Vec<Vec<C64>>,
    #[serde(default)]
    pub principal: Vec<PrincipalJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrincipalJson {
    pub hole: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<C64>,
    pub coeffs: Vec<Vec<C64>>,
}

impl From<&LaurentMap> for LaurentMapJson {
    fn from(f: &LaurentMap) -> Self {
        let to_vecs = |cs: &[CVector]| cs.iter().map(|c| c.iter().copied().collect()).collect();
        Self {
            n: f.dim,
            degree: f.degree(),
            center: Some(f.center),
            poly: to_vecs(&f.poly),
            principal: f
                .principal
                .iter()
                .enumerate()
                .map(|(hole, p)| PrincipalJson { hole, center: Some(p.center), coeffs: to_vecs(&p.coeffs) })
                .collect(),
        }
    }
}

impl LaurentMapJson {
    /// Build the map. Missing centers are taken from `domain`; without a domain
    /// they are required (outer center defaults to the origin).
    pub fn into_map(self, domain: Option<&PlanarDomain>) -> Result<LaurentMap, HoloError> {
        let center = match (self.center, domain) {
            (Some(c), _) => c,
            (None, Some(d)) => d.outer().center,
            (None, None) => C64::from(0.0),
        };
        let holes = match domain {
            Some(d) => d.homology_rank(),
            None => self.principal.iter().map(|p| p.hole + 1).max().unwrap_or(0),
        };
        let mut centers = vec![None; holes];
        for p in &self.principal {
            if p.hole >= holes {
                return Err(HoloError::Invalid(format!("principal part for hole {} but only {holes} holes", p.hole)));
            }
            let c = p.center.or_else(|| domain.map(|d| d.holes()[p.hole].center));
            centers[p.hole] = Some(c.ok_or_else(|| HoloError::Invalid(format!("missing center for hole {}", p.hole)))?);
        }
        let centers: Vec<C64> = centers
            .into_iter()
            .enumerate()
            .map(|(i, c)| c.or_else(|| domain.map(|d| d.holes()[i].center)).unwrap_or(C64::from(0.0)))
            .collect();
        let mut map = LaurentMap::zeros_with_centers(self.n, center, &centers);
        let to_vec = |v: Vec<C64>| -> Result<CVector, HoloError> {
            if v.len() != self.n {
                return Err(HoloError::DimensionMismatch { expected: self.n, got: v.len() });
            }
            Ok(CVector::from_vec(v))
        };
        for (p, a) in self.poly.into_iter().enumerate() {
            map.set_poly(p, to_vec(a)?);
        }
        for part in self.principal {
            for (i, b) in part.coeffs.into_iter().enumerate() {
                map.set_principal(part.hole, i + 1, to_vec(b)?);
            }
        }
        Ok(map)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;

    fn v3(a: C64, b: C64, c: C64) -> CVector {
        CVector::from_vec(vec![a, b, c])
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn annulus() -> PlanarDomain {
        PlanarDomain::annulus(0.5, 2.0).unwrap()
    }

    #[test]
    fn eval_examples() {
        let d = annulus();
        let k = v3(c(1., 2.), c(-1., 0.), c(0., 3.));
        let f = LaurentMap::constant(&d, k.clone());
        assert_eq!(f.eval(c(0.7, -1.1)), k);

        let mut g = LaurentMap::zeros(3, &d);
        g.set_poly(1, v3(c(1., 0.), c(0., 0.), c(0., 0.)));
        g.set_principal(0, 1, v3(c(0., 0.), c(1., 0.), c(0., 0.)));
        assert!((g.eval(c(2., 0.)) - v3(c(2., 0.), c(0.5, 0.), c(0., 0.))).norm() < 1e-15);

        let cat = generators::catenoid(&d).unwrap();
        assert!((cat.eval(c(1., 0.)) - v3(c(0., 0.), I, c(1., 0.))).norm() < 1e-15);
    }

    #[test]
    fn eval_in_rejects_points_outside() {
        let d = annulus();
        let f = LaurentMap::constant(&d, v3(c(1., 0.), c(0., 0.), c(0., 0.)));
        assert!(matches!(f.eval_in(&d, c(0.1, 0.)), Err(HoloError::OutsideDomain { .. })));
        assert!(matches!(f.eval_in(&d, c(3.0, 0.)), Err(HoloError::OutsideDomain { .. })));
        assert!(f.eval_in(&d, c(1.0, 0.)).is_ok());
    }

    #[test]
    fn derivative_examples() {
        let d = annulus();
        let one = v3(c(1., 0.), c(0., 0.), c(0., 0.));
        let f = LaurentMap::constant(&d, one.clone());
        assert!(f.derivative().eval(c(1.3, 0.2)).norm() == 0.0);

        let mut sq = LaurentMap::zeros(3, &d);
        sq.set_poly(2, one.clone());
        let dsq = sq.derivative();
        assert_eq!(dsq.poly_coeff(1), &one * c(2., 0.));

        let mut inv = LaurentMap::zeros(3, &d);
        inv.set_principal(0, 1, one.clone());
        let dinv = inv.derivative();
        assert_eq!(dinv.principal_coeff(0, 2), &one * c(-1., 0.));
        assert_eq!(dinv.principal_coeff(0, 1), CVector::zeros(3));
    }

    #[test]
    fn antiderivative_examples() {
        let d = PlanarDomain::disc(1.0).unwrap();
        let f = generators::enneper(&d);
        let big_f = f.antiderivative().unwrap();
        let z = c(0.3, -0.4);
        let expected = v3(
            z / 2.0 - z * z * z / 6.0,
            I * (z / 2.0 + z * z * z / 6.0),
            z * z / 2.0,
        );
        assert!((big_f.eval(z) - expected).norm() < 1e-15);
        assert_eq!(big_f.derivative().max_coeff_diff(&f, None), 0.0);

        let zero = LaurentMap::zeros(3, &d);
        assert_eq!(zero.antiderivative().unwrap().eval(z), CVector::zeros(3));

        let a = annulus();
        let mut inv = LaurentMap::zeros(3, &a);
        inv.set_principal(0, 1, v3(c(1., 0.), c(0., 0.), c(0., 0.)));
        assert!(matches!(
            inv.antiderivative(),
            Err(HoloError::PeriodObstruction { hole: 0, component: 0, .. })
        ));
    }

    #[test]
    fn period_examples() {
        let d = annulus();
        let k = v3(c(1., 2.), c(-1., 0.), c(0., 3.));
        let f = LaurentMap::constant(&d, k.clone());
        assert!(f.periods(&d, PeriodMode::Exact).unwrap().max_abs() == 0.0);
        assert!(f.periods(&d, PeriodMode::Quadrature(256)).unwrap().max_abs() < 1e-13);

        let mut inv = LaurentMap::zeros(3, &d);
        inv.set_principal(0, 1, k.clone());
        let p = inv.periods(&d, PeriodMode::Quadrature(256)).unwrap();
        for comp in 0..3 {
            assert!((p.entries[(0, comp)] - k[comp] * 2.0 * PI * I).norm() < 1e-13);
        }

        let cat = generators::catenoid(&d).unwrap();
        let p = cat.periods(&d, PeriodMode::Exact).unwrap();
        assert!((p.entries[(0, 0)]).norm() < 1e-15);
        assert!((p.entries[(0, 1)]).norm() < 1e-15);
        assert!((p.entries[(0, 2)] - 2.0 * PI * I).norm() < 1e-15);
        let q = cat.periods(&d, PeriodMode::Quadrature(256)).unwrap();
        assert!((&q.entries - &p.entries).iter().all(|x| x.norm() < 1e-12));
        assert!(q.drift.unwrap() < 1e-12);
    }

    #[test]
    fn periods_check_domain_compatibility() {
        let d = annulus();
        let other = PlanarDomain::disc(2.0).unwrap();
        let f = LaurentMap::zeros(3, &d);
        assert!(matches!(
            f.periods(&other, PeriodMode::Exact),
            Err(HoloError::HoleCountMismatch { map: 1, domain: 0 })
        ));
    }

    #[test]
    fn fit_examples() {
        let d = annulus();
        let samples: Vec<(C64, CVector)> = (0..64)
            .map(|k| {
                let z = C64::from_polar(1.0, 2.0 * PI * k as f64 / 64.0);
                (z, CVector::from_vec(vec![z + 1.0 / z]))
            })
            .collect();
        let (f, report) = fit_map(&samples, &d, 2).unwrap();
        assert!(report.max_residual < 1e-13);
        assert!((f.poly_coeff(1)[0] - C64::from(1.0)).norm() < 1e-13);
        assert!((f.principal_coeff(0, 1)[0] - C64::from(1.0)).norm() < 1e-13);
        assert!(f.poly_coeff(0)[0].norm() < 1e-13);
        assert!(f.poly_coeff(2)[0].norm() < 1e-13);
        assert!(f.principal_coeff(0, 2)[0].norm() < 1e-13);

        let const_samples: Vec<(C64, CVector)> =
            samples.iter().map(|(z, _)| (*z, CVector::from_vec(vec![c(2.0, -1.0)]))).collect();
        let (g, _) = fit_map(&const_samples, &d, 2).unwrap();
        assert!((g.eval(c(1.7, 0.3))[0] - c(2.0, -1.0)).norm() < 1e-12);

        assert!(matches!(
            fit_map(&samples[..3], &d, 5),
            Err(HoloError::Underdetermined { samples: 3, coefficients: 11 })
        ));
    }

    #[test]
    fn fit_detects_rank_deficiency() {
        let d = annulus();
        // all samples at the same point
        let samples: Vec<(C64, CVector)> = (0..20).map(|_| (c(1.0, 0.0), CVector::from_vec(vec![c(1.0, 0.0)]))).collect();
        assert!(matches!(fit_map(&samples, &d, 3), Err(HoloError::RankDeficient { .. })));
    }

    #[test]
    fn json_round_trip_keeps_map() {
        let d = annulus();
        let cat = generators::catenoid(&d).unwrap();
        let text = serde_json::to_string(&LaurentMapJson::from(&cat)).unwrap();
        let back: LaurentMapJson = serde_json::from_str(&text).unwrap();
        assert_eq!(back.into_map(None).unwrap(), cat);
    }

    #[test]
    fn json_without_centers_uses_domain() {
        let d = PlanarDomain::new(
            crate::Disc::new(c(1.0, 0.0), 3.0).unwrap(),
            vec![crate::Disc::new(c(1.5, 0.5), 0.5).unwrap()],
        )
        .unwrap();
        let text = r#"{"n": 3, "D": 1, "poly": [[[1,0],[0,1],[0,0]]],
                       "principal": [{"hole": 0, "coeffs": [[[0,0],[0,0],[1,0]]]}]}"#;
        let parsed: LaurentMapJson = serde_json::from_str(text).unwrap();
        let f = parsed.into_map(Some(&d)).unwrap();
        assert_eq!(f.center(), c(1.0, 0.0));
        assert_eq!(f.principal_parts()[0].center, c(1.5, 0.5));
        let bad = r#"{"n": 3, "D": 0, "poly": [[[1,0],[0,1]]]}"#;
        let parsed: LaurentMapJson = serde_json::from_str(bad).unwrap();
        assert!(matches!(parsed.into_map(Some(&d)), Err(HoloError::DimensionMismatch { .. })));
    }
}
