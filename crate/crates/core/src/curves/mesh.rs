//! Real minimal surfaces `X = Re F` sampled on a polar grid.
//!
//! The grid is uniform in `w = rho + i theta` with `z = c_0 + e^w`. Since `z -> w`
//! is conformal, `X` is still a conformal harmonic map in `(rho, theta)` when `F` is
//! a null curve, and both properties are checked by central differences:
//!
//! - conformality: `|X_rho|^2 - |X_theta|^2` and `X_rho . X_theta` vanish,
//! - harmonicity: the 5-point Laplacian of `X` vanishes.
//!
//! The outermost rings are excluded because the stencils need both neighbours.
//! `theta` is periodic, so no column is excluded.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use super::{CurveError, DirectedCurve};
use crate::domain::PlanarDomain;
use crate::holo::LaurentMap;
use crate::C64;

/// Discs get a central hole of this fraction of the outer radius (the polar grid
/// is singular at the center).
const DISC_INNER_FRACTION: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshSettings {
    /// Angular resolution; the angular step is `2 pi / n_theta`.
    pub n_theta: usize,
    /// Radial extent about the outer center; defaults to the largest annulus
    /// about it that avoids every hole.
    pub inner: Option<f64>,
    pub outer: Option<f64>,
}

impl Default for MeshSettings {
    fn default() -> Self {
        Self { n_theta: 128, inner: None, outer: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Layout {
    center: C64,
    rho_min: f64,
    n_rho: usize,
    n_theta: usize,
    h_rho: f64,
    h_theta: f64,
}

impl Layout {
    fn point(&self, j: usize, k: usize) -> C64 {
        let w = C64::new(self.rho_min + self.h_rho * j as f64, self.h_theta * k as f64);
        self.center + w.exp()
    }

    fn refined(&self, factor: usize) -> Self {
        Self {
            n_rho: (self.n_rho - 1) * factor + 1,
            n_theta: self.n_theta * factor,
            h_rho: self.h_rho / factor as f64,
            h_theta: self.h_theta / factor as f64,
            ..*self
        }
    }
}

fn layout(domain: &PlanarDomain, settings: &MeshSettings) -> Result<Layout, CurveError> {
    if settings.n_theta < 8 {
        return Err(CurveError::InvalidSettings(format!("n_theta must be at least 8, got {}", settings.n_theta)));
    }
    let outer = domain.outer();
    let clear_inner = domain
        .holes()
        .iter()
        .map(|h| (h.center - outer.center).norm() + h.radius)
        .fold(if domain.holes().is_empty() { DISC_INNER_FRACTION * outer.radius } else { 0.0 }, f64::max);
    let r_min = settings.inner.unwrap_or(clear_inner);
    let r_max = settings.outer.unwrap_or(outer.radius);
    if !(r_min > 0.0 && r_min < r_max) {
        return Err(CurveError::GridLeavesDomain(format!(
            "no polar annulus about the outer center fits the domain (radii {r_min} .. {r_max})"
        )));
    }
    let h_theta = 2.0 * PI / settings.n_theta as f64;
    let span = (r_max / r_min).ln();
    let n_rho = ((span / h_theta).round() as usize + 1).max(3);
    let lay = Layout {
        center: outer.center,
        rho_min: r_min.ln(),
        n_rho,
        n_theta: settings.n_theta,
        h_rho: span / (n_rho - 1) as f64,
        h_theta,
    };
    for j in [0, n_rho - 1] {
        for k in 0..lay.n_theta {
            let z = lay.point(j, k);
            if !domain.contains(z) {
                return Err(CurveError::GridLeavesDomain(format!("polar grid point {z} is outside the domain")));
            }
        }
    }
    Ok(lay)
}

/// Vertices `Re F` on the polar grid with per-vertex residuals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceMesh {
    pub n_rho: usize,
    pub n_theta: usize,
    pub h_rho: f64,
    pub h_theta: f64,
    pub vertices: Vec<[f64; 3]>,
    /// Quads as 0-based vertex indices, counterclockwise in `(rho, theta)`.
    pub faces: Vec<[usize; 4]>,
    /// `max(| |X_rho|^2 - |X_theta|^2 |, |X_rho . X_theta|)`; `None` on the boundary rings.
    pub conformality: Vec<Option<f64>>,
    /// `|Delta_h X|`; `None` on the boundary rings.
    pub harmonicity: Vec<Option<f64>>,
    pub max_conformality: f64,
    pub max_harmonicity: f64,
    /// `max_conformality / max |X_rho|^2`.
    pub relative_conformality: f64,
    /// Set when the relative conformality residual exceeds the truncation budget
    /// `10 h^2` of the stencil.
    pub flagged: bool,
}

impl SurfaceMesh {
    /// Wavefront OBJ text: `v x y z` lines then 1-based `f i j k l` quads.
    pub fn to_obj(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            let _ = writeln!(out, "v {} {} {}", v[0], v[1], v[2]);
        }
        for f in &self.faces {
            let _ = writeln!(out, "f {} {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1, f[3] + 1);
        }
        out
    }
}

fn real_part(primitive: &LaurentMap, z: C64) -> [f64; 3] {
    let v = primitive.eval(z);
    [v[0].re, v[1].re, v[2].re]
}

fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// `(conformality, harmonicity, |X_rho|^2)` at interior vertex `(j, k)` of a grid
/// whose vertex values are `x`.
fn residual_at(lay: &Layout, x: &[[f64; 3]], j: usize, k: usize) -> (f64, f64, f64) {
    let idx = |j: usize, k: usize| j * lay.n_theta + (k % lay.n_theta);
    let kp = k + 1;
    let km = k + lay.n_theta - 1;
    let c = &x[idx(j, k)];
    let (up, down) = (&x[idx(j + 1, k)], &x[idx(j - 1, k)]);
    let (right, left) = (&x[idx(j, kp)], &x[idx(j, km)]);
    let xu = sub(up, down).map(|t| t / (2.0 * lay.h_rho));
    let xv = sub(right, left).map(|t| t / (2.0 * lay.h_theta));
    let conf = (dot(&xu, &xu) - dot(&xv, &xv)).abs().max(dot(&xu, &xv).abs());
    let lap: [f64; 3] = std::array::from_fn(|i| {
        (up[i] - 2.0 * c[i] + down[i]) / (lay.h_rho * lay.h_rho)
            + (right[i] - 2.0 * c[i] + left[i]) / (lay.h_theta * lay.h_theta)
    });
    (conf, dot(&lap, &lap).sqrt(), dot(&xu, &xu))
}

fn sample(primitive: &LaurentMap, lay: &Layout) -> Vec<[f64; 3]> {
    (0..lay.n_rho * lay.n_theta)
        .into_par_iter()
        .map(|i| real_part(primitive, lay.point(i / lay.n_theta, i % lay.n_theta)))
        .collect()
}

/// Mesh of `Re F` for a directed curve in `C^3`.
pub fn minimal_surface_mesh(curve: &DirectedCurve, settings: &MeshSettings) -> Result<SurfaceMesh, CurveError> {
    if curve.variety().dim() != 3 {
        return Err(CurveError::DimensionMismatch { expected: 3, got: curve.variety().dim() });
    }
    mesh_of(curve.primitive(), curve.domain(), settings)
}

/// Mesh of `Re F` for an arbitrary `C^3`-valued map; used to flag non-null data.
pub fn mesh_of(primitive: &LaurentMap, domain: &PlanarDomain, settings: &MeshSettings) -> Result<SurfaceMesh, CurveError> {
    if primitive.dim() != 3 {
        return Err(CurveError::DimensionMismatch { expected: 3, got: primitive.dim() });
    }
    let lay = layout(domain, settings)?;
    let vertices = sample(primitive, &lay);
    let total = lay.n_rho * lay.n_theta;
    let mut conformality = vec![None; total];
    let mut harmonicity = vec![None; total];
    let (mut max_c, mut max_h, mut max_speed) = (0.0f64, 0.0f64, 0.0f64);
    for j in 1..lay.n_rho - 1 {
        for k in 0..lay.n_theta {
            let (c, h, speed) = residual_at(&lay, &vertices, j, k);
            conformality[j * lay.n_theta + k] = Some(c);
            harmonicity[j * lay.n_theta + k] = Some(h);
            max_c = max_c.max(c);
            max_h = max_h.max(h);
            max_speed = max_speed.max(speed);
        }
    }
    let mut faces = Vec::with_capacity((lay.n_rho - 1) * lay.n_theta);
    for j in 0..lay.n_rho - 1 {
        for k in 0..lay.n_theta {
            let k1 = (k + 1) % lay.n_theta;
            faces.push([j * lay.n_theta + k, (j + 1) * lay.n_theta + k, (j + 1) * lay.n_theta + k1, j * lay.n_theta + k1]);
        }
    }
    let relative = if max_speed > 0.0 { max_c / max_speed } else { max_c };
    let h = lay.h_rho.max(lay.h_theta);
    Ok(SurfaceMesh {
        n_rho: lay.n_rho,
        n_theta: lay.n_theta,
        h_rho: lay.h_rho,
        h_theta: lay.h_theta,
        vertices,
        faces,
        conformality,
        harmonicity,
        max_conformality: max_c,
        max_harmonicity: max_h,
        relative_conformality: relative,
        flagged: relative > 10.0 * h * h,
    })
}

/// One level of a refinement study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceLevel {
    pub h_theta: f64,
    pub conformality: f64,
    pub harmonicity: f64,
    /// `log2(previous / current)`, from the second level on.
    pub conformality_order: Option<f64>,
    pub harmonicity_order: Option<f64>,
}

/// Residuals under `h -> h/2 -> ...` (`levels` grids). All levels are evaluated
/// at the interior vertices of the coarsest grid, which every finer grid contains,
/// so the measured orders compare like with like.
pub fn mesh_convergence(
    curve: &DirectedCurve,
    settings: &MeshSettings,
    levels: usize,
) -> Result<Vec<ConvergenceLevel>, CurveError> {
    if curve.variety().dim() != 3 {
        return Err(CurveError::DimensionMismatch { expected: 3, got: curve.variety().dim() });
    }
    let coarse = layout(curve.domain(), settings)?;
    let mut out: Vec<ConvergenceLevel> = Vec::with_capacity(levels);
    for level in 0..levels {
        let factor = 1usize << level;
        let lay = coarse.refined(factor);
        let x = sample(curve.primitive(), &lay);
        let (mut max_c, mut max_h) = (0.0f64, 0.0f64);
        for j in 1..coarse.n_rho - 1 {
            for k in 0..coarse.n_theta {
                let (c, h, _) = residual_at(&lay, &x, j * factor, k * factor);
                max_c = max_c.max(c);
                max_h = max_h.max(h);
            }
        }
        let order = |prev: f64, cur: f64| (prev / cur).log2();
        let (co, ho) = match out.last() {
            Some(p) => (Some(order(p.conformality, max_c)), Some(order(p.harmonicity, max_h))),
            None => (None, None),
        };
        out.push(ConvergenceLevel {
            h_theta: lay.h_theta,
            conformality: max_c,
            harmonicity: max_h,
            conformality_order: co,
            harmonicity_order: ho,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::ConeVariety;
    use crate::curves::integrate_curve;
    use crate::generators;
    use crate::CVector;

    fn curve(f: &LaurentMap, d: &PlanarDomain) -> DirectedCurve {
        integrate_curve(f, d, &ConeVariety::null3(), (C64::from(1.0), CVector::zeros(3))).unwrap()
    }

    #[test]
    fn straight_line_mesh_is_planar_with_quadratic_residuals() {
        let d = PlanarDomain::annulus(0.5, 2.0).unwrap();
        let c = curve(&generators::line(&d), &d);
        let mesh = minimal_surface_mesh(&c, &MeshSettings::default()).unwrap();
        assert!(mesh.vertices.iter().all(|v| v[2] == 0.0));
        // X = (x, -y, 0) - (1, 0, 0): check a vertex against the closed form
        let z = C64::from_polar(0.5, 0.0);
        assert!((mesh.vertices[0][0] - (z.re - 1.0)).abs() < 1e-15);
        // oracle for the log-polar stencil on e^rho cos(theta):
        // |X_rho|^2 - |X_theta|^2 = e^{2 rho} (sinh^2 h - sin^2 h) / h^2 with h_rho ~ h_theta
        let h = mesh.h_theta;
        let bound = 4.0 * 4.0 * ((h.sinh() / h).powi(2) - (h.sin() / h).powi(2)) + 1e-12;
        assert!(mesh.max_conformality < bound, "{} vs {}", mesh.max_conformality, bound);
        assert!(!mesh.flagged);
    }

    #[test]
    fn enneper_converges_at_second_order() {
        let d = PlanarDomain::annulus(0.5, 1.5).unwrap();
        let c = curve(&generators::enneper(&d), &d);
        let study = mesh_convergence(&c, &MeshSettings { n_theta: 64, ..Default::default() }, 3).unwrap();
        for level in &study[1..] {
            assert!(level.conformality_order.unwrap() > 1.8, "{study:?}");
            assert!(level.harmonicity_order.unwrap() > 1.8, "{study:?}");
        }
    }

    #[test]
    fn non_null_data_is_flagged() {
        let d = PlanarDomain::annulus(0.5, 1.5).unwrap();
        let mut f = generators::enneper(&d);
        f.set_poly(1, CVector::from_vec(vec![C64::from(0.3), C64::from(0.0), C64::from(1.0)]));
        let mesh = mesh_of(&f.antiderivative().unwrap(), &d, &MeshSettings::default()).unwrap();
        assert!(mesh.flagged);
    }

    #[test]
    fn obj_layout() {
        let d = PlanarDomain::annulus(0.5, 1.5).unwrap();
        let c = curve(&generators::enneper(&d), &d);
        let mesh = minimal_surface_mesh(&c, &MeshSettings { n_theta: 16, ..Default::default() }).unwrap();
        let obj = mesh.to_obj();
        assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), mesh.n_rho * 16);
        assert_eq!(obj.lines().filter(|l| l.starts_with("f ")).count(), (mesh.n_rho - 1) * 16);
        assert!(obj.lines().any(|l| l == "f 1 17 18 2"));
        assert!(mesh.conformality[0].is_none() && mesh.conformality[16].is_some());
    }

    #[test]
    fn grid_outside_domain_is_rejected() {
        let d = PlanarDomain::annulus(0.5, 1.5).unwrap();
        let c = curve(&generators::enneper(&d), &d);
        let bad = MeshSettings { outer: Some(3.0), ..Default::default() };
        assert!(matches!(minimal_surface_mesh(&c, &bad), Err(CurveError::GridLeavesDomain(_))));
    }
}
