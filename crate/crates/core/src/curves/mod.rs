//! Directed curves `F = \int f dz` and their certification.
//!
//! A [`DirectedCurve`] is only constructed from period-free, cone-valued,
//! nonvanishing derivative data. The submodules certify further properties on
//! samples: self-intersection gaps ([`embedding`]), the image in `SL_2(C)`
//! ([`sl2`]), the real minimal surface ([`mesh`]) and growth along shells
//! ([`growth`]).

pub mod embedding;
pub mod growth;
pub mod mesh;
pub mod sl2;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::cone::ConeVariety;
use crate::domain::{PlanarDomain, DEFAULT_LOOP_NODES};
use crate::holo::{HoloError, LaurentMap, LaurentMapJson, PeriodMode};
use crate::json::DomainSpec;
use crate::periods::PeriodError;
use crate::{CVector, C64};

pub use embedding::{embedding_gap, perturb_to_embedding, EmbeddingGap, PerturbOutcome, PerturbSettings};
pub use growth::{growth_profile, GrowthRow};
pub use mesh::{mesh_convergence, minimal_surface_mesh, ConvergenceLevel, MeshSettings, SurfaceMesh};
pub use sl2::{sl2_map, to_sl2, Sl2Curve};

/// Largest period entry accepted for integration.
pub const PERIOD_TOL: f64 = 1e-9;
/// Largest scaled cone residual accepted on certification nodes.
pub const DIRECTEDNESS_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurveError {
    #[error("nonzero period {value} around hole {hole}, component {component}")]
    Period { hole: usize, component: usize, value: C64 },
    #[error("derivative leaves the cone at z = {z}: scaled residual {residual:.3e}")]
    NotOnCone { z: C64, residual: f64 },
    #[error("derivative vanishes at z = {z} (|f| = {norm:.3e}); not an immersion")]
    NotImmersion { z: C64, norm: f64 },
    #[error("point {z} is outside the domain")]
    OutsideDomain { z: C64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no admissible pairs at diagonal margin {delta} on a {grid}x{grid} grid")]
    NoAdmissiblePairs { delta: f64, grid: usize },
    #[error("z_3 = 0 locus intersects the domain: |F_3({z})| = {value:.3e}")]
    ThirdComponentVanishes { z: C64, value: f64 },
    #[error("operation requires the null quadric in C^3")]
    RequiresNull3,
    #[error("{0}")]
    GridLeavesDomain(String),
    #[error("shell of radius {radius} is not contained in the domain")]
    ShellOutside { radius: f64 },
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
    #[error(transparent)]
    Holo(#[from] HoloError),
    #[error(transparent)]
    Family(#[from] PeriodError),
}

/// Pointwise diagnostics recorded at construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveDiagnostics {
    /// Largest `|P(f)| / (1 + |f|^2)` over the certification nodes.
    pub membership_residual: f64,
    /// Smallest `|f|` over the certification nodes.
    pub immersion_margin: f64,
    /// Largest period entry of `f`.
    pub period_residual: f64,
}

/// A directed holomorphic immersion `F` with `F' = f`.
#[derive(Debug, Clone)]
pub struct DirectedCurve {
    f: LaurentMap,
    big_f: LaurentMap,
    base_point: C64,
    base_value: CVector,
    domain: PlanarDomain,
    variety: ConeVariety,
    diagnostics: CurveDiagnostics,
}

impl DirectedCurve {
    /// Derivative data `f`.
    pub fn derivative(&self) -> &LaurentMap {
        &self.f
    }

    /// The curve `F` itself.
    pub fn primitive(&self) -> &LaurentMap {
        &self.big_f
    }

    pub fn base(&self) -> (C64, &CVector) {
        (self.base_point, &self.base_value)
    }

    pub fn domain(&self) -> &PlanarDomain {
        &self.domain
    }

    pub fn variety(&self) -> &ConeVariety {
        &self.variety
    }

    pub fn diagnostics(&self) -> &CurveDiagnostics {
        &self.diagnostics
    }

    pub fn eval(&self, z: C64) -> CVector {
        self.big_f.eval(z)
    }

    /// The same curve moved by the constant vector `w`.
    pub fn translated(&self, w: &CVector) -> Self {
        let mut out = self.clone();
        out.big_f = self.big_f.translated(w);
        out.base_value = &self.base_value + w;
        out
    }

    /// JSON export: coefficients of `f` and `F`, the base point and diagnostics.
    pub fn to_json(&self) -> CurveJson {
        CurveJson {
            n: self.f.dim(),
            domain: DomainSpec::from(&self.domain),
            f: LaurentMapJson::from(&self.f),
            primitive: LaurentMapJson::from(&self.big_f),
            base_point: self.base_point,
            base_value: self.base_value.iter().copied().collect(),
            diagnostics: self.diagnostics,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveJson {
    pub n: usize,
    pub domain: DomainSpec,
    pub f: LaurentMapJson,
    #[serde(rename = "F")]
    pub primitive: LaurentMapJson,
    pub base_point: C64,
    pub base_value: Vec<C64>,
    pub diagnostics: CurveDiagnostics,
}

/// Integrate `f` to the curve with `F(p) = value`.
///
/// Requires periods below [`PERIOD_TOL`], cone membership on the certification
/// nodes and `f != 0` there. The residue terms left by a numerical refit (of the
/// order of the period residual) are dropped.
pub fn integrate_curve(
    f: &LaurentMap,
    domain: &PlanarDomain,
    variety: &ConeVariety,
    base: (C64, CVector),
) -> Result<DirectedCurve, CurveError> {
    let n = variety.dim();
    if f.dim() != n {
        return Err(CurveError::DimensionMismatch { expected: n, got: f.dim() });
    }
    if base.1.len() != n {
        return Err(CurveError::DimensionMismatch { expected: n, got: base.1.len() });
    }
    if !domain.contains(base.0) {
        return Err(CurveError::OutsideDomain { z: base.0 });
    }
    let periods = f.periods(domain, PeriodMode::Exact)?;
    if let Some((hole, component, value)) = periods.first_violation(PERIOD_TOL) {
        return Err(CurveError::Period { hole, component, value });
    }
    let report = directedness_of(f, domain, variety, DEFAULT_LOOP_NODES);
    if report.max_scaled_residual > DIRECTEDNESS_TOL {
        return Err(CurveError::NotOnCone { z: report.worst_node, residual: report.max_scaled_residual });
    }
    if !(report.min_norm > 1e-12 * report.max_norm) {
        return Err(CurveError::NotImmersion { z: report.min_node, norm: report.min_norm });
    }
    let primitive = f.antiderivative_dropping_residues();
    let shift = &base.1 - primitive.eval(base.0);
    Ok(DirectedCurve {
        f: f.clone(),
        big_f: primitive.translated(&shift),
        base_point: base.0,
        base_value: base.1,
        domain: domain.clone(),
        variety: variety.clone(),
        diagnostics: CurveDiagnostics {
            membership_residual: report.max_scaled_residual,
            immersion_margin: report.min_norm,
            period_residual: periods.max_abs(),
        },
    })
}

/// Outcome of a directedness sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DirectednessReport {
    /// Largest `|P(f(z))|`.
    pub max_residual: f64,
    /// Largest `|P(f(z))| / (1 + |f(z)|^2)`; this is what the pass test uses.
    pub max_scaled_residual: f64,
    pub worst_node: C64,
    pub min_norm: f64,
    pub min_node: C64,
    pub max_norm: f64,
    pub samples: usize,
    pub passed: bool,
}

/// Directedness of a constructed curve: cone residual and immersion margin of
/// `f` over `count` points on every boundary and loop circle plus an interior lattice.
pub fn directedness_report(curve: &DirectedCurve, count: usize) -> DirectednessReport {
    directedness_of(&curve.f, &curve.domain, &curve.variety, count)
}

/// [`directedness_report`] for raw derivative data (no curve needed).
pub fn directedness_of(f: &LaurentMap, domain: &PlanarDomain, variety: &ConeVariety, count: usize) -> DirectednessReport {
    let mut nodes = domain.certification_nodes(count.max(1));
    // odd lattice size so that the outer center is sampled
    let lattice = ((count as f64).sqrt().ceil() as usize).max(4) | 1;
    nodes.extend(domain.grid_points(lattice).0);
    let per_node: Vec<(f64, f64, f64)> = nodes
        .par_iter()
        .map(|&z| {
            let v = f.eval(z);
            let p = variety.membership_residual(&v).norm();
            let norm = v.norm();
            (p, p / (1.0 + norm * norm), norm)
        })
        .collect();
    let mut report = DirectednessReport {
        max_residual: 0.0,
        max_scaled_residual: 0.0,
        worst_node: nodes[0],
        min_norm: f64::INFINITY,
        min_node: nodes[0],
        max_norm: 0.0,
        samples: nodes.len(),
        passed: false,
    };
    for (&z, &(p, scaled, norm)) in nodes.iter().zip(&per_node) {
        report.max_residual = report.max_residual.max(p);
        if scaled > report.max_scaled_residual || scaled.is_nan() {
            report.max_scaled_residual = scaled;
            report.worst_node = z;
        }
        if norm < report.min_norm {
            report.min_norm = norm;
            report.min_node = z;
        }
        report.max_norm = report.max_norm.max(norm);
    }
    report.passed = report.max_scaled_residual < DIRECTEDNESS_TOL && report.min_norm > 1e-12 * report.max_norm;
    report
}
