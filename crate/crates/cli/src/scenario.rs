//! Scenario files: what to build, how to solve, what to certify, where to write.

use nullforge::curves::{MeshSettings, PerturbSettings};
use nullforge::generators;
use nullforge::holo::LaurentMapJson;
use nullforge::json::{DomainSpec, VarietySpec};
use nullforge::{ConeVariety, CVector, FamilySettings, LaurentMap, PlanarDomain, SolverSettings, C64};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::RunError;

/// A complete pipeline description. Unknown fields are schema errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub variety: VarietySpec,
    pub domain: DomainSpec,
    pub seed_map: SeedMap,
    #[serde(default)]
    pub base: Option<BaseSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub certify: CertifySpec,
    #[serde(default)]
    pub outputs: OutputSpec,
}

/// Seed derivative: a named generator or explicit Laurent coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SeedMap {
    Generator(String),
    Map(LaurentMapJson),
}

/// Normalization `F(point) = value` of the integrated curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseSpec {
    pub point: C64,
    pub value: Vec<C64>,
}

/// Family and Gauss-Newton settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    /// Field slots per loop; `None` means `3n`.
    pub slots: Option<usize>,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
    pub fixed_component: Option<usize>,
    pub trust_radius: f64,
    pub max_reseeds: usize,
    pub fit_degree: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let family = FamilySettings::default();
        let solver = SolverSettings::default();
        Self {
            slots: None,
            seed: 0,
            tol: solver.tol,
            max_iter: solver.max_iter,
            fixed_component: None,
            trust_radius: family.trust_radius,
            max_reseeds: family.max_reseeds,
            fit_degree: solver.fit_degree,
        }
    }
}

impl SolverSpec {
    pub fn family_settings(&self) -> FamilySettings {
        FamilySettings {
            slots: self.slots,
            seed: self.seed,
            fixed_component: self.fixed_component,
            trust_radius: self.trust_radius,
            max_reseeds: self.max_reseeds,
            ..FamilySettings::default()
        }
    }

    pub fn solver_settings(&self) -> SolverSettings {
        SolverSettings { tol: self.tol, max_iter: self.max_iter, fit_degree: self.fit_degree, ..SolverSettings::default() }
    }
}

/// Which certificates to compute. Absent sections are skipped, except
/// directedness, which is always checked.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifySpec {
    pub embedding: Option<EmbeddingSpec>,
    pub sl2: Option<Sl2Spec>,
    pub mesh: Option<MeshSpec>,
    pub growth: Option<GrowthSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingSpec {
    pub grid: usize,
    /// Diagonal margin; `None` means twice the lattice spacing.
    pub delta: Option<f64>,
    /// Smallest gap that counts as embedded on the grid.
    pub min_gap: f64,
    /// Random perturbation used when the gap of the corrected curve is too small.
    pub perturb: Option<PerturbSpec>,
}

impl Default for EmbeddingSpec {
    fn default() -> Self {
        Self { grid: 64, delta: None, min_gap: 1e-3, perturb: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbSpec {
    pub attempts: usize,
    pub c1_bound: f64,
}

impl Default for PerturbSpec {
    fn default() -> Self {
        let p = PerturbSettings::default();
        Self { attempts: p.attempts, c1_bound: p.c1_bound }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sl2Spec {
    pub grid: usize,
    pub det_tol: f64,
    pub null_tol: f64,
}

impl Default for Sl2Spec {
    fn default() -> Self {
        Self { grid: 32, det_tol: 1e-10, null_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSpec {
    pub n_theta: usize,
    pub inner: Option<f64>,
    pub outer: Option<f64>,
    /// Grids in the refinement study (`h, h/2, ...`).
    pub levels: usize,
    pub min_order: f64,
}

impl Default for MeshSpec {
    fn default() -> Self {
        let m = MeshSettings::default();
        Self { n_theta: 64, inner: m.inner, outer: m.outer, levels: 3, min_order: 1.8 }
    }
}

impl MeshSpec {
    pub fn settings(&self) -> MeshSettings {
        MeshSettings { n_theta: self.n_theta, inner: self.inner, outer: self.outer }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrowthSpec {
    /// Shell radii about the outer center; empty means eight evenly spaced shells.
    pub shells: Vec<f64>,
}

/// Artifact file names, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub curve: String,
    pub report: String,
    pub obj: String,
    pub summary: String,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            curve: "curve.json".into(),
            report: "report.csv".into(),
            obj: "surface.obj".into(),
            summary: "summary.json".into(),
        }
    }
}

/// The objects a scenario describes, validated.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub variety: ConeVariety,
    pub domain: PlanarDomain,
    pub seed_map: LaurentMap,
    pub base: (C64, CVector),
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, RunError> {
        serde_json::from_str(text).map_err(|e| RunError::Schema(e.to_string()))
    }

    /// Build variety, domain and seed map; every failure here is a schema error.
    pub fn resolve(&self) -> Result<Resolved, RunError> {
        let schema = |e: &dyn std::fmt::Display| RunError::Schema(e.to_string());
        let variety = self.variety.build().map_err(|e| schema(&e))?;
        let domain = self.domain.build().map_err(|e| schema(&e))?;
        let seed_map = match &self.seed_map {
            SeedMap::Generator(name) => generators::by_name(name, &domain).map_err(|e| schema(&e))?,
            SeedMap::Map(json) => json.clone().into_map(Some(&domain)).map_err(|e| schema(&e))?,
        };
        let n = variety.dim();
        if seed_map.dim() != n {
            return Err(RunError::Schema(format!("seed map has dimension {} but the variety lives in C^{n}", seed_map.dim())));
        }
        let base = match &self.base {
            Some(b) => {
                if b.value.len() != n {
                    return Err(RunError::Schema(format!("base value has {} entries, expected {n}", b.value.len())));
                }
                if !domain.contains(b.point) {
                    return Err(RunError::Schema(format!("base point {} is outside the domain", b.point)));
                }
                (b.point, CVector::from_vec(b.value.clone()))
            }
            None => (default_base_point(&domain), CVector::zeros(n)),
        };
        Ok(Resolved { variety, domain, seed_map, base })
    }

    /// SHA-256 of the canonical JSON of the effective scenario (after overrides).
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("scenario serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// A point on the middle circle of the outer disc: the first loop circle if
/// there are holes, otherwise half the outer radius.
fn default_base_point(domain: &PlanarDomain) -> C64 {
    match domain.loop_radius(0) {
        Ok(s) => domain.holes()[0].center + s,
        Err(_) => domain.outer().center + domain.outer().radius * 0.5,
    }
}
