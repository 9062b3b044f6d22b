//! Period correction by compositions of flows.
//!
//! Given `f: M -> A \ {0}`, the deformation family is
//!
//! ```text
//! Psi(zeta, z) = phi^{1}_{zeta_1 g_1(z)} o ... o phi^{L}_{zeta_L g_L(z)} (f(z))
//! ```
//!
//! where slot `q = (i, k)` pairs a holomorphic multiplier `g_q` attached to loop `i`
//! with a tangential field `V_{j,k}`, and `phi^q_t` is that field's flow. Every
//! `Psi(zeta, .)` takes values in `A \ {0}`. The period map
//! `zeta -> (\oint_{gamma_j} Psi(zeta, .) dz)_j` is holomorphic, and at `zeta = 0`
//! its derivative in `zeta_q` is `\oint_{gamma_j} g_q V_q(f) dz`. When this
//! differential is surjective the periods can be driven to zero by Newton's method;
//! the corrected `Psi(zeta*, .)` is then refitted as a Laurent map.
//!
//! Multipliers are `g = sum_{|p| <= P} a_p u^p` with `u = (z - c_i)/s_i` (hole center,
//! loop radius). The `a_p` are seeded complex normals damped by `kappa^{|p|}`,
//! `kappa = r_i/s_i`, so that no power dominates on the circles bounding the loop's
//! collar; `g` is then normalized to unit sup on loop `i`.
//! The mix of powers lets `\oint g f dz` reach several Laurent coefficients of `f`,
//! which is what makes the period differential surjective.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::cone::{ConeError, ConeVariety, FieldPair, MEMBERSHIP_TOL};
use crate::domain::{DomainError, LoopNodes, PlanarDomain, DEFAULT_LOOP_NODES};
use crate::holo::{fit_function, HoloError, LaurentMap, PeriodMode, DEFAULT_FIT_DEGREE};
use crate::linalg::{numerical_rank, singular_values, Pseudoinverse};
use crate::{CMatrix, CVector, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PeriodError {
    #[error("seed map is not on the cone at z = {z}: scaled residual {residual:.3e}")]
    NotOnCone { z: C64, residual: f64 },
    #[error("degenerate: period differential rank {rank} < required {required}")]
    Degenerate { rank: usize, required: usize },
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
    #[error("parameter vector has length {got}, expected {expected}")]
    ParameterLength { expected: usize, got: usize },
    #[error("trust radius exceeded: |zeta|_inf = {norm:.3e} > {radius}")]
    TrustRegion { norm: f64, radius: f64 },
    #[error("point {z} is outside the domain")]
    OutsideDomain { z: C64 },
    #[error("no convergence after {iterations} iterations (period residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("fixed component {component} has nonzero period {value} around loop {loop_index}")]
    FixedComponentPeriod { component: usize, loop_index: usize, value: C64 },
    #[error("refit residual {residual:.3e} exceeds {tol:.1e}")]
    RefitResidual { residual: f64, tol: f64 },
    #[error("corrected map leaves the cone: scaled residual {residual:.3e}")]
    MembershipLost { residual: f64 },
    #[error("analytic period Jacobian disagrees with finite differences (relative error {relative_error:.3e})")]
    JacobianMismatch { relative_error: f64 },
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Holo(#[from] HoloError),
}

/// Construction settings for [`build_family`].
#[derive(Debug, Clone, PartialEq)]
pub struct FamilySettings {
    /// Field slots per loop (`m >= n`); `None` means `3n`.
    pub slots: Option<usize>,
    pub seed: u64,
    /// Component whose values must stay unchanged.
    pub fixed_component: Option<usize>,
    /// Quadrature nodes per loop.
    pub nodes: usize,
    /// Singular-value threshold for the rank check, relative to
    /// `max_j 2 pi s_j sup_{gamma_j} |f|`.
    pub rank_tol: f64,
    /// Fresh multiplier draws allowed after a failed rank check.
    pub max_reseeds: usize,
    /// Bound on `max_q |zeta_q|`.
    pub trust_radius: f64,
}

impl Default for FamilySettings {
    fn default() -> Self {
        Self {
            slots: None,
            seed: 0,
            fixed_component: None,
            nodes: DEFAULT_LOOP_NODES,
            rank_tol: 1e-8,
            max_reseeds: 8,
            trust_radius: 1.0,
        }
    }
}

/// Gauss-Newton settings for [`correct_periods`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    /// Target for the Euclidean norm of all periods.
    pub tol: f64,
    pub max_iter: usize,
    /// Relative cutoff of the pseudoinverse used for steps.
    pub pinv_cutoff: f64,
    /// Degree of the Laurent refit of the corrected map.
    pub fit_degree: usize,
    /// Allowed refit residual, relative to `max(1, sup |Psi|)`.
    pub fit_tol: f64,
    /// Iterations continue until the residual drops below `tol * polish`
    /// or stops decreasing.
    pub polish: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 50, pinv_cutoff: 1e-10, fit_degree: DEFAULT_FIT_DEGREE, fit_tol: 1e-8, polish: 1e-3 }
    }
}

/// Holomorphic time multiplier `sum_p c_p ((z - center)/scale)^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct Multiplier {
    pub center: C64,
    pub scale: f64,
    pub terms: Vec<(i32, C64)>,
}

impl Multiplier {
    pub fn eval(&self, z: C64) -> C64 {
        let u = (z - self.center) / self.scale;
        self.terms.iter().map(|&(p, c)| c * u.powi(p)).sum()
    }

    /// The identically zero multiplier.
    pub fn zero(center: C64, scale: f64) -> Self {
        Self { center, scale, terms: Vec::new() }
    }
}

/// One flow in the composition: loop it steers, field it follows, time multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct Slot {
    pub loop_index: usize,
    pub pair: FieldPair,
    pub multiplier: Multiplier,
}

/// The flow-composition family `Psi(zeta, z)` around a base map.
#[derive(Debug, Clone)]
pub struct DeformationFamily {
    base: LaurentMap,
    variety: ConeVariety,
    domain: PlanarDomain,
    loops: Vec<LoopNodes>,
    base_on_loops: Vec<Vec<CVector>>,
    slots_per_loop: usize,
    slots: Vec<Slot>,
    fixed_component: Option<usize>,
    trust_radius: f64,
    reseeds: usize,
    rank: usize,
}

impl DeformationFamily {
    pub fn base(&self) -> &LaurentMap {
        &self.base
    }

    pub fn variety(&self) -> &ConeVariety {
        &self.variety
    }

    pub fn domain(&self) -> &PlanarDomain {
        &self.domain
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn slots_per_loop(&self) -> usize {
        self.slots_per_loop
    }

    /// Length `l m` of the parameter vector; slot `(i, k)` has index `i m + k`.
    pub fn parameter_len(&self) -> usize {
        self.slots.len()
    }

    pub fn fixed_component(&self) -> Option<usize> {
        self.fixed_component
    }

    pub fn trust_radius(&self) -> f64 {
        self.trust_radius
    }

    /// Number of fresh multiplier draws needed to reach full rank.
    pub fn reseeds(&self) -> usize {
        self.reseeds
    }

    /// Numerical rank of the period differential at `zeta = 0`.
    pub fn jacobian_rank(&self) -> usize {
        self.rank
    }

    /// Rank needed for surjectivity onto the correctable periods.
    pub fn required_rank(&self) -> usize {
        let per_loop = self.variety.dim() - usize::from(self.fixed_component.is_some());
        self.domain.homology_rank() * per_loop
    }

    /// Replace the multiplier of one slot (and reset nothing else).
    pub fn set_multiplier(&mut self, slot: usize, multiplier: Multiplier) {
        self.slots[slot].multiplier = multiplier;
    }

    fn check_zeta(&self, zeta: &CVector) -> Result<(), PeriodError> {
        if zeta.len() != self.slots.len() {
            return Err(PeriodError::ParameterLength { expected: self.slots.len(), got: zeta.len() });
        }
        let norm = max_norm(zeta);
        if norm > self.trust_radius * (1.0 + 1e-12) {
            return Err(PeriodError::TrustRegion { norm, radius: self.trust_radius });
        }
        Ok(())
    }

    /// `Psi(zeta, z)`, flows applied innermost-last-slot first.
    pub fn evaluate(&self, zeta: &CVector, z: C64) -> Result<CVector, PeriodError> {
        self.check_zeta(zeta)?;
        if !self.domain.contains(z) {
            return Err(PeriodError::OutsideDomain { z });
        }
        Ok(self.evaluate_at(zeta, z, self.base.eval(z)))
    }

    /// `Psi(zeta, z)` with `f(z)` supplied; no checks.
    pub fn evaluate_at(&self, zeta: &CVector, z: C64, base_value: CVector) -> CVector {
        let mut w = base_value;
        for (q, slot) in self.slots.iter().enumerate().rev() {
            let t = zeta[q] * slot.multiplier.eval(z);
            self.variety.apply_flow_in_place(slot.pair, t, &mut w);
        }
        w
    }

    /// Periods of `Psi(zeta, .)`, flattened as `j n + component`.
    pub fn periods_at(&self, zeta: &CVector) -> Result<CVector, PeriodError> {
        self.check_zeta(zeta)?;
        Ok(self.periods_unchecked(zeta))
    }

    fn periods_unchecked(&self, zeta: &CVector) -> CVector {
        let n = self.variety.dim();
        let mut out = CVector::zeros(self.loops.len() * n);
        for (j, nodes) in self.loops.iter().enumerate() {
            let values: Vec<CVector> = (0..nodes.len())
                .into_par_iter()
                .map(|k| self.evaluate_at(zeta, nodes.nodes[k], self.base_on_loops[j][k].clone()))
                .collect();
            for (v, &w) in values.iter().zip(&nodes.weights) {
                for c in 0..n {
                    out[j * n + c] += w * v[c];
                }
            }
        }
        out
    }

    /// Analytic derivative of the period map at `zeta`:
    /// `d Psi / d zeta_q = E_0 ... E_{q-1} g_q M_q E_q ... E_{L-1} f`.
    pub fn jacobian_at(&self, zeta: &CVector) -> Result<CMatrix, PeriodError> {
        self.check_zeta(zeta)?;
        Ok(self.jacobian_unchecked(zeta))
    }

    fn jacobian_unchecked(&self, zeta: &CVector) -> CMatrix {
        let n = self.variety.dim();
        let cols = self.slots.len();
        let mut jac = CMatrix::zeros(self.loops.len() * n, cols);
        for (j, nodes) in self.loops.iter().enumerate() {
            let per_node: Vec<Vec<CVector>> = (0..nodes.len())
                .into_par_iter()
                .map(|k| self.node_derivatives(zeta, nodes.nodes[k], &self.base_on_loops[j][k]))
                .collect();
            for (derivs, &w) in per_node.iter().zip(&nodes.weights) {
                for (q, d) in derivs.iter().enumerate() {
                    for c in 0..n {
                        jac[(j * n + c, q)] += w * d[c];
                    }
                }
            }
        }
        jac
    }

    fn node_derivatives(&self, zeta: &CVector, z: C64, base_value: &CVector) -> Vec<CVector> {
        let count = self.slots.len();
        let mult: Vec<C64> = self.slots.iter().map(|s| s.multiplier.eval(z)).collect();
        let times: Vec<C64> = (0..count).map(|q| zeta[q] * mult[q]).collect();
        // states[q] = E_q ... E_{L-1} f
        let mut states = vec![base_value.clone(); count + 1];
        for q in (0..count).rev() {
            let mut w = states[q + 1].clone();
            self.variety.apply_flow_in_place(self.slots[q].pair, times[q], &mut w);
            states[q] = w;
        }
        (0..count)
            .map(|q| {
                let mut d = self.variety.field(self.slots[q].pair, &states[q]) * mult[q];
                for r in (0..q).rev() {
                    self.variety.apply_flow_in_place(self.slots[r].pair, times[r], &mut d);
                }
                d
            })
            .collect()
    }

    /// Analytic period Jacobian at `zeta = 0`: column `q` is
    /// `\oint_{gamma_j} g_q V_q(f) dz` stacked over loops `j`.
    pub fn period_jacobian(&self) -> CMatrix {
        self.jacobian_unchecked(&CVector::zeros(self.slots.len()))
    }

    /// Central finite differences of the period map (real step `h` per parameter).
    pub fn finite_difference_jacobian(&self, zeta: &CVector, h: f64) -> CMatrix {
        let cols = self.slots.len();
        let rows = self.loops.len() * self.variety.dim();
        let mut jac = CMatrix::zeros(rows, cols);
        for q in 0..cols {
            let mut plus = zeta.clone();
            let mut minus = zeta.clone();
            plus[q] += h;
            minus[q] -= h;
            let diff = (self.periods_unchecked(&plus) - self.periods_unchecked(&minus)) / C64::from(2.0 * h);
            jac.set_column(q, &diff);
        }
        jac
    }

    /// [`DeformationFamily::period_jacobian`] cross-checked against central
    /// differences with step `1e-5`; a relative Frobenius mismatch above `1e-6`
    /// indicates an implementation error.
    pub fn checked_period_jacobian(&self) -> Result<CMatrix, PeriodError> {
        let zero = CVector::zeros(self.slots.len());
        let analytic = self.period_jacobian();
        let fd = self.finite_difference_jacobian(&zero, 1e-5);
        let relative_error = (&analytic - &fd).norm() / analytic.norm().max(f64::MIN_POSITIVE);
        if relative_error > 1e-6 {
            return Err(PeriodError::JacobianMismatch { relative_error });
        }
        Ok(analytic)
    }

    /// Row indices of the correctable periods (all rows unless a component is fixed).
    fn active_rows(&self) -> Vec<usize> {
        let n = self.variety.dim();
        (0..self.loops.len() * n).filter(|r| Some(r % n) != self.fixed_component).collect()
    }

    fn reduce_vec(&self, v: &CVector, rows: &[usize]) -> CVector {
        CVector::from_iterator(rows.len(), rows.iter().map(|&r| v[r]))
    }

    fn reduce_mat(&self, m: &CMatrix, rows: &[usize]) -> CMatrix {
        CMatrix::from_fn(rows.len(), m.ncols(), |r, c| m[(rows[r], c)])
    }

    /// Kernel projection in rescaled coordinates `xi_q = scales_q zeta_q`: returns
    /// `zeta` with `xi` the orthogonal projection of `xi_in` onto the kernel of
    /// `J diag(1/scales)`. With `scales_q` the size of slot `q`'s effect on `f`,
    /// every slot costs the same per unit of `xi`.
    pub fn project_to_kernel_scaled(&self, xi_in: &CVector, scales: &[f64]) -> CVector {
        let rows = self.active_rows();
        let mut jac = self.reduce_mat(&self.period_jacobian(), &rows);
        for (q, &s) in scales.iter().enumerate() {
            jac.column_mut(q).unscale_mut(s);
        }
        let pinv = Pseudoinverse::new(&jac, 1e-10);
        let xi = xi_in - pinv.solve(&(&jac * xi_in));
        CVector::from_iterator(xi.len(), xi.iter().zip(scales).map(|(x, &s)| x / s))
    }

    /// `sup_z |g_q(z) V_q(f(z))|` over `nodes` for every slot `q`.
    pub fn slot_effects(&self, nodes: &[C64]) -> Vec<f64> {
        let values: Vec<CVector> = nodes.par_iter().map(|&z| self.base.eval(z)).collect();
        self.slots
            .par_iter()
            .map(|slot| {
                nodes
                    .iter()
                    .zip(&values)
                    .map(|(&z, v)| (self.variety.field(slot.pair, v) * slot.multiplier.eval(z)).norm())
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    /// Orthogonal projection of `v` onto the kernel of the (reduced) period
    /// differential at `zeta = 0`: directions that keep periods fixed to first order.
    pub fn project_to_kernel(&self, v: &CVector) -> CVector {
        let rows = self.active_rows();
        let jac = self.reduce_mat(&self.period_jacobian(), &rows);
        let pinv = Pseudoinverse::new(&jac, 1e-10);
        v - pinv.solve(&(&jac * v))
    }
}

fn max_norm(v: &CVector) -> f64 {
    v.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

fn draw_multipliers(
    domain: &PlanarDomain,
    loops: &[LoopNodes],
    slots_per_loop: usize,
    pairs: &[FieldPair],
    power: i32,
    rng: &mut ChaCha8Rng,
) -> Vec<Slot> {
    let mut slots = Vec::with_capacity(loops.len() * slots_per_loop);
    for (i, nodes) in loops.iter().enumerate() {
        let center = domain.holes()[i].center;
        let kappa = domain.holes()[i].radius / nodes.radius;
        for k in 0..slots_per_loop {
            let mut normal = || -> C64 {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                C64::new(re, im)
            };
            let terms = (-power..=power)
                .map(|p| (p, normal() * kappa.powi(p.abs())))
                .collect();
            let mut multiplier = Multiplier { center, scale: nodes.radius, terms };
            let sup = nodes.nodes.iter().map(|&z| multiplier.eval(z).norm()).fold(0.0, f64::max);
            if sup > 0.0 {
                multiplier.terms.iter_mut().for_each(|t| t.1 /= sup);
            }
            slots.push(Slot { loop_index: i, pair: pairs[k % pairs.len()], multiplier });
        }
    }
    slots
}

/// Build the flow-composition family around `f` and verify that its period
/// differential at `zeta = 0` has full rank (`l n`, or `l (n - 1)` with a fixed
/// component). Multipliers are redrawn up to `max_reseeds` times before the
/// map is declared degenerate.
///
/// Attempt `a` draws multipliers with powers `|p| <= a + 1`. The column for a slot
/// is `M_q \oint g_q f dz`, and `u^{-p}` only sees the Laurent coefficient of `f`
/// of order `p - 1`; a polynomial seed therefore needs negative powers reaching its
/// degree, while small powers keep `Psi` tame and the refit cheap.
pub fn build_family(
    f: &LaurentMap,
    variety: &ConeVariety,
    domain: &PlanarDomain,
    settings: &FamilySettings,
) -> Result<DeformationFamily, PeriodError> {
    let n = variety.dim();
    if f.dim() != n {
        return Err(PeriodError::InvalidSettings(format!("map has dimension {} but the cone lives in C^{n}", f.dim())));
    }
    // validates centers against the domain
    f.periods(domain, PeriodMode::Exact)?;
    let m = settings.slots.unwrap_or(3 * n);
    if m < n {
        return Err(PeriodError::InvalidSettings(format!("need at least n = {n} slots per loop, got {m}")));
    }
    if let Some(k) = settings.fixed_component {
        if k >= n {
            return Err(PeriodError::InvalidSettings(format!("fixed component {k} out of range for n = {n}")));
        }
    }
    if !(settings.trust_radius > 0.0) {
        return Err(PeriodError::InvalidSettings("trust radius must be positive".into()));
    }
    let loops = domain.all_loop_nodes(settings.nodes)?;
    let mut base_on_loops = Vec::with_capacity(loops.len());
    for nodes in &loops {
        let mut values = Vec::with_capacity(nodes.len());
        for &z in &nodes.nodes {
            let v = f.eval(z);
            let residual = variety.scaled_residual(&v);
            if !(residual <= MEMBERSHIP_TOL) {
                return Err(PeriodError::NotOnCone { z, residual });
            }
            values.push(v);
        }
        base_on_loops.push(values);
    }
    let pairs: Vec<FieldPair> = variety
        .pairs()
        .into_iter()
        .filter(|p| settings.fixed_component.is_none_or(|k| !p.touches(k)))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut family = DeformationFamily {
        base: f.clone(),
        variety: variety.clone(),
        domain: domain.clone(),
        loops,
        base_on_loops,
        slots_per_loop: m,
        slots: Vec::new(),
        fixed_component: settings.fixed_component,
        trust_radius: settings.trust_radius,
        reseeds: 0,
        rank: 0,
    };
    // Size of a column when g_q V_q(f) is aligned along the whole loop. Rank is
    // measured against this absolute scale: a relative test would count rounding
    // noise as rank when every column vanishes.
    let column_scale = family
        .loops
        .iter()
        .zip(&family.base_on_loops)
        .map(|(nodes, values)| 2.0 * std::f64::consts::PI * nodes.radius * values.iter().map(|v| v.norm()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    let required = family.required_rank();
    let rows = family.active_rows();
    let mut best = 0;
    for attempt in 0..=settings.max_reseeds {
        let power = 1 + attempt as i32;
        family.slots = draw_multipliers(domain, &family.loops, m, &pairs, power, &mut rng);
        family.reseeds = attempt;
        let jac = family.reduce_mat(&family.period_jacobian(), &rows);
        let rank = singular_values(&jac).iter().filter(|&&x| x > settings.rank_tol * column_scale).count();
        if rank >= required {
            family.rank = rank;
            return Ok(family);
        }
        log::debug!("family attempt {attempt}: rank {rank} < {required}, redrawing with wider multipliers");
        best = best.max(rank);
    }
    Err(PeriodError::Degenerate { rank: best, required })
}

/// Outcome of [`correct_periods`].
#[derive(Debug, Clone)]
pub struct Correction {
    pub zeta: CVector,
    /// Laurent refit of `z -> Psi(zeta, z)`.
    pub corrected: LaurentMap,
    pub iterations: usize,
    /// Euclidean norm of the family periods after each iteration (first entry: start).
    pub residual_history: Vec<f64>,
    /// Largest period entry of the refitted map (residue formula).
    pub period_residual: f64,
    pub fit_residual: f64,
    /// Largest scaled cone residual of the refitted map on loop and boundary nodes.
    pub membership_residual: f64,
}

/// Drive the periods of `Psi(zeta, .)` to zero from `zeta = 0`.
pub fn correct_periods(family: &DeformationFamily, settings: &SolverSettings) -> Result<Correction, PeriodError> {
    correct_periods_from(family, &CVector::zeros(family.parameter_len()), settings)
}

/// Gauss-Newton on the period map: least-norm steps through the pseudoinverse of
/// the Jacobian, halved until the residual decreases and the iterate stays in the
/// trust region.
pub fn correct_periods_from(
    family: &DeformationFamily,
    start: &CVector,
    settings: &SolverSettings,
) -> Result<Correction, PeriodError> {
    family.check_zeta(start)?;
    let rows = family.active_rows();
    if let Some(k) = family.fixed_component {
        let p = family.base.periods(&family.domain, PeriodMode::Exact)?;
        for j in 0..family.loops.len() {
            let value = p.entries[(j, k)];
            if value.norm() >= settings.tol {
                return Err(PeriodError::FixedComponentPeriod { component: k, loop_index: j, value });
            }
        }
    }

    let mut zeta = start.clone();
    let mut r = family.reduce_vec(&family.periods_unchecked(&zeta), &rows);
    let mut rn = r.norm();
    let mut history = vec![rn];
    let at_origin = zeta.iter().all(|x| *x == C64::from(0.0));
    if at_origin && rn < settings.tol {
        let membership_residual = membership_on_nodes(family.base(), family.variety(), family.domain());
        let period_residual = family.base.periods(&family.domain, PeriodMode::Exact)?.max_abs();
        return Ok(Correction {
            zeta,
            corrected: family.base.clone(),
            iterations: 0,
            residual_history: history,
            period_residual,
            fit_residual: 0.0,
            membership_residual,
        });
    }

    let target = settings.tol * settings.polish;
    let mut iterations = 0;
    let mut blocked = false;
    while rn > target && iterations < settings.max_iter {
        iterations += 1;
        let jac = family.reduce_mat(&family.jacobian_unchecked(&zeta), &rows);
        let pinv = Pseudoinverse::new(&jac, settings.pinv_cutoff);
        let newton = pinv.solve(&(-&r));
        // When the plain least-norm step leaves the trust region, fall back to the
        // solution of the linearized equation whose new iterate has least norm.
        let inside = max_norm(&(&zeta + &newton)) <= family.trust_radius;
        blocked = !inside;
        let step = if inside { newton } else { pinv.solve(&(&jac * &zeta - &r)) - &zeta };
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha >= 1e-6 {
            let cand = &zeta + &step * C64::from(alpha);
            if max_norm(&cand) > family.trust_radius {
                alpha *= 0.5;
                continue;
            }
            let rc = family.reduce_vec(&family.periods_unchecked(&cand), &rows);
            if rc.norm() < (1.0 - 1e-4 * alpha) * rn {
                accepted = Some((cand, rc));
                break;
            }
            alpha *= 0.5;
        }
        let Some((cand, rc)) = accepted else { break };
        zeta = cand;
        r = rc;
        rn = r.norm();
        history.push(rn);
        log::debug!("gauss-newton iteration {iterations}: |P| = {rn:.3e}, step {alpha}");
    }
    if !(rn < settings.tol) {
        if blocked {
            return Err(PeriodError::TrustRegion { norm: max_norm(&zeta), radius: family.trust_radius });
        }
        return Err(PeriodError::NoConvergence { iterations, residual: rn });
    }

    let (mut corrected, report) =
        fit_function(&family.domain, settings.fit_degree, |z| family.evaluate_at(&zeta, z, family.base.eval(z)))?;
    let scale = family
        .domain
        .boundary_points(64)
        .iter()
        .map(|&z| family.evaluate_at(&zeta, z, family.base.eval(z)).norm())
        .fold(1.0, f64::max);
    if report.max_residual > settings.fit_tol * scale {
        return Err(PeriodError::RefitResidual { residual: report.max_residual, tol: settings.fit_tol * scale });
    }
    if let Some(k) = family.fixed_component {
        // component k of Psi equals component k of f identically
        corrected.copy_component_from(&family.base, k);
    }
    let membership_residual = membership_on_nodes(&corrected, &family.variety, &family.domain);
    if membership_residual > MEMBERSHIP_TOL {
        return Err(PeriodError::MembershipLost { residual: membership_residual });
    }
    let period_residual = corrected.periods(&family.domain, PeriodMode::Exact)?.max_abs();
    Ok(Correction {
        zeta,
        corrected,
        iterations,
        residual_history: history,
        period_residual,
        fit_residual: report.max_residual,
        membership_residual,
    })
}

/// Largest scaled cone residual of `f` over the certification nodes.
pub fn membership_on_nodes(f: &LaurentMap, variety: &ConeVariety, domain: &PlanarDomain) -> f64 {
    domain
        .certification_nodes(DEFAULT_LOOP_NODES)
        .par_iter()
        .map(|&z| variety.scaled_residual(&f.eval(z)))
        .collect::<Vec<f64>>()
        .into_iter()
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Nondegenerate,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NondegeneracyReport {
    pub rank: usize,
    pub verdict: Verdict,
    pub singular_values: Vec<f64>,
}

/// Rank of the span of the cone's tangent spaces along `f` at `samples` points
/// spread over the domain (relative SVD threshold `1e-8`). The map is
/// nondegenerate iff the tangent spaces span `C^n`.
pub fn nondegeneracy_rank(
    f: &LaurentMap,
    variety: &ConeVariety,
    domain: &PlanarDomain,
    samples: usize,
) -> Result<NondegeneracyReport, PeriodError> {
    let n = variety.dim();
    let mut columns = Vec::new();
    for z in domain.spread_points(samples.max(1)) {
        let v = f.eval(z);
        let basis = variety.tangent_basis(&v).map_err(|e| match e {
            ConeError::NotOnCone { residual, .. } => PeriodError::NotOnCone { z, residual },
            other => PeriodError::Cone(other),
        })?;
        columns.extend(basis);
    }
    let m = CMatrix::from_columns(&columns);
    let singular_values = singular_values(&m);
    let rank = numerical_rank(&m, 1e-8);
    let verdict = if rank == n { Verdict::Nondegenerate } else { Verdict::Degenerate };
    Ok(NondegeneracyReport { rank, verdict, singular_values })
}
