//! Self-intersection certificates via the difference map `(x, y) -> F(y) - F(x)`.
//!
//! An immersion is locally injective, so only pairs at distance at least `delta`
//! are examined. The certificate is the triple (gap, grid, delta); it says nothing
//! about points between grid nodes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::{integrate_curve, CurveError, DirectedCurve};
use crate::domain::DEFAULT_LOOP_NODES;
use crate::periods::{correct_periods_from, DeformationFamily, SolverSettings};
use crate::{CVector, C64};

/// Share of the `C^1` budget each attempt aims for. The period correction that
/// follows moves `f` by far less than the remaining tenth.
const BUDGET_FRACTION: f64 = 0.9;

/// Minimum of `|F(y) - F(x)|` over admissible grid pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmbeddingGap {
    pub gap: f64,
    pub witness: (C64, C64),
    pub grid: usize,
    pub delta: f64,
    /// Number of unordered admissible pairs examined.
    pub pairs: usize,
}

/// `min |F(y) - F(x)|` over unordered pairs of the `grid x grid` lattice with
/// `|x - y| >= delta` (default: twice the lattice spacing).
pub fn embedding_gap(curve: &DirectedCurve, grid: usize, delta: Option<f64>) -> Result<EmbeddingGap, CurveError> {
    let (points, spacing) = curve.domain().grid_points(grid);
    let delta = delta.unwrap_or(2.0 * spacing);
    if !(delta >= 0.0) {
        return Err(CurveError::InvalidSettings(format!("diagonal margin must be nonnegative, got {delta}")));
    }
    let values: Vec<CVector> = points.par_iter().map(|&z| curve.eval(z)).collect();
    let delta_sq = delta * delta;
    // per row: (best squared distance, partner, admissible count)
    let rows: Vec<(f64, usize, usize)> = (0..points.len())
        .into_par_iter()
        .map(|i| {
            let mut best = (f64::INFINITY, usize::MAX, 0);
            for j in i + 1..points.len() {
                if (points[j] - points[i]).norm_sqr() < delta_sq {
                    continue;
                }
                best.2 += 1;
                let d: f64 = values[j].iter().zip(values[i].iter()).map(|(a, b)| (a - b).norm_sqr()).sum();
                if d < best.0 {
                    best = (d, j, best.2);
                }
            }
            best
        })
        .collect();
    let pairs = rows.iter().map(|r| r.2).sum();
    let (i, &(d, j, _)) = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.1 != usize::MAX)
        .fold(None, |acc: Option<(usize, &(f64, usize, usize))>, (i, r)| match acc {
            Some((_, b)) if b.0 <= r.0 => acc,
            _ => Some((i, r)),
        })
        .ok_or(CurveError::NoAdmissiblePairs { delta, grid })?;
    Ok(EmbeddingGap { gap: d.sqrt(), witness: (points[i], points[j]), grid, delta, pairs })
}

/// Settings for [`perturb_to_embedding`].
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbSettings {
    pub seed: u64,
    /// Random attempts besides the identity attempt `zeta = 0`.
    pub attempts: usize,
    /// Bound on `sup |f~ - f| / sup |f|` over the certification nodes.
    pub c1_bound: f64,
    pub grid: usize,
    pub delta: Option<f64>,
    pub solver: SolverSettings,
}

impl Default for PerturbSettings {
    fn default() -> Self {
        Self { seed: 0, attempts: 8, c1_bound: 1e-2, grid: 64, delta: None, solver: SolverSettings::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttemptReport {
    pub index: usize,
    pub gap: Option<f64>,
    pub c1_distance: Option<f64>,
    pub within_bound: bool,
    /// Why the attempt produced no curve, if it did not.
    pub failure: Option<String>,
}

#[derive(Debug, Clone)]
pub struct PerturbOutcome {
    pub curve: DirectedCurve,
    pub gap: EmbeddingGap,
    pub c1_distance: f64,
    /// Index of the chosen attempt (0 is the unperturbed curve).
    pub chosen: usize,
    pub original_gap: f64,
    pub attempts: Vec<AttemptReport>,
}

impl PerturbOutcome {
    pub fn improved(&self) -> bool {
        self.gap.gap > self.original_gap
    }
}

/// Randomized search for an embedded approximation of `curve`.
///
/// Each attempt draws a complex normal parameter vector in coordinates where every
/// slot moves `f` by the same amount, projects it onto the kernel of the period
/// differential (so periods move only to second order),
/// scales it so that `f` moves by most of the allowed `C^1` budget, restores
/// exact periods by Gauss-Newton from there and measures the embedding gap. The
/// attempt with the largest gap among those within the budget is returned; the
/// identity attempt always qualifies.
pub fn perturb_to_embedding(
    curve: &DirectedCurve,
    family: &DeformationFamily,
    settings: &PerturbSettings,
) -> Result<PerturbOutcome, CurveError> {
    if family.base().max_coeff_diff(curve.derivative(), None) != 0.0 {
        return Err(CurveError::InvalidSettings("deformation family was built on a different map".into()));
    }
    if !(settings.c1_bound > 0.0) {
        return Err(CurveError::InvalidSettings("C^1 bound must be positive".into()));
    }
    let original = embedding_gap(curve, settings.grid, settings.delta)?;
    let nodes = curve.domain().certification_nodes(DEFAULT_LOOP_NODES);
    let base_values: Vec<CVector> = nodes.iter().map(|&z| curve.derivative().eval(z)).collect();
    let sup_f = base_values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let deviation = |values: &(dyn Fn(C64) -> CVector + Sync)| -> f64 {
        nodes.par_iter().zip(&base_values).map(|(&z, v)| (values(z) - v).norm()).reduce(|| 0.0, f64::max)
    };

    // slots that barely move f get proportionally larger coefficients
    let effects: Vec<f64> = family.slot_effects(&nodes).into_iter().map(|e| if e > 0.0 { e } else { 1.0 }).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let len = family.parameter_len();
    let directions: Vec<CVector> = (0..settings.attempts)
        .map(|_| {
            let v = CVector::from_fn(len, |_, _| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                C64::new(re, im)
            });
            family.project_to_kernel_scaled(&v, &effects)
        })
        .collect();

    let budget = BUDGET_FRACTION * settings.c1_bound * sup_f;
    let results: Vec<Result<(DirectedCurve, EmbeddingGap, f64), String>> = directions
        .par_iter()
        .map(|d| {
            let norm = d.iter().map(|x| x.norm()).fold(0.0, f64::max);
            if norm == 0.0 {
                return Err("kernel of the period differential is trivial".to_string());
            }
            // deviation is linear in the scale for small parameters
            let probe_scale = 1e-3 / norm;
            let probe = d * C64::from(probe_scale);
            let probe_dev = deviation(&|z| family.evaluate_at(&probe, z, family.base().eval(z)));
            if probe_dev == 0.0 {
                return Err("direction does not move the map".to_string());
            }
            let scale = (probe_scale * budget / probe_dev).min(0.5 * family.trust_radius() / norm);
            let start = d * C64::from(scale);
            let corrected = correct_periods_from(family, &start, &settings.solver).map_err(|e| e.to_string())?;
            let (p, value) = curve.base();
            let candidate = integrate_curve(&corrected.corrected, curve.domain(), curve.variety(), (p, value.clone()))
                .map_err(|e| e.to_string())?;
            let c1 = deviation(&|z| candidate.derivative().eval(z)) / sup_f;
            let gap = embedding_gap(&candidate, settings.grid, settings.delta).map_err(|e| e.to_string())?;
            Ok((candidate, gap, c1))
        })
        .collect();

    let mut attempts = vec![AttemptReport {
        index: 0,
        gap: Some(original.gap),
        c1_distance: Some(0.0),
        within_bound: true,
        failure: None,
    }];
    let mut best: (usize, Option<&(DirectedCurve, EmbeddingGap, f64)>) = (0, None);
    let mut best_gap = original.gap;
    for (k, r) in results.iter().enumerate() {
        let index = k + 1;
        match r {
            Ok(entry) => {
                let within_bound = entry.2 <= settings.c1_bound;
                attempts.push(AttemptReport {
                    index,
                    gap: Some(entry.1.gap),
                    c1_distance: Some(entry.2),
                    within_bound,
                    failure: None,
                });
                if within_bound && entry.1.gap > best_gap {
                    best_gap = entry.1.gap;
                    best = (index, Some(entry));
                }
            }
            Err(msg) => {
                log::debug!("perturbation attempt {index} failed: {msg}");
                attempts.push(AttemptReport {
                    index,
                    gap: None,
                    c1_distance: None,
                    within_bound: false,
                    failure: Some(msg.clone()),
                });
            }
        }
    }
    let (curve_out, gap, c1_distance) = match best.1 {
        Some((c, g, d)) => (c.clone(), *g, *d),
        None => (curve.clone(), original, 0.0),
    };
    Ok(PerturbOutcome { curve: curve_out, gap, c1_distance, chosen: best.0, original_gap: original.gap, attempts })
}
