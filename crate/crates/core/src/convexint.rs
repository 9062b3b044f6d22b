//! Cone-valued paths with a prescribed weighted integral.
//!
//! Given cone points `h(0)`, `h(1)`, a nonvanishing weight `g` and a target `v`,
//! build `h: [0, 1] -> A \ {0}` with the given endpoints and `\int h g dt ~ v`.
//! Because the cone is invariant under complex scaling, `k = h g` is cone-valued
//! exactly when `h` is, so the construction works with `k` and a unit weight:
//!
//! ```text
//!   [0, d]         arc from k(0) to p_1
//!   [d, 1/2 - d]   plateau p_1
//!   [1/2 - d, 1/2 + d]  arc from p_1 to p_2
//!   [1/2 + d, 1 - d]    plateau p_2
//!   [1 - d, 1]     arc from p_2 to k(1)
//! ```
//!
//! with `(p_1 + p_2)/2` a null-pair decomposition of the (slightly compensated)
//! target. All arcs stay in a ball of radius `R` that does not depend on `d`, and
//! `d = eps/(8R)` bounds the error of the uncompensated construction by `eps`.
//! The plateau target is corrected for the arcs' continuous contribution, so the
//! remaining error is the quadrature error of the sampled path, which falls like
//! the square of the sample spacing.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::cone::{null_quadric_chart, parametrize_null_quadric, ConeError, ConeVariety, MEMBERSHIP_TOL};
use crate::curves::DirectedCurve;
use crate::linalg::bilinear;
use crate::{CVector, C64};

/// Radius margin over the sampled maximum of the arcs.
const RADIUS_MARGIN: f64 = 1.05;
/// Probe points per arc when estimating `R`.
const ARC_PROBES: usize = 256;
/// Simpson intervals for the arcs' averages.
const ARC_QUADRATURE: usize = 2048;
/// Transitions must span at least this many sample intervals.
const MIN_TRANSITION_INTERVALS: f64 = 2.0;
/// Sample intervals per transition chosen by [`integrate_to_target_auto`].
const AUTO_TRANSITION_INTERVALS: f64 = 4.0;
/// Largest sample count chosen automatically.
pub const MAX_AUTO_SAMPLES: usize = 1 << 22;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConvexError {
    #[error("endpoint h({which}) is not a nonzero cone point: {source}")]
    EndpointOffCone { which: u8, source: ConeError },
    #[error("weight vanishes at sample {index}")]
    VanishingWeight { index: usize },
    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("tolerance {eps:.1e} unachievable with {samples} samples: achieved {achieved:.3e} (about {required} samples needed)")]
    Unachievable { eps: f64, achieved: f64, samples: usize, required: usize },
    #[error("target has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("arc endpoint or sample {z} is outside the domain")]
    OutsideDomain { z: C64 },
    #[error("arc samples must start at q1 and end at q2")]
    ArcEndpoints,
    #[error("degenerate arc (zero length) cannot carry the nonzero target {norm:.3e}")]
    InfeasibleArc { norm: f64 },
    #[error("sample at t = {t} left the cone (residual {residual:.3e})")]
    OffCone { t: f64, residual: f64 },
    #[error(transparent)]
    Cone(#[from] ConeError),
}

/// A continuous path between two cone points. `eval(0)` and `eval(1)` return
/// the endpoints up to rounding.
#[derive(Debug, Clone)]
enum Arc {
    Constant(CVector),
    /// Null quadric chart: `g` linear, `log w` linear along the shorter angle.
    Chart { g0: C64, g1: C64, lw0: C64, lw1: C64 },
    /// Straight segment pushed back onto the cone along `conj(Q z)`.
    Segment { a: CVector, b: CVector },
    /// `e^{i phi s} a`; stays on the cone because it is conical.
    Rotation { a: CVector, phi: f64 },
    /// First half, then second half.
    Composite(Box<Arc>, Box<Arc>),
}

impl Arc {
    fn between(variety: &ConeVariety, a: &CVector, b: &CVector) -> Arc {
        if a == b {
            return Arc::Constant(a.clone());
        }
        if variety.is_null3() {
            if let (Some((g0, w0)), Some((g1, w1))) = (null_quadric_chart(a), null_quadric_chart(b)) {
                let lw0 = w0.ln();
                let mut lw1 = w1.ln();
                let turn = ((lw1.im - lw0.im) / (2.0 * PI)).round();
                lw1.im -= 2.0 * PI * turn;
                return Arc::Chart { g0, g1, lw0, lw1 };
            }
        }
        let clearance = |x: &CVector, y: &CVector| segment_clearance(x, y) / x.norm().min(y.norm());
        if clearance(a, b) >= 0.25 {
            return Arc::Segment { a: a.clone(), b: b.clone() };
        }
        // the straight segment passes near the origin: rotate first
        let (phi, rotated) = [PI / 2.0, -PI / 2.0, PI]
            .iter()
            .map(|&phi| (phi, a * C64::from_polar(1.0, phi)))
            .max_by(|x, y| clearance(&x.1, b).total_cmp(&clearance(&y.1, b)))
            .expect("three candidates");
        Arc::Composite(
            Box::new(Arc::Rotation { a: a.clone(), phi }),
            Box::new(Arc::Segment { a: rotated, b: b.clone() }),
        )
    }

    fn eval(&self, variety: &ConeVariety, s: f64) -> CVector {
        match self {
            Arc::Constant(c) => c.clone(),
            Arc::Chart { g0, g1, lw0, lw1 } => {
                let g = g0 * (1.0 - s) + g1 * s;
                let w = (lw0 * (1.0 - s) + lw1 * s).exp();
                parametrize_null_quadric(g, w).expect("exp never vanishes")
            }
            Arc::Segment { a, b } => project_to_cone(variety, &(a * C64::from(1.0 - s) + b * C64::from(s))),
            Arc::Rotation { a, phi } => a * C64::from_polar(1.0, phi * s),
            Arc::Composite(first, second) => {
                if s <= 0.5 {
                    first.eval(variety, 2.0 * s)
                } else {
                    second.eval(variety, 2.0 * s - 1.0)
                }
            }
        }
    }

    /// `\int_0^1 arc(s) ds` by composite Simpson.
    fn average(&self, variety: &ConeVariety) -> CVector {
        if let Arc::Constant(c) = self {
            return c.clone();
        }
        let m = ARC_QUADRATURE;
        let mut acc = self.eval(variety, 0.0) + self.eval(variety, 1.0);
        for i in 1..m {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += self.eval(variety, i as f64 / m as f64) * C64::from(w);
        }
        acc / C64::from(3.0 * m as f64)
    }

    fn sup_norm(&self, variety: &ConeVariety) -> f64 {
        (0..=ARC_PROBES).map(|i| self.eval(variety, i as f64 / ARC_PROBES as f64).norm()).fold(0.0, f64::max)
    }
}

/// Distance from the origin to the segment `[a, b]`.
fn segment_clearance(a: &CVector, b: &CVector) -> f64 {
    let d = b - a;
    let dd = d.norm_squared();
    let s = if dd > 0.0 { (-a.dotc(&d).re / dd).clamp(0.0, 1.0) } else { 0.0 };
    (a + d * C64::from(s)).norm()
}

/// Move `z` onto the cone along `d = conj(Q z)`: the smaller root of
/// `P(z + lambda d) = P(z) + 2 lambda z^T Q d + lambda^2 P(d) = 0`.
fn project_to_cone(variety: &ConeVariety, z: &CVector) -> CVector {
    let qz = variety.form() * z;
    let d = qz.map(|x| x.conj());
    let a = variety.membership_residual(&d);
    let b = bilinear(&qz, &d) * 2.0;
    let c = variety.membership_residual(z);
    if c == C64::from(0.0) {
        return z.clone();
    }
    let root = (b * b - a * c * 4.0).sqrt();
    let denom = if (b + root).norm() >= (b - root).norm() { b + root } else { b - root };
    z + d * (-c * 2.0 / denom)
}

/// The plateaus, arcs and geometry of one construction, before sampling.
#[derive(Debug, Clone)]
struct Layout {
    p1: CVector,
    p2: CVector,
    arcs: [Arc; 3],
    delta: f64,
}

impl Layout {
    fn eval(&self, variety: &ConeVariety, t: f64) -> CVector {
        let d = self.delta;
        if t < d {
            self.arcs[0].eval(variety, t / d)
        } else if t <= 0.5 - d {
            self.p1.clone()
        } else if t < 0.5 + d {
            self.arcs[1].eval(variety, (t - 0.5 + d) / (2.0 * d))
        } else if t <= 1.0 - d {
            self.p2.clone()
        } else {
            self.arcs[2].eval(variety, (t - 1.0 + d) / d)
        }
    }

    /// `\int_0^1 k dt` of the continuous path.
    fn integral(&self, variety: &ConeVariety) -> CVector {
        let d = self.delta;
        let plateaus = (&self.p1 + &self.p2) * C64::from(0.5 - 2.0 * d);
        let arcs = self.arcs[0].average(variety) + self.arcs[1].average(variety) * C64::from(2.0)
            + self.arcs[2].average(variety);
        plateaus + arcs * C64::from(d)
    }
}

fn layout(variety: &ConeVariety, a: &CVector, b: &CVector, plateau_target: Option<&CVector>, delta: f64) -> Result<Layout, ConvexError> {
    let (p1, p2) = match plateau_target {
        Some(v) => variety.null_pair_decompose(v)?,
        // zero target: opposite plateaus
        None => (a.clone(), -a),
    };
    let arcs = [Arc::between(variety, a, &p1), Arc::between(variety, &p1, &p2), Arc::between(variety, &p2, b)];
    Ok(Layout { p1, p2, arcs, delta })
}

/// Construction parameters that do not depend on the sample count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvexPlan {
    /// Bound for `|k| = |h g|` along the path.
    pub radius: f64,
    /// Transition width `eps/(8R)`, capped at `1/8`.
    pub delta: f64,
    /// Sample count that resolves every transition with a few intervals.
    pub recommended_samples: usize,
}

fn plan_for(variety: &ConeVariety, a: &CVector, b: &CVector, target: &CVector, eps: f64) -> Result<(ConvexPlan, bool), ConvexError> {
    let scale = a.norm() + b.norm();
    let zero_target = target.norm() <= 1e-14 * scale;
    let base = layout(variety, a, b, (!zero_target).then_some(target), 0.125)?;
    let sup = base.arcs.iter().map(|arc| arc.sup_norm(variety)).fold(base.p1.norm().max(base.p2.norm()), f64::max);
    let radius = RADIUS_MARGIN * sup;
    let delta = (eps / (8.0 * radius)).min(0.125);
    let recommended = (AUTO_TRANSITION_INTERVALS / delta).ceil() as usize + 1;
    Ok((ConvexPlan { radius, delta, recommended_samples: recommended.min(MAX_AUTO_SAMPLES) }, zero_target))
}

/// Samples `(t, h(t))` of a cone-valued path.
#[derive(Debug, Clone, PartialEq)]
pub struct ConePath {
    pub samples: Vec<(f64, CVector)>,
    /// Bound for `|h|`: the plan radius divided by `min |g|`.
    pub radius: f64,
    pub delta: f64,
    /// `|sum of trapezoid weights * h g - v|`.
    pub achieved_error: f64,
    pub plateaus: (CVector, CVector),
}

impl ConePath {
    pub fn sup_norm(&self) -> f64 {
        self.samples.iter().map(|(_, h)| h.norm()).fold(0.0, f64::max)
    }

    /// Trapezoid approximation of `\int_0^1 h g dt` on the samples.
    pub fn weighted_integral(&self, g: &[C64]) -> CVector {
        trapezoid(&self.samples, g)
    }

    /// CSV with columns `t, re_1, im_1, ..., re_n, im_n`.
    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let n = self.samples.first().map_or(0, |s| s.1.len());
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["t".to_string()];
        for c in 1..=n {
            header.push(format!("re_{c}"));
            header.push(format!("im_{c}"));
        }
        w.write_record(&header)?;
        for (t, h) in &self.samples {
            let mut row = vec![t.to_string()];
            for x in h.iter() {
                row.push(x.re.to_string());
                row.push(x.im.to_string());
            }
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn trapezoid(samples: &[(f64, CVector)], g: &[C64]) -> CVector {
    let n = samples.len();
    let dt = 1.0 / (n - 1) as f64;
    let mut acc = CVector::zeros(samples[0].1.len());
    for (i, ((_, h), gi)) in samples.iter().zip(g).enumerate() {
        let w = if i == 0 || i == n - 1 { 0.5 * dt } else { dt };
        acc += h * (gi * w);
    }
    acc
}

fn check_endpoint(variety: &ConeVariety, h: &CVector, which: u8) -> Result<(), ConvexError> {
    variety.check_member(h, MEMBERSHIP_TOL).map_err(|source| ConvexError::EndpointOffCone { which, source })
}

/// Cone path `h` with the given endpoints and `|trapezoid(h g) - v| < eps`, sampled
/// at `t_i = i/(N - 1)` where `g` holds the `N` weight samples.
pub fn integrate_to_target(
    variety: &ConeVariety,
    endpoints: (&CVector, &CVector),
    g: &[C64],
    target: &CVector,
    eps: f64,
) -> Result<ConePath, ConvexError> {
    let n = variety.dim();
    if target.len() != n {
        return Err(ConvexError::DimensionMismatch { expected: n, got: target.len() });
    }
    check_endpoint(variety, endpoints.0, 0)?;
    check_endpoint(variety, endpoints.1, 1)?;
    if !(eps > 0.0) {
        return Err(ConvexError::InvalidTolerance(eps));
    }
    let count = g.len();
    let min_samples = (8.0 * MIN_TRANSITION_INTERVALS) as usize + 1;
    if count < min_samples {
        return Err(ConvexError::TooFewSamples { min: min_samples, got: count });
    }
    if let Some(index) = g.iter().position(|x| *x == C64::from(0.0) || !x.is_finite()) {
        return Err(ConvexError::VanishingWeight { index });
    }
    let a = endpoints.0 * g[0];
    let b = endpoints.1 * g[count - 1];
    let (plan, zero_target) = plan_for(variety, &a, &b, target, eps)?;
    let dt = 1.0 / (count - 1) as f64;
    let delta = plan.delta.max(MIN_TRANSITION_INTERVALS * dt);

    let lay = if zero_target {
        layout(variety, &a, &b, None, delta)?
    } else {
        // fixed point for the plateau target: plateaus + arcs integrate to v
        let scale = target.norm().max(plan.radius);
        let mut plateau_target = target.clone();
        let mut lay = layout(variety, &a, &b, Some(&plateau_target), delta)?;
        for _ in 0..16 {
            let residual = target - lay.integral(variety);
            if residual.norm() <= 1e-14 * scale {
                break;
            }
            plateau_target += residual / C64::from(1.0 - 4.0 * delta);
            lay = layout(variety, &a, &b, Some(&plateau_target), delta)?;
        }
        lay
    };

    let mut samples: Vec<(f64, CVector)> = (0..count)
        .into_par_iter()
        .map(|i| {
            let t = i as f64 * dt;
            (t, lay.eval(variety, t) / g[i])
        })
        .collect();
    samples[0].1 = endpoints.0.clone();
    samples[count - 1].1 = endpoints.1.clone();
    let off_cone = samples.par_iter().find_first(|(_, h)| !(variety.scaled_residual(h) <= MEMBERSHIP_TOL) || h.norm() == 0.0);
    if let Some((t, h)) = off_cone {
        return Err(ConvexError::OffCone { t: *t, residual: variety.scaled_residual(h) });
    }
    let achieved = (trapezoid(&samples, g) - target).norm();
    if !(achieved < eps) {
        let per_transition = AUTO_TRANSITION_INTERVALS / plan.delta;
        return Err(ConvexError::Unachievable {
            eps,
            achieved,
            samples: count,
            required: (per_transition.ceil() as usize + 1).max(count + 1),
        });
    }
    let min_g = g.iter().map(|x| x.norm()).fold(f64::INFINITY, f64::min);
    Ok(ConePath {
        samples,
        radius: plan.radius / min_g,
        delta,
        achieved_error: achieved,
        plateaus: (lay.p1 / g[0], lay.p2 / g[count - 1]),
    })
}

/// [`integrate_to_target`] with the sample count chosen from the plan (capped at
/// [`MAX_AUTO_SAMPLES`]) and `g` sampled from a function.
pub fn integrate_to_target_auto(
    variety: &ConeVariety,
    endpoints: (&CVector, &CVector),
    g: impl Fn(f64) -> C64,
    target: &CVector,
    eps: f64,
) -> Result<ConePath, ConvexError> {
    check_endpoint(variety, endpoints.0, 0)?;
    check_endpoint(variety, endpoints.1, 1)?;
    if !(eps > 0.0) {
        return Err(ConvexError::InvalidTolerance(eps));
    }
    let (g0, g1) = (g(0.0), g(1.0));
    if g0 == C64::from(0.0) || g1 == C64::from(0.0) {
        return Err(ConvexError::VanishingWeight { index: 0 });
    }
    let (plan, _) = plan_for(variety, &(endpoints.0 * g0), &(endpoints.1 * g1), target, eps)?;
    let count = plan.recommended_samples;
    let weights: Vec<C64> = (0..count).map(|i| g(i as f64 / (count - 1) as f64)).collect();
    integrate_to_target(variety, endpoints, &weights, target, eps)
}

/// Plan (radius, transition width, recommended density) for given data.
pub fn plan(
    variety: &ConeVariety,
    endpoints: (&CVector, &CVector),
    weight_ends: (C64, C64),
    target: &CVector,
    eps: f64,
) -> Result<ConvexPlan, ConvexError> {
    let a = endpoints.0 * weight_ends.0;
    let b = endpoints.1 * weight_ends.1;
    Ok(plan_for(variety, &a, &b, target, eps)?.0)
}

/// Extend the derivative of `curve` over an arc from `q1` to `q2` (given by its
/// samples at uniform parameter values): a cone path `h` with `h(0) = f(q1)`,
/// `h(1) = f(q2)` and `\int h dz ~ F(q2) - F(q1)` along the arc.
pub fn attach_arc(curve: &DirectedCurve, q1: C64, q2: C64, arc: &[C64], eps: f64) -> Result<ConePath, ConvexError> {
    for &z in [q1, q2].iter() {
        if !curve.domain().contains(z) {
            return Err(ConvexError::OutsideDomain { z });
        }
    }
    if arc.len() < 2 {
        return Err(ConvexError::TooFewSamples { min: 2, got: arc.len() });
    }
    let scale = 1e-12 * (1.0 + q1.norm() + q2.norm());
    if (arc[0] - q1).norm() > scale || (arc[arc.len() - 1] - q2).norm() > scale {
        return Err(ConvexError::ArcEndpoints);
    }
    let target = curve.eval(q2) - curve.eval(q1);
    let h0 = curve.derivative().eval(q1);
    let h1 = curve.derivative().eval(q2);
    let count = arc.len();
    let dt = 1.0 / (count - 1) as f64;
    let g: Vec<C64> = (0..count)
        .map(|k| {
            let (lo, hi) = (k.saturating_sub(1), (k + 1).min(count - 1));
            (arc[hi] - arc[lo]) / ((hi - lo) as f64 * dt)
        })
        .collect();
    if g.iter().all(|x| *x == C64::from(0.0)) {
        if target.norm() > eps {
            return Err(ConvexError::InfeasibleArc { norm: target.norm() });
        }
        check_endpoint(curve.variety(), &h0, 0)?;
        return Ok(ConePath {
            samples: (0..count).map(|k| (k as f64 * dt, h0.clone())).collect(),
            radius: h0.norm(),
            delta: 0.0,
            achieved_error: target.norm(),
            plateaus: (h0.clone(), h0),
        });
    }
    integrate_to_target(curve.variety(), (&h0, &h1), &g, &target, eps)
}

/// Unit weight samples for [`integrate_to_target`].
pub fn unit_weights(count: usize) -> Vec<C64> {
    vec![C64::from(1.0); count]
}

/// The straight arc `q1 + t (q2 - q1)` sampled at `count` points.
pub fn straight_arc(q1: C64, q2: C64, count: usize) -> Vec<C64> {
    let count = count.max(2);
    (0..count).map(|k| q1 + (q2 - q1) * (k as f64 / (count - 1) as f64)).collect()
}
