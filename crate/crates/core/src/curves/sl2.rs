//! The biholomorphism `T: {z_3 != 0} -> SL_2(C) \ {z_11 = 0}`,
//!
//! ```text
//! T(z) = (1/z_3) [[1, z_1 + i z_2], [z_1 - i z_2, z_1^2 + z_2^2 + z_3^2]],
//! ```
//!
//! carries null curves in `C^3` to null curves in `SL_2(C)` (curves whose
//! derivative is a singular matrix). The image is sampled on a grid because `T`
//! divides by `F_3`.

use rayon::prelude::*;
use serde::Serialize;

use super::{CurveError, DirectedCurve};
use crate::{CVector, C64, I};

/// Central-difference step for the null check on the image.
pub const SL2_FD_STEP: f64 = 1e-4;
/// `|F_3|` below this (relative to `1 + |F|`) counts as hitting `z_3 = 0`.
const THIRD_COMPONENT_FLOOR: f64 = 1e-6;

/// `T(z)` as `[z_11, z_12, z_21, z_22]`, or `None` on `z_3 = 0`.
pub fn sl2_map(z: &CVector) -> Option<[C64; 4]> {
    let (z1, z2, z3) = (z[0], z[1], z[2]);
    if z3 == C64::from(0.0) {
        return None;
    }
    let inv = z3.inv();
    Some([inv, (z1 + I * z2) * inv, (z1 - I * z2) * inv, (z1 * z1 + z2 * z2 + z3 * z3) * inv])
}

fn det(m: &[C64; 4]) -> C64 {
    m[0] * m[3] - m[1] * m[2]
}

/// Grid samples of `T o F`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sl2Curve {
    pub points: Vec<C64>,
    /// `[z_11, z_12, z_21, z_22]` at each point.
    pub entries: Vec<[C64; 4]>,
    /// `max |det - 1|`.
    pub det_residual: f64,
    /// `max |det D| / max(1, |D|_F^2)` where `D` is the central-difference
    /// derivative of the entries along the curve.
    pub null_residual: f64,
    pub min_abs_f3: f64,
}

/// Apply `T` to the curve on the `grid x grid` lattice of its domain and check
/// `det = 1` and the null condition of the image.
pub fn to_sl2(curve: &DirectedCurve, grid: usize) -> Result<Sl2Curve, CurveError> {
    if !curve.variety().is_null3() {
        return Err(CurveError::RequiresNull3);
    }
    let (points, _) = curve.domain().grid_points(grid);
    let h = SL2_FD_STEP;
    let per_point: Vec<Result<([C64; 4], f64, f64, f64), CurveError>> = points
        .par_iter()
        .map(|&z| {
            let v = curve.eval(z);
            let f3 = v[2].norm();
            if f3 < THIRD_COMPONENT_FLOOR * (1.0 + v.norm()) {
                return Err(CurveError::ThirdComponentVanishes { z, value: f3 });
            }
            let m = sl2_map(&v).ok_or(CurveError::ThirdComponentVanishes { z, value: 0.0 })?;
            let plus = sl2_map(&curve.eval(z + h));
            let minus = sl2_map(&curve.eval(z - h));
            let null = match (plus, minus) {
                (Some(p), Some(q)) => {
                    let d: [C64; 4] = std::array::from_fn(|k| (p[k] - q[k]) / (2.0 * h));
                    let frob: f64 = d.iter().map(|x| x.norm_sqr()).sum();
                    det(&d).norm() / frob.max(1.0)
                }
                _ => f64::INFINITY,
            };
            Ok((m, (det(&m) - 1.0).norm(), null, f3))
        })
        .collect();
    let mut out = Sl2Curve {
        points: points.clone(),
        entries: Vec::with_capacity(points.len()),
        det_residual: 0.0,
        null_residual: 0.0,
        min_abs_f3: f64::INFINITY,
    };
    for r in per_point {
        let (m, det_res, null, f3) = r?;
        out.entries.push(m);
        out.det_residual = out.det_residual.max(det_res);
        out.null_residual = out.null_residual.max(null);
        out.min_abs_f3 = out.min_abs_f3.min(f3);
    }
    Ok(out)
}
