//! Growth of the first two coordinates along circles about the outer center.
//!
//! `min_{|z - c_0| = r} max(|F_1(z)|, |F_2(z)|)` increasing with `r` is what a
//! proper projection to `C^2` looks like on a sample; nothing more is claimed.

use rayon::prelude::*;
use serde::Serialize;

use super::{CurveError, DirectedCurve};
use crate::domain::Disc;
use crate::C64;

/// Samples per shell.
pub const SHELL_SAMPLES: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthRow {
    pub radius: f64,
    /// `min` over the shell of `max(|F_1|, |F_2|)`.
    pub value: f64,
    /// Where the minimum is attained.
    pub at: C64,
}

/// One row per shell radius, in the given order.
pub fn growth_profile(curve: &DirectedCurve, shells: &[f64]) -> Result<Vec<GrowthRow>, CurveError> {
    if curve.variety().dim() < 2 {
        return Err(CurveError::DimensionMismatch { expected: 2, got: curve.variety().dim() });
    }
    let center = curve.domain().outer().center;
    shells
        .iter()
        .map(|&radius| {
            let circle = Disc::new(center, radius).map_err(|_| CurveError::ShellOutside { radius })?;
            let points = circle.circle_points(SHELL_SAMPLES);
            if !points.iter().all(|&z| curve.domain().contains(z)) {
                return Err(CurveError::ShellOutside { radius });
            }
            let values: Vec<f64> = points
                .par_iter()
                .map(|&z| {
                    let v = curve.eval(z);
                    v[0].norm().max(v[1].norm())
                })
                .collect();
            let (k, &value) = values
                .iter()
                .enumerate()
                .fold((0, &f64::INFINITY), |best, (k, v)| if *v < *best.1 { (k, v) } else { best });
            Ok(GrowthRow { radius, value, at: points[k] })
        })
        .collect()
}
