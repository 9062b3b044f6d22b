//! Named seed maps for the null quadric in `C^3`.
//!
//! All seeds are written in `u = z - c_0` (outer center), except the catenoid,
//! whose poles sit at the center of hole 0.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::domain::PlanarDomain;
use crate::holo::LaurentMap;
use crate::{CVector, C64, I};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeneratorError {
    #[error("unknown generator '{0}' (expected one of: catenoid, enneper, line, even-selfcross)")]
    Unknown(String),
    #[error("generator '{0}' needs a domain with at least one hole")]
    NeedsHole(&'static str),
}

/// Names accepted by [`by_name`].
pub const NAMES: [&str; 4] = ["catenoid", "enneper", "line", "even-selfcross"];

fn v3(a: C64, b: C64, c: C64) -> CVector {
    CVector::from_vec(vec![a, b, c])
}

fn re(x: f64) -> C64 {
    C64::from(x)
}

/// `f(u) = ((1 - u^2)/(2u^2), i(1 + u^2)/(2u^2), 1/u)`, `u = z - c_hole0`.
/// Its single nonzero period is `(0, 0, 2 pi i)`.
pub fn catenoid(domain: &PlanarDomain) -> Result<LaurentMap, GeneratorError> {
    if domain.homology_rank() == 0 {
        return Err(GeneratorError::NeedsHole("catenoid"));
    }
    let mut f = LaurentMap::zeros(3, domain);
    f.set_poly(0, v3(re(-0.5), I * 0.5, re(0.0)));
    f.set_principal(0, 1, v3(re(0.0), re(0.0), re(1.0)));
    f.set_principal(0, 2, v3(re(0.5), I * 0.5, re(0.0)));
    Ok(f)
}

/// Enneper: `f(u) = ((1 - u^2)/2, i(1 + u^2)/2, u)`.
pub fn enneper(domain: &PlanarDomain) -> LaurentMap {
    let mut f = LaurentMap::zeros(3, domain);
    f.set_poly(0, v3(re(0.5), I * 0.5, re(0.0)));
    f.set_poly(1, v3(re(0.0), re(0.0), re(1.0)));
    f.set_poly(2, v3(re(-0.5), I * 0.5, re(0.0)));
    f
}

/// Constant null direction `(1, i, 0)`; integrates to a straight null line.
pub fn line(domain: &PlanarDomain) -> LaurentMap {
    LaurentMap::constant(domain, v3(re(1.0), I, re(0.0)))
}

/// Odd null map `f(u) = (u(1 - u^4)/2, i u(1 + u^4)/2, u^3)`; its primitive
/// `F(u) = (u^2/4 - u^6/12, i(u^2/4 + u^6/12), u^4/4)` is even, so `F(u) = F(-u)`.
pub fn even_selfcross(domain: &PlanarDomain) -> LaurentMap {
    let mut f = LaurentMap::zeros(3, domain);
    f.set_poly(1, v3(re(0.5), I * 0.5, re(0.0)));
    f.set_poly(3, v3(re(0.0), re(0.0), re(1.0)));
    f.set_poly(5, v3(re(-0.5), I * 0.5, re(0.0)));
    f
}

pub fn by_name(name: &str, domain: &PlanarDomain) -> Result<LaurentMap, GeneratorError> {
    match name {
        "catenoid" => catenoid(domain),
        "enneper" => Ok(enneper(domain)),
        "line" => Ok(line(domain)),
        "even-selfcross" => Ok(even_selfcross(domain)),
        other => Err(GeneratorError::Unknown(other.to_string())),
    }
}

/// Seeded random Laurent map (not cone-valued) with every power up to `degree`.
/// Coefficients are complex normals scaled so each term has unit size on the
/// circle it belongs to: `a_p R_0^{-p}` for the polynomial part and `b_p r_i^p`
/// at hole `i`.
pub fn random_map(domain: &PlanarDomain, dim: usize, degree: usize, seed: u64) -> LaurentMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |scale: f64| {
        CVector::from_fn(dim, |_, _| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            C64::new(re, im) * scale
        })
    };
    let mut f = LaurentMap::zeros(dim, domain);
    let outer = domain.outer().radius;
    for p in 0..=degree {
        f.set_poly(p, draw(outer.powi(-(p as i32))));
    }
    for (i, hole) in domain.holes().iter().enumerate() {
        for p in 1..=degree {
            f.set_principal(i, p, draw(hole.radius.powi(p as i32)));
        }
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::ConeVariety;

    #[test]
    fn seeds_are_null() {
        let d = PlanarDomain::annulus(0.5, 1.5).unwrap();
        let cone = ConeVariety::null3();
        for name in NAMES {
            let f = by_name(name, &d).unwrap();
            for z in d.certification_nodes(64) {
                let val = f.eval(z);
                assert!(cone.membership_residual(&val).norm() < 1e-13 * (1.0 + val.norm_squared()), "{name}");
            }
        }
    }

    #[test]
    fn even_primitive_is_even() {
        let d = PlanarDomain::annulus(0.5, 1.5).unwrap();
        let big_f = even_selfcross(&d).antiderivative().unwrap();
        let z = C64::new(0.9, 0.4);
        assert!((big_f.eval(z) - big_f.eval(-z)).norm() < 1e-15);
    }

    #[test]
    fn random_maps_are_reproducible() {
        let d = PlanarDomain::annulus(0.5, 1.5).unwrap();
        assert_eq!(random_map(&d, 3, 4, 9), random_map(&d, 3, 4, 9));
        assert_ne!(random_map(&d, 3, 4, 9), random_map(&d, 3, 4, 10));
        assert_eq!(random_map(&d, 2, 5, 1).degree(), 5);
    }

    #[test]
    fn unknown_and_holeless() {
        let disc = PlanarDomain::disc(1.0).unwrap();
        assert!(matches!(by_name("helicoid", &disc), Err(GeneratorError::Unknown(_))));
        assert!(matches!(catenoid(&disc), Err(GeneratorError::NeedsHole(_))));
    }
}
