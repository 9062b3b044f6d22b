//! Directed holomorphic immersions of circular planar domains.
//!
//! A directed immersion `F: M -> C^n` has derivative `f = dF/dz` taking values in a
//! quadric cone `A = {z^T Q z = 0}` minus the origin (for `Q = I_3` these are the
//! classical null curves, whose real parts are minimal surfaces in R^3).
//!
//! The crate is organized bottom-up:
//!
//! - [`cone`]: the quadric cone, its tangent spaces, the linear tangential fields
//!   `V_{j,k}` and their flows, and null-pair decompositions.
//! - [`domain`]: circular multiply-connected domains and loop quadrature.
//! - [`holo`]: `C^n`-valued Laurent maps (evaluation, calculus, periods, fitting).
//! - [`periods`]: deformation families built from compositions of flows, the
//!   period Jacobian, nondegeneracy, and Gauss-Newton period correction.
//! - [`convexint`]: cone-valued paths with a prescribed weighted integral.
//! - [`curves`]: integration to curves and their certification (directedness,
//!   embedding gap, SL2 image, minimal-surface meshes, growth diagnostics).
//! - [`generators`]: the named seed maps used by the CLI and the tests.

pub mod cone;
pub mod convexint;
pub mod curves;
pub mod domain;
pub mod generators;
pub mod holo;
pub mod json;
pub mod linalg;
pub mod periods;

pub use cone::{ConeError, ConePoint, ConeVariety, FieldPair};
pub use domain::{Disc, DomainError, LoopNodes, PlanarDomain};
pub use holo::{fit_map, HoloError, LaurentMap, PeriodMode, PeriodVector};
pub use convexint::{attach_arc, integrate_to_target, integrate_to_target_auto, ConePath, ConvexError};
pub use curves::{integrate_curve, CurveError, DirectedCurve};
pub use periods::{build_family, correct_periods, nondegeneracy_rank, DeformationFamily, FamilySettings, PeriodError, SolverSettings};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Dynamically sized complex column vector.
pub type CVector = nalgebra::DVector<C64>;
/// Dynamically sized complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;

/// Imaginary unit.
pub const I: C64 = C64::new(0.0, 1.0);
