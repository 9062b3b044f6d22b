//! Circular domains: an outer disc with finitely many disjoint closed discs removed.
//!
//! The first homology has rank `l` (number of holes). Loop `j` is the circle around
//! hole `j` of radius `s_j = sqrt(r_j d_j)`, where `d_j` is the distance from the hole
//! center to the nearest other boundary circle; it separates hole `j` from every
//! other boundary component. Loops are traversed counterclockwise and discretized
//! by the trapezoidal rule, which integrates Laurent modes `|k| < N` exactly.

use std::f64::consts::PI;

use thiserror::Error;

use crate::{C64, I};

/// Default number of quadrature nodes per loop.
pub const DEFAULT_LOOP_NODES: usize = 256;
/// Minimum number of quadrature nodes per loop.
pub const MIN_LOOP_NODES: usize = 16;

const CONTAINS_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("radius must be positive and finite, got {0}")]
    InvalidRadius(f64),
    #[error("hole {index} is not strictly inside the outer disc")]
    HoleTouchesOuter { index: usize },
    #[error("holes {first} and {second} overlap or touch")]
    HolesOverlap { first: usize, second: usize },
    #[error("loop index {index} out of range (domain has {rank} loops)")]
    LoopOutOfRange { index: usize, rank: usize },
    #[error("need at least {min} quadrature nodes, got {got}")]
    TooFewNodes { min: usize, got: usize },
}

/// Closed disc `|z - center| <= radius`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disc {
    pub center: C64,
    pub radius: f64,
}

impl Disc {
    pub fn new(center: C64, radius: f64) -> Result<Self, DomainError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(DomainError::InvalidRadius(radius));
        }
        Ok(Self { center, radius })
    }

    /// `count` equally spaced points on the boundary circle.
    pub fn circle_points(&self, count: usize) -> Vec<C64> {
        (0..count)
            .map(|k| self.center + C64::from_polar(self.radius, 2.0 * PI * k as f64 / count as f64))
            .collect()
    }
}

/// Trapezoidal quadrature nodes for `\oint f dz` around one homology loop.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopNodes {
    pub loop_index: usize,
    pub center: C64,
    pub radius: f64,
    pub nodes: Vec<C64>,
    pub weights: Vec<C64>,
}

impl LoopNodes {
    /// `sum_k w_k f(node_k)` for scalar integrands.
    pub fn integrate<F: Fn(C64) -> C64>(&self, f: F) -> C64 {
        self.nodes.iter().zip(&self.weights).map(|(&z, &w)| w * f(z)).sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Circular domain, taken as the closed set
/// `{|z - c_0| <= R_0} \ union {|z - c_i| < r_i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarDomain {
    outer: Disc,
    holes: Vec<Disc>,
}

impl PlanarDomain {
    pub fn new(outer: Disc, holes: Vec<Disc>) -> Result<Self, DomainError> {
        for (i, h) in holes.iter().enumerate() {
            if (h.center - outer.center).norm() + h.radius >= outer.radius {
                return Err(DomainError::HoleTouchesOuter { index: i });
            }
            for (j, other) in holes.iter().enumerate().skip(i + 1) {
                if (h.center - other.center).norm() <= h.radius + other.radius {
                    return Err(DomainError::HolesOverlap { first: i, second: j });
                }
            }
        }
        Ok(Self { outer, holes })
    }

    /// Disc of radius `radius` around the origin.
    pub fn disc(radius: f64) -> Result<Self, DomainError> {
        Self::new(Disc::new(C64::from(0.0), radius)?, Vec::new())
    }

    /// Annulus `inner <= |z| <= outer`.
    pub fn annulus(inner: f64, outer: f64) -> Result<Self, DomainError> {
        Self::new(Disc::new(C64::from(0.0), outer)?, vec![Disc::new(C64::from(0.0), inner)?])
    }

    pub fn outer(&self) -> &Disc {
        &self.outer
    }

    pub fn holes(&self) -> &[Disc] {
        &self.holes
    }

    pub fn hole_centers(&self) -> Vec<C64> {
        self.holes.iter().map(|h| h.center).collect()
    }

    /// Rank `l` of the first homology group.
    pub fn homology_rank(&self) -> usize {
        self.holes.len()
    }

    /// Membership in the closed domain, with a small relative slack.
    pub fn contains(&self, z: C64) -> bool {
        let slack = CONTAINS_TOL * self.outer.radius;
        if (z - self.outer.center).norm() > self.outer.radius + slack {
            return false;
        }
        self.holes.iter().all(|h| (z - h.center).norm() >= h.radius - slack)
    }

    /// Distance from the center of hole `j` to the nearest other boundary circle.
    fn clearance(&self, j: usize) -> f64 {
        let h = &self.holes[j];
        let mut d = self.outer.radius - (h.center - self.outer.center).norm();
        for (i, other) in self.holes.iter().enumerate() {
            if i != j {
                d = d.min((h.center - other.center).norm() - other.radius);
            }
        }
        d
    }

    /// Radius of homology loop `j`.
    pub fn loop_radius(&self, j: usize) -> Result<f64, DomainError> {
        self.check_loop(j)?;
        Ok((self.holes[j].radius * self.clearance(j)).sqrt())
    }

    fn check_loop(&self, j: usize) -> Result<(), DomainError> {
        if j >= self.holes.len() {
            return Err(DomainError::LoopOutOfRange { index: j, rank: self.holes.len() });
        }
        Ok(())
    }

    /// Trapezoidal nodes on loop `j`: `z_k = c_j + s_j e^{i tau_k}`,
    /// `w_k = i s_j (2 pi / N) e^{i tau_k}`.
    pub fn loop_nodes(&self, j: usize, count: usize) -> Result<LoopNodes, DomainError> {
        self.check_loop(j)?;
        if count < MIN_LOOP_NODES {
            return Err(DomainError::TooFewNodes { min: MIN_LOOP_NODES, got: count });
        }
        let center = self.holes[j].center;
        let radius = self.loop_radius(j)?;
        let step = 2.0 * PI / count as f64;
        let mut nodes = Vec::with_capacity(count);
        let mut weights = Vec::with_capacity(count);
        for k in 0..count {
            let e = C64::from_polar(1.0, step * k as f64);
            nodes.push(center + e * radius);
            weights.push(I * e * (radius * step));
        }
        Ok(LoopNodes { loop_index: j, center, radius, nodes, weights })
    }

    /// Nodes for every loop.
    pub fn all_loop_nodes(&self, count: usize) -> Result<Vec<LoopNodes>, DomainError> {
        (0..self.homology_rank()).map(|j| self.loop_nodes(j, count)).collect()
    }

    /// `count` points on every boundary circle (outer first, then holes).
    pub fn boundary_points(&self, count: usize) -> Vec<C64> {
        let mut pts = self.outer.circle_points(count);
        for h in &self.holes {
            pts.extend(h.circle_points(count));
        }
        pts
    }

    /// Points used for pointwise certification: all boundary circles and all loop
    /// circles, `count` points each. For a disc the mid circle stands in for loops.
    pub fn certification_nodes(&self, count: usize) -> Vec<C64> {
        let mut pts = self.boundary_points(count);
        if self.holes.is_empty() {
            let mid = Disc { center: self.outer.center, radius: 0.5 * self.outer.radius };
            pts.extend(mid.circle_points(count));
        }
        for j in 0..self.holes.len() {
            let center = self.holes[j].center;
            let radius = (self.holes[j].radius * self.clearance(j)).sqrt();
            pts.extend(Disc { center, radius }.circle_points(count));
        }
        pts
    }

    /// `points` x `points` lattice over the bounding square of the outer disc,
    /// restricted to the closed domain. Returns the points and the lattice spacing.
    /// The lattice is symmetric under `z -> 2 c_0 - z`.
    pub fn grid_points(&self, points: usize) -> (Vec<C64>, f64) {
        let g = points.max(2);
        let r = self.outer.radius;
        let spacing = 2.0 * r / (g - 1) as f64;
        let mut out = Vec::new();
        for a in 0..g {
            for b in 0..g {
                let z = self.outer.center + C64::new(-r + spacing * b as f64, -r + spacing * a as f64);
                if self.contains(z) {
                    out.push(z);
                }
            }
        }
        (out, spacing)
    }

    /// Points spread over the domain: the loop circles (or the mid circle of a
    /// disc), about `count` in total.
    pub fn spread_points(&self, count: usize) -> Vec<C64> {
        let circles: Vec<Disc> = if self.holes.is_empty() {
            vec![Disc { center: self.outer.center, radius: 0.5 * self.outer.radius }]
        } else {
            (0..self.holes.len())
                .map(|j| Disc {
                    center: self.holes[j].center,
                    radius: (self.holes[j].radius * self.clearance(j)).sqrt(),
                })
                .collect()
        };
        let per = count.div_ceil(circles.len()).max(1);
        circles.iter().flat_map(|c| c.circle_points(per)).collect()
    }
}
