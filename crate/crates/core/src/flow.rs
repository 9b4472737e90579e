//! The cellular flow: stream function, velocity and the separatrix lattice.
//!
//! Everything here is evaluated analytically on every call.

use std::f64::consts::PI;

use crate::grid::Grid;

/// A point in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2 {
    pub x1: f64,
    pub x2: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x1: 0.0, x2: 0.0 };

    pub fn new(x1: f64, x2: f64) -> Self {
        Self { x1, x2 }
    }

    pub fn norm(&self) -> f64 {
        self.x1.hypot(self.x2)
    }

    pub fn is_finite(&self) -> bool {
        self.x1.is_finite() && self.x2.is_finite()
    }
}

impl std::ops::Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x1, -self.x2)
    }
}

impl std::ops::Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x1 + o.x1, self.x2 + o.x2)
    }
}

/// Period of the velocity field in each coordinate.
pub const PERIOD: f64 = 2.0;

/// Flow strength. The period is fixed at [`PERIOD`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowParams {
    amplitude: f64,
}

impl FlowParams {
    pub fn new(amplitude: f64) -> crate::Result<Self> {
        if !(amplitude >= 0.0) || !amplitude.is_finite() {
            return Err(crate::Error::InvalidArgument(format!(
                "amplitude must be finite and >= 0, got {amplitude}"
            )));
        }
        Ok(Self { amplitude })
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn period(&self) -> f64 {
        PERIOD
    }

    /// Scaled drift `A v(p)`.
    pub fn drift(&self, p: Point2) -> (f64, f64) {
        let (v1, v2) = velocity(p);
        (self.amplitude * v1, self.amplitude * v2)
    }
}

/// `H(x) = sin(πx₁) sin(πx₂) / π`.
pub fn stream(p: Point2) -> f64 {
    (PI * p.x1).sin() * (PI * p.x2).sin() / PI
}

/// Analytic gradient of [`stream`].
pub fn stream_gradient(p: Point2) -> (f64, f64) {
    let (s1, c1) = (PI * p.x1).sin_cos();
    let (s2, c2) = (PI * p.x2).sin_cos();
    (c1 * s2, s1 * c2)
}

/// `v = (−∂₂H, ∂₁H) = (−sin πx₁ cos πx₂, cos πx₁ sin πx₂)`.
pub fn velocity(p: Point2) -> (f64, f64) {
    let (s1, c1) = (PI * p.x1).sin_cos();
    let (s2, c2) = (PI * p.x2).sin_cos();
    (-s1 * c2, c1 * s2)
}

/// Nodes of `grid` (row-major index) where `|H| < tol`.
pub fn separatrix_nodes(grid: &Grid, tol: f64) -> Vec<usize> {
    (0..grid.node_count())
        .filter(|&k| stream(grid.node_point(k)).abs() < tol)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Topology};
    use proptest::prelude::*;

    #[test]
    fn stream_examples() {
        assert!((stream(Point2::new(0.5, 0.5)) - 1.0 / PI).abs() < 1e-15);
        assert!(stream(Point2::new(1.0, 0.7)).abs() < 1e-15);
        assert!((stream(Point2::new(0.25, 0.25)) - 0.5 / PI).abs() < 1e-15);
    }

    #[test]
    fn velocity_examples() {
        let (a, b) = velocity(Point2::new(0.5, 0.5));
        assert!(a.abs() < 1e-15 && b.abs() < 1e-15);
        let (a, b) = velocity(Point2::new(0.5, 0.0));
        assert_eq!((a, b), (-1.0, 0.0));
        let (a, b) = velocity(Point2::new(0.0, 0.5));
        assert_eq!((a, b), (0.0, 1.0));
    }

    #[test]
    fn separatrix_on_unit_square_is_its_boundary() {
        let g = Grid::with_origin(Topology::DirichletSquare, 5, 5, Point2::ORIGIN, 0.25).unwrap();
        let nodes = separatrix_nodes(&g, 1e-12);
        assert_eq!(nodes.len(), 16);
        for k in nodes {
            let (i, j) = g.node_ij(k);
            assert!(i == 0 || j == 0 || i == 4 || j == 4);
        }
    }

    #[test]
    fn separatrix_lattice_lines() {
        let g = build_grid(Topology::DirichletSquare, 2.0, 9).unwrap();
        for k in separatrix_nodes(&g, 1e-12) {
            let p = g.node_point(k);
            assert!(p.x1.fract() == 0.0 || p.x2.fract() == 0.0);
        }
        let g = build_grid(Topology::DirichletSquare, 4.0, 9).unwrap();
        assert_eq!(separatrix_nodes(&g, 1e-12).len(), 65);
    }

    #[test]
    fn separatrix_nonempty_for_tol_at_least_h() {
        let g = build_grid(Topology::DirichletSquare, 3.0, 20).unwrap();
        assert!(!separatrix_nodes(&g, g.spacing()).is_empty());
    }

    proptest! {
        #[test]
        fn divergence_free(x1 in -3.0f64..3.0, x2 in -3.0f64..3.0, h in 1e-4f64..1e-3) {
            let d1 = (velocity(Point2::new(x1 + h, x2)).0 - velocity(Point2::new(x1 - h, x2)).0) / (2.0 * h);
            let d2 = (velocity(Point2::new(x1, x2 + h)).1 - velocity(Point2::new(x1, x2 - h)).1) / (2.0 * h);
            prop_assert!((d1 + d2).abs() <= 10.0 * h * h);
        }

        #[test]
        fn velocity_tangent_to_level_sets(x1 in -3.0f64..3.0, x2 in -3.0f64..3.0) {
            let p = Point2::new(x1, x2);
            let (v1, v2) = velocity(p);
            let (g1, g2) = stream_gradient(p);
            prop_assert!((v1 * g1 + v2 * g2).abs() <= 1e-12);
            prop_assert!(stream(p).abs() <= 1.0 / PI);
            prop_assert!(v1.abs() <= 1.0 && v2.abs() <= 1.0);
        }

        #[test]
        fn point_symmetry_is_exact(x1 in -3.0f64..3.0, x2 in -3.0f64..3.0) {
            let p = Point2::new(x1, x2);
            let (a1, a2) = velocity(p);
            let (b1, b2) = velocity(-p);
            prop_assert_eq!(a1, -b1);
            prop_assert_eq!(a2, -b2);
            prop_assert_eq!(stream(p), stream(-p));
        }

        #[test]
        fn periodic(x1 in -3.0f64..3.0, x2 in -3.0f64..3.0) {
            let p = Point2::new(x1, x2);
            let v = velocity(p);
            for q in [p + Point2::new(PERIOD, 0.0), p + Point2::new(0.0, PERIOD)] {
                let w = velocity(q);
                prop_assert!((v.0 - w.0).abs() < 1e-13 && (v.1 - w.1).abs() < 1e-13);
            }
        }
    }
}
