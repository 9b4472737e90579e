//! Uniform Cartesian grids, grid-sampled fields and the discrete
//! advection-diffusion operator.
//!
//! Nodes are stored row-major with `x₁` fastest: node `k = j·n1 + i` sits at
//! `origin + (i h, j h)`. Dirichlet topologies carry an unknown numbering that
//! skips boundary and exterior nodes; the periodic cell numbers every node.

mod assemble;
mod sparse;

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

pub use assemble::{apply_operator, assemble, assemble_with, bernoulli, Drift, Scheme, Stencil};
pub use sparse::SparseMatrix;

use crate::flow::{Point2, PERIOD};
use crate::{Error, Result};

const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Topology {
    /// Square with homogeneous Dirichlet data on its four sides.
    DirichletSquare,
    /// Disk centred at the origin, boundary handled by node masking.
    DirichletDisk { radius: f64 },
    /// One period `[−1, 1)²` of the velocity with wrap-around neighbours.
    PeriodicCell,
}

impl Topology {
    pub fn name(&self) -> &'static str {
        match self {
            Topology::DirichletSquare => "square",
            Topology::DirichletDisk { .. } => "disk",
            Topology::PeriodicCell => "periodic",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Grid {
    n1: usize,
    n2: usize,
    origin: Point2,
    spacing: f64,
    topology: Topology,
    unknown_of_node: Vec<usize>,
    node_of_unknown: Vec<usize>,
}

/// Lower-left corner for a square of side `side`.
///
/// Integer sides are placed so that every edge lies on a separatrix line
/// (`[0,1]²` for side 1, `[−L/2, L/2]²` for even `L`); other sides are
/// centred on the origin.
pub fn square_origin(side: f64) -> Point2 {
    let o = if side.fract() == 0.0 {
        -(side / 2.0).floor()
    } else {
        -side / 2.0
    };
    Point2::new(o, o)
}

/// Builds a grid covering the requested domain.
///
/// * `DirichletSquare`: side `extent`, `resolution` nodes per axis including
///   both boundary lines, `h = extent / (resolution − 1)`.
/// * `DirichletDisk`: `extent` is ignored in favour of the radius; nodes cover
///   `[−R, R]²`, `h = 2R / (resolution − 1)`.
/// * `PeriodicCell`: `extent` must equal the period 2, `h = 2 / resolution`.
pub fn build_grid(topology: Topology, extent: f64, resolution: usize) -> Result<Grid> {
    if resolution < 3 {
        return Err(Error::Resolution(resolution));
    }
    if !(extent > 0.0) {
        return Err(Error::InvalidArgument(format!("extent must be positive, got {extent}")));
    }
    let n = resolution;
    match topology {
        Topology::DirichletSquare => {
            Grid::with_origin(topology, n, n, square_origin(extent), extent / (n - 1) as f64)
        }
        Topology::DirichletDisk { radius } => {
            let h = 2.0 * radius / (n - 1) as f64;
            Grid::with_origin(topology, n, n, Point2::new(-radius, -radius), h)
        }
        Topology::PeriodicCell => {
            if (extent - PERIOD).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "periodic cell must span one period ({PERIOD}), got {extent}"
                )));
            }
            Grid::with_origin(topology, n, n, Point2::new(-1.0, -1.0), PERIOD / n as f64)
        }
    }
}

impl Grid {
    pub fn with_origin(
        topology: Topology,
        n1: usize,
        n2: usize,
        origin: Point2,
        spacing: f64,
    ) -> Result<Grid> {
        if n1 < 3 || n2 < 3 {
            return Err(Error::Resolution(n1.min(n2)));
        }
        if !(spacing > 0.0) || !origin.is_finite() {
            return Err(Error::InvalidArgument("grid spacing must be positive".into()));
        }
        if let Topology::DirichletDisk { radius } = topology {
            if !(radius > 0.0) {
                return Err(Error::InvalidArgument("disk radius must be positive".into()));
            }
        }
        if topology == Topology::PeriodicCell
            && ((n1 as f64 * spacing - PERIOD).abs() > 1e-9
                || (n2 as f64 * spacing - PERIOD).abs() > 1e-9)
        {
            return Err(Error::InvalidArgument("periodic cell must satisfy n·h = 2".into()));
        }
        let mut g = Grid {
            n1,
            n2,
            origin,
            spacing,
            topology,
            unknown_of_node: vec![NONE; n1 * n2],
            node_of_unknown: Vec::new(),
        };
        for k in 0..n1 * n2 {
            if g.is_unknown_node(k) {
                g.unknown_of_node[k] = g.node_of_unknown.len();
                g.node_of_unknown.push(k);
            }
        }
        Ok(g)
    }

    fn is_unknown_node(&self, k: usize) -> bool {
        let (i, j) = self.node_ij(k);
        match self.topology {
            Topology::PeriodicCell => true,
            Topology::DirichletSquare => i > 0 && j > 0 && i + 1 < self.n1 && j + 1 < self.n2,
            Topology::DirichletDisk { radius } => {
                i > 0
                    && j > 0
                    && i + 1 < self.n1
                    && j + 1 < self.n2
                    && self.node_point(k).norm() < radius
            }
        }
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn origin(&self) -> Point2 {
        self.origin
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn is_periodic(&self) -> bool {
        self.topology == Topology::PeriodicCell
    }

    pub fn node_count(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn unknown_count(&self) -> usize {
        self.node_of_unknown.len()
    }

    pub fn node_ij(&self, k: usize) -> (usize, usize) {
        (k % self.n1, k / self.n1)
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * self.n1 + i
    }

    pub fn node_point(&self, k: usize) -> Point2 {
        let (i, j) = self.node_ij(k);
        self.point_ij(i, j)
    }

    pub fn point_ij(&self, i: usize, j: usize) -> Point2 {
        Point2::new(
            self.origin.x1 + i as f64 * self.spacing,
            self.origin.x2 + j as f64 * self.spacing,
        )
    }

    pub fn unknown_index(&self, node: usize) -> Option<usize> {
        match self.unknown_of_node[node] {
            NONE => None,
            u => Some(u),
        }
    }

    pub fn node_of_unknown(&self, u: usize) -> usize {
        self.node_of_unknown[u]
    }

    pub fn unknown_nodes(&self) -> &[usize] {
        &self.node_of_unknown
    }

    /// Neighbour of `(i, j)` shifted by `(di, dj)` ∈ {−1, 0, 1}², wrapping on
    /// the periodic cell; `None` past the edge of a Dirichlet grid.
    pub fn neighbor(&self, i: usize, j: usize, di: isize, dj: isize) -> Option<usize> {
        let wrap = |c: usize, d: isize, n: usize| -> Option<usize> {
            let c = c as isize + d;
            if self.is_periodic() {
                Some(c.rem_euclid(n as isize) as usize)
            } else if c < 0 || c >= n as isize {
                None
            } else {
                Some(c as usize)
            }
        };
        Some(self.node_index(wrap(i, di, self.n1)?, wrap(j, dj, self.n2)?))
    }

    /// Nodes that are within `width` (in units of length) of a non-unknown
    /// node; used to exclude the masked rim of a disk.
    pub fn rim_distance_mask(&self, width: f64) -> Vec<bool> {
        let r = (width / self.spacing).ceil() as isize;
        let mut near = vec![false; self.node_count()];
        for k in 0..self.node_count() {
            if self.unknown_index(k).is_some() {
                continue;
            }
            let (i, j) = self.node_ij(k);
            for dj in -r..=r {
                for di in -r..=r {
                    let (a, b) = (i as isize + di, j as isize + dj);
                    if a >= 0 && b >= 0 && (a as usize) < self.n1 && (b as usize) < self.n2 {
                        near[self.node_index(a as usize, b as usize)] = true;
                    }
                }
            }
        }
        near
    }

    /// Expands a vector over unknowns into a field over all nodes.
    pub fn scatter(self: &Arc<Self>, unknowns: &[f64]) -> Result<ScalarField> {
        if unknowns.len() != self.unknown_count() {
            return Err(Error::DimensionMismatch { expected: self.unknown_count(), got: unknowns.len() });
        }
        let mut values = vec![0.0; self.node_count()];
        for (u, &k) in self.node_of_unknown.iter().enumerate() {
            values[k] = unknowns[u];
        }
        Ok(ScalarField { grid: Arc::clone(self), values })
    }

    /// Restricts node values to the unknowns.
    pub fn gather(&self, values: &[f64]) -> Vec<f64> {
        self.node_of_unknown.iter().map(|&k| values[k]).collect()
    }

    /// Samples `f` at every unknown node; boundary and exterior nodes hold 0.
    pub fn sample(self: &Arc<Self>, f: impl Fn(Point2) -> f64) -> ScalarField {
        let mut values = vec![0.0; self.node_count()];
        for &k in &self.node_of_unknown {
            values[k] = f(self.node_point(k));
        }
        ScalarField { grid: Arc::clone(self), values }
    }

    /// Quadrature weight of one node (`h²`).
    pub fn cell_area(&self) -> f64 {
        self.spacing * self.spacing
    }
}

/// Grid-spacing requirement `h·√max(A, 1) ≤ c` that resolves the
/// `O(1/√A)` boundary layers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolutionRule {
    pub max_h_sqrt_a: f64,
}

impl Default for ResolutionRule {
    fn default() -> Self {
        Self { max_h_sqrt_a: 0.4 }
    }
}

impl ResolutionRule {
    pub fn relaxed(max_h_sqrt_a: f64) -> Self {
        Self { max_h_sqrt_a }
    }

    pub fn max_spacing(&self, amplitude: f64) -> f64 {
        self.max_h_sqrt_a / amplitude.max(1.0).sqrt()
    }

    pub fn check(&self, spacing: f64, amplitude: f64) -> Result<()> {
        let limit = self.max_spacing(amplitude);
        if spacing > limit * (1.0 + 1e-12) {
            return Err(Error::UnderResolved { h: spacing, limit, amplitude });
        }
        Ok(())
    }

    /// Smallest even number of grid intervals per unit length that satisfies
    /// the rule, never below `floor`.
    pub fn intervals_per_unit(&self, amplitude: f64, floor: usize) -> usize {
        let m = (1.0 / self.max_spacing(amplitude) - 1e-9).ceil() as usize;
        let m = m.max(floor);
        m + m % 2
    }
}

/// Real values at every node of a grid.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::DimensionMismatch { expected: grid.node_count(), got: values.len() });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let values = vec![0.0; grid.node_count()];
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.node_index(i, j)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Arithmetic mean over all nodes.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// `(Σ |u|^p h²)^{1/p}`, or the max norm for `p = ∞`.
    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.max_abs();
        }
        let s: f64 = self.values.iter().map(|v| v.abs().powf(p)).sum();
        (s * self.grid.cell_area()).powf(1.0 / p)
    }

    /// Node value at the point closest to `p`.
    pub fn nearest(&self, p: Point2) -> f64 {
        let g = &self.grid;
        let clamp = |t: f64, n: usize| (t.round().max(0.0) as usize).min(n - 1);
        let i = clamp((p.x1 - g.origin.x1) / g.spacing, g.n1);
        let j = clamp((p.x2 - g.origin.x2) / g.spacing, g.n2);
        self.at(i, j)
    }

    /// Value at the periodic cell node nearest to `p` (modulo the period).
    pub fn nearest_periodic(&self, p: Point2) -> f64 {
        let g = &self.grid;
        let idx = |t: f64, o: f64, n: usize| ((t - o).rem_euclid(PERIOD) / g.spacing).round() as usize % n;
        self.at(idx(p.x1, g.origin.x1, g.n1), idx(p.x2, g.origin.x2, g.n2))
    }

    /// Bilinear interpolation on the periodic cell, evaluating `p` modulo the
    /// period.
    pub fn interpolate_periodic(&self, p: Point2) -> f64 {
        let g = &self.grid;
        let locate = |t: f64, o: f64, n: usize| {
            let s = (t - o).rem_euclid(PERIOD) / g.spacing;
            let i0 = s.floor();
            let frac = s - i0;
            let i0 = (i0 as usize) % n;
            (i0, (i0 + 1) % n, frac)
        };
        let (i0, i1, fx) = locate(p.x1, g.origin.x1, g.n1);
        let (j0, j1, fy) = locate(p.x2, g.origin.x2, g.n2);
        let v00 = self.at(i0, j0);
        let v10 = self.at(i1, j0);
        let v01 = self.at(i0, j1);
        let v11 = self.at(i1, j1);
        (1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) + fy * ((1.0 - fx) * v01 + fx * v11)
    }

    /// CSV with header `x1,x2,value`, row-major, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x1,x2,value\n");
        for k in 0..self.values.len() {
            let p = self.grid.node_point(k);
            let _ = writeln!(s, "{:.16e},{:.16e},{:.16e}", p.x1, p.x2, self.values[k]);
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolution_rule() {
        let r = ResolutionRule::default();
        assert!(r.check(0.4 / 16.0, 256.0).is_ok());
        assert!(matches!(r.check(0.03, 256.0), Err(Error::UnderResolved { .. })));
        assert_eq!(r.intervals_per_unit(256.0, 2), 40);
        assert_eq!(r.intervals_per_unit(0.0, 7), 8);
        assert!(r.check(0.3, 0.5).is_ok());
    }

    #[test]
    fn unit_square_grid() {
        let g = build_grid(Topology::DirichletSquare, 1.0, 5).unwrap();
        assert_eq!(g.spacing(), 0.25);
        assert_eq!(g.unknown_count(), 9);
        assert_eq!(g.origin(), Point2::new(0.0, 0.0));
    }

    #[test]
    fn even_square_is_centered() {
        let g = build_grid(Topology::DirichletSquare, 4.0, 9).unwrap();
        assert_eq!(g.origin(), Point2::new(-2.0, -2.0));
        assert_eq!(g.node_point(80), Point2::new(2.0, 2.0));
    }

    #[test]
    fn periodic_grid() {
        let g = build_grid(Topology::PeriodicCell, 2.0, 8).unwrap();
        assert_eq!(g.spacing(), 0.25);
        assert_eq!(g.unknown_count(), 64);
        assert_eq!(g.neighbor(0, 0, -1, 0), Some(g.node_index(7, 0)));
        assert!(build_grid(Topology::PeriodicCell, 1.0, 8).is_err());
    }

    #[test]
    fn disk_grid_masks_by_strict_distance() {
        let g = build_grid(Topology::DirichletDisk { radius: 1.0 }, 1.0, 5).unwrap();
        assert_eq!(g.unknown_count(), 9);
        for &k in g.unknown_nodes() {
            assert!(g.node_point(k).norm() < 1.0);
        }
    }

    #[test]
    fn rejects_coarse_resolution() {
        assert!(matches!(
            build_grid(Topology::DirichletSquare, 1.0, 2),
            Err(Error::Resolution(2))
        ));
    }

    #[test]
    fn scatter_gather_and_csv() {
        let g = Arc::new(build_grid(Topology::DirichletSquare, 1.0, 4).unwrap());
        let f = g.scatter(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(f.values()[0], 0.0);
        assert_eq!(g.gather(f.values()), vec![1.0, 2.0, 3.0, 4.0]);
        let csv = f.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("x1,x2,value"));
        let row: Vec<f64> = lines.nth(5).unwrap().split(',').map(|t| t.parse().unwrap()).collect();
        assert_eq!(row, vec![1.0 / 3.0, 1.0 / 3.0, 1.0]);
        assert_eq!(csv.lines().count(), 17);
        assert!(g.scatter(&[1.0]).is_err());
    }

    #[test]
    fn periodic_interpolation_reproduces_nodes_and_wraps() {
        let g = Arc::new(build_grid(Topology::PeriodicCell, 2.0, 16).unwrap());
        let f = g.sample(|p| p.x1 + 10.0 * p.x2);
        let k = g.node_index(3, 5);
        let p = g.node_point(k);
        assert!((f.interpolate_periodic(p) - f.values()[k]).abs() < 1e-12);
        let shifted = Point2::new(p.x1 + 4.0, p.x2 - 2.0);
        assert!((f.interpolate_periodic(shifted) - f.values()[k]).abs() < 1e-12);
        let mid = Point2::new(p.x1 + 0.5 * g.spacing(), p.x2);
        assert!((f.interpolate_periodic(mid) - (p.x1 + 0.5 * g.spacing() + 10.0 * p.x2)).abs() < 1e-12);
    }
}
