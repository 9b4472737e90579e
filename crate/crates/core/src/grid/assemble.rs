//! Five-point discretisation of `−Δu + b·∇u` with `b = A s v(s x)`.

use super::{Grid, SparseMatrix};
use crate::flow::{velocity, Point2};

/// Treatment of the advection term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Centred differences in flux form with face velocities.
    Central,
    /// First-order upwinding with node velocities.
    Upwind,
    /// Exponential fitting (Scharfetter–Gummel fluxes) with face velocities.
    #[default]
    ExpFitted,
}

impl Scheme {
    /// Default for a domain of size `length`: exponential fitting while
    /// `A < L⁴`, where it stays monotone on coarse grids, and central
    /// differences beyond, where the crosswind diffusion of exponential
    /// fitting would smear the streamline averaging.
    pub fn for_regime(length: f64, amplitude: f64) -> Scheme {
        if amplitude < length.powi(4) {
            Scheme::ExpFitted
        } else {
            Scheme::Central
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Central => "central",
            Scheme::Upwind => "upwind",
            Scheme::ExpFitted => "exp-fitted",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = crate::Error;
    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "central" => Ok(Scheme::Central),
            "upwind" => Ok(Scheme::Upwind),
            "exp-fitted" | "expfitted" | "sg" => Ok(Scheme::ExpFitted),
            other => Err(crate::Error::Config(format!("unknown scheme `{other}`"))),
        }
    }
}

/// Drift field `b(x) = A s (σ₁ v₁(s x), σ₂ v₂(s x))`.
///
/// `fast_scale = s ≠ 1` is the rescaled problem on a unit domain; the
/// component signs are `+1` except when deliberately corrupting the operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Drift {
    pub amplitude: f64,
    pub fast_scale: f64,
    pub component_sign: [f64; 2],
}

impl Drift {
    pub fn new(amplitude: f64) -> Self {
        Self { amplitude, fast_scale: 1.0, component_sign: [1.0, 1.0] }
    }

    pub fn rescaled(amplitude: f64, scale: f64) -> Self {
        Self { amplitude, fast_scale: scale, component_sign: [1.0, 1.0] }
    }

    pub fn at(&self, p: Point2) -> (f64, f64) {
        if self.amplitude == 0.0 {
            return (0.0, 0.0);
        }
        let s = self.fast_scale;
        let (v1, v2) = velocity(Point2::new(s * p.x1, s * p.x2));
        let k = self.amplitude * s;
        (k * self.component_sign[0] * v1, k * self.component_sign[1] * v2)
    }
}

/// `B(z) = z / (eᶻ − 1)`, with `B(0) = 1`.
pub fn bernoulli(z: f64) -> f64 {
    if z.abs() < 1e-5 {
        1.0 - z / 2.0 + z * z / 12.0
    } else {
        z / z.exp_m1()
    }
}

/// Coefficients of one row: `(Lu)_k = c u_k + e u_E + w u_W + n u_N + s u_S`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    pub center: f64,
    pub east: f64,
    pub west: f64,
    pub north: f64,
    pub south: f64,
}

impl Stencil {
    pub fn at(grid: &Grid, drift: &Drift, scheme: Scheme, i: usize, j: usize) -> Stencil {
        let h = grid.spacing();
        let ih2 = 1.0 / (h * h);
        let p = grid.point_ij(i, j);
        match scheme {
            Scheme::Central => {
                // flux form with face velocities: exactly skew for this flow
                let half = 0.5 * h;
                let be = drift.at(Point2::new(p.x1 + half, p.x2)).0;
                let bw = drift.at(Point2::new(p.x1 - half, p.x2)).0;
                let bn = drift.at(Point2::new(p.x1, p.x2 + half)).1;
                let bs = drift.at(Point2::new(p.x1, p.x2 - half)).1;
                let ih = 0.5 / h;
                Stencil {
                    center: 4.0 * ih2,
                    east: -ih2 + be * ih,
                    west: -ih2 - bw * ih,
                    north: -ih2 + bn * ih,
                    south: -ih2 - bs * ih,
                }
            }
            Scheme::Upwind => {
                let (b1, b2) = drift.at(p);
                let mut st = Stencil {
                    center: 4.0 * ih2 + (b1.abs() + b2.abs()) / h,
                    east: -ih2,
                    west: -ih2,
                    north: -ih2,
                    south: -ih2,
                };
                if b1 > 0.0 {
                    st.west -= b1 / h;
                } else {
                    st.east += b1 / h;
                }
                if b2 > 0.0 {
                    st.south -= b2 / h;
                } else {
                    st.north += b2 / h;
                }
                st
            }
            Scheme::ExpFitted => {
                let half = 0.5 * h;
                let be = drift.at(Point2::new(p.x1 + half, p.x2)).0 * h;
                let bw = drift.at(Point2::new(p.x1 - half, p.x2)).0 * h;
                let bn = drift.at(Point2::new(p.x1, p.x2 + half)).1 * h;
                let bs = drift.at(Point2::new(p.x1, p.x2 - half)).1 * h;
                Stencil {
                    center: (bernoulli(-be) + bernoulli(bw) + bernoulli(-bn) + bernoulli(bs)) * ih2,
                    east: -bernoulli(be) * ih2,
                    west: -bernoulli(-bw) * ih2,
                    north: -bernoulli(bn) * ih2,
                    south: -bernoulli(-bs) * ih2,
                }
            }
        }
    }

    fn neighbors(&self) -> [(isize, isize, f64); 4] {
        [(1, 0, self.east), (-1, 0, self.west), (0, 1, self.north), (0, -1, self.south)]
    }
}

/// Operator matrix over the grid's unknowns for drift `A v(x)`.
pub fn assemble(grid: &Grid, amplitude: f64, scheme: Scheme) -> SparseMatrix {
    assemble_with(grid, &Drift::new(amplitude), scheme)
}

/// Operator matrix over the grid's unknowns. Dirichlet neighbours are
/// eliminated (zero boundary data); periodic neighbours wrap.
pub fn assemble_with(grid: &Grid, drift: &Drift, scheme: Scheme) -> SparseMatrix {
    let rows = grid
        .unknown_nodes()
        .iter()
        .map(|&k| {
            let (i, j) = grid.node_ij(k);
            let st = Stencil::at(grid, drift, scheme, i, j);
            let mut row = Vec::with_capacity(5);
            row.push((grid.unknown_index(k).unwrap(), st.center));
            for (di, dj, c) in st.neighbors() {
                if let Some(u) = grid.neighbor(i, j, di, dj).and_then(|nk| grid.unknown_index(nk)) {
                    row.push((u, c));
                }
            }
            row
        })
        .collect();
    SparseMatrix::from_rows(rows).expect("stencil columns are in range")
}

/// Applies the stencil to node values (all nodes, boundary values included).
/// Entries whose stencil leaves the grid are `NaN`.
pub fn apply_operator(grid: &Grid, drift: &Drift, scheme: Scheme, values: &[f64]) -> Vec<f64> {
    (0..grid.node_count())
        .map(|k| {
            let (i, j) = grid.node_ij(k);
            let st = Stencil::at(grid, drift, scheme, i, j);
            let mut acc = st.center * values[k];
            for (di, dj, c) in st.neighbors() {
                match grid.neighbor(i, j, di, dj) {
                    Some(nk) => acc += c * values[nk],
                    None => return f64::NAN,
                }
            }
            acc
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Topology};
    use std::f64::consts::PI;

    #[test]
    fn laplacian_row_without_advection() {
        let g = build_grid(Topology::DirichletSquare, 1.0, 9).unwrap();
        let h2 = g.spacing() * g.spacing();
        for scheme in [Scheme::Central, Scheme::Upwind, Scheme::ExpFitted] {
            let m = assemble(&g, 0.0, scheme);
            let r = g.unknown_index(g.node_index(4, 4)).unwrap();
            let row: Vec<_> = m.row(r).collect();
            assert_eq!(row.len(), 5);
            for (c, v) in row {
                let expect = if c == r { 4.0 / h2 } else { -1.0 / h2 };
                assert!((v - expect).abs() < 1e-9 * expect.abs(), "{scheme:?}");
            }
        }
    }

    #[test]
    fn central_advection_pairs_cancel() {
        let g = build_grid(Topology::DirichletSquare, 2.0, 17).unwrap();
        let lap = assemble(&g, 0.0, Scheme::Central);
        let m = assemble(&g, 37.0, Scheme::Central);
        let k = g.node_index(5, 9);
        let r = g.unknown_index(k).unwrap();
        let adv: f64 = m.row(r).map(|(c, v)| v - lap.get(r, c)).sum();
        assert!(adv.abs() < 1e-9);
        let p = g.node_point(k);
        let (b1, _) = Drift::new(37.0).at(Point2::new(p.x1 + 0.5 * g.spacing(), p.x2));
        let e = g.unknown_index(g.node_index(6, 9)).unwrap();
        assert!((m.get(r, e) - lap.get(r, e) - b1 / (2.0 * g.spacing())).abs() < 1e-9);
        // the advection part is skew-symmetric
        for row in 0..m.dim() {
            for (c, v) in m.row(row) {
                let skew = v - lap.get(row, c);
                let mirror = m.get(c, row) - lap.get(c, row);
                assert!((skew + mirror).abs() < 1e-9, "{row},{c}");
            }
        }
    }

    #[test]
    fn upwind_and_expfitted_have_m_matrix_sign_pattern() {
        let g = build_grid(Topology::DirichletDisk { radius: 2.0 }, 2.0, 41).unwrap();
        for scheme in [Scheme::Upwind, Scheme::ExpFitted] {
            let m = assemble(&g, 500.0, scheme);
            for r in 0..m.dim() {
                for (c, v) in m.row(r) {
                    if c != r {
                        assert!(v <= 0.0, "{scheme:?} row {r} col {c}: {v}");
                    }
                }
            }
        }
    }

    #[test]
    fn periodic_assembly_annihilates_constants() {
        let g = build_grid(Topology::PeriodicCell, 2.0, 32).unwrap();
        for scheme in [Scheme::Central, Scheme::Upwind, Scheme::ExpFitted] {
            let m = assemble(&g, 200.0, scheme);
            let y = m.apply(&vec![1.0; m.dim()]).unwrap();
            let scale = m.diagonal().iter().fold(0.0f64, |a, b| a.max(b.abs()));
            assert!(y.iter().all(|v| v.abs() < 1e-12 * scale), "{scheme:?}");
        }
        // flux form: columns sum to zero as well, so the range is mean-zero
        let m = assemble(&g, 200.0, Scheme::ExpFitted);
        let mut col = vec![0.0; m.dim()];
        for r in 0..m.dim() {
            for (c, v) in m.row(r) {
                col[c] += v;
            }
        }
        assert!(col.iter().all(|v| v.abs() < 1e-9 * m.get(0, 0)));
    }

    #[test]
    fn expfitted_matches_central_at_small_peclet() {
        let g = build_grid(Topology::PeriodicCell, 2.0, 64).unwrap();
        let c = assemble(&g, 1e-3, Scheme::Central);
        let e = assemble(&g, 1e-3, Scheme::ExpFitted);
        for r in (0..c.dim()).step_by(97) {
            for (col, v) in c.row(r) {
                assert!((e.get(r, col) - v).abs() < 1e-6 * v.abs().max(1.0));
            }
        }
    }

    #[test]
    fn laplacian_of_sine_mode() {
        let g = std::sync::Arc::new(build_grid(Topology::DirichletSquare, 1.0, 65).unwrap());
        let m = assemble(&g, 0.0, Scheme::ExpFitted);
        let f = g.sample(|p| (PI * p.x1).sin() * (PI * p.x2).sin());
        let u = g.gather(f.values());
        let y = m.apply(&u).unwrap();
        let h = g.spacing();
        for (a, b) in y.iter().zip(&u) {
            assert!((a - 2.0 * PI * PI * b).abs() <= 1.01 * PI.powi(4) * h * h * b.abs() / 6.0 + 1e-12);
        }
    }

    /// Observed order of `‖L_h g − (−Δg + A v·∇g)‖∞` under halving of `h`.
    fn observed_order(scheme: Scheme) -> f64 {
        let a = 3.0;
        let g_fn = |p: Point2| (1.3 * p.x1).sin() * (0.7 * p.x2).cos() + 0.2 * p.x1 * p.x2;
        let exact = |p: Point2| {
            let (s1, c1) = (1.3 * p.x1).sin_cos();
            let (s2, c2) = (0.7 * p.x2).sin_cos();
            let lap = -(1.3f64.powi(2) + 0.7f64.powi(2)) * s1 * c2;
            let gx = 1.3 * c1 * c2 + 0.2 * p.x2;
            let gy = -0.7 * s1 * s2 + 0.2 * p.x1;
            let (v1, v2) = velocity(p);
            -lap + a * (v1 * gx + v2 * gy)
        };
        let err = |n: usize| {
            let g = build_grid(Topology::DirichletSquare, 2.0, n).unwrap();
            let vals: Vec<f64> = (0..g.node_count()).map(|k| g_fn(g.node_point(k))).collect();
            let out = apply_operator(&g, &Drift::new(a), scheme, &vals);
            (0..g.node_count())
                .filter(|&k| out[k].is_finite())
                .map(|k| (out[k] - exact(g.node_point(k))).abs())
                .fold(0.0, f64::max)
        };
        (err(41) / err(81)).log2()
    }

    #[test]
    fn consistency_orders() {
        assert!((observed_order(Scheme::Central) - 2.0).abs() < 0.4);
        assert!((observed_order(Scheme::ExpFitted) - 2.0).abs() < 0.4);
        assert!((observed_order(Scheme::Upwind) - 1.0).abs() < 0.4);
    }

    #[test]
    fn bernoulli_limits() {
        assert_eq!(bernoulli(0.0), 1.0);
        assert!((bernoulli(1e-6) - 1e-6 / (1e-6f64).exp_m1()).abs() < 1e-12);
        assert!(bernoulli(800.0) == 0.0);
        assert!((bernoulli(-50.0) - 50.0).abs() < 1e-12);
        for z in [-3.0, -0.1, 0.2, 4.0] {
            assert!((bernoulli(-z) - bernoulli(z) - z).abs() < 1e-12);
        }
    }
}
