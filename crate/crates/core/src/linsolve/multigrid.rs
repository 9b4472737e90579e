//! Geometric multigrid V-cycle used as a preconditioner.
//!
//! Coarse operators are rediscretised on grids with doubled spacing (same
//! drift, same scheme), smoothing is one ILU(0) correction before and after
//! the coarse-grid correction, and the coarsest level is factorised densely.

use nalgebra::{DMatrix, DVector};

use super::precond::Ilu0;
use super::project_mean_zero;
use crate::grid::{assemble_with, Drift, Grid, Scheme, SparseMatrix, Topology};
use crate::Result;

const DENSE_LIMIT: usize = 2500;
const FALLBACK_SWEEPS: usize = 20;

/// Sparse weights `out[r] = Σ w · in[c]` stored row-compressed.
#[derive(Debug, Clone)]
struct Transfer {
    ptr: Vec<usize>,
    idx: Vec<usize>,
    w: Vec<f64>,
}

impl Transfer {
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for p in self.ptr[r]..self.ptr[r + 1] {
                acc += self.w[p] * x[self.idx[p]];
            }
            *o = acc;
        }
    }
}

#[derive(Debug, Clone)]
struct Level {
    matrix: SparseMatrix,
    smoother: Ilu0,
    /// Fine residual → next coarser level.
    restrict: Option<Transfer>,
    /// Next coarser correction → this level.
    prolong: Option<Transfer>,
}

#[derive(Debug, Clone)]
enum Coarsest {
    Dense(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
    Sweeps,
}

#[derive(Debug, Clone)]
pub struct Multigrid {
    levels: Vec<Level>,
    coarsest: Coarsest,
    periodic: bool,
}

fn coarsen(g: &Grid) -> Option<Grid> {
    let (n1, n2) = (g.n1(), g.n2());
    let (c1, c2) = if g.is_periodic() {
        if n1 % 2 != 0 || n2 % 2 != 0 {
            return None;
        }
        (n1 / 2, n2 / 2)
    } else {
        if (n1 - 1) % 2 != 0 || (n2 - 1) % 2 != 0 {
            return None;
        }
        ((n1 - 1) / 2 + 1, (n2 - 1) / 2 + 1)
    };
    if c1 < 5 || c2 < 5 {
        return None;
    }
    let c = Grid::with_origin(g.topology(), c1, c2, g.origin(), 2.0 * g.spacing()).ok()?;
    (c.unknown_count() > 0).then_some(c)
}

fn restriction(fine: &Grid, coarse: &Grid) -> Transfer {
    let mut t = Transfer { ptr: vec![0], idx: Vec::new(), w: Vec::new() };
    for &kc in coarse.unknown_nodes() {
        let (ic, jc) = coarse.node_ij(kc);
        for b in -1isize..=1 {
            for a in -1isize..=1 {
                if let Some(k) = fine.neighbor(2 * ic, 2 * jc, a, b) {
                    if let Some(u) = fine.unknown_index(k) {
                        t.idx.push(u);
                        t.w.push(0.25 * 0.5f64.powi((a.abs() + b.abs()) as i32));
                    }
                }
            }
        }
        t.ptr.push(t.idx.len());
    }
    t
}

fn prolongation(fine: &Grid, coarse: &Grid) -> Transfer {
    let parents = |i: usize, n: usize| -> Vec<(usize, f64)> {
        if i % 2 == 0 {
            vec![(i / 2, 1.0)]
        } else {
            vec![((i - 1) / 2, 0.5), (((i + 1) / 2) % n, 0.5)]
        }
    };
    let mut t = Transfer { ptr: vec![0], idx: Vec::new(), w: Vec::new() };
    for &k in fine.unknown_nodes() {
        let (i, j) = fine.node_ij(k);
        for &(jc, wj) in &parents(j, coarse.n2()) {
            for &(ic, wi) in &parents(i, coarse.n1()) {
                if ic >= coarse.n1() || jc >= coarse.n2() {
                    continue;
                }
                if let Some(u) = coarse.unknown_index(coarse.node_index(ic, jc)) {
                    t.idx.push(u);
                    t.w.push(wi * wj);
                }
            }
        }
        t.ptr.push(t.idx.len());
    }
    t
}

impl Multigrid {
    /// Builds the hierarchy below `grid`; `matrix` must be the assembly of
    /// `(grid, drift, scheme)`.
    pub fn new(grid: &Grid, matrix: &SparseMatrix, drift: &Drift, scheme: Scheme) -> Result<Self> {
        let periodic = grid.topology() == Topology::PeriodicCell;
        let mut levels = vec![Level {
            matrix: matrix.clone(),
            smoother: Ilu0::new(matrix),
            restrict: None,
            prolong: None,
        }];
        let mut current = grid.clone();
        while current.unknown_count() > DENSE_LIMIT {
            let Some(coarse) = coarsen(&current) else { break };
            let m = assemble_with(&coarse, drift, scheme);
            let last = levels.last_mut().expect("non-empty");
            last.restrict = Some(restriction(&current, &coarse));
            last.prolong = Some(prolongation(&current, &coarse));
            levels.push(Level { smoother: Ilu0::new(&m), matrix: m, restrict: None, prolong: None });
            current = coarse;
        }
        let bottom = &levels.last().expect("non-empty").matrix;
        let coarsest = if bottom.dim() <= DENSE_LIMIT {
            let n = bottom.dim();
            let size = if periodic { n + 1 } else { n };
            let mut d = DMatrix::<f64>::zeros(size, size);
            for r in 0..n {
                for (c, v) in bottom.row(r) {
                    d[(r, c)] = v;
                }
            }
            if periodic {
                for r in 0..n {
                    d[(r, n)] = 1.0;
                    d[(n, r)] = 1.0;
                }
            }
            Coarsest::Dense(d.lu())
        } else {
            Coarsest::Sweeps
        };
        Ok(Self { levels, coarsest, periodic })
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        self.cycle(0, r, z);
    }

    fn smooth(&self, level: &Level, b: &[f64], x: &mut [f64], scratch: &mut [f64], corr: &mut [f64]) {
        level.matrix.mul_into(x, scratch);
        for (s, bi) in scratch.iter_mut().zip(b) {
            *s = bi - *s;
        }
        level.smoother.solve(scratch, corr);
        for (xi, c) in x.iter_mut().zip(corr.iter()) {
            *xi += c;
        }
    }

    fn cycle(&self, l: usize, b: &[f64], x: &mut [f64]) {
        let level = &self.levels[l];
        let n = b.len();
        if l + 1 == self.levels.len() {
            self.solve_coarsest(level, b, x);
            return;
        }
        let mut scratch = vec![0.0; n];
        let mut corr = vec![0.0; n];
        level.smoother.solve(b, x);
        let restrict = level.restrict.as_ref().expect("inner level has transfers");
        let prolong = level.prolong.as_ref().expect("inner level has transfers");
        level.matrix.mul_into(x, &mut scratch);
        for (s, bi) in scratch.iter_mut().zip(b) {
            *s = bi - *s;
        }
        let nc = self.levels[l + 1].matrix.dim();
        let mut rc = vec![0.0; nc];
        restrict.apply(&scratch, &mut rc);
        if self.periodic {
            project_mean_zero(&mut rc);
        }
        let mut ec = vec![0.0; nc];
        self.cycle(l + 1, &rc, &mut ec);
        prolong.apply(&ec, &mut corr);
        for (xi, c) in x.iter_mut().zip(&corr) {
            *xi += c;
        }
        self.smooth(level, b, x, &mut scratch, &mut corr);
    }

    fn solve_coarsest(&self, level: &Level, b: &[f64], x: &mut [f64]) {
        let n = b.len();
        match &self.coarsest {
            Coarsest::Dense(lu) => {
                let mut rhs = DVector::<f64>::zeros(if self.periodic { n + 1 } else { n });
                rhs.rows_mut(0, n).copy_from_slice(b);
                if let Some(sol) = lu.solve(&rhs) {
                    x.copy_from_slice(sol.rows(0, n).as_slice());
                } else {
                    level.smoother.solve(b, x);
                }
            }
            Coarsest::Sweeps => {
                let mut scratch = vec![0.0; n];
                let mut corr = vec![0.0; n];
                level.smoother.solve(b, x);
                for _ in 1..FALLBACK_SWEEPS {
                    self.smooth(level, b, x, &mut scratch, &mut corr);
                }
            }
        }
        if self.periodic {
            project_mean_zero(x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{assemble, build_grid};

    #[test]
    fn coarsening_halves_spacing() {
        let g = build_grid(Topology::DirichletSquare, 4.0, 65).unwrap();
        let c = coarsen(&g).unwrap();
        assert_eq!(c.n1(), 33);
        assert!((c.spacing() - 2.0 * g.spacing()).abs() < 1e-15);
        let p = build_grid(Topology::PeriodicCell, 2.0, 64).unwrap();
        assert_eq!(coarsen(&p).unwrap().n1(), 32);
        assert!(coarsen(&build_grid(Topology::PeriodicCell, 2.0, 63).unwrap()).is_none());
    }

    #[test]
    fn transfers_preserve_constants() {
        let g = build_grid(Topology::PeriodicCell, 2.0, 32).unwrap();
        let c = coarsen(&g).unwrap();
        let p = prolongation(&g, &c);
        let mut fine = vec![0.0; g.unknown_count()];
        p.apply(&vec![1.0; c.unknown_count()], &mut fine);
        assert!(fine.iter().all(|v| (v - 1.0).abs() < 1e-15));
        let r = restriction(&g, &c);
        let mut coarse = vec![0.0; c.unknown_count()];
        r.apply(&vec![1.0; g.unknown_count()], &mut coarse);
        assert!(coarse.iter().all(|v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn vcycle_contracts_on_the_laplacian() {
        let g = build_grid(Topology::DirichletSquare, 1.0, 129).unwrap();
        let m = assemble(&g, 0.0, Scheme::ExpFitted);
        let mg = Multigrid::new(&g, &m, &Drift::new(0.0), Scheme::ExpFitted).unwrap();
        assert!(mg.depth() >= 3);
        let b: Vec<f64> = (0..m.dim()).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let mut x = vec![0.0; m.dim()];
        let mut r = b.clone();
        let mut e = vec![0.0; m.dim()];
        let r0 = super::super::norm(&b);
        for _ in 0..8 {
            mg.apply(&r, &mut e);
            for (xi, ei) in x.iter_mut().zip(&e) {
                *xi += ei;
            }
            m.mul_into(&x, &mut r);
            for (ri, bi) in r.iter_mut().zip(&b) {
                *ri = bi - *ri;
            }
        }
        assert!(super::super::norm(&r) < 1e-5 * r0, "{}", super::super::norm(&r) / r0);
    }
}
