//! Iterative solution of the nonsymmetric sparse systems produced by
//! [`crate::grid::assemble`].
//!
//! The default path is BiCGStab with ILU(0) or point-Jacobi preconditioning.
//! A breakdown restarts once from a perturbed guess and then falls back to
//! GMRES(30). Periodic systems are singular with the constants as kernel; they
//! are solved in the mean-zero subspace by projecting every iterate.

mod krylov;
mod multigrid;
mod precond;

pub use multigrid::Multigrid;
pub use precond::{Ilu0, Preconditioner};

use crate::grid::{assemble_with, Drift, Grid, Scheme, SparseMatrix, Topology};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PreconditionerKind {
    Jacobi,
    Ilu0,
    /// Geometric multigrid; needs the grid (see [`Solver::for_grid`]).
    Multigrid,
    /// Multigrid when the grid is known; otherwise ILU(0) when the advection
    /// hint `A·h` exceeds 1 (or is unknown), Jacobi below that.
    #[default]
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Relative tolerance on `‖Ax − b‖₂ / ‖b‖₂`.
    pub tol: f64,
    /// Iteration cap; `None` means `20·√n`.
    pub max_iter: Option<usize>,
    pub preconditioner: PreconditionerKind,
    /// `A·h` of the discretised problem, consulted by `Auto`.
    pub advection_hint: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: None, preconditioner: PreconditionerKind::Auto, advection_hint: None }
    }
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }

    pub fn hint(mut self, amplitude: f64, spacing: f64) -> Self {
        self.advection_hint = Some(amplitude * spacing);
        self
    }

    fn max_iter_for(&self, n: usize) -> usize {
        self.max_iter.unwrap_or_else(|| ((20.0 * (n as f64).sqrt()).ceil() as usize).max(50))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    BiCgStab,
    BiCgStabRestarted,
    Gmres,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Relative residual `‖Ax − b‖₂ / ‖b‖₂`, recomputed from the returned
    /// solution.
    pub residual: f64,
    pub converged: bool,
    pub method: Method,
}

impl SolveReport {
    pub fn into_result(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged { iterations: self.iterations, residual: self.residual })
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub(crate) fn project_mean_zero(x: &mut [f64]) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    for v in x.iter_mut() {
        *v -= mean;
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn relative_residual(m: &SparseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let mut ax = vec![0.0; b.len()];
    m.mul_into(x, &mut ax);
    let r: f64 = ax.iter().zip(b).map(|(a, bi)| (bi - a).powi(2)).sum::<f64>().sqrt();
    let bn = norm(b);
    if bn == 0.0 {
        r
    } else {
        r / bn
    }
}

/// A matrix paired with its preconditioner, reusable across right sides.
pub struct Solver<'a> {
    matrix: &'a SparseMatrix,
    precond: Preconditioner,
    opts: SolveOptions,
    periodic: bool,
}

impl<'a> Solver<'a> {
    pub fn new(matrix: &'a SparseMatrix, opts: SolveOptions) -> Self {
        let use_ilu = match opts.preconditioner {
            PreconditionerKind::Ilu0 | PreconditionerKind::Multigrid => true,
            PreconditionerKind::Jacobi => false,
            PreconditionerKind::Auto => opts.advection_hint.map_or(true, |ah| ah > 1.0),
        };
        let precond =
            if use_ilu { Preconditioner::ilu0(matrix) } else { Preconditioner::jacobi(matrix) };
        Self { matrix, precond, opts, periodic: false }
    }

    /// Solver for a periodic assembly: iterates stay in the mean-zero subspace.
    pub fn periodic(matrix: &'a SparseMatrix, opts: SolveOptions) -> Self {
        Self { periodic: true, ..Self::new(matrix, opts) }
    }

    /// Solver for `matrix = assemble_with(grid, drift, scheme)` honouring
    /// the requested preconditioner kind.
    pub fn for_grid(
        matrix: &'a SparseMatrix,
        grid: &Grid,
        drift: &Drift,
        scheme: Scheme,
        opts: SolveOptions,
    ) -> Result<Self> {
        match opts.preconditioner {
            PreconditionerKind::Auto | PreconditionerKind::Multigrid => {
                Self::multigrid(matrix, grid, drift, scheme, opts)
            }
            _ if grid.is_periodic() => Ok(Self::periodic(matrix, opts)),
            _ => Ok(Self::new(matrix, opts)),
        }
    }

    /// Multigrid-preconditioned solver for `matrix = assemble_with(grid,
    /// drift, scheme)`; periodic grids get the mean-zero treatment.
    pub fn multigrid(
        matrix: &'a SparseMatrix,
        grid: &Grid,
        drift: &Drift,
        scheme: Scheme,
        opts: SolveOptions,
    ) -> Result<Self> {
        if matrix.dim() != grid.unknown_count() {
            return Err(Error::DimensionMismatch { expected: grid.unknown_count(), got: matrix.dim() });
        }
        // central operators are not M-matrices; precondition them with the
        // exponentially fitted hierarchy instead
        let mg = if scheme == Scheme::Central {
            Multigrid::new(grid, &assemble_with(grid, drift, Scheme::ExpFitted), drift, Scheme::ExpFitted)?
        } else {
            Multigrid::new(grid, matrix, drift, scheme)?
        };
        Ok(Self {
            matrix,
            precond: Preconditioner::Multigrid(Box::new(mg)),
            opts,
            periodic: grid.topology() == Topology::PeriodicCell,
        })
    }

    pub fn preconditioner(&self) -> &Preconditioner {
        &self.precond
    }

    /// Solves `M x = b` from the initial guess `x0` (zero if `None`).
    pub fn solve(&self, b: &[f64], x0: Option<&[f64]>) -> Result<(Vec<f64>, SolveReport)> {
        let n = self.matrix.dim();
        if b.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: b.len() });
        }
        if !(self.opts.tol > 0.0) {
            return Err(Error::InvalidArgument("tolerance must be positive".into()));
        }
        if self.periodic {
            let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let mu = mean(b);
            if mu.abs() > 1e-10 * scale {
                return Err(Error::IncompatibleRhs { mean: mu });
            }
        }
        // the kernel component of b is unreachable; drop it
        let projected;
        let b = if self.periodic {
            let mut c = b.to_vec();
            project_mean_zero(&mut c);
            projected = c;
            &projected[..]
        } else {
            b
        };
        let mut x = match x0 {
            Some(g) if g.len() == n => g.to_vec(),
            Some(g) => return Err(Error::DimensionMismatch { expected: n, got: g.len() }),
            None => vec![0.0; n],
        };
        let bnorm = norm(b);
        if bnorm == 0.0 {
            let report = SolveReport { iterations: 0, residual: 0.0, converged: true, method: Method::BiCgStab };
            return Ok((vec![0.0; n], report));
        }
        if self.periodic {
            project_mean_zero(&mut x);
        }

        let tol = self.opts.tol;
        let budget = self.opts.max_iter_for(n);
        let mut used = 0;
        let mut method = Method::BiCgStab;
        let mut perturbed = false;
        // recursive residuals drift from true ones; aim a little lower
        let target = 0.5 * tol * bnorm;
        loop {
            let left = budget - used;
            if left == 0 {
                break;
            }
            let out = if method == Method::Gmres {
                krylov::gmres(self.matrix, &self.precond, b, &mut x, target, left, 30, self.periodic)
            } else {
                krylov::bicgstab(self.matrix, &self.precond, b, &mut x, target, left, self.periodic)
            };
            used += out.iterations.max(1).min(left);
            if out.converged {
                if relative_residual(self.matrix, &x, b) <= tol {
                    break;
                }
                continue;
            }
            if out.breakdown {
                if !perturbed {
                    perturbed = true;
                    method = Method::BiCgStabRestarted;
                    let scale = 1e-8 * bnorm / (n as f64).sqrt()
                        / self.matrix.diagonal().iter().fold(0.0f64, |m, d| m.max(d.abs())).max(1e-300);
                    for (i, xi) in x.iter_mut().enumerate() {
                        *xi += scale * ((i as f64) * 0.618_033_988_75).fract();
                    }
                    if self.periodic {
                        project_mean_zero(&mut x);
                    }
                } else if method != Method::Gmres {
                    method = Method::Gmres;
                } else {
                    break;
                }
                continue;
            }
            break;
        }
        if self.periodic {
            project_mean_zero(&mut x);
        }
        let residual = relative_residual(self.matrix, &x, b);
        let report = SolveReport { iterations: used, residual, converged: residual <= tol, method };
        Ok((x, report))
    }
}

/// Solves `M x = b` with BiCGStab. Non-convergence is reported, not raised.
pub fn solve(m: &SparseMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolveReport)> {
    let opts = SolveOptions { tol, max_iter: Some(max_iter), ..SolveOptions::default() };
    Solver::new(m, opts).solve(b, None)
}

/// Unique mean-zero solution of a periodic system whose kernel is the
/// constants. Fails with [`Error::IncompatibleRhs`] if `mean(b)` exceeds
/// `1e−10‖b‖∞`.
pub fn solve_periodic_meanzero(
    m: &SparseMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    let opts = SolveOptions { tol, max_iter: Some(max_iter), ..SolveOptions::default() };
    Solver::periodic(m, opts).solve(b, None)
}

#[cfg(test)]
pub(crate) mod oracle {
    /// Dense Gaussian elimination with partial pivoting.
    pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for c in 0..n {
            let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
            a.swap(c, p);
            b.swap(c, p);
            for r in c + 1..n {
                let f = a[r][c] / a[c][c];
                if f != 0.0 {
                    for k in c..n {
                        a[r][k] -= f * a[c][k];
                    }
                    b[r] -= f * b[c];
                }
            }
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
            x[r] = (b[r] - s) / a[r][r];
        }
        x
    }

    /// Mean-zero solution of a singular system through the bordered matrix
    /// `[M 1; 1ᵀ 0]`.
    pub fn dense_meanzero_solve(m: Vec<Vec<f64>>, b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        let mut a: Vec<Vec<f64>> = m
            .into_iter()
            .map(|mut row| {
                row.push(1.0);
                row
            })
            .collect();
        let mut last = vec![1.0; n];
        last.push(0.0);
        a.push(last);
        let mut rhs = b;
        rhs.push(0.0);
        let mut x = dense_solve(a, rhs);
        x.pop();
        x
    }
}
