//! Principal Dirichlet eigenpair of `−Δ + A v·∇` by inverse power iteration,
//! plus the eigenvalue-side diagnostics: the Heinze ratio, the strong-flow
//! variational limit over first integrals, and regime records.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::cellproblem::EffectiveDiffusivity;
use crate::exittime::{domain_grid, Domain};
use crate::flow::{stream, stream_gradient, velocity, Point2};
use crate::grid::{assemble_with, Drift, Grid, ResolutionRule, ScalarField, Scheme};
use crate::linsolve::{SolveOptions, Solver};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    /// `None` picks [`Scheme::for_regime`].
    pub scheme: Option<Scheme>,
    /// Inner solves; should be well below `tol`.
    pub solve: SolveOptions,
    pub rule: ResolutionRule,
    pub rescale_disk: bool,
    pub max_iterations: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            scheme: None,
            solve: SolveOptions::with_tol(1e-10),
            rule: ResolutionRule::default(),
            rescale_disk: true,
            max_iterations: 1000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Eigenpair {
    /// Physical eigenvalue (1/time).
    pub lambda: f64,
    /// Positive eigenfunction with unit physical `L²` norm; on the grid of
    /// the solve (see [`Eigenpair::scale`]).
    pub phi: ScalarField,
    /// `‖Mφ − λφ‖ / λ` recomputed at the end.
    pub residual: f64,
    pub iterations: usize,
    pub domain: Domain,
    pub length: f64,
    pub amplitude: f64,
    /// Physical length per grid unit.
    pub scale: f64,
}

impl Eigenpair {
    pub fn grid(&self) -> &Arc<Grid> {
        self.phi.grid()
    }
}

/// Principal eigenpair on the square of side `L`.
pub fn principal_eigenpair(length: f64, amplitude: f64, resolution: usize, tol: f64) -> Result<Eigenpair> {
    principal_eigenpair_with(Domain::Square, length, amplitude, resolution, tol, &EigenOptions::default(), &Drift::new(amplitude))
}

fn l2_norm(x: &[f64], area: f64) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() * area).sqrt()
}

pub fn principal_eigenpair_with(
    domain: Domain,
    length: f64,
    amplitude: f64,
    resolution: usize,
    tol: f64,
    opts: &EigenOptions,
    drift: &Drift,
) -> Result<Eigenpair> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let (grid, scale, drift) = domain_grid(domain, length, amplitude, resolution, opts.rescale_disk, drift)?;
    opts.rule.check(scale * grid.spacing(), amplitude)?;
    let grid = Arc::new(grid);
    let scheme = opts.scheme.unwrap_or_else(|| Scheme::for_regime(length, amplitude));
    let m = assemble_with(&grid, &drift, scheme);
    let solver = Solver::for_grid(&m, &grid, &drift, scheme, opts.solve.hint(amplitude * scale, grid.spacing()))?;
    let n = m.dim();
    // λ and norms are computed in grid units and converted at the end
    let area = grid.cell_area();

    let o = grid.origin();
    let side = (grid.n1() - 1) as f64 * grid.spacing();
    let mut phi: Vec<f64> = grid
        .unknown_nodes()
        .iter()
        .map(|&k| {
            let p = grid.node_point(k);
            (PI * (p.x1 - o.x1) / side).sin() * (PI * (p.x2 - o.x2) / side).sin()
        })
        .collect();
    let nrm = l2_norm(&phi, area);
    phi.iter_mut().for_each(|v| *v /= nrm);

    let mut mphi = vec![0.0; n];
    let rayleigh = |phi: &[f64], mphi: &mut Vec<f64>| -> f64 {
        m.mul_into(phi, mphi);
        let num: f64 = phi.iter().zip(mphi.iter()).map(|(a, b)| a * b).sum();
        let den: f64 = phi.iter().map(|a| a * a).sum();
        num / den
    };
    let residual_of = |phi: &[f64], mphi: &[f64], lambda: f64| -> f64 {
        let r: Vec<f64> = mphi.iter().zip(phi).map(|(a, b)| a - lambda * b).collect();
        l2_norm(&r, area) / (lambda.abs() * l2_norm(phi, area))
    };

    let mut lambda = rayleigh(&phi, &mut mphi);
    let mut iterations = 0;
    let mut converged = false;
    let mut residual = f64::INFINITY;
    while iterations < opts.max_iterations {
        iterations += 1;
        let guess: Vec<f64> = phi.iter().map(|v| v / lambda).collect();
        let (u, rep) = solver.solve(&phi, Some(&guess))?;
        rep.into_result()?;
        let sign = if u.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
        let nrm = l2_norm(&u, area);
        phi = u.into_iter().map(|v| sign * v / nrm).collect();
        let next = rayleigh(&phi, &mut mphi);
        residual = residual_of(&phi, &mphi, next);
        let change = (next - lambda).abs();
        lambda = next;
        if change < tol * lambda.abs() && residual <= tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NotConverged { iterations, residual });
    }
    let peak = phi.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let negative = phi.iter().filter(|v| **v <= -1e-10 * peak).count();
    if negative > 0 || !(lambda > 0.0) {
        return Err(Error::SignChange { negative, total: n });
    }
    let mut field = grid.scatter(&phi)?;
    // unit physical L² norm: ∫φ² dx = scale² h² Σφ²
    field.values_mut().iter_mut().for_each(|v| *v /= scale);
    Ok(Eigenpair { lambda: lambda / (scale * scale), phi: field, residual, iterations, domain, length, amplitude, scale })
}

/// `r = A ∫|v·∇φ|² / ∫|∇φ|²` with central differences in physical
/// variables. Bounded in `A` for the principal eigenfunction.
pub fn heinze_diagnostic(e: &Eigenpair, amplitude: f64) -> f64 {
    heinze_ratio(&e.phi, e.scale, amplitude)
}

/// Heinze ratio of any field on a Dirichlet grid whose physical spacing is
/// `scale · h`.
pub fn heinze_ratio(phi: &ScalarField, scale: f64, amplitude: f64) -> f64 {
    let g = phi.grid();
    let h = scale * g.spacing();
    let vals = phi.values();
    let at = |k: Option<usize>| k.map_or(0.0, |k| vals[k]);
    let (mut num, mut den) = (0.0, 0.0);
    for &k in g.unknown_nodes() {
        let (i, j) = g.node_ij(k);
        let d1 = (at(g.neighbor(i, j, 1, 0)) - at(g.neighbor(i, j, -1, 0))) / (2.0 * h);
        let d2 = (at(g.neighbor(i, j, 0, 1)) - at(g.neighbor(i, j, 0, -1))) / (2.0 * h);
        let p = g.node_point(k);
        let (v1, v2) = velocity(Point2::new(scale * p.x1, scale * p.x2));
        let along = v1 * d1 + v2 * d2;
        num += along * along;
        den += d1 * d1 + d2 * d2;
    }
    if den == 0.0 {
        0.0
    } else {
        amplitude * num / den
    }
}

/// Minimal Rayleigh quotient `∫|∇w|² / ∫w²` over `w = f(H)` on the flow cell
/// `[0,1]²`, `f` continuous piecewise linear on 64 equal bands of
/// `[0, 1/π]` with `f(0) = 0`. Cell integrals use the midpoint rule on a
/// `resolution × resolution` partition.
pub fn strong_flow_variational_bound(resolution: usize) -> Result<f64> {
    const K: usize = 64;
    if resolution < 2 {
        return Err(Error::Resolution(resolution));
    }
    let (stiff, mass) = level_set_forms(K, resolution);
    // drop the pinned knot f₀ = 0
    let stiff = stiff.view((1, 1), (K, K)).into_owned();
    let mass = mass.view((1, 1), (K, K)).into_owned();
    let chol = mass
        .cholesky()
        .ok_or_else(|| Error::InvalidArgument("band mass matrix is not positive definite".into()))?;
    let l_inv = chol
        .l()
        .try_inverse()
        .ok_or_else(|| Error::InvalidArgument("band mass factor is singular".into()))?;
    let c = &l_inv * stiff * l_inv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    Ok(eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min))
}

/// Stiffness and mass matrices of the piecewise-linear profile on `k` bands
/// (knots `0..=k`).
fn level_set_forms(k: usize, resolution: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let delta = 1.0 / (PI * k as f64);
    let mut stiff = DMatrix::<f64>::zeros(k + 1, k + 1);
    let mut mass = DMatrix::<f64>::zeros(k + 1, k + 1);
    let dq = 1.0 / resolution as f64;
    let w = dq * dq;
    for j in 0..resolution {
        for i in 0..resolution {
            let p = Point2::new((i as f64 + 0.5) * dq, (j as f64 + 0.5) * dq);
            let hv = stream(p).max(0.0);
            let (g1, g2) = stream_gradient(p);
            let band = ((hv / delta) as usize).min(k - 1);
            let t = hv / delta - band as f64;
            let grad2 = (g1 * g1 + g2 * g2) / (delta * delta);
            let (a, b) = (band, band + 1);
            stiff[(a, a)] += w * grad2;
            stiff[(b, b)] += w * grad2;
            stiff[(a, b)] -= w * grad2;
            stiff[(b, a)] -= w * grad2;
            let (pa, pb) = (1.0 - t, t);
            mass[(a, a)] += w * pa * pa;
            mass[(b, b)] += w * pb * pb;
            mass[(a, b)] += w * pa * pb;
            mass[(b, a)] += w * pa * pb;
        }
    }
    (stiff, mass)
}

/// Rayleigh quotient of `w = f(H)` for given knot values (`f[0]` is the
/// value at `H = 0`).
pub fn profile_quotient(knots: &[f64], resolution: usize) -> f64 {
    let k = knots.len() - 1;
    let (stiff, mass) = level_set_forms(k, resolution);
    let f = nalgebra::DVector::from_column_slice(knots);
    (f.transpose() * &stiff * &f)[(0, 0)] / (f.transpose() * &mass * &f)[(0, 0)]
}

/// One point of a regime scan: `ratio = λ L² / tr σ̄`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeRecord {
    pub length: f64,
    pub amplitude: f64,
    pub lambda: f64,
    pub trace_sigma: f64,
    pub ratio: f64,
}

pub fn regime_scan_record(length: f64, amplitude: f64, eigen: &Eigenpair, sigma: &EffectiveDiffusivity) -> Result<RegimeRecord> {
    if (eigen.length - length).abs() > 1e-12 || (eigen.amplitude - amplitude).abs() > 1e-12 * amplitude.max(1.0) {
        return Err(Error::InvalidArgument("eigenpair computed at a different (L, A)".into()));
    }
    if (sigma.amplitude - amplitude).abs() > 1e-12 * amplitude.max(1.0) {
        return Err(Error::InvalidArgument("effective diffusivity computed at a different A".into()));
    }
    let trace_sigma = sigma.trace();
    Ok(RegimeRecord {
        length,
        amplitude,
        lambda: eigen.lambda,
        trace_sigma,
        ratio: eigen.lambda * length * length / trace_sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laplacian_eigenvalue_unit_square() {
        let e = principal_eigenpair(1.0, 0.0, 65, 1e-8).unwrap();
        assert!((e.lambda - 2.0 * PI * PI).abs() < 0.01 * 2.0 * PI * PI, "{}", e.lambda);
        assert!(e.residual <= 1e-8);
        assert!(e.phi.grid().unknown_nodes().iter().all(|&k| e.phi.values()[k] > 0.0));
        let norm = (e.phi.values().iter().map(|v| v * v).sum::<f64>() * e.phi.grid().cell_area()).sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigenvalue_scales_with_side() {
        let e = principal_eigenpair(4.0, 0.0, 129, 1e-8).unwrap();
        let exact = 2.0 * PI * PI / 16.0;
        assert!((e.lambda - exact).abs() < 0.01 * exact);
    }

    #[test]
    fn disk_eigenvalue_matches_bessel_zero() {
        // j₀,₁ = 2.404825557695773
        let j01: f64 = 2.404825557695773;
        for rescale in [true, false] {
            let opts = EigenOptions { rescale_disk: rescale, ..EigenOptions::default() };
            let e = principal_eigenpair_with(Domain::Disk, 2.0, 0.0, 161, 1e-8, &opts, &Drift::new(0.0)).unwrap();
            let exact = j01 * j01 / 4.0;
            assert!((e.lambda - exact).abs() < 0.02 * exact, "{} vs {exact}", e.lambda);
        }
    }

    #[test]
    fn advection_raises_eigenvalue_below_first_integral_bound() {
        let e0 = principal_eigenpair(2.0, 0.0, 41, 1e-8).unwrap();
        let n = crate::exittime::exit_resolution(Domain::Square, 2.0, 100.0, &ResolutionRule::default(), 8);
        let e = principal_eigenpair(2.0, 100.0, n, 1e-8).unwrap();
        assert!(e.lambda > e0.lambda);
        assert!(e.lambda <= 2.0 * PI * PI * 1.02);
        assert!(heinze_diagnostic(&e, 100.0) > 0.0);
    }

    #[test]
    fn heinze_of_stream_function_vanishes() {
        let g = Arc::new(crate::grid::build_grid(crate::Topology::DirichletSquare, 2.0, 129).unwrap());
        let h = g.sample(stream);
        let r = heinze_ratio(&h, 1.0, 100.0);
        assert!(r < 1e-2, "{r}");
    }

    #[test]
    fn identity_profile_quotient_is_two_pi_squared() {
        let knots: Vec<f64> = (0..=64).map(|k| k as f64 / (64.0 * PI)).collect();
        let q = profile_quotient(&knots, 800);
        assert!((q - 2.0 * PI * PI).abs() < 0.01 * 2.0 * PI * PI, "{q}");
    }

    #[test]
    fn minimised_quotient_is_below_identity() {
        let q = strong_flow_variational_bound(400).unwrap();
        assert!(q <= 2.0 * PI * PI && q > PI * PI, "{q}");
    }

    #[test]
    fn regime_record_at_zero_drift() {
        let e = principal_eigenpair(1.0, 0.0, 65, 1e-8).unwrap();
        let r = regime_scan_record(1.0, 0.0, &e, &EffectiveDiffusivity::identity(0.0)).unwrap();
        assert!((r.ratio - e.lambda / 2.0).abs() < 1e-12);
        assert!((r.ratio - PI * PI).abs() < 0.01 * PI * PI);
    }

    #[test]
    fn rejects_bad_tolerance() {
        assert!(principal_eigenpair(1.0, 0.0, 17, 0.0).is_err());
    }
}
