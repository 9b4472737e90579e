//! Two-scale approximation of the exit time on a disk of radius `L`.
//!
//! On the unit disk with drift `A L v(Lx)`,
//! `τ̃ = τ₁₀ + τ₁₁/L + τ₁₂/L²` where `τ₁₀ = (1 − |x|²)/2`,
//! `τ₁₁ = −χ₁(Lx)x₁ − χ₂(Lx)x₂` and `τ₁₂ = τ₁₂(Lx)` is the second
//! corrector. Up to discretisation, `(−Δ + A L v(Lx)·∇)τ̃ = tr σ̄`, so
//! `(τ̃ ± 2c̃)/tr σ̄` bracket the rescaled exit time `τ₁ = τ/L²`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::cellproblem::{second_corrector, CorrectorSet, EffectiveDiffusivity};
use crate::exittime::{domain_grid, Domain, ExitTimeSolution};
use crate::flow::Point2;
use crate::grid::{apply_operator, Drift, Grid, ScalarField, Scheme};
use crate::{Error, Result};

/// Rim width, in grid spacings, excluded from residual reporting.
pub const RIM_WIDTH: f64 = 3.0;

/// The three layers of `τ̃` sampled on the unit-disk grid at every node,
/// exterior nodes included.
#[derive(Debug, Clone)]
pub struct MultiscaleApproximation {
    pub grid: Arc<Grid>,
    pub tau10: ScalarField,
    pub tau11: ScalarField,
    pub tau12: ScalarField,
    pub tau_tilde: ScalarField,
    pub amplitude: f64,
    pub length: f64,
    pub scheme: Scheme,
    /// Largest distance, in cell spacings, from a fast coordinate `Lx` to
    /// the nearest cell node; zero when the grids are aligned.
    pub fast_offset: f64,
    /// Largest gap between bilinear and nearest-node corrector values.
    pub fast_sampling_error: f64,
}

impl MultiscaleApproximation {
    /// `c̃ = max |τ̃ − τ₁₀|` over the disk and its Dirichlet rim.
    pub fn sup_deviation(&self) -> f64 {
        let g = &self.grid;
        let reach = 1.0 + std::f64::consts::SQRT_2 * g.spacing() + 1e-12;
        (0..g.node_count())
            .filter(|&k| g.node_point(k).norm() <= reach)
            .map(|k| (self.tau_tilde.values()[k] - self.tau10.values()[k]).abs())
            .fold(0.0, f64::max)
    }
}

/// `τ₁₁` at one slow point; linear in `x` at fixed fast variable.
pub fn tau11_at(c: &CorrectorSet, length: f64, x: Point2) -> f64 {
    let y = Point2::new(length * x.x1, length * x.x2);
    -c.chi1.interpolate_periodic(y) * x.x1 - c.chi2.interpolate_periodic(y) * x.x2
}

/// Builds `τ̃` on the unit disk with `resolution` nodes per axis.
///
/// The cell grid must be at least as fine as the fast sampling `L·h`.
pub fn build_approximation(c: &CorrectorSet, length: f64, resolution: usize) -> Result<MultiscaleApproximation> {
    let tau12 = second_corrector(c)?;
    build_with_second_corrector(c, &tau12, length, resolution)
}

/// As [`build_approximation`] with a precomputed second corrector.
pub fn build_with_second_corrector(
    c: &CorrectorSet,
    tau12_cell: &ScalarField,
    length: f64,
    resolution: usize,
) -> Result<MultiscaleApproximation> {
    let a = c.amplitude;
    let (grid, _, _) = domain_grid(Domain::Disk, length, a, resolution, true, &Drift::new(a))?;
    let h_cell = c.grid().spacing();
    let fast_h = length * grid.spacing();
    if h_cell > fast_h * (1.0 + 1e-9) {
        return Err(Error::InvalidArgument(format!(
            "incompatible resolutions: cell spacing {h_cell} is coarser than the fast sampling L·h = {fast_h}"
        )));
    }
    if !Arc::ptr_eq(tau12_cell.grid(), c.grid()) && tau12_cell.grid().node_count() != c.grid().node_count() {
        return Err(Error::DimensionMismatch { expected: c.grid().node_count(), got: tau12_cell.grid().node_count() });
    }
    let grid = Arc::new(grid);
    let n = grid.node_count();
    let fast = |k: usize| {
        let x = grid.node_point(k);
        (x, Point2::new(length * x.x1, length * x.x2))
    };
    let layers: Vec<[f64; 5]> = (0..n)
        .into_par_iter()
        .map(|k| {
            let (x, y) = fast(k);
            let (c1, c2) = (c.chi1.interpolate_periodic(y), c.chi2.interpolate_periodic(y));
            let t10 = 0.5 * (1.0 - x.x1 * x.x1 - x.x2 * x.x2);
            let t11 = -c1 * x.x1 - c2 * x.x2;
            let t12 = tau12_cell.interpolate_periodic(y);
            let gap = (c1 - c.chi1.nearest_periodic(y)).abs().max((c2 - c.chi2.nearest_periodic(y)).abs());
            let offset = [y.x1, y.x2]
                .iter()
                .map(|t| {
                    let s = (t + 1.0) / h_cell;
                    (s - s.round()).abs()
                })
                .fold(0.0, f64::max);
            [t10, t11, t12, gap, offset]
        })
        .collect();
    let field = |f: &dyn Fn(&[f64; 5]) -> f64| ScalarField::new(Arc::clone(&grid), layers.iter().map(f).collect());
    let tau10 = field(&|l| l[0])?;
    let tau11 = field(&|l| l[1])?;
    let tau12 = field(&|l| l[2])?;
    let tau_tilde = field(&|l| l[0] + l[1] / length + l[2] / (length * length))?;
    Ok(MultiscaleApproximation {
        grid,
        tau10,
        tau11,
        tau12,
        tau_tilde,
        amplitude: a,
        length,
        scheme: c.options.scheme,
        fast_offset: layers.iter().map(|l| l[4]).fold(0.0, f64::max),
        fast_sampling_error: layers.iter().map(|l| l[3]).fold(0.0, f64::max),
    })
}

/// Largest relative deviation `|Lτ̃ − tr σ̄| / tr σ̄` over interior nodes at
/// least `RIM_WIDTH·h` from the stair-step boundary.
pub fn residual_check(m: &MultiscaleApproximation, sigma: &EffectiveDiffusivity) -> Result<f64> {
    if (sigma.amplitude - m.amplitude).abs() > 1e-12 * m.amplitude.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "diffusivity at A = {} does not match the approximation at A = {}",
            sigma.amplitude, m.amplitude
        )));
    }
    let g = &m.grid;
    let drift = Drift::rescaled(m.amplitude, m.length);
    let applied = apply_operator(g, &drift, m.scheme, m.tau_tilde.values());
    let rim = g.rim_distance_mask(RIM_WIDTH * g.spacing());
    let tr = sigma.trace();
    Ok(g
        .unknown_nodes()
        .iter()
        .filter(|&&k| !rim[k])
        .map(|&k| ((applied[k] - tr) / tr).abs())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SandwichReport {
    pub c_tilde: f64,
    pub trace_sigma: f64,
    /// Worst excursions of `τ₁` outside the bracket, relative to `max τ₁`;
    /// non-positive when the bracket holds without slack.
    pub below: f64,
    pub above: f64,
    pub slack: f64,
}

impl SandwichReport {
    pub fn holds(&self) -> bool {
        self.below <= self.slack && self.above <= self.slack
    }
}

/// Compares the disk exit time against `(τ̃ ± 2c̃)/tr σ̄` at every unknown.
pub fn sandwich_check(
    m: &MultiscaleApproximation,
    sigma: &EffectiveDiffusivity,
    exit: &ExitTimeSolution,
    slack: f64,
) -> Result<SandwichReport> {
    if exit.domain != Domain::Disk || (exit.scale - m.length).abs() > 1e-12 * m.length {
        return Err(Error::TopologyMismatch("sandwich needs the rescaled disk exit time of the same L".into()));
    }
    if exit.grid.node_count() != m.grid.node_count() || exit.grid.spacing() != m.grid.spacing() {
        return Err(Error::DimensionMismatch { expected: m.grid.node_count(), got: exit.grid.node_count() });
    }
    let tr = sigma.trace();
    let c = m.sup_deviation();
    let s2 = m.length * m.length;
    let tau1 = |k: usize| exit.tau.values()[k] / s2;
    let peak = exit.max_tau() / s2;
    let (mut below, mut above) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &k in m.grid.unknown_nodes() {
        let t = m.tau_tilde.values()[k];
        below = below.max(((t - 2.0 * c) / tr - tau1(k)) / peak);
        above = above.max((tau1(k) - (t + 2.0 * c) / tr) / peak);
    }
    Ok(SandwichReport { c_tilde: c, trace_sigma: tr, below, above, slack })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cellproblem::{effective_diffusivity, solve_correctors_with, CellOptions};
    use crate::exittime::{solve_exit_time_with, ExitOptions};
    use crate::grid::ResolutionRule;

    fn cell(a: f64, n: usize) -> CorrectorSet {
        let opts = CellOptions { rule: ResolutionRule::relaxed(10.0), scheme: Scheme::Central, ..Default::default() };
        solve_correctors_with(a, n, &opts).unwrap()
    }

    #[test]
    fn no_flow_reduces_to_the_parabola() {
        let c = cell(0.0, 16);
        let m = build_approximation(&c, 2.0, 33).unwrap();
        for k in 0..m.grid.node_count() {
            assert_eq!(m.tau_tilde.values()[k], m.tau10.values()[k]);
        }
        assert_eq!(m.sup_deviation(), 0.0);
        let r = residual_check(&m, &effective_diffusivity(&c)).unwrap();
        assert!(r < 1e-10, "{r}");
    }

    #[test]
    fn tau11_is_linear_in_the_slow_variable() {
        let (c, l) = (cell(64.0, 32), 4.0);
        // shifts by a multiple of 2/L keep the fast variable fixed
        let x0 = Point2::new(0.13, -0.31);
        let step = Point2::new(2.0 / l, 4.0 / l);
        let at = |t: f64| tau11_at(&c, l, Point2::new(x0.x1 + t * step.x1, x0.x2 + t * step.x2));
        let (f0, f1, f2) = (at(0.0), at(1.0), at(2.0));
        assert!((f2 - 2.0 * f1 + f0).abs() < 1e-12);
    }

    #[test]
    fn first_corrector_layer_is_bounded_on_separatrices() {
        let (c, l) = (cell(64.0, 32), 4.0);
        let m = build_approximation(&c, l, 65).unwrap();
        let g = &m.grid;
        for k in 0..g.node_count() {
            let x = g.node_point(k);
            let y = Point2::new(l * x.x1, l * x.x2);
            let on_line = (y.x1 - y.x1.round()).abs() < 1e-9 || (y.x2 - y.x2.round()).abs() < 1e-9;
            if on_line {
                assert!(m.tau11.values()[k].abs() <= (x.x1.abs() + x.x2.abs()) * (1.0 + 1e-9));
            }
        }
        assert_eq!(m.fast_offset, 0.0);
    }

    #[test]
    fn rejects_a_cell_grid_coarser_than_the_fast_sampling() {
        let c = cell(0.0, 8);
        assert!(build_approximation(&c, 4.0, 129).is_err());
    }

    #[test]
    fn residual_shrinks_under_refinement() {
        let (a, l) = (64.0, 2.0);
        let mut last = f64::INFINITY;
        for m in [16usize, 32, 64] {
            let c = cell(a, 2 * m);
            let s = effective_diffusivity(&c);
            let approx = build_approximation(&c, l, (2.0 * l) as usize * m + 1).unwrap();
            let r = residual_check(&approx, &s).unwrap();
            assert!(r < last, "m = {m}: {r} vs {last}");
            last = r;
        }
        assert!(last < 0.05, "{last}");
    }

    #[test]
    fn exit_time_lies_in_the_bracket() {
        let (a, l, m) = (64.0, 2.0, 16usize);
        let c = cell(a, 2 * m);
        let s = effective_diffusivity(&c);
        let n = (2.0 * l) as usize * m + 1;
        let approx = build_approximation(&c, l, n).unwrap();
        let opts = ExitOptions { scheme: Some(Scheme::Central), rule: ResolutionRule::relaxed(10.0), ..Default::default() };
        let exit = solve_exit_time_with(Domain::Disk, l, a, n, &opts, &Drift::new(a)).unwrap();
        let rep = sandwich_check(&approx, &s, &exit, 0.02).unwrap();
        assert!(rep.holds(), "{rep:?}");
        assert!(residual_check(&approx, &EffectiveDiffusivity::identity(2.0 * a)).is_err());
    }
}
