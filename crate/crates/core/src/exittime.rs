//! Expected exit time: `−Δτ + A v·∇τ = 1` in `D`, `τ = 0` on `∂D`.
//!
//! Squares are solved in physical coordinates. Disks of radius `L` are
//! solved on the unit disk with drift `A L v(L x)` and reported as
//! `τ(x) = L² τ₁(x/L)`, which keeps the grid anchored to the period cell.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::cellproblem::EffectiveDiffusivity;
use crate::flow::{stream, Point2};
use crate::grid::{assemble_with, build_grid, Drift, Grid, ResolutionRule, ScalarField, Scheme, Topology};
use crate::linsolve::{SolveOptions, SolveReport, Solver};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// `[−L/2, L/2]²` for even `L`, `[0, 1]²` for `L = 1`.
    Square,
    /// Disk of radius `L` centred at a cell corner.
    Disk,
}

impl Domain {
    pub fn name(&self) -> &'static str {
        match self {
            Domain::Square => "square",
            Domain::Disk => "disk",
        }
    }
}

impl std::str::FromStr for Domain {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "square" => Ok(Domain::Square),
            "disk" => Ok(Domain::Disk),
            other => Err(Error::InvalidArgument(format!("unknown domain '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitOptions {
    /// `None` picks [`Scheme::for_regime`].
    pub scheme: Option<Scheme>,
    pub solve: SolveOptions,
    pub rule: ResolutionRule,
    /// Solve disks on the unit disk (see module docs).
    pub rescale_disk: bool,
}

impl Default for ExitOptions {
    fn default() -> Self {
        Self {
            scheme: None,
            solve: SolveOptions::with_tol(1e-9),
            rule: ResolutionRule::default(),
            rescale_disk: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExitTimeSolution {
    pub domain: Domain,
    /// Computational grid; physical position of node `k` is
    /// `scale · grid.node_point(k)`.
    pub grid: Arc<Grid>,
    pub tau: ScalarField,
    pub amplitude: f64,
    pub length: f64,
    pub scale: f64,
    pub report: SolveReport,
}

impl ExitTimeSolution {
    pub fn physical_point(&self, k: usize) -> Point2 {
        let p = self.grid.node_point(k);
        Point2::new(self.scale * p.x1, self.scale * p.x2)
    }

    /// Physical grid spacing.
    pub fn spacing(&self) -> f64 {
        self.scale * self.grid.spacing()
    }

    pub fn max_tau(&self) -> f64 {
        self.tau.max()
    }

    /// Geometric centre of the domain.
    pub fn center(&self) -> Point2 {
        match self.domain {
            Domain::Disk => Point2::ORIGIN,
            Domain::Square => {
                let o = self.grid.origin();
                Point2::new(o.x1 + self.length / 2.0, o.x2 + self.length / 2.0)
            }
        }
    }

    /// `τ` at the node nearest the domain centre.
    pub fn tau_center(&self) -> f64 {
        let c = self.center();
        self.tau.nearest(Point2::new(c.x1 / self.scale, c.x2 / self.scale))
    }
}

/// Nodes per axis meeting `rule` with an even number of intervals per unit
/// length (so separatrices fall on grid lines), at least `floor` per unit.
pub fn exit_resolution(domain: Domain, length: f64, amplitude: f64, rule: &ResolutionRule, floor: usize) -> usize {
    let m = rule.intervals_per_unit(amplitude, floor);
    let span = match domain {
        Domain::Square => length,
        Domain::Disk => 2.0 * length,
    };
    (span * m as f64).round() as usize + 1
}

pub fn solve_exit_time(domain: Domain, length: f64, amplitude: f64, resolution: usize) -> Result<ExitTimeSolution> {
    solve_exit_time_with(domain, length, amplitude, resolution, &ExitOptions::default(), &Drift::new(amplitude))
}

/// Full-control variant. `drift` supplies amplitude and component signs in
/// physical variables; its `fast_scale` is overwritten for rescaled disks.
pub fn solve_exit_time_with(
    domain: Domain,
    length: f64,
    amplitude: f64,
    resolution: usize,
    opts: &ExitOptions,
    drift: &Drift,
) -> Result<ExitTimeSolution> {
    let (grid, scale, drift) = domain_grid(domain, length, amplitude, resolution, opts.rescale_disk, drift)?;
    opts.rule.check(scale * grid.spacing(), amplitude)?;
    let grid = Arc::new(grid);
    let scheme = opts.scheme.unwrap_or_else(|| Scheme::for_regime(length, amplitude));
    let m = assemble_with(&grid, &drift, scheme);
    let solve_opts = opts.solve.hint(amplitude * scale, grid.spacing());
    let solver = Solver::for_grid(&m, &grid, &drift, scheme, solve_opts)?;
    let (x, report) = solver.solve(&vec![1.0; m.dim()], None)?;
    report.into_result()?;
    let mut tau = grid.scatter(&x)?;
    let s2 = scale * scale;
    tau.values_mut().iter_mut().for_each(|v| *v *= s2);
    Ok(ExitTimeSolution { domain, grid, tau, amplitude, length, scale, report })
}

/// Computational grid, physical length per grid unit, and the drift in grid
/// variables for `domain` of size `length`.
pub(crate) fn domain_grid(
    domain: Domain,
    length: f64,
    amplitude: f64,
    resolution: usize,
    rescale_disk: bool,
    drift: &Drift,
) -> Result<(Grid, f64, Drift)> {
    if !(length > 0.0) || !length.is_finite() {
        return Err(Error::InvalidArgument(format!("domain size must be positive, got {length}")));
    }
    if !(amplitude >= 0.0) || !amplitude.is_finite() {
        return Err(Error::InvalidArgument(format!("amplitude must be >= 0, got {amplitude}")));
    }
    let mut drift = Drift { amplitude, fast_scale: 1.0, ..*drift };
    let (grid, scale) = match domain {
        Domain::Square => (build_grid(Topology::DirichletSquare, length, resolution)?, 1.0),
        Domain::Disk if rescale_disk => {
            drift.fast_scale = length;
            (build_grid(Topology::DirichletDisk { radius: 1.0 }, 2.0, resolution)?, length)
        }
        Domain::Disk => (build_grid(Topology::DirichletDisk { radius: length }, 2.0 * length, resolution)?, 1.0),
    };
    if grid.unknown_count() == 0 {
        return Err(Error::Resolution(resolution));
    }
    Ok((grid, scale, drift))
}

/// Deviation from the homogenised profile on a disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileDeviation {
    /// `max |τ(x) − (L² − |x|²) / (2 tr σ̄)|` over interior nodes.
    pub max_deviation: f64,
    /// `max_deviation / (L / max(A,1)^{1/4})`.
    pub normalized: f64,
}

pub fn homogenized_profile_deviation(sol: &ExitTimeSolution, sigma: &EffectiveDiffusivity) -> Result<ProfileDeviation> {
    if sol.domain != Domain::Disk {
        return Err(Error::TopologyMismatch(format!("profile deviation needs a disk, got {}", sol.domain.name())));
    }
    let l2 = sol.length * sol.length;
    let tr = sigma.trace();
    let max_deviation = sol
        .grid
        .unknown_nodes()
        .iter()
        .map(|&k| {
            let p = sol.physical_point(k);
            (sol.tau.values()[k] - (l2 - p.x1 * p.x1 - p.x2 * p.x2) / (2.0 * tr)).abs()
        })
        .fold(0.0, f64::max);
    let normalized = max_deviation / (sol.length / sol.amplitude.max(1.0).powf(0.25));
    Ok(ProfileDeviation { max_deviation, normalized })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparatrixReport {
    pub max_on_sep: f64,
    pub max_global: f64,
    pub ratio: f64,
}

/// Default separatrix tolerance `1.5 π h` (physical spacing).
pub fn default_separatrix_tol(sol: &ExitTimeSolution) -> f64 {
    1.5 * PI * sol.spacing()
}

/// Compares the maximum of `τ` over nodes with `|H| < tol` to its global
/// maximum.
pub fn separatrix_report(sol: &ExitTimeSolution, tol: f64) -> Result<SeparatrixReport> {
    let on_sep: Vec<usize> =
        (0..sol.grid.node_count()).filter(|&k| stream(sol.physical_point(k)).abs() < tol).collect();
    if on_sep.is_empty() {
        return Err(Error::EmptySeparatrix);
    }
    let vals = sol.tau.values();
    let max_on_sep = on_sep.iter().map(|&k| vals[k]).fold(f64::NEG_INFINITY, f64::max);
    let max_global = sol.max_tau();
    let ratio = if max_global > 0.0 { max_on_sep / max_global } else { 0.0 };
    Ok(SeparatrixReport { max_on_sep, max_global, ratio })
}

/// `max τ ≤ L²/(4π) + 5 h L`: the exit time of the disk with the same area,
/// plus discretisation slack. Squares only.
pub fn drift_independent_bound_check(sol: &ExitTimeSolution) -> Result<bool> {
    if sol.domain != Domain::Square {
        return Err(Error::TopologyMismatch(format!("drift-independent bound is checked on squares, got {}", sol.domain.name())));
    }
    Ok(sol.max_tau() <= drift_independent_bound(sol))
}

pub fn drift_independent_bound(sol: &ExitTimeSolution) -> f64 {
    let l = sol.length;
    l * l / (4.0 * PI) + 5.0 * sol.spacing() * l
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Torsion function of the unit square at its centre.
    fn torsion_center_oracle(terms: usize) -> f64 {
        let mut s = 0.125;
        for t in 0..terms {
            let k = (2 * t + 1) as f64;
            let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
            s -= 4.0 / (PI.powi(3) * k.powi(3)) * sign / (k * PI / 2.0).cosh();
        }
        s
    }

    #[test]
    fn oracle_value() {
        assert!((torsion_center_oracle(50) - 0.0736713).abs() < 1e-6);
    }

    #[test]
    fn unit_square_torsion() {
        let sol = solve_exit_time(Domain::Square, 1.0, 0.0, 65).unwrap();
        let c = sol.tau_center();
        assert!((c - torsion_center_oracle(50)).abs() < 0.002);
        assert!((sol.max_tau() - c).abs() < 1e-12);
        assert!(drift_independent_bound_check(&sol).unwrap());
    }

    #[test]
    fn disk_radial_solution() {
        for opts in [ExitOptions::default(), ExitOptions { rescale_disk: false, ..ExitOptions::default() }] {
            let sol = solve_exit_time_with(Domain::Disk, 2.0, 0.0, 321, &opts, &Drift::new(0.0)).unwrap();
            assert!((sol.tau_center() - 1.0).abs() < 0.02, "{}", sol.tau_center());
            let sig = EffectiveDiffusivity::identity(0.0);
            let dev = homogenized_profile_deviation(&sol, &sig).unwrap();
            assert!(dev.max_deviation <= 0.02 * 1.0, "{dev:?}");
        }
    }

    #[test]
    fn rescaled_disk_matches_physical_disk() {
        let a = 20.0;
        let res = exit_resolution(Domain::Disk, 2.0, a, &ResolutionRule::default(), 8);
        let scaled = solve_exit_time(Domain::Disk, 2.0, a, res).unwrap();
        let opts = ExitOptions { rescale_disk: false, ..ExitOptions::default() };
        let phys = solve_exit_time_with(Domain::Disk, 2.0, a, res, &opts, &Drift::new(a)).unwrap();
        for (x, y) in scaled.tau.values().iter().zip(phys.tau.values()) {
            assert!((x - y).abs() < 1e-7 * phys.max_tau());
        }
    }

    #[test]
    fn point_symmetry_and_positivity() {
        let a = 50.0;
        for domain in [Domain::Square, Domain::Disk] {
            let n = exit_resolution(domain, 2.0, a, &ResolutionRule::default(), 8);
            let sol = solve_exit_time(domain, 2.0, a, n).unwrap();
            let g = &sol.grid;
            let scale = sol.max_tau();
            assert!(sol.tau.min() >= -1e-12 * scale);
            for k in 0..g.node_count() {
                let (i, j) = g.node_ij(k);
                let mirror = sol.tau.at(g.n1() - 1 - i, g.n2() - 1 - j);
                assert!((sol.tau.values()[k] - mirror).abs() <= 1e-6 * scale);
            }
            let k_max = (0..g.node_count()).max_by(|&a, &b| sol.tau.values()[a].total_cmp(&sol.tau.values()[b])).unwrap();
            assert!(g.unknown_index(k_max).is_some());
        }
    }

    #[test]
    fn advection_lowers_the_exit_time_bound() {
        for a in [10.0, 100.0] {
            let n = exit_resolution(Domain::Square, 1.0, a, &ResolutionRule::default(), 64);
            let sol = solve_exit_time(Domain::Square, 1.0, a, n).unwrap();
            assert!(drift_independent_bound_check(&sol).unwrap());
        }
    }

    #[test]
    fn bound_check_rejects_inflated_field() {
        let mut sol = solve_exit_time(Domain::Square, 1.0, 0.0, 129).unwrap();
        sol.tau.values_mut().iter_mut().for_each(|v| *v *= 2.0);
        assert!(!drift_independent_bound_check(&sol).unwrap());
    }

    #[test]
    fn separatrix_ratio_at_zero_drift() {
        let sol = solve_exit_time(Domain::Square, 4.0, 0.0, 129).unwrap();
        let rep = separatrix_report(&sol, default_separatrix_tol(&sol)).unwrap();
        assert!(rep.ratio > 0.5 && rep.ratio <= 1.0 + 1e-12, "{rep:?}");
    }

    #[test]
    fn refinement_is_stable() {
        let a = 64.0;
        let n = exit_resolution(Domain::Square, 2.0, a, &ResolutionRule::default(), 8);
        let coarse = solve_exit_time(Domain::Square, 2.0, a, n).unwrap();
        let fine = solve_exit_time(Domain::Square, 2.0, a, 2 * n - 1).unwrap();
        let (c, f) = (coarse.tau_center(), fine.tau_center());
        assert!((c - f).abs() <= 0.02 * f, "{c} vs {f}");
    }

    #[test]
    fn mismatched_topologies_are_rejected() {
        let sq = solve_exit_time(Domain::Square, 1.0, 0.0, 17).unwrap();
        assert!(matches!(
            homogenized_profile_deviation(&sq, &EffectiveDiffusivity::identity(0.0)),
            Err(Error::TopologyMismatch(_))
        ));
        let disk = solve_exit_time(Domain::Disk, 1.0, 0.0, 17).unwrap();
        assert!(drift_independent_bound_check(&disk).is_err());
    }
}
