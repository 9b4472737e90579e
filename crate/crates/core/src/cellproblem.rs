//! Cell problems on the period cell `[−1, 1)²`.
//!
//! The correctors `χ_j` are the mean-zero periodic solutions of
//! `−Δχ_j + A v·∇χ_j = −A v_j`. From them we get the effective diffusivity
//! `σ̄_ij = δ_ij + ⟨∇χ_i·∇χ_j⟩`, the interior profile `ξ_i`, and the second
//! corrector `τ₁₂` that closes the two-scale expansion on the disk.

use std::sync::Arc;

use crate::flow::velocity;
use crate::grid::{assemble, build_grid, Drift, Grid, ResolutionRule, ScalarField, Scheme, Topology};
use crate::linsolve::{SolveOptions, SolveReport, Solver};
use crate::stats::power_law_fit;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellOptions {
    pub scheme: Scheme,
    pub solve: SolveOptions,
    pub rule: ResolutionRule,
}

impl Default for CellOptions {
    fn default() -> Self {
        Self {
            scheme: Scheme::Central,
            solve: SolveOptions { tol: 1e-10, ..SolveOptions::default() },
            rule: ResolutionRule::default(),
        }
    }
}

/// The two correctors at one amplitude.
#[derive(Debug, Clone)]
pub struct CorrectorSet {
    pub amplitude: f64,
    pub chi1: ScalarField,
    pub chi2: ScalarField,
    pub resolution: usize,
    pub reports: [SolveReport; 2],
    pub options: CellOptions,
}

impl CorrectorSet {
    pub fn grid(&self) -> &Arc<Grid> {
        self.chi1.grid()
    }

    pub fn chi(&self, j: usize) -> &ScalarField {
        if j == 0 {
            &self.chi1
        } else {
            &self.chi2
        }
    }
}

/// Effective diffusion matrix at one amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveDiffusivity {
    pub amplitude: f64,
    pub sigma: [[f64; 2]; 2],
    pub sigma0_fit: Option<f64>,
}

impl EffectiveDiffusivity {
    pub fn identity(amplitude: f64) -> Self {
        Self { amplitude, sigma: [[1.0, 0.0], [0.0, 1.0]], sigma0_fit: None }
    }

    pub fn trace(&self) -> f64 {
        self.sigma[0][0] + self.sigma[1][1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpNorms {
    pub l1: f64,
    pub l2: f64,
    pub l4: f64,
    pub linf: f64,
}

impl LpNorms {
    fn of(f: &ScalarField) -> Self {
        Self { l1: f.lp_norm(1.0), l2: f.lp_norm(2.0), l4: f.lp_norm(4.0), linf: f.lp_norm(f64::INFINITY) }
    }

    pub fn get(&self, p: f64) -> Option<f64> {
        match p {
            p if p == 1.0 => Some(self.l1),
            p if p == 2.0 => Some(self.l2),
            p if p == 4.0 => Some(self.l4),
            p if p.is_infinite() => Some(self.linf),
            _ => None,
        }
    }
}

/// `ξ_i = χ_i + y_i − ½ sign(y_i)` and its norms over the period cell
/// (integrals, not averages).
#[derive(Debug, Clone)]
pub struct InteriorDeviation {
    pub xi1: ScalarField,
    pub xi2: ScalarField,
    pub lp_norms: [LpNorms; 2],
}

/// Solves both cell problems with default options.
pub fn solve_correctors(amplitude: f64, resolution: usize) -> Result<CorrectorSet> {
    solve_correctors_with(amplitude, resolution, &CellOptions::default())
}

pub fn solve_correctors_with(amplitude: f64, resolution: usize, opts: &CellOptions) -> Result<CorrectorSet> {
    if !(amplitude >= 0.0) {
        return Err(Error::InvalidArgument(format!("amplitude must be >= 0, got {amplitude}")));
    }
    let grid = Arc::new(build_grid(Topology::PeriodicCell, 2.0, resolution)?);
    opts.rule.check(grid.spacing(), amplitude)?;
    let m = assemble(&grid, amplitude, opts.scheme);
    let solve_opts = opts.solve.hint(amplitude, grid.spacing());
    let solver = Solver::for_grid(&m, &grid, &Drift::new(amplitude), opts.scheme, solve_opts)?;

    let rhs = |j: usize| -> Vec<f64> {
        (0..grid.node_count())
            .map(|k| {
                let v = velocity(grid.node_point(k));
                -amplitude * if j == 0 { v.0 } else { v.1 }
            })
            .collect()
    };
    let (r1, r2) = rayon::join(|| solver.solve(&rhs(0), None), || solver.solve(&rhs(1), None));
    let (x1, rep1) = r1?;
    let (x2, rep2) = r2?;
    rep1.into_result()?;
    rep2.into_result()?;
    Ok(CorrectorSet {
        amplitude,
        chi1: grid.scatter(&x1)?,
        chi2: grid.scatter(&x2)?,
        resolution,
        reports: [rep1, rep2],
        options: *opts,
    })
}

/// Central-difference gradient with periodic wrap.
pub fn periodic_gradient(f: &ScalarField) -> (Vec<f64>, Vec<f64>) {
    let g = f.grid();
    let h2 = 2.0 * g.spacing();
    let v = f.values();
    let mut d1 = vec![0.0; v.len()];
    let mut d2 = vec![0.0; v.len()];
    for k in 0..v.len() {
        let (i, j) = g.node_ij(k);
        let e = g.neighbor(i, j, 1, 0).unwrap();
        let w = g.neighbor(i, j, -1, 0).unwrap();
        let n = g.neighbor(i, j, 0, 1).unwrap();
        let s = g.neighbor(i, j, 0, -1).unwrap();
        d1[k] = (v[e] - v[w]) / h2;
        d2[k] = (v[n] - v[s]) / h2;
    }
    (d1, d2)
}

fn mean(v: impl Iterator<Item = f64>, n: usize) -> f64 {
    v.sum::<f64>() / n as f64
}

/// `σ̄_ij = δ_ij + ⟨∇χ_i·∇χ_j⟩` with node-weight quadrature.
pub fn effective_diffusivity(c: &CorrectorSet) -> EffectiveDiffusivity {
    let g1 = periodic_gradient(&c.chi1);
    let g2 = periodic_gradient(&c.chi2);
    let n = g1.0.len();
    let inner = |a: &(Vec<f64>, Vec<f64>), b: &(Vec<f64>, Vec<f64>)| {
        mean((0..n).map(|k| a.0[k] * b.0[k] + a.1[k] * b.1[k]), n)
    };
    let s11 = 1.0 + inner(&g1, &g1);
    let s22 = 1.0 + inner(&g2, &g2);
    let s12 = inner(&g1, &g2);
    let s21 = inner(&g2, &g1);
    EffectiveDiffusivity { amplitude: c.amplitude, sigma: [[s11, s12], [s21, s22]], sigma0_fit: None }
}

/// `maxᵢ |⟨|∇χᵢ|²⟩ + A⟨vᵢχᵢ⟩| / (1 + ⟨|∇χᵢ|²⟩)`.
pub fn energy_identity_residual(c: &CorrectorSet) -> f64 {
    let g = c.grid();
    let n = g.node_count();
    (0..2)
        .map(|i| {
            let chi = c.chi(i);
            let (d1, d2) = periodic_gradient(chi);
            let energy = mean((0..n).map(|k| d1[k] * d1[k] + d2[k] * d2[k]), n);
            let flux = mean(
                (0..n).map(|k| {
                    let v = velocity(g.node_point(k));
                    (if i == 0 { v.0 } else { v.1 }) * chi.values()[k]
                }),
                n,
            );
            (energy + c.amplitude * flux).abs() / (1.0 + energy)
        })
        .fold(0.0, f64::max)
}

fn sign0(y: f64) -> f64 {
    if y > 0.0 {
        1.0
    } else if y < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn interior_deviation(c: &CorrectorSet) -> InteriorDeviation {
    let g = c.grid();
    let xi = |j: usize| {
        let chi = c.chi(j).values();
        let values = (0..g.node_count())
            .map(|k| {
                let p = g.node_point(k);
                let y = if j == 0 { p.x1 } else { p.x2 };
                chi[k] + y - 0.5 * sign0(y)
            })
            .collect();
        ScalarField::new(Arc::clone(g), values).expect("length matches grid")
    };
    let xi1 = xi(0);
    let xi2 = xi(1);
    let lp_norms = [LpNorms::of(&xi1), LpNorms::of(&xi2)];
    InteriorDeviation { xi1, xi2, lp_norms }
}

/// Largest violation of the corrector symmetries, relative to `‖χ₁‖∞`:
/// `χ₁` odd in `y₁` and even in `y₂`, `χ₂` even in `y₁` and odd in `y₂`,
/// and `χ₂(y₁, y₂) = χ₁(y₂ + 1, y₁)`.
pub fn symmetry_defect(c: &CorrectorSet) -> f64 {
    let g = c.grid();
    let (n1, n2) = (g.n1(), g.n2());
    let scale = c.chi1.max_abs();
    if scale == 0.0 {
        return c.chi2.max_abs();
    }
    let (v1, v2) = (c.chi1.values(), c.chi2.values());
    let mut worst = 0.0f64;
    for k in 0..g.node_count() {
        let (i, j) = g.node_ij(k);
        let m1 = g.node_index((n1 - i) % n1, j);
        let m2 = g.node_index(i, (n2 - j) % n2);
        let swapped = g.node_index((j + n1 / 2) % n1, i);
        for d in [v1[k] + v1[m1], v1[k] - v1[m2], v2[k] - v2[m1], v2[k] + v2[m2], v2[k] - v1[swapped]] {
            worst = worst.max(d.abs());
        }
    }
    worst / scale
}

/// Right side of the second-corrector problem,
/// `−2∂₁χ₁ − 2∂₂χ₂ + A(v₁χ₁ + v₂χ₂ − ⟨v₁χ₁⟩ − ⟨v₂χ₂⟩)`.
pub fn second_corrector_rhs(c: &CorrectorSet) -> Vec<f64> {
    let g = c.grid();
    let n = g.node_count();
    let (d11, _) = periodic_gradient(&c.chi1);
    let (_, d22) = periodic_gradient(&c.chi2);
    let vchi: Vec<f64> = (0..n)
        .map(|k| {
            let v = velocity(g.node_point(k));
            v.0 * c.chi1.values()[k] + v.1 * c.chi2.values()[k]
        })
        .collect();
    let avg = vchi.iter().sum::<f64>() / n as f64;
    (0..n).map(|k| -2.0 * d11[k] - 2.0 * d22[k] + c.amplitude * (vchi[k] - avg)).collect()
}

/// Mean-zero periodic solution `τ₁₂` of
/// `−Δτ₁₂ + A v·∇τ₁₂ = −2∂₁χ₁ − 2∂₂χ₂ + A(v·χ − ⟨v·χ⟩)`.
pub fn second_corrector(c: &CorrectorSet) -> Result<ScalarField> {
    let g = c.grid();
    let rhs = second_corrector_rhs(c);
    let scale = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mu = rhs.iter().sum::<f64>() / rhs.len() as f64;
    if mu.abs() > 1e-8 * scale.max(1.0) {
        return Err(Error::IncompatibleRhs { mean: mu });
    }
    let m = assemble(g, c.amplitude, c.options.scheme);
    let opts = c.options.solve.hint(c.amplitude, g.spacing());
    let (x, rep) = Solver::for_grid(&m, g, &Drift::new(c.amplitude), c.options.scheme, opts)?.solve(&rhs, None)?;
    rep.into_result()?;
    g.scatter(&x)
}

/// Least-squares fit `log σ̄₁₁ = log σ₀ + p log A`; returns `(σ₀, p)`.
pub fn fit_sigma0(data: &[EffectiveDiffusivity]) -> Result<(f64, f64)> {
    if data.len() < 3 {
        return Err(Error::InvalidArgument(format!("sigma0 fit needs >= 3 amplitudes, got {}", data.len())));
    }
    let a: Vec<f64> = data.iter().map(|d| d.amplitude).collect();
    let lo = a.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = a.iter().copied().fold(0.0, f64::max);
    if !(lo > 0.0) || hi / lo < 10.0 {
        return Err(Error::InvalidArgument("sigma0 fit needs positive amplitudes spanning a decade".into()));
    }
    let s: Vec<f64> = data.iter().map(|d| d.sigma[0][0]).collect();
    power_law_fit(&a, &s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mirror1(g: &Grid, k: usize) -> usize {
        let (i, j) = g.node_ij(k);
        g.node_index((g.n1() - i) % g.n1(), j)
    }

    fn mirror2(g: &Grid, k: usize) -> usize {
        let (i, j) = g.node_ij(k);
        g.node_index(i, (g.n2() - j) % g.n2())
    }

    #[test]
    fn zero_amplitude_gives_zero_correctors_and_identity() {
        let c = solve_correctors(0.0, 16).unwrap();
        assert!(c.chi1.max_abs() == 0.0 && c.chi2.max_abs() == 0.0);
        let s = effective_diffusivity(&c);
        assert_eq!(s.sigma, [[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(energy_identity_residual(&c), 0.0);
        assert_eq!(second_corrector(&c).unwrap().max_abs(), 0.0);
        let d = interior_deviation(&c);
        let g = c.grid();
        let k = g.node_index(12, 10);
        assert_eq!(g.node_point(k).x1, 0.5);
        assert_eq!(d.xi1.values()[k], 0.0);
    }

    #[test]
    fn corrector_bounds_and_symmetries_at_a100() {
        let c = solve_correctors(100.0, 128).unwrap();
        let g = c.grid();
        let h = g.spacing();
        let m1 = c.chi1.max_abs();
        assert!(m1 <= 1.0 + 5.0 * h, "{m1}");
        assert!(c.chi1.mean().abs() < 1e-10);
        let v1 = c.chi1.values();
        let v2 = c.chi2.values();
        let half = g.n1() / 2;
        for k in 0..g.node_count() {
            assert!((v1[k] + v1[mirror1(g, k)]).abs() <= 1e-6 * m1);
            assert!((v1[k] - v1[mirror2(g, k)]).abs() <= 1e-6 * m1);
            assert!((v2[k] - v2[mirror1(g, k)]).abs() <= 1e-6 * m1);
            assert!((v2[k] + v2[mirror2(g, k)]).abs() <= 1e-6 * m1);
            // χ₂(y₁, y₂) = χ₁(y₂ + 1, y₁)
            let (i, j) = g.node_ij(k);
            let swapped = g.node_index((j + half) % g.n1(), i);
            assert!((v2[k] - v1[swapped]).abs() <= 1e-6 * m1);
        }
        assert!(symmetry_defect(&c) <= 1e-6);
        let s = effective_diffusivity(&c);
        assert!(s.sigma[0][1].abs() <= 1e-3 * s.sigma[0][0]);
        assert!((s.sigma[0][1] - s.sigma[1][0]).abs() <= 1e-10);
        assert!(s.sigma[0][0] >= 1.0 && s.sigma[1][1] >= 1.0);
        assert!((s.sigma[0][0] - s.sigma[1][1]).abs() <= 1e-6 * s.sigma[0][0]);
    }

    #[test]
    fn trace_identity_is_definitional() {
        let c = solve_correctors(30.0, 32).unwrap();
        let s = effective_diffusivity(&c);
        let n = c.grid().node_count() as f64;
        let e: f64 = [&c.chi1, &c.chi2]
            .iter()
            .map(|f| {
                let (a, b) = periodic_gradient(f);
                a.iter().zip(&b).map(|(x, y)| x * x + y * y).sum::<f64>() / n
            })
            .sum();
        assert!((s.trace() - (2.0 + e)).abs() <= 1e-12 * s.trace());
    }

    #[test]
    fn energy_residual_decreases_under_refinement() {
        let coarse = energy_identity_residual(&solve_correctors(64.0, 64).unwrap());
        let fine = energy_identity_residual(&solve_correctors(64.0, 128).unwrap());
        assert!(fine <= 0.5 * coarse, "{coarse} -> {fine}");
    }

    #[test]
    fn second_corrector_is_mean_zero() {
        let c = solve_correctors(100.0, 64).unwrap();
        let t = second_corrector(&c).unwrap();
        assert!(t.mean().abs() <= 1e-12 * t.max_abs());
        assert!(t.max_abs() > 0.0);
    }

    #[test]
    fn sigma_grows_with_amplitude() {
        let s: Vec<f64> = [4.0, 16.0, 64.0]
            .iter()
            .map(|&a| effective_diffusivity(&solve_correctors(a, 64).unwrap()).sigma[0][0])
            .collect();
        assert!(s[0] < s[1] && s[1] < s[2], "{s:?}");
    }

    #[test]
    fn interior_deviation_is_bounded() {
        let c = solve_correctors(100.0, 64).unwrap();
        let d = interior_deviation(&c);
        assert!(d.lp_norms[0].linf <= 1.5 + 1e-9);
        assert!(d.lp_norms[0].l1 <= d.lp_norms[0].l2 * 2.0);
    }

    #[test]
    fn sigma0_fit_contract() {
        let synth: Vec<_> = [256.0f64, 1024.0, 4096.0]
            .iter()
            .map(|&a| EffectiveDiffusivity { amplitude: a, sigma: [[2.0 * a.sqrt(), 0.0], [0.0, 2.0 * a.sqrt()]], sigma0_fit: None })
            .collect();
        let (s0, p) = fit_sigma0(&synth).unwrap();
        assert!((s0 - 2.0).abs() < 1e-12 && (p - 0.5).abs() < 1e-12);
        assert!(fit_sigma0(&synth[..2]).is_err());
    }

    #[test]
    fn under_resolved_grid_is_rejected() {
        assert!(matches!(solve_correctors(4096.0, 64), Err(Error::UnderResolved { .. })));
    }
}
