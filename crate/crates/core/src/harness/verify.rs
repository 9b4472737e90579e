//! The acceptance suite: twelve checks plus a negative control.
//!
//! Expensive solves are shared between checks through [`Lab`]; each check's
//! runtime includes whatever it computed first.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::time::Instant;

use crate::cellproblem::{
    effective_diffusivity, interior_deviation, second_corrector, solve_correctors_with, symmetry_defect, CellOptions,
    CorrectorSet, EffectiveDiffusivity,
};
use crate::eigen::{heinze_diagnostic, principal_eigenpair_with, strong_flow_variational_bound, EigenOptions, Eigenpair};
use crate::exittime::{
    default_separatrix_tol, drift_independent_bound, exit_resolution, homogenized_profile_deviation, separatrix_report,
    solve_exit_time_with, Domain, ExitOptions, ExitTimeSolution,
};
use crate::expansion::{build_with_second_corrector, residual_check, sandwich_check};
use crate::flow::Point2;
use crate::grid::{Drift, ResolutionRule};
use crate::linsolve::SolveOptions;
use crate::sde::{estimate_exit_time, Integrator, SdeConfig};
use crate::stats::power_law_fit;
use crate::Result;

/// Amplitudes of the cell-problem exponent fits.
pub const FIT_AMPLITUDES: [f64; 3] = [256.0, 1024.0, 4096.0];
/// Periodic nodes per axis for the fits.
pub const CELL_NODES: usize = 512;
/// Checks that fail for reasons analysed in the project notes; they are
/// reported as FAIL but do not count as regressions.
pub const KNOWN_FAILURES: [u8; 1] = [3];

#[derive(Debug, Clone)]
pub struct CheckResult {
    /// Criterion number; 0 for the negative control.
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub values: Vec<(&'static str, f64)>,
    pub seconds: f64,
}

impl CheckResult {
    pub fn value(&self, key: &str) -> Option<f64> {
        self.values.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
    }

    pub fn known_failure(&self) -> bool {
        !self.passed && KNOWN_FAILURES.contains(&self.id)
    }

    pub fn line(&self) -> String {
        let label = if self.id == 0 { "NC".to_string() } else { format!("C{:02}", self.id) };
        let status = match (self.passed, self.known_failure()) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        format!("{status:<12} {label} {:<34} {:>7.1}s  {}", self.name, self.seconds, self.detail)
    }
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn unexpected_failures(&self) -> Vec<&CheckResult> {
        self.checks.iter().filter(|c| !c.passed && !c.known_failure()).collect()
    }

    pub fn get(&self, id: u8) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.id == id)
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(s, "{}", c.line());
        }
        let total: f64 = self.checks.iter().map(|c| c.seconds).sum();
        let passed = self.checks.iter().filter(|c| c.passed).count();
        let _ = writeln!(s, "{passed}/{} checks passed in {total:.1}s", self.checks.len());
        s
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        use super::scan::csv_error;
        let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
        w.write_record(["id", "name", "status", "seconds", "detail"]).map_err(csv_error)?;
        for c in &self.checks {
            let status = if c.passed { "pass" } else { "fail" };
            w.write_record([c.id.to_string(), c.name.into(), status.into(), format!("{:.2}", c.seconds), c.detail.clone()])
                .map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    pub mc_paths: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { seed: 20240601, mc_paths: 10_000 }
    }
}

/// Runs every check in order, calling `progress` after each.
pub fn run(opts: &VerifyOptions, mut progress: impl FnMut(&CheckResult)) -> VerifyReport {
    let mut lab = Lab::new(*opts);
    type Check = fn(&mut Lab) -> Result<CheckResult>;
    let checks: [(u8, &'static str, Check); 13] = [
        (1, "degenerate cases A=0", c01),
        (2, "effective diffusivity exponent", c02),
        (3, "corrector facts", c03),
        (4, "second corrector growth", c04),
        (5, "homogenized disk profile", c05),
        (6, "exit-time transition", c06),
        (7, "eigenvalue transition", c07),
        (8, "strong-flow variational limit", c08),
        (9, "Heinze diagnostic", c09),
        (10, "Monte Carlo vs PDE", c10),
        (11, "drift-independent bound", c11),
        (12, "expansion sandwich", c12),
        (0, "negative control (fault in v1)", negative_control),
    ];
    let mut out = Vec::new();
    for (id, name, check) in checks {
        let start = Instant::now();
        let mut r = check(&mut lab).unwrap_or_else(|e| CheckResult {
            id,
            name,
            passed: false,
            detail: format!("error: {e}"),
            values: vec![],
            seconds: 0.0,
        });
        r.seconds = start.elapsed().as_secs_f64();
        progress(&r);
        out.push(r);
    }
    VerifyReport { checks: out }
}

fn strict_rule() -> ResolutionRule {
    ResolutionRule::default()
}

/// Shared, lazily computed solutions.
pub struct Lab {
    opts: VerifyOptions,
    cells: Vec<(f64, usize, CorrectorSet)>,
    squares: Vec<(f64, f64, ExitTimeSolution)>,
    disks: Vec<(f64, f64, ExitTimeSolution)>,
    eigen: Vec<(f64, f64, Eigenpair)>,
}

impl Lab {
    fn new(opts: VerifyOptions) -> Self {
        Self { opts, cells: vec![], squares: vec![], disks: vec![], eigen: vec![] }
    }

    fn cell(&mut self, a: f64, n: usize) -> Result<&CorrectorSet> {
        if let Some(i) = self.cells.iter().position(|(x, m, _)| *x == a && *m == n) {
            return Ok(&self.cells[i].2);
        }
        let c = solve_correctors_with(a, n, &CellOptions::default())?;
        self.cells.push((a, n, c));
        Ok(&self.cells.last().unwrap().2)
    }

    fn sigma(&mut self, a: f64) -> Result<EffectiveDiffusivity> {
        Ok(effective_diffusivity(self.cell(a, CELL_NODES)?))
    }

    /// Grid for a square: the strict rule where affordable, otherwise
    /// `h√A ≤ 1.35` (only the `L = 16` point).
    fn square_resolution(l: f64, a: f64) -> (usize, ResolutionRule) {
        let strict = exit_resolution(Domain::Square, l, a, &strict_rule(), 32);
        if strict <= 1025 {
            (strict, strict_rule())
        } else {
            let rule = ResolutionRule::relaxed(1.35);
            (exit_resolution(Domain::Square, l, a, &rule, 32), rule)
        }
    }

    fn square(&mut self, l: f64, a: f64) -> Result<&ExitTimeSolution> {
        if let Some(i) = self.squares.iter().position(|(x, y, _)| *x == l && *y == a) {
            return Ok(&self.squares[i].2);
        }
        let (n, rule) = Self::square_resolution(l, a);
        let opts = ExitOptions { rule, ..Default::default() };
        let s = solve_exit_time_with(Domain::Square, l, a, n, &opts, &Drift::new(a))?;
        self.squares.push((l, a, s));
        Ok(&self.squares.last().unwrap().2)
    }

    /// Disks on the rescaled unit disk with 64 intervals per unit length
    /// (48 for `L = 16`).
    fn disk(&mut self, l: f64, a: f64) -> Result<&ExitTimeSolution> {
        if let Some(i) = self.disks.iter().position(|(x, y, _)| *x == l && *y == a) {
            return Ok(&self.disks[i].2);
        }
        let m = if l > 8.0 { 48 } else { 64 };
        let n = (2.0 * l) as usize * m + 1;
        let opts = ExitOptions { rule: ResolutionRule::relaxed(1.35), ..Default::default() };
        let s = solve_exit_time_with(Domain::Disk, l, a, n, &opts, &Drift::new(a))?;
        self.disks.push((l, a, s));
        Ok(&self.disks.last().unwrap().2)
    }

    fn eigenpair(&mut self, l: f64, a: f64) -> Result<&Eigenpair> {
        if let Some(i) = self.eigen.iter().position(|(x, y, _)| *x == l && *y == a) {
            return Ok(&self.eigen[i].2);
        }
        let (n, rule) = if l == 1.0 && a == 0.0 { (129, strict_rule()) } else { Self::square_resolution(l, a) };
        let opts = EigenOptions { rule, solve: SolveOptions::with_tol(1e-10), ..Default::default() };
        let e = principal_eigenpair_with(Domain::Square, l, a, n, 1e-7, &opts, &Drift::new(a))?;
        self.eigen.push((l, a, e));
        Ok(&self.eigen.last().unwrap().2)
    }
}

fn fmt_ok(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "VIOLATED"
    }
}

fn c01(lab: &mut Lab) -> Result<CheckResult> {
    let lambda = lab.eigenpair(1.0, 0.0)?.lambda;
    let opts = ExitOptions { rule: strict_rule(), ..Default::default() };
    let disk = solve_exit_time_with(Domain::Disk, 2.0, 0.0, 321, &opts, &Drift::new(0.0))?.tau_center();
    let square = lab.square(1.0, 0.0)?.max_tau();
    let two_pi2 = 2.0 * PI * PI;
    let torsion = torsion_center(50);
    let (e1, e2, e3) = ((lambda / two_pi2 - 1.0).abs(), (disk - 1.0).abs(), (square / torsion - 1.0).abs());
    Ok(CheckResult {
        id: 1,
        name: "degenerate cases A=0",
        passed: e1 <= 0.01 && e2 <= 0.02 && e3 <= 0.02,
        detail: format!(
            "λ(L=1)={lambda:.5} vs 2π² ({:.2}%); disk τ(0)={disk:.5} vs L²/4=1 ({:.2}%); square max τ={square:.5} vs {torsion:.5} ({:.2}%)",
            100.0 * e1,
            100.0 * e2,
            100.0 * e3
        ),
        values: vec![("lambda_l1", lambda), ("disk_tau0_l2", disk), ("square_max_tau_l1", square)],
        seconds: 0.0,
    })
}

/// Torsion function of the unit square at its centre, by Fourier series.
pub fn torsion_center(terms: usize) -> f64 {
    let mut s = 0.125;
    for t in 0..terms {
        let k = (2 * t + 1) as f64;
        let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
        s -= 4.0 * sign / (PI.powi(3) * k.powi(3) * (k * PI / 2.0).cosh());
    }
    s
}

fn c02(lab: &mut Lab) -> Result<CheckResult> {
    let sig: Vec<EffectiveDiffusivity> = FIT_AMPLITUDES.iter().map(|&a| lab.sigma(a)).collect::<Result<_>>()?;
    let s11: Vec<f64> = sig.iter().map(|s| s.sigma[0][0]).collect();
    let (_, p) = power_law_fit(&FIT_AMPLITUDES, &s11)?;
    let off = sig.iter().map(|s| s.sigma[0][1].abs().max(s.sigma[1][0].abs()) / s.sigma[0][0]).fold(0.0, f64::max);
    Ok(CheckResult {
        id: 2,
        name: "effective diffusivity exponent",
        passed: (0.45..=0.55).contains(&p) && off <= 1e-3,
        detail: format!(
            "σ̄₁₁ = {:.3}, {:.3}, {:.3}; exponent {p:.3} in [0.45, 0.55]; max |σ̄₁₂|/σ̄₁₁ = {off:.1e}",
            s11[0], s11[1], s11[2]
        ),
        values: vec![("exponent", p), ("offdiag", off)],
        seconds: 0.0,
    })
}

fn c03(lab: &mut Lab) -> Result<CheckResult> {
    let mut l1 = Vec::new();
    let (mut bound_ok, mut worst_sym, mut worst_chi) = (true, 0.0f64, 0.0f64);
    for &a in &FIT_AMPLITUDES {
        let c = lab.cell(a, CELL_NODES)?;
        let h = c.grid().spacing();
        let m = c.chi1.max_abs();
        worst_chi = worst_chi.max(m);
        bound_ok &= m <= 1.0 + 5.0 * h;
        worst_sym = worst_sym.max(symmetry_defect(c));
        l1.push(interior_deviation(c).lp_norms[0].l1);
    }
    let (_, p) = power_law_fit(&FIT_AMPLITUDES, &l1)?;
    let xi_ok = (p + 0.5).abs() <= 0.1;
    Ok(CheckResult {
        id: 3,
        name: "corrector facts",
        passed: bound_ok && worst_sym <= 1e-6 && xi_ok,
        detail: format!(
            "max ‖χ₁‖∞={worst_chi:.4} ≤ 1+5h {}; symmetry defect {worst_sym:.1e} {}; ‖ξ₁‖₁ exponent {p:.3} vs −0.5±0.1 {}",
            fmt_ok(bound_ok),
            fmt_ok(worst_sym <= 1e-6),
            fmt_ok(xi_ok)
        ),
        values: vec![("chi_max", worst_chi), ("symmetry", worst_sym), ("xi_l1_exponent", p)],
        seconds: 0.0,
    })
}

fn c04(lab: &mut Lab) -> Result<CheckResult> {
    let mut norms = Vec::new();
    for &a in &FIT_AMPLITUDES {
        norms.push(second_corrector(lab.cell(a, CELL_NODES)?)?.max_abs());
    }
    let (_, p) = power_law_fit(&FIT_AMPLITUDES, &norms)?;
    Ok(CheckResult {
        id: 4,
        name: "second corrector growth",
        passed: p <= 0.95,
        detail: format!("‖τ₁₂‖∞ = {:.3}, {:.3}, {:.3}; exponent {p:.3} ≤ 0.95", norms[0], norms[1], norms[2]),
        values: vec![("exponent", p)],
        seconds: 0.0,
    })
}

const BETA3: [(f64, f64); 2] = [(8.0, 512.0), (16.0, 4096.0)];

fn c05(lab: &mut Lab) -> Result<CheckResult> {
    let mut parts = Vec::new();
    let mut normalized = Vec::new();
    let mut rel_ok = true;
    for (l, a) in BETA3 {
        let sigma = lab.sigma(a)?;
        let disk = lab.disk(l, a)?;
        let d = homogenized_profile_deviation(disk, &sigma)?;
        let rel = d.max_deviation / disk.max_tau();
        rel_ok &= rel <= 0.2;
        normalized.push(d.normalized);
        parts.push(format!("L={l}: dev {:.4} ({:.1}% of max τ), normalized {:.4}", d.max_deviation, 100.0 * rel, d.normalized));
    }
    let spread = normalized[0].max(normalized[1]) / normalized[0].min(normalized[1]);
    Ok(CheckResult {
        id: 5,
        name: "homogenized disk profile",
        passed: rel_ok && spread <= 2.0,
        detail: format!("{}; normalized spread {spread:.2}× ≤ 2", parts.join("; ")),
        values: vec![("spread", spread), ("normalized_l8", normalized[0]), ("normalized_l16", normalized[1])],
        seconds: 0.0,
    })
}

fn c06(lab: &mut Lab) -> Result<CheckResult> {
    let mut scaled = Vec::new();
    for (l, a) in BETA3 {
        let disk = lab.disk(l, a)?;
        scaled.push(disk.tau_center() * a.sqrt() / (l * l));
    }
    let spread = scaled[0].max(scaled[1]) / scaled[0].min(scaled[1]);
    let mut ratios = Vec::new();
    let mut maxes = Vec::new();
    for a in [256.0, 1024.0, 4096.0] {
        let s = lab.square(4.0, a)?;
        ratios.push(separatrix_report(s, default_separatrix_tol(s))?.ratio);
        maxes.push(s.max_tau());
    }
    let monotone = ratios.windows(2).all(|w| w[1] < w[0]);
    let settle = maxes[1].max(maxes[2]) / maxes[1].min(maxes[2]);
    Ok(CheckResult {
        id: 6,
        name: "exit-time transition",
        passed: spread <= 2.0 && monotone && settle <= 2.0,
        detail: format!(
            "τ(0)√A/L² = {:.4}, {:.4} (spread {spread:.2}×); L=4 separatrix ratio {:.3} > {:.3} > {:.3} {}; max τ {:.4} → {:.4} ({settle:.2}×)",
            scaled[0],
            scaled[1],
            ratios[0],
            ratios[1],
            ratios[2],
            fmt_ok(monotone),
            maxes[1],
            maxes[2]
        ),
        values: vec![("tau_spread", spread), ("sep_ratio_1024", ratios[1]), ("max_tau_settle", settle)],
        seconds: 0.0,
    })
}

/// Square eigenvalue points examined by the eigenvalue checks.
const EIGEN_POINTS: [(f64, f64); 8] =
    [(1.0, 0.0), (1.0, 4096.0), (2.0, 32.0), (4.0, 256.0), (4.0, 1024.0), (4.0, 4096.0), (8.0, 512.0), (16.0, 4096.0)];

fn c07(lab: &mut Lab) -> Result<CheckResult> {
    let mut homog = Vec::new();
    for (l, a) in BETA3 {
        let lambda = lab.eigenpair(l, a)?.lambda;
        homog.push(lambda * l * l / lab.sigma(a)?.trace());
    }
    // the homogenized square has λL²/tr σ̄ = π²
    let band = homog.iter().all(|r| *r >= PI * PI / 10.0 && *r <= 10.0 * PI * PI);
    let homog_spread = homog[0].max(homog[1]) / homog[0].min(homog[1]);
    let strong: Vec<f64> = [(2.0, 32.0), (4.0, 1024.0)].iter().map(|&(l, a)| lab.eigenpair(l, a).map(|e| e.lambda)).collect::<Result<_>>()?;
    let strong_spread = strong[0].max(strong[1]) / strong[0].min(strong[1]);
    let (mut upper_ok, mut lower_ok) = (true, true);
    let mut worst_lower = f64::INFINITY;
    for (l, a) in EIGEN_POINTS {
        let lambda = lab.eigenpair(l, a)?.lambda;
        let inv_tau = 1.0 / lab.square(l, a)?.max_tau();
        upper_ok &= lambda <= 2.0 * PI * PI * 1.02;
        lower_ok &= lambda >= inv_tau * 0.98;
        worst_lower = worst_lower.min(lambda / inv_tau);
    }
    Ok(CheckResult {
        id: 7,
        name: "eigenvalue transition",
        passed: band && homog_spread <= 2.0 && strong_spread <= 3.0 && upper_ok && lower_ok,
        detail: format!(
            "β=3 λL²/tr σ̄ = {:.3}, {:.3} (spread {homog_spread:.2}×, band {}); β=5 λ = {:.3}, {:.3} ({strong_spread:.2}×); λ ≤ 2π²+2% {}; min λ‖τ‖∞ = {worst_lower:.3} ≥ 0.98 {}",
            homog[0],
            homog[1],
            fmt_ok(band),
            strong[0],
            strong[1],
            fmt_ok(upper_ok),
            fmt_ok(lower_ok)
        ),
        values: vec![("homog_spread", homog_spread), ("strong_spread", strong_spread), ("min_lambda_tau", worst_lower)],
        seconds: 0.0,
    })
}

fn c08(lab: &mut Lab) -> Result<CheckResult> {
    let bound = strong_flow_variational_bound(400)?;
    let lambda = lab.eigenpair(1.0, 4096.0)?.lambda;
    let two_pi2 = 2.0 * PI * PI;
    let gap = (bound / lambda - 1.0).abs();
    Ok(CheckResult {
        id: 8,
        name: "strong-flow variational limit",
        passed: bound <= two_pi2 * (1.0 + 1e-9) && gap <= 0.25,
        detail: format!("min f(H) quotient {bound:.4} ≤ 2π² = {two_pi2:.4}; λ(L=1, A=4096) = {lambda:.4} ({:.1}% apart)", 100.0 * gap),
        values: vec![("bound", bound), ("lambda", lambda)],
        seconds: 0.0,
    })
}

fn c09(lab: &mut Lab) -> Result<CheckResult> {
    let r: Vec<f64> = [256.0, 4096.0]
        .iter()
        .map(|&a| lab.eigenpair(4.0, a).map(|e| heinze_diagnostic(e, a)))
        .collect::<Result<_>>()?;
    let growth = r[1] / r[0];
    Ok(CheckResult {
        id: 9,
        name: "Heinze diagnostic",
        passed: growth <= 2.0,
        detail: format!("r(256) = {:.4}, r(4096) = {:.4}; growth {growth:.3}× ≤ 2", r[0], r[1]),
        values: vec![("growth", growth)],
        seconds: 0.0,
    })
}

fn c10(lab: &mut Lab) -> Result<CheckResult> {
    let (seed, paths) = (lab.opts.seed, lab.opts.mc_paths);
    let mut parts = Vec::new();
    let mut ok = true;
    let mut values = Vec::new();
    let points = [(8.0, 512.0, Domain::Disk, 1.0), (4.0, 1024.0, Domain::Square, 0.25)];
    for (idx, (l, a, domain, fraction)) in points.into_iter().enumerate() {
        let pde = match domain {
            Domain::Disk => lab.disk(l, a)?.tau_center(),
            Domain::Square => lab.square(l, a)?.tau_center(),
        };
        let base = SdeConfig::new(domain, l, a, paths, seed, 100.0 * pde).with_integrator(Integrator::FlowSplitting);
        let cfg = base.with_dt(base.dt * fraction);
        let s = estimate_exit_time(&cfg, Point2::ORIGIN)?;
        let tol = 3.0 * s.stderr + 0.05 * pde;
        let pass = (s.mean - pde).abs() <= tol && s.censored_fraction() < 0.01;
        ok &= pass;
        let em = estimate_exit_time(&SdeConfig { n_paths: paths.min(2000), ..base.with_integrator(Integrator::EulerMaruyama) }, Point2::ORIGIN)?;
        parts.push(format!(
            "L={l} A={a} {}: MC {:.4}±{:.4} vs PDE {pde:.4} (|Δ| {:.4} ≤ {tol:.4}, dt {:.2e}, censored {}) [plain EM: {:.4}]",
            domain.name(),
            s.mean,
            s.stderr,
            (s.mean - pde).abs(),
            cfg.dt,
            s.n_censored,
            em.mean
        ));
        values.push((["mc_l8", "mc_l4"][idx], s.mean));
        values.push((["pde_l8", "pde_l4"][idx], pde));
    }
    Ok(CheckResult { id: 10, name: "Monte Carlo vs PDE", passed: ok, detail: parts.join("; "), values, seconds: 0.0 })
}

fn c11(lab: &mut Lab) -> Result<CheckResult> {
    for (l, a) in EIGEN_POINTS {
        lab.square(l, a)?;
    }
    let mut worst = 0.0f64;
    let mut ok = true;
    for (_, _, s) in &lab.squares {
        let b = drift_independent_bound(s);
        ok &= s.max_tau() <= b;
        worst = worst.max(s.max_tau() / b);
    }
    Ok(CheckResult {
        id: 11,
        name: "drift-independent bound",
        passed: ok,
        detail: format!("{} squares; max τ / (L²/4π + 5hL) ≤ {worst:.3}", lab.squares.len()),
        values: vec![("worst_ratio", worst)],
        seconds: 0.0,
    })
}

fn c12(lab: &mut Lab) -> Result<CheckResult> {
    let (l, a) = BETA3[0];
    let disk = lab.disk(l, a)?.clone();
    // cell spacing equal to L·h of the disk grid
    let n_cell = ((disk.grid.n1() - 1) as f64 / l) as usize;
    let c = lab.cell(a, n_cell)?.clone();
    let tau12 = second_corrector(&c)?;
    let approx = build_with_second_corrector(&c, &tau12, l, disk.grid.n1())?;
    let sigma = effective_diffusivity(&c);
    let residual = residual_check(&approx, &sigma)?;
    let rep = sandwich_check(&approx, &sigma, &disk, 0.02)?;
    Ok(CheckResult {
        id: 12,
        name: "expansion sandwich",
        passed: rep.holds(),
        detail: format!(
            "c̃ = {:.4}, tr σ̄ = {:.3}; worst excursion below {:+.4}, above {:+.4} (slack 0.02 of max τ₁); interior residual {residual:.3}",
            rep.c_tilde, rep.trace_sigma, rep.below, rep.above
        ),
        values: vec![("below", rep.below), ("above", rep.above), ("residual", residual), ("c_tilde", rep.c_tilde), ("trace_sigma", rep.trace_sigma)],
        seconds: 0.0,
    })
}

/// Flips `v₁` in the eigenvalue operator only (the exit time keeps the true
/// flow) and expects the `λ ≥ 1/‖τ‖∞` check to fail. The faulty drift is a
/// gradient, which traps the process and makes `λ` exponentially small.
fn negative_control(lab: &mut Lab) -> Result<CheckResult> {
    let (l, a) = (4.0, 16.0);
    let (n, rule) = Lab::square_resolution(l, a);
    let fault = Drift { component_sign: [-1.0, 1.0], ..Drift::new(a) };
    let opts = EigenOptions { rule, ..Default::default() };
    let lambda = principal_eigenpair_with(Domain::Square, l, a, n, 1e-7, &opts, &fault)?.lambda;
    let inv_tau = 1.0 / lab.square(l, a)?.max_tau();
    let detected = lambda < inv_tau * 0.98;
    Ok(CheckResult {
        id: 0,
        name: "negative control (fault in v1)",
        passed: detected,
        detail: format!(
            "faulty λ = {lambda:.4e} vs 1/‖τ‖∞ = {inv_tau:.4}: λ ≥ 1/‖τ‖∞ check {}",
            if detected { "fails as expected" } else { "MISSED the fault" }
        ),
        values: vec![("lambda", lambda), ("inv_tau", inv_tau)],
        seconds: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torsion_series_converges() {
        assert!((torsion_center(50) - torsion_center(10)).abs() < 1e-9);
        assert!((torsion_center(50) - 0.0736713).abs() < 1e-6);
    }

    #[test]
    fn report_bookkeeping() {
        let mk = |id, passed| CheckResult { id, name: "x", passed, detail: String::new(), values: vec![("v", 1.0)], seconds: 0.5 };
        let rep = VerifyReport { checks: vec![mk(1, true), mk(3, false)] };
        assert!(!rep.all_passed());
        assert!(rep.unexpected_failures().is_empty());
        assert_eq!(rep.get(1).unwrap().value("v"), Some(1.0));
        assert!(rep.table().contains("FAIL (known)"));
        let rep = VerifyReport { checks: vec![mk(2, false)] };
        assert_eq!(rep.unexpected_failures().len(), 1);
    }
}
