//! Regime scans over `(L, β)` with `A = L^β`.

use std::path::Path;

use rayon::prelude::*;

use super::config::ScanConfig;
use super::svg;
use crate::cellproblem::{effective_diffusivity, solve_correctors_with, CellOptions};
use crate::eigen::{principal_eigenpair_with, EigenOptions};
use crate::exittime::{default_separatrix_tol, separatrix_report, solve_exit_time_with, Domain, ExitOptions};
use crate::grid::{Drift, ResolutionRule, Scheme};
use crate::linsolve::SolveOptions;
use crate::sde::{estimate_exit_time, SdeConfig};
use crate::Result;

pub const SCAN_HEADER: [&str; 16] = [
    "L",
    "beta",
    "A",
    "resolution",
    "sigma_trace",
    "lambda",
    "tau_center",
    "tau_sep_ratio",
    "mc_mean",
    "mc_stderr",
    "status",
    "cell_resolution",
    "scheme",
    "solve_tol",
    "eigen_tol",
    "tau_max",
];

/// One scanned point. Quantities that were not computed are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub length: u32,
    pub beta: f64,
    pub amplitude: f64,
    pub resolution: usize,
    pub cell_resolution: usize,
    pub scheme: Scheme,
    pub sigma_trace: f64,
    pub lambda: f64,
    pub tau_center: f64,
    pub tau_max: f64,
    pub tau_sep_ratio: f64,
    pub mc_mean: f64,
    pub mc_stderr: f64,
    pub status: String,
    pub solve_tol: f64,
    pub eigen_tol: f64,
}

impl ScanRow {
    /// `λL²/tr σ̄`, the transition indicator.
    pub fn transition_ratio(&self) -> f64 {
        self.lambda * (self.length * self.length) as f64 / self.sigma_trace
    }

    fn record(&self) -> Vec<String> {
        let f = |v: f64| if v.is_nan() { String::new() } else { format!("{v:.10e}") };
        vec![
            self.length.to_string(),
            self.beta.to_string(),
            f(self.amplitude),
            self.resolution.to_string(),
            f(self.sigma_trace),
            f(self.lambda),
            f(self.tau_center),
            f(self.tau_sep_ratio),
            f(self.mc_mean),
            f(self.mc_stderr),
            self.status.clone(),
            self.cell_resolution.to_string(),
            self.scheme.name().to_string(),
            format!("{:e}", self.solve_tol),
            format!("{:e}", self.eigen_tol),
            f(self.tau_max),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct ScanReport {
    pub rows: Vec<ScanRow>,
}

/// Runs every point of `cfg` (in parallel), then writes `scan.csv` and
/// `transition.svg` to `cfg.out`. A failing point is recorded in its
/// `status` and does not stop the scan.
pub fn run_scan(cfg: &ScanConfig) -> Result<ScanReport> {
    cfg.validate()?;
    let rows: Vec<ScanRow> = cfg.points().into_par_iter().map(|(l, b)| scan_point(cfg, l, b)).collect();
    std::fs::create_dir_all(&cfg.out)?;
    write_scan_csv(&rows, &cfg.out.join("scan.csv"))?;
    std::fs::write(cfg.out.join("transition.svg"), transition_plot(&rows))?;
    Ok(ScanReport { rows })
}

pub fn scan_point(cfg: &ScanConfig, length: u32, beta: f64) -> ScanRow {
    let l = length as f64;
    let a = l.powf(beta);
    let rule = ResolutionRule::relaxed(cfg.h_sqrt_a);
    let m = rule.intervals_per_unit(a, cfg.min_intervals);
    let n = length as usize * m + 1;
    let n_cell = (2 * m).max(64);
    let scheme = Scheme::for_regime(l, a);
    let mut row = ScanRow {
        length,
        beta,
        amplitude: a,
        resolution: n,
        cell_resolution: n_cell,
        scheme,
        sigma_trace: f64::NAN,
        lambda: f64::NAN,
        tau_center: f64::NAN,
        tau_max: f64::NAN,
        tau_sep_ratio: f64::NAN,
        mc_mean: f64::NAN,
        mc_stderr: f64::NAN,
        status: "ok".into(),
        solve_tol: cfg.solve_tol,
        eigen_tol: cfg.eigen_tol,
    };
    if (n - 2) * (n - 2) > cfg.max_unknowns {
        row.status = format!("skipped: {} unknowns exceed max_unknowns", (n - 2) * (n - 2));
        return row;
    }
    if let Err(e) = fill_point(cfg, &mut row, rule) {
        log::warn!("scan point L={length} beta={beta} failed: {e}");
        row.status = format!("error: {e}");
    }
    row
}

fn fill_point(cfg: &ScanConfig, row: &mut ScanRow, rule: ResolutionRule) -> Result<()> {
    let (l, a) = (row.length as f64, row.amplitude);
    let solve = SolveOptions::with_tol(cfg.solve_tol);
    let cell = CellOptions { rule, solve: SolveOptions::with_tol(cfg.solve_tol.min(1e-10)), ..Default::default() };
    row.sigma_trace = effective_diffusivity(&solve_correctors_with(a, row.cell_resolution, &cell)?).trace();

    let drift = Drift::new(a);
    let eig_opts = EigenOptions { scheme: Some(row.scheme), rule, solve: SolveOptions::with_tol(cfg.eigen_tol * 1e-3), ..Default::default() };
    row.lambda = principal_eigenpair_with(Domain::Square, l, a, row.resolution, cfg.eigen_tol, &eig_opts, &drift)?.lambda;

    let exit_opts = ExitOptions { scheme: Some(row.scheme), rule, solve, ..Default::default() };
    let exit = solve_exit_time_with(Domain::Square, l, a, row.resolution, &exit_opts, &drift)?;
    row.tau_center = exit.tau_center();
    row.tau_max = exit.max_tau();
    row.tau_sep_ratio = separatrix_report(&exit, default_separatrix_tol(&exit))?.ratio;

    if cfg.mc_paths > 0 {
        let x0 = exit.center();
        let (domain, horizon) = match cfg.mc_domain {
            Domain::Square => (Domain::Square, 50.0 * row.tau_max),
            Domain::Disk => (Domain::Disk, 50.0 * l * l / 4.0),
        };
        let base = SdeConfig::new(domain, l, a, cfg.mc_paths, cfg.seed, horizon).with_integrator(cfg.mc_integrator);
        let sde = base.with_dt(base.dt * cfg.mc_dt_fraction);
        let stats = estimate_exit_time(&sde, x0)?;
        row.mc_mean = stats.mean;
        row.mc_stderr = stats.stderr;
        if stats.censored_fraction() > 0.01 {
            row.status = format!("mc censored {:.1}%", 100.0 * stats.censored_fraction());
        }
    }
    Ok(())
}

pub fn write_scan_csv(rows: &[ScanRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(SCAN_HEADER).map_err(csv_error)?;
    for r in rows {
        w.write_record(r.record()).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_error(e: csv::Error) -> crate::Error {
    crate::Error::Io(std::io::Error::other(e))
}

/// `λL²/tr σ̄` against `β`, one series per `L`.
pub fn transition_plot(rows: &[ScanRow]) -> String {
    let mut lengths: Vec<u32> = rows.iter().map(|r| r.length).collect();
    lengths.sort_unstable();
    lengths.dedup();
    let series: Vec<(String, Vec<(f64, f64)>)> = lengths
        .iter()
        .map(|&l| {
            let pts = rows.iter().filter(|r| r.length == l).map(|r| (r.beta, r.transition_ratio())).collect();
            (format!("L = {l}"), pts)
        })
        .collect();
    svg::line_plot("Homogenization to averaging transition", "β  (A = L^β)", "λ L² / tr σ̄", &series, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_scan_fills_every_column() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ScanConfig {
            lengths: vec![2],
            betas: vec![2.0, 4.0],
            min_intervals: 8,
            h_sqrt_a: 0.8,
            mc_paths: 200,
            out: dir.path().to_path_buf(),
            ..ScanConfig::default()
        };
        let rep = run_scan(&cfg).unwrap();
        assert_eq!(rep.rows.len(), 2);
        for r in &rep.rows {
            assert_eq!(r.status, "ok");
            for v in [r.sigma_trace, r.lambda, r.tau_center, r.tau_sep_ratio, r.mc_mean, r.mc_stderr] {
                assert!(v.is_finite() && v >= 0.0);
            }
        }
        let csv = std::fs::read_to_string(dir.path().join("scan.csv")).unwrap();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("L,beta,A,resolution,sigma_trace,lambda,tau_center,tau_sep_ratio,mc_mean,mc_stderr,status"));
        assert!(dir.path().join("transition.svg").exists());
    }

    #[test]
    fn oversized_points_are_skipped_not_fatal() {
        let cfg = ScanConfig { max_unknowns: 10, ..ScanConfig::default() };
        let row = scan_point(&cfg, 4, 3.0);
        assert!(row.status.starts_with("skipped"));
        assert!(row.lambda.is_nan());
    }
}
