//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! The reference values for the degenerate checks are recomputed here from
//! closed forms that do not share code with the library.

use std::f64::consts::PI;
use std::process::ExitCode;

use cellflow::harness::verify::{run, VerifyOptions, KNOWN_FAILURES};

/// Torsion of the unit square at its centre from the double sine series.
fn torsion_center_double_series(terms: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..terms {
        for j in 0..terms {
            let (m, n) = ((2 * i + 1) as f64, (2 * j + 1) as f64);
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            s += sign * 16.0 / (PI.powi(4) * m * n * (m * m + n * n));
        }
    }
    s
}

fn oracle_line(name: &str, got: Option<f64>, want: f64, rtol: f64) -> bool {
    let ok = got.is_some_and(|g| ((g - want) / want).abs() <= rtol);
    println!(
        "{:<12} oracle {name:<30} got {:.6} want {want:.6} (rtol {rtol})",
        if ok { "PASS" } else { "FAIL" },
        got.unwrap_or(f64::NAN)
    );
    ok
}

fn main() -> ExitCode {
    let report = run(&VerifyOptions::default(), |c| println!("{}", c.line()));

    let mut ok = true;
    if let Some(c1) = report.get(1) {
        ok &= oracle_line("lambda(L=1, A=0) = 2 pi^2", c1.value("lambda_l1"), 2.0 * PI * PI, 0.01);
        ok &= oracle_line("disk tau(0), L=2, A=0 = L^2/4", c1.value("disk_tau0_l2"), 1.0, 0.02);
        ok &= oracle_line("square max tau, L=1, A=0", c1.value("square_max_tau_l1"), torsion_center_double_series(400), 0.02);
    } else {
        ok = false;
    }

    let unexpected = report.unexpected_failures();
    let primary = report.checks.iter().filter(|c| c.id != 0).count();
    let passed = report.checks.iter().filter(|c| c.id != 0 && c.passed).count();
    println!("{passed}/{primary} criteria passed; known failures {KNOWN_FAILURES:?}; unexpected failures {}", unexpected.len());
    if ok && unexpected.is_empty() && primary == 12 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
