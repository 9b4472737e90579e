use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cellflow::cellproblem::{effective_diffusivity, interior_deviation, solve_correctors_with, CellOptions};
use cellflow::eigen::{heinze_diagnostic, principal_eigenpair_with, EigenOptions};
use cellflow::exittime::{
    default_separatrix_tol, drift_independent_bound, exit_resolution, separatrix_report, solve_exit_time_with, Domain,
    ExitOptions,
};
use cellflow::grid::{Drift, ResolutionRule};
use cellflow::harness::{scan, svg, verify, ScanConfig};
use cellflow::linsolve::SolveOptions;
use cellflow::sde::{estimate_exit_time, trajectories, Integrator, SdeConfig, MAX_POINTS_PER_PATH};
use cellflow::{Error, Point2, ScalarField, Scheme};

#[derive(Parser)]
#[command(name = "cellflow", version, about = "Advection-diffusion in two-dimensional cellular flows")]
struct Cli {
    /// key = value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true, env = "CELLFLOW_OUT")]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Random seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Correctors and effective diffusivity on the period cell
    Cell {
        #[arg(short = 'a', long)]
        amplitude: f64,
        /// Nodes per axis on the period cell
        #[arg(long)]
        resolution: Option<usize>,
    },
    /// Expected exit time
    Exit {
        #[command(flatten)]
        problem: Problem,
    },
    /// Principal Dirichlet eigenpair
    Eig {
        #[command(flatten)]
        problem: Problem,
    },
    /// Monte Carlo exit times and sample trajectories
    Sde {
        #[arg(long, default_value = "disk")]
        domain: Domain,
        #[arg(short = 'l', long)]
        length: f64,
        #[arg(short = 'a', long)]
        amplitude: f64,
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
        /// Start point `x1,x2`
        #[arg(long, default_value = "0,0", value_parser = parse_point)]
        x0: Point2,
        /// Time step as a fraction of the largest admissible step
        #[arg(long, default_value_t = 1.0)]
        dt_fraction: f64,
        #[arg(long, default_value = "em")]
        integrator: Integrator,
        /// Paths are censored after this much time
        #[arg(long, default_value_t = 200.0)]
        horizon: f64,
        /// Number of trajectories to write (0 for none)
        #[arg(long, default_value_t = 3)]
        trajectories: usize,
    },
    /// Regime scan over the configured (L, beta) grid
    Scan,
    /// Run the acceptance checks
    Verify {
        /// Monte Carlo paths per check
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
    },
}

#[derive(Args)]
struct Problem {
    #[arg(long, default_value = "square")]
    domain: Domain,
    #[arg(short = 'l', long)]
    length: f64,
    #[arg(short = 'a', long)]
    amplitude: f64,
    /// Nodes per axis (default: from the grid rule)
    #[arg(long)]
    resolution: Option<usize>,
    /// central, upwind or exp-fitted (default: by regime)
    #[arg(long)]
    scheme: Option<Scheme>,
}

fn parse_point(s: &str) -> Result<Point2, String> {
    let (a, b) = s.split_once(',').ok_or("expected `x1,x2`")?;
    let p = |t: &str| t.trim().parse::<f64>().map_err(|e| e.to_string());
    Ok(Point2::new(p(a)?, p(b)?))
}

enum Failure {
    Verify,
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(e.into())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verify) => ExitCode::from(1),
        Err(Failure::Run(e @ Error::Config(_))) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut cfg = match &cli.config {
        Some(path) => ScanConfig::from_file(path)?,
        None => ScanConfig::default(),
    };
    if let Some(out) = cli.out {
        cfg.out = out;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(Error::Config("--threads must be positive".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    std::fs::create_dir_all(&cfg.out)?;
    let rule = ResolutionRule::relaxed(cfg.h_sqrt_a);

    match cli.command {
        Command::Cell { amplitude, resolution } => {
            let n = resolution.unwrap_or_else(|| 2 * rule.intervals_per_unit(amplitude, cfg.min_intervals.max(32)));
            let opts = CellOptions { rule, solve: SolveOptions::with_tol(cfg.solve_tol.min(1e-10)), ..Default::default() };
            let c = solve_correctors_with(amplitude, n, &opts)?;
            let s = effective_diffusivity(&c);
            let xi = interior_deviation(&c).lp_norms[0];
            println!("A = {amplitude}, {n} x {n} periodic nodes");
            println!("sigma = [[{:.6}, {:.3e}], [{:.3e}, {:.6}]], trace {:.6}", s.sigma[0][0], s.sigma[0][1], s.sigma[1][0], s.sigma[1][1], s.trace());
            println!("|chi1|_inf = {:.5}, |xi1|_1 = {:.5e}, |xi1|_2 = {:.5e}", c.chi1.max_abs(), xi.l1, xi.l2);
            let out = &cfg.out;
            c.chi1.write_csv(&out.join("chi1.csv"))?;
            c.chi2.write_csv(&out.join("chi2.csv"))?;
            std::fs::write(out.join("chi1.svg"), svg::field_map("corrector χ₁", &c.chi1, 1.0, 9, 128))?;
            std::fs::write(
                out.join("sigma.csv"),
                format!(
                    "A,resolution,sigma11,sigma12,sigma21,sigma22,trace\n{amplitude},{n},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                    s.sigma[0][0],
                    s.sigma[0][1],
                    s.sigma[1][0],
                    s.sigma[1][1],
                    s.trace()
                ),
            )?;
        }
        Command::Exit { problem } => {
            let (n, drift) = problem_grid(&problem, &rule, &cfg);
            let opts = ExitOptions { scheme: problem.scheme, rule, solve: SolveOptions::with_tol(cfg.solve_tol), ..Default::default() };
            let sol = solve_exit_time_with(problem.domain, problem.length, problem.amplitude, n, &opts, &drift)?;
            let sep = separatrix_report(&sol, default_separatrix_tol(&sol))?;
            println!("{} L = {} A = {}: {n} nodes per axis, {} iterations", problem.domain.name(), problem.length, problem.amplitude, sol.report.iterations);
            println!("tau(center) = {:.6}, max tau = {:.6}, separatrix ratio = {:.4}", sol.tau_center(), sol.max_tau(), sep.ratio);
            if problem.domain == Domain::Square {
                println!("drift-independent bound {:.6} ({})", drift_independent_bound(&sol), if sol.max_tau() <= drift_independent_bound(&sol) { "holds" } else { "VIOLATED" });
            }
            write_field(&cfg.out, "tau", &sol.tau, sol.scale, "exit time τ")?;
        }
        Command::Eig { problem } => {
            let (n, drift) = problem_grid(&problem, &rule, &cfg);
            let opts = EigenOptions { scheme: problem.scheme, rule, solve: SolveOptions::with_tol(cfg.eigen_tol * 1e-3), ..Default::default() };
            let e = principal_eigenpair_with(problem.domain, problem.length, problem.amplitude, n, cfg.eigen_tol, &opts, &drift)?;
            println!("{} L = {} A = {}: {n} nodes per axis", problem.domain.name(), problem.length, problem.amplitude);
            println!("lambda = {:.8}, residual {:.2e}, {} iterations, Heinze ratio {:.5}", e.lambda, e.residual, e.iterations, heinze_diagnostic(&e, problem.amplitude));
            write_field(&cfg.out, "phi", &e.phi, e.scale, "principal eigenfunction φ")?;
        }
        Command::Sde { domain, length, amplitude, paths, x0, dt_fraction, integrator, horizon, trajectories: k } => {
            if !(dt_fraction > 0.0 && dt_fraction <= 1.0) {
                return Err(Error::Config("--dt-fraction must lie in (0, 1]".into()).into());
            }
            let base = SdeConfig::new(domain, length, amplitude, paths, cfg.seed, horizon).with_integrator(integrator);
            let sde = base.with_dt(base.dt * dt_fraction);
            let stats = estimate_exit_time(&sde, x0)?;
            println!(
                "mean exit time {:.6} ± {:.6} ({} exited, {} censored, dt {:.3e}, {})",
                stats.mean, stats.stderr, stats.n_exited, stats.n_censored, sde.dt, integrator.name()
            );
            std::fs::write(
                cfg.out.join("sde_stats.csv"),
                format!(
                    "L,A,x0_1,x0_2,mean,stderr,n_exited,n_censored,seed\n{length},{amplitude},{},{},{:.10e},{:.10e},{},{},{}\n",
                    x0.x1, x0.x2, stats.mean, stats.stderr, stats.n_exited, stats.n_censored, cfg.seed
                ),
            )?;
            if k > 0 {
                let paths = trajectories(&sde, x0, k)?;
                write_trajectories(&cfg.out.join("trajectories.csv"), &paths)?;
                let half = match domain {
                    Domain::Disk => length,
                    Domain::Square => length / 2.0,
                };
                let title = format!("{} trajectories, L = {length}, A = {amplitude}", k);
                let disk = (domain == Domain::Disk).then_some(length);
                std::fs::write(cfg.out.join("trajectories.svg"), svg::trajectories(&title, &paths, -half, half, disk))?;
            }
        }
        Command::Scan => {
            let rep = scan::run_scan(&cfg)?;
            for r in &rep.rows {
                println!(
                    "L={:<3} beta={:<4} A={:<10} lambda={:<12.6} lambda*L^2/tr(sigma)={:<10.4} tau_center={:<10.5} {}",
                    r.length, r.beta, r.amplitude, r.lambda, r.transition_ratio(), r.tau_center, r.status
                );
            }
            println!("wrote {}", cfg.out.join("scan.csv").display());
        }
        Command::Verify { paths } => {
            let opts = verify::VerifyOptions { seed: cfg.seed, mc_paths: paths };
            let rep = verify::run(&opts, |c| println!("{}", c.line()));
            print!("{}", rep.table().lines().last().map(|l| format!("{l}\n")).unwrap_or_default());
            rep.write_csv(&cfg.out.join("verify.csv"))?;
            if let Some(c) = rep.get(12) {
                let v = |k| c.value(k).unwrap_or(f64::NAN);
                std::fs::write(
                    cfg.out.join("expansion.csv"),
                    format!("L,A,sup_dev_tau10,residual,trace_sigma\n8,512,{:.10e},{:.10e},{:.10e}\n", v("c_tilde"), v("residual"), v("trace_sigma")),
                )?;
            }
            if !rep.all_passed() {
                return Err(Failure::Verify);
            }
        }
    }
    Ok(())
}

fn problem_grid(p: &Problem, rule: &ResolutionRule, cfg: &ScanConfig) -> (usize, Drift) {
    let n = p.resolution.unwrap_or_else(|| exit_resolution(p.domain, p.length, p.amplitude, rule, cfg.min_intervals));
    (n, Drift::new(p.amplitude))
}

fn write_field(out: &Path, stem: &str, f: &ScalarField, scale: f64, title: &str) -> std::io::Result<()> {
    let g = f.grid();
    let mut s = String::from("x1,x2,value\n");
    for (k, v) in f.values().iter().enumerate() {
        let p = g.node_point(k);
        s.push_str(&format!("{:.12e},{:.12e},{:.12e}\n", scale * p.x1, scale * p.x2, v));
    }
    std::fs::write(out.join(format!("{stem}.csv")), s)?;
    std::fs::write(out.join(format!("{stem}.svg")), svg::field_map(title, f, scale, 9, 128))
}

fn write_trajectories(path: &Path, paths: &[Vec<(f64, Point2)>]) -> std::io::Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "path_id,t,x1,x2")?;
    for (id, p) in paths.iter().enumerate() {
        debug_assert!(p.len() <= MAX_POINTS_PER_PATH);
        for (t, x) in p {
            writeln!(w, "{id},{t:.10e},{:.10e},{:.10e}", x.x1, x.x2)?;
        }
    }
    w.flush()
}
