//! Euler–Maruyama sampling of `dX = −A v(X) dt + √2 dW` and Monte Carlo
//! exit-time estimates.
//!
//! Plain Euler–Maruyama is the reference integrator. Its explicit drift step
//! inflates the closed orbits inside each cell by `√(1 + (πA dt)²)` per step,
//! which at admissible `dt` pushes particles onto the separatrices long before
//! diffusion would. [`Integrator::FlowSplitting`] instead advances the drift
//! with two RK4 half steps around the Brownian increment.
//!
//! Every path draws from its own ChaCha8 stream `(seed, path_index)`, so
//! results do not depend on how paths are scheduled across threads.

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::exittime::Domain;
use crate::flow::{velocity, Point2};
use crate::grid::square_origin;
use crate::stats::mean_stderr;
use crate::{Error, Result};

/// Cap on points written per trajectory.
pub const MAX_POINTS_PER_PATH: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    /// `X ← X − A v(X) dt + √(2dt) N`.
    #[default]
    EulerMaruyama,
    /// Strang splitting: RK4 flow for `dt/2`, Brownian increment, RK4 flow
    /// for `dt/2`.
    FlowSplitting,
}

impl Integrator {
    pub fn name(&self) -> &'static str {
        match self {
            Integrator::EulerMaruyama => "euler-maruyama",
            Integrator::FlowSplitting => "flow-splitting",
        }
    }
}

impl std::str::FromStr for Integrator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler-maruyama" | "em" => Ok(Integrator::EulerMaruyama),
            "flow-splitting" | "split" => Ok(Integrator::FlowSplitting),
            other => Err(Error::Config(format!("unknown integrator `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdeConfig {
    pub amplitude: f64,
    pub length: f64,
    pub domain: Domain,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub max_steps: usize,
    pub integrator: Integrator,
}

impl SdeConfig {
    /// Largest admissible step, `min(10⁻³, 0.1/(√2 A))`.
    pub fn max_dt(amplitude: f64) -> f64 {
        if amplitude > 0.0 {
            (1e-3f64).min(0.1 / (std::f64::consts::SQRT_2 * amplitude))
        } else {
            1e-3
        }
    }

    /// Config with `dt = max_dt(A)` and room for `horizon` time units.
    pub fn new(domain: Domain, length: f64, amplitude: f64, n_paths: usize, seed: u64, horizon: f64) -> Self {
        let dt = Self::max_dt(amplitude);
        Self {
            amplitude,
            length,
            domain,
            dt,
            n_paths,
            seed,
            max_steps: (horizon / dt).ceil() as usize,
            integrator: Integrator::default(),
        }
    }

    pub fn with_integrator(mut self, integrator: Integrator) -> Self {
        self.integrator = integrator;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        let horizon = self.max_steps as f64 * self.dt;
        self.dt = dt;
        self.max_steps = (horizon / dt).ceil() as usize;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0) || !(self.length > 0.0) {
            return Err(Error::InvalidArgument("amplitude must be >= 0 and L > 0".into()));
        }
        if !(self.dt > 0.0) || self.dt > Self::max_dt(self.amplitude) * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "dt = {} outside (0, {}]",
                self.dt,
                Self::max_dt(self.amplitude)
            )));
        }
        if self.n_paths == 0 || self.max_steps == 0 {
            return Err(Error::InvalidArgument("n_paths and max_steps must be positive".into()));
        }
        Ok(())
    }

    pub fn contains(&self, p: Point2) -> bool {
        match self.domain {
            Domain::Disk => p.x1 * p.x1 + p.x2 * p.x2 < self.length * self.length,
            Domain::Square => {
                let o = square_origin(self.length);
                let inside = |c: f64, o: f64| c > o && c < o + self.length;
                inside(p.x1, o.x1) && inside(p.x2, o.x2)
            }
        }
    }
}

/// Supplier of independent standard normal pairs.
pub trait NormalSource {
    fn next_pair(&mut self) -> (f64, f64);
}

/// Normals from the path's ChaCha8 stream.
pub struct StreamNormals(ChaCha8Rng);

impl StreamNormals {
    pub fn new(seed: u64, path_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path_index);
        Self(rng)
    }
}

impl NormalSource for StreamNormals {
    fn next_pair(&mut self) -> (f64, f64) {
        (StandardNormal.sample(&mut self.0), StandardNormal.sample(&mut self.0))
    }
}

/// Always returns zeros; turns the scheme into explicit Euler for the drift.
pub struct ZeroNormals;

impl NormalSource for ZeroNormals {
    fn next_pair(&mut self) -> (f64, f64) {
        (0.0, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOutcome {
    /// `steps · dt` at the first step outside `D`; `None` if censored.
    pub exit_time: Option<f64>,
    pub steps: usize,
    pub end: Point2,
}

/// One path from `x0` using the default stream `(seed, path_index)`.
pub fn simulate_path(config: &SdeConfig, x0: Point2, path_index: u64) -> Result<PathOutcome> {
    config.validate()?;
    if !config.contains(x0) {
        return Err(Error::InvalidArgument(format!("start ({}, {}) is not inside the domain", x0.x1, x0.x2)));
    }
    Ok(run_path(config, x0, &mut StreamNormals::new(config.seed, path_index), None))
}

/// Core stepping loop. When `trace` is given, every `stride`-th state is
/// appended as `(t, x)`, and so is the final state.
pub fn run_path(
    config: &SdeConfig,
    x0: Point2,
    normals: &mut impl NormalSource,
    mut trace: Option<(&mut Vec<(f64, Point2)>, usize)>,
) -> PathOutcome {
    let (a, dt) = (config.amplitude, config.dt);
    let noise = (2.0 * dt).sqrt();
    let mut x = x0;
    if let Some((buf, _)) = trace.as_mut() {
        buf.push((0.0, x));
    }
    for step in 1..=config.max_steps {
        let (z1, z2) = normals.next_pair();
        x = match config.integrator {
            Integrator::EulerMaruyama => {
                let (v1, v2) = velocity(x);
                Point2::new(x.x1 - a * v1 * dt + noise * z1, x.x2 - a * v2 * dt + noise * z2)
            }
            Integrator::FlowSplitting => {
                let y = rk4_flow(x, a, 0.5 * dt);
                rk4_flow(Point2::new(y.x1 + noise * z1, y.x2 + noise * z2), a, 0.5 * dt)
            }
        };
        let exited = !config.contains(x);
        if let Some((buf, stride)) = trace.as_mut() {
            if step % *stride == 0 || exited || step == config.max_steps {
                buf.push((step as f64 * dt, x));
            }
        }
        if exited {
            return PathOutcome { exit_time: Some(step as f64 * dt), steps: step, end: x };
        }
    }
    PathOutcome { exit_time: None, steps: config.max_steps, end: x }
}

/// One RK4 step of `ẋ = −A v(x)` over time `t`.
fn rk4_flow(x: Point2, a: f64, t: f64) -> Point2 {
    let f = |p: Point2| {
        let (v1, v2) = velocity(p);
        (-a * v1, -a * v2)
    };
    let at = |k: (f64, f64), s: f64| Point2::new(x.x1 + s * k.0, x.x2 + s * k.1);
    let k1 = f(x);
    let k2 = f(at(k1, 0.5 * t));
    let k3 = f(at(k2, 0.5 * t));
    let k4 = f(at(k3, t));
    Point2::new(
        x.x1 + t / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        x.x2 + t / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitStats {
    pub mean: f64,
    /// Zero (and `degenerate` set) when fewer than two paths exited.
    pub stderr: f64,
    pub n_exited: usize,
    pub n_censored: usize,
    pub seed: u64,
    pub degenerate: bool,
}

impl ExitStats {
    pub fn censored_fraction(&self) -> f64 {
        self.n_censored as f64 / (self.n_exited + self.n_censored) as f64
    }
}

/// Sample mean and standard error of the exit time over exited paths.
pub fn estimate_exit_time(config: &SdeConfig, x0: Point2) -> Result<ExitStats> {
    config.validate()?;
    if !config.contains(x0) {
        return Err(Error::InvalidArgument(format!("start ({}, {}) is not inside the domain", x0.x1, x0.x2)));
    }
    let outcomes: Vec<Option<f64>> = (0..config.n_paths as u64)
        .into_par_iter()
        .map(|i| run_path(config, x0, &mut StreamNormals::new(config.seed, i), None).exit_time)
        .collect();
    let times: Vec<f64> = outcomes.iter().flatten().copied().collect();
    let n_exited = times.len();
    let n_censored = config.n_paths - n_exited;
    let (mean, stderr) = if times.is_empty() { (f64::NAN, 0.0) } else { mean_stderr(&times) };
    let stats = ExitStats { mean, stderr, n_exited, n_censored, seed: config.seed, degenerate: n_exited < 2 };
    if stats.censored_fraction() > 0.01 {
        log::warn!(
            "{} of {} paths censored at t = {}; the mean is biased low",
            n_censored,
            config.n_paths,
            config.max_steps as f64 * config.dt
        );
    }
    Ok(stats)
}

/// Writes `k` trajectories as CSV `path_id,t,x1,x2`, at most
/// [`MAX_POINTS_PER_PATH`] rows per path. Returns the number of data rows.
pub fn dump_trajectories(config: &SdeConfig, x0: Point2, k: usize, path: &Path) -> Result<usize> {
    let traces = trajectories(config, x0, k)?;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "path_id,t,x1,x2")?;
    let mut rows = 0;
    for (id, trace) in traces.iter().enumerate() {
        for (t, p) in trace {
            writeln!(out, "{id},{t:.10e},{:.10e},{:.10e}", p.x1, p.x2)?;
            rows += 1;
        }
    }
    out.flush()?;
    Ok(rows)
}

/// Subsampled trajectories of paths `0..k`.
pub fn trajectories(config: &SdeConfig, x0: Point2, k: usize) -> Result<Vec<Vec<(f64, Point2)>>> {
    if k == 0 {
        return Err(Error::InvalidArgument("need at least one trajectory".into()));
    }
    config.validate()?;
    if !config.contains(x0) {
        return Err(Error::InvalidArgument(format!("start ({}, {}) is not inside the domain", x0.x1, x0.x2)));
    }
    // leave room for the start and the final state
    let stride = config.max_steps.div_ceil(MAX_POINTS_PER_PATH - 2).max(1);
    Ok((0..k as u64)
        .into_par_iter()
        .map(|i| {
            let mut buf = Vec::new();
            run_path(config, x0, &mut StreamNormals::new(config.seed, i), Some((&mut buf, stride)));
            buf
        })
        .collect())
}
