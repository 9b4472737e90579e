//! Flat `key = value` configuration with `#` comments.
//!
//! Every key has a default, so an empty file is a valid configuration.
//! Lists are comma separated: `lengths = 4, 8`.

use std::path::{Path, PathBuf};

use crate::exittime::Domain;
use crate::sde::Integrator;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    /// Domain sizes `L`; all even.
    pub lengths: Vec<u32>,
    /// Exponents `β` with `A = L^β`, each in `(0, 8)`.
    pub betas: Vec<f64>,
    /// Grid rule `h·√A ≤ h_sqrt_a`.
    pub h_sqrt_a: f64,
    /// Minimum intervals per unit length on every grid.
    pub min_intervals: usize,
    /// Points whose square grid would exceed this many unknowns are skipped.
    pub max_unknowns: usize,
    pub solve_tol: f64,
    pub eigen_tol: f64,
    /// Monte Carlo paths per point; 0 disables the cross-check.
    pub mc_paths: usize,
    /// Step as a fraction of the largest admissible step.
    pub mc_dt_fraction: f64,
    pub mc_integrator: Integrator,
    pub mc_domain: Domain,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            lengths: vec![4, 8],
            betas: vec![3.0, 5.0],
            h_sqrt_a: 0.4,
            min_intervals: 16,
            max_unknowns: 1_500_000,
            solve_tol: 1e-9,
            eigen_tol: 1e-6,
            mc_paths: 0,
            mc_dt_fraction: 1.0,
            mc_integrator: Integrator::FlowSplitting,
            mc_domain: Domain::Square,
            seed: 20240601,
            out: PathBuf::from("out"),
        }
    }
}

impl ScanConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            cfg.set(key.trim(), value.trim()).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("line {}: {m}", lineno + 1)),
                other => other,
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
        }
        fn list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
            v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| num(key, s)).collect()
        }
        match key {
            "lengths" => self.lengths = list(key, value)?,
            "betas" => self.betas = list(key, value)?,
            "h_sqrt_a" => self.h_sqrt_a = num(key, value)?,
            "min_intervals" => self.min_intervals = num(key, value)?,
            "max_unknowns" => self.max_unknowns = num(key, value)?,
            "solve_tol" => self.solve_tol = num(key, value)?,
            "eigen_tol" => self.eigen_tol = num(key, value)?,
            "mc_paths" => self.mc_paths = num(key, value)?,
            "mc_dt_fraction" => self.mc_dt_fraction = num(key, value)?,
            "mc_integrator" => self.mc_integrator = value.parse()?,
            "mc_domain" => self.mc_domain = value.parse()?,
            "seed" => self.seed = num(key, value)?,
            "out" => self.out = PathBuf::from(value),
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.lengths.is_empty() || self.betas.is_empty() {
            return Err(Error::Config("`lengths` and `betas` must be non-empty".into()));
        }
        if let Some(l) = self.lengths.iter().find(|&&l| l == 0 || l % 2 != 0) {
            return Err(Error::Config(format!("L = {l} is not a positive even integer")));
        }
        if let Some(b) = self.betas.iter().find(|&&b| !(b > 0.0 && b < 8.0)) {
            return Err(Error::Config(format!("beta = {b} outside (0, 8)")));
        }
        let positive = [
            ("h_sqrt_a", self.h_sqrt_a),
            ("solve_tol", self.solve_tol),
            ("eigen_tol", self.eigen_tol),
            ("mc_dt_fraction", self.mc_dt_fraction),
        ];
        if let Some((k, v)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Config(format!("`{k}` must be positive, got {v}")));
        }
        if self.mc_dt_fraction > 1.0 {
            return Err(Error::Config("`mc_dt_fraction` must not exceed 1".into()));
        }
        if self.min_intervals < 2 || self.min_intervals % 2 != 0 {
            return Err(Error::Config("`min_intervals` must be even and at least 2".into()));
        }
        Ok(())
    }

    /// `(L, β)` pairs in row order.
    pub fn points(&self) -> Vec<(u32, f64)> {
        self.lengths.iter().flat_map(|&l| self.betas.iter().map(move |&b| (l, b))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(ScanConfig::parse("").unwrap(), ScanConfig::default());
        assert_eq!(ScanConfig::parse("# nothing\n\n").unwrap(), ScanConfig::default());
    }

    #[test]
    fn parses_lists_and_comments() {
        let cfg = ScanConfig::parse("lengths = 2, 4 # small\nbetas=3,4.5\nseed = 9\nmc_integrator = em\n").unwrap();
        assert_eq!(cfg.lengths, vec![2, 4]);
        assert_eq!(cfg.betas, vec![3.0, 4.5]);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.mc_integrator, Integrator::EulerMaruyama);
        assert_eq!(cfg.points().len(), 4);
    }

    #[test]
    fn rejects_bad_input() {
        for text in ["lengths = 3", "betas = 9", "bogus = 1", "lengths 4", "seed = x", "h_sqrt_a = -1"] {
            assert!(matches!(ScanConfig::parse(text), Err(Error::Config(_))), "{text}");
        }
    }
}
