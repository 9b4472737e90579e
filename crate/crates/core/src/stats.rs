//! Small statistics helpers shared by the fits and the Monte Carlo code.

use crate::{Error, Result};

/// Least-squares line `y = intercept + slope·x`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidArgument("linear fit needs at least two paired points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("linear fit needs distinct abscissae".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok((my - slope * mx, slope))
}

/// Fits `y = c·x^p` in log-log space and returns `(c, p)`.
pub fn power_law_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidArgument("power-law fit needs positive data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let (a, p) = linear_fit(&lx, &ly)?;
    Ok((a.exp(), p))
}

/// Sample mean and standard error of the mean (0 for a single sample).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let xs = [256.0, 1024.0, 4096.0];
        let ys: Vec<f64> = xs.iter().map(|a: &f64| 2.0 * a.sqrt()).collect();
        let (c, p) = power_law_fit(&xs, &ys).unwrap();
        assert!((c - 2.0).abs() < 1e-12 && (p - 0.5).abs() < 1e-12);
    }

    #[test]
    fn stderr_of_constant_sample_is_zero() {
        assert_eq!(mean_stderr(&[3.0, 3.0, 3.0]), (3.0, 0.0));
        assert_eq!(mean_stderr(&[1.5]), (1.5, 0.0));
    }
}
