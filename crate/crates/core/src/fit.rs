//! Least-squares line fits on log-log data.

use crate::error::{invalid, Result};

/// Fitted line `ln y = slope ln x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope (zero for two points).
    pub slope_stderr: f64,
}

impl LineFit {
    /// Half-width of the approximate 95% confidence interval of the slope.
    pub fn confidence_width(&self) -> f64 {
        2.0 * self.slope_stderr
    }
}

/// Ordinary least squares line through `(x_i, y_i)`.
pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() || x.len() < 2 {
        return invalid("line fit needs at least two paired samples");
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return invalid("line fit over non-finite samples");
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return invalid("line fit with coincident abscissae");
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_stderr = if x.len() > 2 {
        let ss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
        (ss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LineFit { slope, intercept, slope_stderr })
}

/// Line fit of `ln |y|` against `ln x`.
pub fn fit_loglog(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.iter().any(|v| !(*v > 0.0)) || y.iter().any(|v| *v == 0.0) {
        return invalid("log-log fit needs positive abscissae and nonzero ordinates");
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().ln()).collect();
    fit_line(&lx, &ly)
}
