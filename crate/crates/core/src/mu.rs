//! Distribution function `mu(lambda) = |{(t,x) : |e^{it Laplacian} psi(x)|^2 > lambda}|`.

use crate::error::{invalid, Result};
use crate::exec::Execution;
use crate::laplace::gamma::gamma;
use crate::quad::{integrate, QuadTol};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{FRAC_PI_2, PI};

/// Volume of the unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    let h = 0.5 * d as f64;
    PI.powf(h) / gamma(h + 1.0).expect("positive argument")
}

/// Leading constant of `mu(lambda) ~ C_d lambda^{-1-1/d}` as `lambda -> 0`.
pub fn asymptotic_constant(d: usize) -> f64 {
    let h = 0.5 * d as f64;
    unit_ball_volume(d) * (d as f64).powf(h) * gamma(h + 1.0).expect("positive argument")
        / (0.5 * (d as f64 + 1.0)).powf(h + 1.0)
}

/// `m(s) = mu(e^{-s})` for `s >= 0`, by quadrature in `t = t* sin(theta)`.
pub fn mu_of_log(d: usize, s: f64) -> f64 {
    if !(s > 0.0) {
        return 0.0;
    }
    let df = d as f64;
    let h = 0.5 * df;
    let ts2 = (2.0 * s / df).exp_m1();
    let ts = ts2.sqrt();
    let f = |theta: f64| {
        let (sn, cs) = theta.sin_cos();
        let q = 1.0 + ts2 * sn * sn;
        // ln((1+t^2)^{-d/2} / lambda), written without cancellation near t = t*.
        let log_ratio = h * (ts2 * cs * cs / q).ln_1p();
        let base = 2.0 * q * log_ratio;
        if base <= 0.0 {
            0.0
        } else {
            base.powf(h) * cs
        }
    };
    let r = integrate(f, 0.0, FRAC_PI_2, QuadTol { abs: 1e-300, rel: 1e-13, max_intervals: 500 });
    2.0 * unit_ball_volume(d) * ts * r.value
}

/// `mu(lambda)`; zero for `lambda >= 1`.
pub fn mu_quadrature(d: usize, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return invalid(format!("distribution function needs lambda > 0, got {lambda}"));
    }
    if d == 0 {
        return invalid("dimension must be positive");
    }
    if lambda >= 1.0 {
        return Ok(0.0);
    }
    Ok(mu_of_log(d, -lambda.ln()))
}

/// Something that evaluates `mu` in dimension `dim`.
pub trait MuSource: Sync {
    fn dim(&self) -> usize;
    /// `m(s) = mu(e^{-s})`, zero for `s <= 0`.
    fn m(&self, s: f64) -> f64;
    fn mu(&self, lambda: f64) -> f64 {
        if lambda >= 1.0 {
            0.0
        } else {
            self.m(-lambda.ln())
        }
    }
}

/// Direct quadrature evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MuExact {
    pub d: usize,
}

impl MuSource for MuExact {
    fn dim(&self) -> usize {
        self.d
    }
    fn m(&self, s: f64) -> f64 {
        mu_of_log(self.d, s)
    }
}

/// How a table was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MuMethod {
    Quadrature,
    MonteCarlo,
}

/// Samples of `mu` on a decreasing `lambda` grid, with interpolation in `s = -ln lambda`.
#[derive(Clone, Debug, PartialEq)]
pub struct MuTable {
    pub dim: usize,
    pub lambdas: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Option<Vec<f64>>,
    pub method: MuMethod,
}

/// `n` log-spaced points from `1` down to `lambda_min`.
pub fn default_lambda_grid(n: usize, lambda_min: f64) -> Vec<f64> {
    let lmin = lambda_min.ln();
    (0..n).map(|i| (lmin * i as f64 / (n - 1).max(1) as f64).exp()).collect()
}

impl MuTable {
    /// Quadrature table on a decreasing grid in `(0, 1]`.
    pub fn quadrature(d: usize, lambdas: &[f64], exec: Execution) -> Result<MuTable> {
        if lambdas.len() < 2 {
            return invalid("table needs at least two lambdas");
        }
        if lambdas.windows(2).any(|w| !(w[1] < w[0])) || !(lambdas[lambdas.len() - 1] > 0.0) {
            return invalid("table lambdas must be positive and strictly decreasing");
        }
        let values = exec.map(lambdas, |&l| mu_quadrature(d, l));
        let values = values.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(MuTable { dim: d, lambdas: lambdas.to_vec(), values, stderr: None, method: MuMethod::Quadrature })
    }

    /// Values are nonincreasing in lambda (nondecreasing along the decreasing grid).
    pub fn is_monotone(&self) -> bool {
        self.values.windows(2).all(|w| w[1] >= w[0])
    }
}

impl MuSource for MuTable {
    fn dim(&self) -> usize {
        self.dim
    }

    /// Linear interpolation in `s` of `ln m(s) - ((d+1)/2) ln s`, which is smooth at both
    /// ends; exponential continuation beyond the smallest tabulated lambda.
    fn m(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let e = 0.5 * (self.dim as f64 + 1.0);
        let pts: Vec<(f64, f64)> = self
            .lambdas
            .iter()
            .zip(&self.values)
            .filter(|(l, v)| **v > 0.0 && **l < 1.0)
            .map(|(l, v)| {
                let s = -l.ln();
                (s, v.ln() - e * s.ln())
            })
            .collect();
        if pts.is_empty() {
            return 0.0;
        }
        let q = if s <= pts[0].0 {
            pts[0].1
        } else if s >= pts[pts.len() - 1].0 {
            let (s1, q1) = pts[pts.len() - 1];
            q1 + (1.0 + 1.0 / self.dim as f64) * (s - s1) - e * (s / s1).ln()
        } else {
            let j = pts.partition_point(|p| p.0 <= s);
            let (s0, q0) = pts[j - 1];
            let (s1, q1) = pts[j];
            let w = (s - s0) / (s1 - s0);
            q0 * (1.0 - w) + q1 * w
        };
        (q + e * s.ln()).exp()
    }
}

/// Bounding box `[-t*, t*] x [-x_max, x_max]^d` of the superlevel set.
pub fn bounding_box(d: usize, lambda: f64) -> (f64, f64) {
    let s = -lambda.ln();
    let ts2 = (2.0 * s / d as f64).exp_m1();
    (ts2.sqrt(), (2.0 * (1.0 + ts2) * s).sqrt())
}

const SHARD: u64 = 1 << 16;

/// Monte Carlo estimate of `mu(lambda)` and its standard error.
///
/// Samples are uniform in the bounding box. The stream is split into fixed
/// shards, each seeking to its own offset of one ChaCha8 stream, so the result
/// does not depend on the execution mode or thread count.
pub fn mu_monte_carlo(d: usize, lambda: f64, n_samples: u64, seed: u64, exec: Execution) -> Result<(f64, f64)> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return invalid(format!("Monte Carlo needs lambda in (0,1), got {lambda}"));
    }
    if n_samples < 10_000 {
        return invalid(format!("Monte Carlo needs at least 1e4 samples, got {n_samples}"));
    }
    if d == 0 {
        return invalid("dimension must be positive");
    }
    let (ts, xm) = bounding_box(d, lambda);
    let s = -lambda.ln();
    let h = 0.5 * d as f64;
    let words = 2 * (d as u128 + 1);
    let shards = n_samples.div_ceil(SHARD);
    let counts = exec.map_range(shards as usize, |k| {
        let start = k as u64 * SHARD;
        let len = SHARD.min(n_samples - start);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_word_pos(start as u128 * words);
        let mut hits = 0u64;
        for _ in 0..len {
            let t = ts * (2.0 * rng.gen::<f64>() - 1.0);
            let mut r2 = 0.0;
            for _ in 0..d {
                let x = xm * (2.0 * rng.gen::<f64>() - 1.0);
                r2 += x * x;
            }
            let q = 1.0 + t * t;
            if h * q.ln() + r2 / (2.0 * q) < s {
                hits += 1;
            }
        }
        hits
    });
    let hits: u64 = counts.iter().sum();
    let p = hits as f64 / n_samples as f64;
    let volume = 2.0 * ts * (2.0 * xm).powi(d as i32);
    Ok((volume * p, volume * (p * (1.0 - p) / n_samples as f64).sqrt()))
}

/// Largest `lambda^{1+1/d} mu(lambda) / (1 + ln(1/lambda))^{d/2}` on the grid.
pub fn growth_diagnostic(d: usize, lambdas: &[f64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &l in lambdas {
        let v = mu_quadrature(d, l)?;
        let g = l.powf(1.0 + 1.0 / d as f64) * v / (1.0 - l.ln()).powf(0.5 * d as f64);
        worst = worst.max(g);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn support_and_errors() {
        assert_eq!(mu_quadrature(1, 1.0).unwrap(), 0.0);
        assert_eq!(mu_quadrature(1, 1.5).unwrap(), 0.0);
        assert!(mu_quadrature(1, 0.0).is_err());
        assert!(mu_quadrature(1, 0.5).unwrap() > 0.0);
    }

    #[test]
    fn small_lambda_asymptotics() {
        for d in 1..=3 {
            let l: f64 = 1e-8;
            let v = mu_quadrature(d, l).unwrap();
            let a = asymptotic_constant(d) * l.powf(-1.0 - 1.0 / d as f64);
            assert!((v / a - 1.0).abs() < 0.05, "d={d}: {}", v / a);
        }
        assert!((asymptotic_constant(1) - PI.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn near_one_behaves_like_power() {
        // mu(e^{-s}) ~ 2 pi s for d = 1
        let s = 1e-6;
        let v = mu_of_log(1, s);
        assert!((v / (2.0 * PI * s) - 1.0).abs() < 1e-5);
    }

    #[test]
    fn dimension_two_closed_form() {
        // d = 2: superlevel radius^2 = 2(1+t^2) ln(1/(lambda(1+t^2))), area integral elementary
        let l: f64 = 0.2;
        let ts = (1.0 / l - 1.0).sqrt();
        let f = |t: f64| 2.0 * PI * (1.0 + t * t) * (-(l * (1.0 + t * t)).ln());
        let r = integrate(f, -ts, ts, QuadTol::default());
        assert!((mu_quadrature(2, l).unwrap() / r.value - 1.0).abs() < 1e-11);
    }

    #[test]
    fn table_monotone_and_interpolates() {
        let grid = default_lambda_grid(200, 1e-6);
        let t = MuTable::quadrature(1, &grid, Execution::default()).unwrap();
        assert_eq!(t.values[0], 0.0);
        assert!(t.is_monotone());
        for l in [0.9, 0.3, 1e-3, 1e-7] {
            let e = mu_quadrature(1, l).unwrap();
            assert!((t.mu(l) / e - 1.0).abs() < 2e-3, "{l}");
        }
    }

    #[test]
    fn monte_carlo_is_mode_independent() {
        let a = mu_monte_carlo(1, 0.4, 200_000, 7, Execution::Sequential).unwrap();
        let b = mu_monte_carlo(1, 0.4, 200_000, 7, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert!(mu_monte_carlo(1, 1.2, 200_000, 7, Execution::Sequential).is_err());
        assert!(mu_monte_carlo(1, 0.4, 100, 7, Execution::Sequential).is_err());
    }
}
