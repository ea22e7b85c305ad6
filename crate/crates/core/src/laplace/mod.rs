//! Laplace transform `M(z) = int_0^inf e^{-kz} mu(e^{-k}) dk` of the distribution function:
//! Gamma closed form, direct quadrature, decay bounds and the outer-function criterion.

pub mod gamma;

use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::mu::MuSource;
use crate::quad::{integrate, integrate_breaks, QuadTol};
use gamma::gamma_ratio;
use num_complex::Complex64;
use std::f64::consts::PI;

/// Abscissa of absolute convergence, `1 + 1/d`.
pub fn convergence_abscissa(d: usize) -> f64 {
    1.0 + 1.0 / d as f64
}

/// Abscissa of the uniform decay bounds, `1 + 3/(2d)`.
pub fn bounds_abscissa(d: usize) -> f64 {
    1.0 + 1.5 / d as f64
}

/// `M(z) = 2^{d/2} pi^{(d+1)/2} z^{-d/2-1} Gamma(d(z-1)/2 - 1/2) / Gamma(d(z-1)/2)`.
pub fn m_closed(d: usize, z: Complex64) -> Result<Complex64> {
    if d == 0 {
        return invalid("dimension must be positive");
    }
    if z == Complex64::new(0.0, 0.0) {
        return Err(Error::Pole("z = 0".into()));
    }
    let h = 0.5 * d as f64;
    let b = (z - 1.0) * h;
    let a = b - 0.5;
    let ratio = gamma_ratio(a, b)?;
    let pref = 2f64.powf(h) * PI.powf(h + 0.5);
    Ok(pref * (-(h + 1.0) * z.ln()).exp() * ratio)
}

/// `M(z)` by quadrature of `e^{-kz} m(k)` against a distribution-function source.
///
/// Beyond `k = K` the integrand is replaced by its exponential asymptote
/// `C e^{(1+1/d)k}` with `C` matched at `K`, whose relative error there is
/// `O(e^{-2K/d})`.
pub fn m_quadrature(z: Complex64, mu: &dyn MuSource) -> Result<Complex64> {
    let d = mu.dim();
    let alpha = convergence_abscissa(d);
    if !(z.re > alpha) {
        return invalid(format!("quadrature needs Re z > 1 + 1/d, got {z}"));
    }
    let cut = 12.0 * d as f64 + 10.0;
    let panels = (cut * (1.0 + z.im.abs() / PI)).ceil() as usize;
    let breaks: Vec<f64> = (0..=panels).map(|i| cut * i as f64 / panels as f64).collect();
    let r = integrate_breaks(
        &mut |k: f64| (-z * k).exp() * mu.m(k),
        &breaks,
        QuadTol { abs: 0.0, rel: 1e-10, max_intervals: 50_000 },
    );
    if !r.converged {
        return Err(Error::NotConverged(format!("M quadrature at z = {z}: error {:.2e}", r.error)));
    }
    let c = mu.m(cut) * (-alpha * cut).exp();
    let tail = c * ((alpha - z) * cut).exp() / (z - alpha);
    Ok(r.value + tail)
}

/// One row of a decay-bound check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundRow {
    pub z: Complex64,
    pub abs_m: f64,
    /// `|M(z)| (1+|z|^2)^{(d+3)/4}`.
    pub weighted: f64,
}

/// Comparability of `|M(z)|` with `(1+|z|^2)^{-(d+3)/4}` over a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundsReport {
    pub dim: usize,
    pub rows: Vec<BoundRow>,
    pub min_weighted: f64,
    pub max_weighted: f64,
    pub pass: bool,
}

impl BoundsReport {
    pub fn ratio(&self) -> f64 {
        self.max_weighted / self.min_weighted
    }
}

/// Largest admissible spread of the weighted values.
pub const BOUNDS_FACTOR: f64 = 1e3;

/// Evaluates the weighted modulus on `z_grid`; passes when `max/min <= 1e3`.
pub fn check_bounds(d: usize, z_grid: &[Complex64]) -> Result<BoundsReport> {
    if z_grid.is_empty() {
        return invalid("bounds check needs a nonempty grid");
    }
    let a = bounds_abscissa(d);
    let mut rows = Vec::with_capacity(z_grid.len());
    for &z in z_grid {
        if z.re < a - 1e-12 {
            return invalid(format!("grid point {z} lies left of Re z = 1 + 3/(2d) = {a}"));
        }
        let abs_m = m_closed(d, z)?.norm();
        let weighted = abs_m * (1.0 + z.norm_sqr()).powf(0.25 * (d as f64 + 3.0));
        rows.push(BoundRow { z, abs_m, weighted });
    }
    let min_weighted = rows.iter().map(|r| r.weighted).fold(f64::INFINITY, f64::min);
    let max_weighted = rows.iter().map(|r| r.weighted).fold(0.0, f64::max);
    let pass = max_weighted / min_weighted <= BOUNDS_FACTOR;
    Ok(BoundsReport { dim: d, rows, min_weighted, max_weighted, pass })
}

/// Stopping rule for the vertical-line integrals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineIntegralOptions {
    pub initial_range: f64,
    pub rel_increment: f64,
    pub max_doublings: usize,
}

impl Default for LineIntegralOptions {
    fn default() -> Self {
        LineIntegralOptions { initial_range: 8.0, rel_increment: 1e-4, max_doublings: 40 }
    }
}

/// `int_{-Y}^{Y} f(y) dy` for even `f`, with `Y` doubled until the increment is small.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineIntegral {
    pub value: f64,
    pub range: f64,
    pub stable: bool,
}

fn line_integral<F: FnMut(f64) -> f64>(mut f: F, opts: LineIntegralOptions) -> LineIntegral {
    let tol = QuadTol { abs: 0.0, rel: 1e-10, max_intervals: 4000 };
    let breaks: Vec<f64> = (0..=8).map(|i| opts.initial_range * i as f64 / 8.0).collect();
    let mut total = 2.0 * integrate_breaks(&mut f, &breaks, tol).value;
    let mut y = opts.initial_range;
    for _ in 0..opts.max_doublings {
        let inc = 2.0 * integrate(&mut f, y, 2.0 * y, tol).value;
        total += inc;
        y *= 2.0;
        if !total.is_finite() {
            break;
        }
        if inc.abs() <= opts.rel_increment * total.abs() {
            return LineIntegral { value: total, range: y, stable: true };
        }
    }
    LineIntegral { value: total, range: y, stable: false }
}

/// Criterion integrals at one abscissa.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OuterRow {
    pub x: f64,
    /// `int |V(x+iy)|^2 dy`.
    pub modulus: LineIntegral,
    /// `int dy / ([(1+x)^2+y^2]^n |V(x+iy)|^2)`.
    pub weighted_inverse: LineIntegral,
}

/// Numerical check that `V(z) = M(c+z)` and `(1+z)^{-n}/V(z)` are square-integrable on
/// vertical lines of the right half-plane.
#[derive(Clone, Debug, PartialEq)]
pub struct OuterReport {
    pub dim: usize,
    pub c: f64,
    pub n: u32,
    pub rows: Vec<OuterRow>,
    pub sup_modulus: f64,
    pub sup_weighted_inverse: f64,
    /// Whether `n > (d+4)/2`, the weight power that guarantees the second integral.
    pub weight_condition: bool,
    /// Both suprema finite and stable under doubling the `y` range.
    pub pass: bool,
}

pub fn outer_criterion(
    d: usize,
    c: f64,
    n: u32,
    x_grid: &[f64],
    opts: LineIntegralOptions,
    exec: Execution,
) -> Result<OuterReport> {
    if c < bounds_abscissa(d) - 1e-12 {
        return invalid(format!("line abscissa c = {c} is below 1 + 3/(2d) = {}", bounds_abscissa(d)));
    }
    if n < 1 {
        return invalid("weight power n must be at least 1");
    }
    if x_grid.is_empty() || x_grid.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
        return invalid("x grid must be nonempty and in [0, inf)");
    }
    let rows = exec.map(x_grid, |&x| {
        let v = |y: f64| m_closed(d, Complex64::new(c + x, y)).map(|m| m.norm_sqr()).unwrap_or(f64::NAN);
        let modulus = line_integral(v, opts);
        let weighted_inverse = line_integral(
            |y| {
                let w = ((1.0 + x) * (1.0 + x) + y * y).powi(n as i32);
                1.0 / (w * v(y))
            },
            opts,
        );
        OuterRow { x, modulus, weighted_inverse }
    });
    let sup_modulus = rows.iter().map(|r| r.modulus.value).fold(0.0, f64::max);
    let sup_weighted_inverse = rows.iter().map(|r| r.weighted_inverse.value).fold(0.0, f64::max);
    let pass = rows.iter().all(|r| {
        r.modulus.stable && r.weighted_inverse.stable && r.modulus.value.is_finite() && r.weighted_inverse.value.is_finite()
    });
    Ok(OuterReport {
        dim: d,
        c,
        n,
        rows,
        sup_modulus,
        sup_weighted_inverse,
        weight_condition: n as f64 > 0.5 * (d as f64 + 4.0),
        pass,
    })
}

/// `int_0^inf (e^{-ck} m(k))^2 dk` over `[0, K]` for doubling `K`; stable when convergent.
pub fn weighted_square_norm(c: f64, mu: &dyn MuSource, opts: LineIntegralOptions) -> LineIntegral {
    let tol = QuadTol { abs: 0.0, rel: 1e-10, max_intervals: 4000 };
    let f = |k: f64| {
        let v = (-c * k).exp() * mu.m(k);
        v * v
    };
    let mut total = integrate(f, 0.0, opts.initial_range, tol).value;
    let mut k = opts.initial_range;
    for _ in 0..opts.max_doublings.min(6) {
        let inc = integrate(f, k, 2.0 * k, tol).value;
        total += inc;
        k *= 2.0;
        if inc.abs() <= opts.rel_increment * total.abs() {
            return LineIntegral { value: total, range: k, stable: true };
        }
    }
    LineIntegral { value: total, range: k, stable: false }
}
