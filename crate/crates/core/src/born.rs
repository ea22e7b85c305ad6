//! Born functional, concentrated Gaussian data and the sigma-scan.

use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::fit::{fit_loglog, LineFit};
use crate::grid::{make_grid_centered, Field, SpatialGrid};
use crate::nonlinearity::{Coefficient, NonlinearitySpec};
use crate::propagator::{free_propagate, gaussian_exact, gaussian_intensity, LinearStep};
use crate::quad::{integrate_breaks, QuadTol};
use crate::solver::{check_cap, evolve_endpoint};
use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_2, PI};

/// Rescaled, recentered Gaussian `phi_sigma` with intensity factor `A`.
///
/// Its free flow is `sqrt(A) v((t-t0)/sigma^2, (x-x0)/sigma)` with `v = e^{it Laplacian} psi`,
/// so it concentrates at `(t0, x0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConcentratedData {
    pub t0: f64,
    pub x0: Vec<f64>,
    pub sigma: f64,
    pub amplitude: f64,
}

impl ConcentratedData {
    pub fn new(t0: f64, x0: Vec<f64>, sigma: f64, amplitude: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return invalid(format!("sigma must be positive, got {sigma}"));
        }
        if !(amplitude > 0.0) || !amplitude.is_finite() {
            return invalid(format!("amplitude must be positive, got {amplitude}"));
        }
        if x0.is_empty() || x0.iter().any(|v| !v.is_finite()) || !t0.is_finite() {
            return invalid("concentration point must be finite");
        }
        Ok(ConcentratedData { t0, x0, sigma, amplitude })
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    /// `e^{it Laplacian} phi_sigma (x)` in closed form.
    pub fn free_flow(&self, t: f64, x: &[f64]) -> Complex64 {
        let s = self.sigma;
        let r2: f64 = x.iter().zip(&self.x0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (s * s);
        let y = [r2.sqrt()];
        let v = if self.dim() == 1 {
            gaussian_exact(1, (t - self.t0) / (s * s), &y)
        } else {
            crate::propagator::gaussian_exact_r2(self.dim(), (t - self.t0) / (s * s), r2)
        };
        v * self.amplitude.sqrt()
    }

    /// Samples the free flow at time `t` on `grid`.
    pub fn sample(&self, grid: &SpatialGrid, t: f64) -> Result<Field> {
        if grid.dim() != self.dim() {
            return Err(Error::GridMismatch("concentration point dimension".into()));
        }
        let dx = grid.spacing();
        if self.sigma < 4.0 * dx {
            return Err(Error::Resolution(format!(
                "sigma = {} is below 4 dx = {}",
                self.sigma,
                4.0 * dx
            )));
        }
        // Distance from the packet center to the nearest boundary of the box.
        let mut edge = f64::INFINITY;
        for a in 0..grid.dim() {
            let lo = grid.center()[a] - grid.half_extent();
            let hi = grid.center()[a] + grid.half_extent();
            edge = edge.min(self.x0[a] - lo).min(hi - dx - self.x0[a]);
        }
        let s2 = self.sigma * self.sigma;
        let tau = (t - self.t0) / s2;
        let ratio = if edge > 0.0 {
            gaussian_intensity(self.dim(), tau, edge * edge / s2) / gaussian_intensity(self.dim(), tau, 0.0)
        } else {
            1.0
        };
        if ratio > 1e-16 {
            return Err(Error::Resolution(format!(
                "concentrated data not contained in the box (edge intensity ratio {ratio:.2e})"
            )));
        }
        Ok(Field::from_fn(grid, |x| self.free_flow(t, x)))
    }
}

/// `phi_sigma` sampled on `grid` at time zero.
pub fn build_concentrated(data: &ConcentratedData, grid: &SpatialGrid) -> Result<Field> {
    data.sample(grid, 0.0)
}

/// Born value with its truncation bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BornValue {
    pub value: f64,
    pub tail_bound: f64,
}

/// `int int G(t, x, |e^{it Laplacian} phi|^2) dx dt` on `|t| <= window`, trapezoid in time.
///
/// The contribution of `|t| > window` is bounded with the dispersive estimate
/// `|e^{it Laplacian} phi| <= (4 pi |t|)^{-d/2} ||phi||_1`; an error is returned
/// when that bound exceeds `tol` times the value.
pub fn born_functional(
    spec: &NonlinearitySpec,
    phi: &Field,
    window: f64,
    dt: f64,
    tol: f64,
) -> Result<BornValue> {
    if !(window > 0.0) || !(dt > 0.0) || dt > window {
        return invalid("born window and step must satisfy 0 < dt <= window");
    }
    let grid = phi.grid();
    let d = grid.dim();
    if spec.dim() != d {
        return Err(Error::GridMismatch("spec and field dimensions differ".into()));
    }
    let mass = phi.mass();
    if mass == 0.0 || spec.is_zero() {
        return Ok(BornValue { value: 0.0, tail_bound: 0.0 });
    }
    let steps = (2.0 * window / dt).ceil() as usize;
    let h = 2.0 * window / steps as f64;
    let nodes = grid.nodes();
    let vol = grid.cell_volume();
    let mut u = free_propagate(phi, -window).into_values();
    let mut lin = LinearStep::new(grid, h);
    let slice = |t: f64, u: &[Complex64]| -> f64 {
        u.iter()
            .zip(nodes.chunks(d))
            .map(|(v, x)| {
                let lam = v.norm_sqr();
                lam * spec.rho(t, x, lam)
            })
            .sum::<f64>()
            * vol
    };
    let mut acc = 0.5 * slice(-window, &u);
    for n in 1..=steps {
        lin.apply(&mut u);
        let t = -window + n as f64 * h;
        let w = if n == steps { 0.5 } else { 1.0 };
        acc += w * slice(t, &u);
    }
    let value = acc * h;

    let l1: f64 = phi.values().iter().map(|v| v.norm()).sum::<f64>() * vol;
    let mut tail = 0.0;
    for term in spec.terms() {
        let cmax = match &term.coeff {
            Coefficient::Constant(c) => c.abs(),
            Coefficient::Bump { c, .. } => c.abs(),
        };
        let e = 0.5 * d as f64 * term.p;
        if e <= 1.0 {
            tail = f64::INFINITY;
            break;
        }
        let sup = l1 * (4.0 * PI * window).powf(-0.5 * d as f64);
        tail += 2.0 * cmax * mass * sup.powf(term.p) * window / (e - 1.0);
    }
    if tail > tol * value.abs() {
        return Err(Error::TailTooLarge { tail, value });
    }
    Ok(BornValue { value, tail_bound: tail })
}

/// Per-dimension factor `int exp(-beta eta^2/2 - (a + b eta)^2 / w^2) d eta`.
fn gaussian_overlap(beta: f64, a: f64, b: f64, w: f64) -> f64 {
    let w2 = w * w;
    let alpha = 0.5 * beta + b * b / w2;
    let m = a * b / w2;
    (PI / alpha).sqrt() * (m * m / alpha - a * a / w2).exp()
}

/// Integrand in `theta` (with `t - t0 = sigma^2 tan theta`) of the concentrated Born integral.
fn born_theta_integrand(spec: &NonlinearitySpec, data: &ConcentratedData, theta: f64) -> f64 {
    let d = data.dim() as f64;
    let s2 = data.sigma * data.sigma;
    let s = theta.tan();
    let q = 1.0 + s * s;
    let t = data.t0 + s2 * s;
    let mut total = 0.0;
    for term in spec.terms() {
        let beta = 0.5 * term.p + 1.0;
        let amp = data.amplitude.powf(beta) * q.powf(0.5 * d + 1.0 - 0.5 * d * beta);
        let space = match &term.coeff {
            Coefficient::Constant(c) => c * (2.0 * PI / beta).powf(0.5 * d),
            Coefficient::Bump { c, t_c, tau, x_c, w } => {
                let time = (-((t - t_c) / tau).powi(2)).exp();
                let b = data.sigma * q.sqrt();
                let mut prod = c * time;
                for (x0, xc) in data.x0.iter().zip(x_c) {
                    prod *= gaussian_overlap(beta, x0 - xc, b, *w);
                }
                prod
            }
        };
        total += amp * space;
    }
    if total.is_finite() {
        total
    } else {
        0.0
    }
}

fn born_theta_range(spec: &NonlinearitySpec, data: &ConcentratedData, lo: f64, hi: f64) -> Result<f64> {
    if spec.dim() != data.dim() {
        return Err(Error::GridMismatch("spec and concentration point dimensions differ".into()));
    }
    if spec.is_zero() || hi <= lo {
        return Ok(0.0);
    }
    let mut breaks = vec![lo];
    // Split at the temporal bump centers so narrow time bumps are not missed.
    for term in spec.terms() {
        if let Coefficient::Bump { t_c, tau, .. } = &term.coeff {
            for k in [-2.0, 0.0, 2.0] {
                let th = ((t_c + k * tau - data.t0) / (data.sigma * data.sigma)).atan();
                if th > lo && th < hi {
                    breaks.push(th);
                }
            }
        }
    }
    breaks.push(hi);
    breaks.sort_by(|a, b| a.total_cmp(b));
    breaks.dedup();
    let r = integrate_breaks(
        &mut |th| born_theta_integrand(spec, data, th),
        &breaks,
        QuadTol { abs: 0.0, rel: 1e-13, max_intervals: 4000 },
    );
    if !r.converged && r.error > 1e-9 * r.value.abs() {
        return Err(Error::NotConverged(format!("Born quadrature error {:.2e}", r.error)));
    }
    let d = data.dim() as f64;
    Ok(data.sigma.powf(d + 2.0) * r.value)
}

/// Born functional of concentrated data over the whole time line, in closed form up to
/// a one-dimensional quadrature (no truncation).
pub fn born_concentrated(spec: &NonlinearitySpec, data: &ConcentratedData) -> Result<f64> {
    born_theta_range(spec, data, -FRAC_PI_2, FRAC_PI_2)
}

/// Part of [`born_concentrated`] from `|t - t0| > sigma^2 * inner_window`.
pub fn born_concentrated_outside(
    spec: &NonlinearitySpec,
    data: &ConcentratedData,
    inner_window: f64,
) -> Result<f64> {
    let th = inner_window.atan();
    Ok(born_theta_range(spec, data, -FRAC_PI_2, -th)? + born_theta_range(spec, data, th, FRAC_PI_2)?)
}

/// Unit-scale discretization that concentrated runs rescale by `sigma`.
///
/// A run at scale `sigma` uses the box `x0 + sigma [-L, L)^d` with `N` points, step
/// `sigma^2 dt` and simulates `|t - t0| <= sigma^2 T`; outside that window the data
/// flows freely (in closed form) and the nonlinear contribution there is added as
/// its Born value.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanConfig {
    pub base_half_extent: f64,
    pub base_points: usize,
    pub base_dt: f64,
    pub base_window: f64,
    pub amplitude_cap: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            base_half_extent: 120.0,
            base_points: 2048,
            base_dt: 0.01,
            base_window: 30.0,
            amplitude_cap: 0.5,
        }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_half_extent > 0.0) || !(self.base_window > 0.0) || !(self.amplitude_cap > 0.0) {
            return invalid("scan extents, window and cap must be positive");
        }
        if !(self.base_dt > 0.0) || self.base_dt > self.base_window / 100.0 {
            return invalid("scan base step must lie in (0, window/100]");
        }
        if 2.0 * self.base_half_extent / self.base_points as f64 > 0.25 {
            return Err(Error::Resolution("base grid spacing must be at most 1/4".into()));
        }
        Ok(())
    }

    /// The sigma-adapted grid for `data`.
    pub fn grid_for(&self, data: &ConcentratedData) -> Result<SpatialGrid> {
        make_grid_centered(data.dim(), data.sigma * self.base_half_extent, self.base_points, &data.x0)
    }
}

/// Pairing of concentrated data split into its simulated and analytic parts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConcentratedPairing {
    /// `i <(S - I) phi, phi>`.
    pub pairing: Complex64,
    /// Contribution of the simulated window.
    pub window: Complex64,
    /// Born value outside the window.
    pub outside: f64,
}

/// `i <(S_F - I) phi_sigma, phi_sigma>` via a sigma-adapted run.
pub fn concentrated_pairing(
    spec: &NonlinearitySpec,
    data: &ConcentratedData,
    cfg: &ScanConfig,
) -> Result<ConcentratedPairing> {
    cfg.validate()?;
    if spec.dim() != data.dim() {
        return Err(Error::GridMismatch("spec and concentration point dimensions differ".into()));
    }
    let grid = cfg.grid_for(data)?;
    let s2 = data.sigma * data.sigma;
    let t_a = data.t0 - s2 * cfg.base_window;
    let t_b = data.t0 + s2 * cfg.base_window;
    // Sample where the data is concentrated; the discrete free flow carries it to t_a.
    let focus = data.sample(&grid, data.t0)?;
    check_cap(spec, &focus, cfg.amplitude_cap)?;
    let start = free_propagate(&focus, t_a - data.t0);
    if spec.is_zero() {
        let z = Complex64::new(0.0, 0.0);
        return Ok(ConcentratedPairing { pairing: z, window: z, outside: 0.0 });
    }
    let end = evolve_endpoint(spec, &start, t_a, t_b, s2 * cfg.base_dt)?;
    let free = free_propagate(&start, t_b - t_a);
    let window = Complex64::i() * (end.inner(&free)? - start.mass());
    let outside = born_concentrated_outside(spec, data, cfg.base_window)?;
    Ok(ConcentratedPairing { pairing: window + outside, window, outside })
}

/// One row of a sigma-scan.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanRow {
    pub sigma: f64,
    pub pairing: Complex64,
    pub born: f64,
    pub residual: f64,
}

impl ScanRow {
    /// `born / sigma^{d+2}`.
    pub fn born_scaled(&self, d: usize) -> f64 {
        self.born / self.sigma.powi(d as i32 + 2)
    }
}

/// Scan rows sorted by decreasing sigma, with log-log slope fits.
#[derive(Clone, Debug)]
pub struct ScanReport {
    pub dim: usize,
    pub rows: Vec<ScanRow>,
    pub born_slope: Option<LineFit>,
    pub residual_slope: Option<LineFit>,
    /// Places where the residual fails to decrease with sigma.
    pub residual_inversions: usize,
}

/// Pairing versus Born value for each `sigma`, at fixed `(t0, x0, A)`.
pub fn sigma_scan(
    spec: &NonlinearitySpec,
    t0: f64,
    x0: &[f64],
    amplitude: f64,
    sigmas: &[f64],
    cfg: &ScanConfig,
    exec: Execution,
) -> Result<ScanReport> {
    if sigmas.is_empty() {
        return invalid("sigma-scan needs at least one sigma");
    }
    let mut sorted = sigmas.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let rows: Vec<Result<ScanRow>> = exec.map(&sorted, |&sigma| {
        let data = ConcentratedData::new(t0, x0.to_vec(), sigma, amplitude)?;
        let pairing = concentrated_pairing(spec, &data, cfg)?.pairing;
        let born = born_concentrated(spec, &data)?;
        Ok(ScanRow { sigma, pairing, born, residual: (pairing - born).norm() })
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let s: Vec<f64> = rows.iter().map(|r| r.sigma).collect();
    let born: Vec<f64> = rows.iter().map(|r| r.born).collect();
    let res: Vec<f64> = rows.iter().map(|r| r.residual).collect();
    let usable = rows.len() >= 2;
    let born_slope = if usable && born.iter().all(|b| *b != 0.0) { fit_loglog(&s, &born).ok() } else { None };
    let residual_slope = if usable && res.iter().all(|r| *r > 0.0) { fit_loglog(&s, &res).ok() } else { None };
    let residual_inversions = res.windows(2).filter(|w| w[1] > w[0]).count();
    Ok(ScanReport { dim: x0.len(), rows, born_slope, residual_slope, residual_inversions })
}

/// `Re pairing(phi_sigma) / sigma^{d+2}`, the estimate of `int int G(t0, x0, A |v|^2)`.
pub fn localized_readout(
    spec: &NonlinearitySpec,
    t0: f64,
    x0: &[f64],
    amplitude: f64,
    sigma: f64,
    cfg: &ScanConfig,
) -> Result<f64> {
    let data = ConcentratedData::new(t0, x0.to_vec(), sigma, amplitude)?;
    let p = concentrated_pairing(spec, &data, cfg)?.pairing;
    Ok(p.re / sigma.powi(x0.len() as i32 + 2))
}

/// Richardson combination `(4 R(sigma/2) - R(sigma)) / 3` of two readouts.
pub fn richardson_readout(
    spec: &NonlinearitySpec,
    t0: f64,
    x0: &[f64],
    amplitude: f64,
    sigma: f64,
    cfg: &ScanConfig,
) -> Result<f64> {
    let coarse = localized_readout(spec, t0, x0, amplitude, sigma, cfg)?;
    let fine = localized_readout(spec, t0, x0, amplitude, 0.5 * sigma, cfg)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{lebesgue_norm, make_grid, sample_gaussian};

    const BORN_PSI_P4: f64 = 4.546_520_8;

    #[test]
    fn closed_form_born_of_psi() {
        let spec = NonlinearitySpec::pure_power(1, 4.0).unwrap();
        let data = ConcentratedData::new(0.0, vec![0.0], 1.0, 1.0).unwrap();
        let b = born_concentrated(&spec, &data).unwrap();
        let exact = PI * (2.0 * PI / 3.0).sqrt();
        assert!((b - exact).abs() < 1e-12 * exact);
        assert!((b - BORN_PSI_P4).abs() < 1e-6);
        let data2 = ConcentratedData::new(0.0, vec![0.0], 1.0, 2.0).unwrap();
        let b2 = born_concentrated(&spec, &data2).unwrap();
        assert!((b2 / b - 8.0).abs() < 1e-12);
    }

    #[test]
    fn outside_part_is_arctan_tail() {
        let spec = NonlinearitySpec::pure_power(1, 4.0).unwrap();
        let data = ConcentratedData::new(0.7, vec![0.2], 0.5, 0.3).unwrap();
        let out = born_concentrated_outside(&spec, &data, 30.0).unwrap();
        let exact = 0.5f64.powi(3) * 0.3f64.powi(3) * (2.0 * PI / 3.0).sqrt() * 2.0 * (FRAC_PI_2 - 30f64.atan());
        assert!((out - exact).abs() < 1e-12 * exact);
    }

    #[test]
    fn concentrated_sampling() {
        let g = make_grid(1, 40.0, 4096).unwrap();
        let data = ConcentratedData::new(0.0, vec![0.0], 1.0, 1.0).unwrap();
        let f = build_concentrated(&data, &g).unwrap();
        assert!(f.max_abs_diff(&sample_gaussian(&g)).unwrap() < 1e-15);
        let data = ConcentratedData::new(0.0, vec![1.0], 0.5, 2.0).unwrap();
        let f = build_concentrated(&data, &g).unwrap();
        let n = lebesgue_norm(&f, 2.0).unwrap();
        let expect = 0.5f64.sqrt() * (2.0 * PI).powf(0.25) * 2f64.sqrt();
        assert!((n - expect).abs() < 1e-8 * expect);
        let tiny = ConcentratedData::new(0.0, vec![0.0], g.spacing(), 1.0).unwrap();
        assert!(matches!(build_concentrated(&tiny, &g), Err(Error::Resolution(_))));
    }

    #[test]
    fn refocusing_at_t0() {
        let g = make_grid(1, 40.0, 2048).unwrap();
        let data = ConcentratedData::new(0.4, vec![3.0], 0.6, 1.0).unwrap();
        let f = build_concentrated(&data, &g).unwrap();
        let u = free_propagate(&f, 0.4);
        let (imax, _) = u
            .values()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap();
        assert!((g.axis(0)[imax] - 3.0).abs() <= g.spacing());
    }

    #[test]
    fn grid_born_matches_closed_form_for_fast_decay() {
        // p = 10 decays like t^-4 in time, so a moderate window suffices.
        let spec = NonlinearitySpec::pure_power(1, 10.0).unwrap();
        let g = make_grid(1, 60.0, 2048).unwrap();
        let psi = sample_gaussian(&g);
        let grid_val = born_functional(&spec, &psi, 20.0, 0.005, 1e-4).unwrap();
        let data = ConcentratedData::new(0.0, vec![0.0], 1.0, 1.0).unwrap();
        let exact = born_concentrated(&spec, &data).unwrap();
        assert!((grid_val.value - exact).abs() < 1e-5 * exact, "{} {}", grid_val.value, exact);
    }

    #[test]
    fn grid_born_rejects_short_window_for_critical_power() {
        let spec = NonlinearitySpec::pure_power(1, 4.0).unwrap();
        let g = make_grid(1, 40.0, 1024).unwrap();
        let psi = sample_gaussian(&g);
        assert!(matches!(
            born_functional(&spec, &psi, 5.0, 0.01, 1e-6),
            Err(Error::TailTooLarge { .. })
        ));
        let zero = born_functional(&spec, &Field::zeros(&g), 5.0, 0.01, 1e-6).unwrap();
        assert_eq!(zero.value, 0.0);
    }
}
