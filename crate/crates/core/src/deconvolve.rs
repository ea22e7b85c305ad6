//! Recovery of `h(k) = e^{-k} g'(e^{-k})` from samples of
//! `D(a) = int_{-a}^inf h(k) m(k + a) dk`, `m(s) = mu(e^{-s})`, and reconstruction of
//! the potential `g` and the nonlinearity at the readout point.

use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::laplace::{convergence_abscissa, m_closed};
use crate::mu::MuSource;
use crate::nonlinearity::PotentialProfile;
use crate::quad::{composite_gauss, integrate, QuadTol};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;

/// Where convolution samples came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    ExactBorn,
    SimulatedScattering,
}

/// Samples of `D(a)` with a per-sample noise level.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvolutionData {
    pub a_grid: Vec<f64>,
    pub d_values: Vec<f64>,
    pub provenance: Provenance,
    pub noise: Vec<f64>,
}

/// Relative noise assigned to exact samples: the kernel quadrature tolerance.
pub const EXACT_NOISE_REL: f64 = 1e-6;

impl ConvolutionData {
    pub fn new(a_grid: Vec<f64>, d_values: Vec<f64>, provenance: Provenance, noise: Vec<f64>) -> Result<Self> {
        if a_grid.is_empty() || a_grid.len() != d_values.len() || noise.len() != a_grid.len() {
            return invalid("convolution data needs matching nonempty a, D and noise arrays");
        }
        if a_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("a grid must be strictly increasing");
        }
        if d_values.iter().chain(&noise).any(|v| !v.is_finite()) || noise.iter().any(|v| *v < 0.0) {
            return invalid("D values and noise must be finite, noise nonnegative");
        }
        Ok(ConvolutionData { a_grid, d_values, provenance, noise })
    }

    pub fn a_max(&self) -> f64 {
        self.a_grid[self.a_grid.len() - 1]
    }

    pub fn is_zero(&self) -> bool {
        self.d_values.iter().all(|v| *v == 0.0)
    }

    /// Largest `noise_i / |D_i|`.
    pub fn relative_noise(&self) -> f64 {
        self.d_values
            .iter()
            .zip(&self.noise)
            .filter(|(d, _)| **d != 0.0)
            .map(|(d, n)| n / d.abs())
            .fold(0.0, f64::max)
    }

    /// Uniform step of the a grid, if any.
    pub fn uniform_step(&self) -> Option<f64> {
        uniform_step(&self.a_grid)
    }
}

fn uniform_step(x: &[f64]) -> Option<f64> {
    if x.len() < 2 {
        return None;
    }
    let h = (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64;
    x.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs().max(1.0)).then_some(h)
}

/// `n` points `start, start + step, ..` up to `stop` (inclusive within rounding).
pub fn uniform_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(stop >= start) {
        return invalid(format!("bad grid [{start}, {stop}] step {step}"));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| start + i as f64 * step).collect())
}

/// Breaks for integrals of `m` on `[0, upper]`, graded towards the `s^{(d+1)/2}` edge at 0.
fn graded_breaks(upper: f64) -> Vec<f64> {
    let mut b = vec![0.0, 1e-6, 1e-4, 1e-3, 1e-2, 0.05, 0.1, 0.25, 0.5];
    let mut x = 1.0;
    while x < upper {
        b.push(x);
        x += 0.5;
    }
    b.push(upper);
    b
}

fn check_rates(profile: &PotentialProfile) -> Result<Vec<(f64, f64)>> {
    let alpha = convergence_abscissa(profile.spec.dim());
    let terms: Vec<(f64, f64)> =
        profile.frozen_terms().iter().map(|(c, p)| (*c, 0.5 * p + 1.0)).collect();
    if let Some((_, b)) = terms.iter().find(|(c, b)| *c != 0.0 && *b <= alpha) {
        return invalid(format!(
            "decay rate {b} of h does not exceed 1 + 1/d = {alpha}; the convolution integral diverges"
        ));
    }
    Ok(terms)
}

/// `D(a)` for every `a` by Gauss-Legendre quadrature in `s = k + a` with an exponential
/// tail beyond `s = S` matched to `m(S)`.
pub fn synthesize_data(
    profile: &PotentialProfile,
    a_grid: &[f64],
    mu: &dyn MuSource,
    exec: Execution,
) -> Result<ConvolutionData> {
    if mu.dim() != profile.spec.dim() {
        return Err(Error::GridMismatch("distribution function dimension".into()));
    }
    if a_grid.is_empty() || a_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("a grid must be nonempty and increasing");
    }
    let terms = check_rates(profile)?;
    let d = mu.dim();
    let alpha = convergence_abscissa(d);
    let upper = 12.0 * d as f64 + 30.0;
    let (nodes, weights) = composite_gauss(&graded_breaks(upper), 16);
    let mvals = exec.map(&nodes, |&s| mu.m(s));
    let c_tail = mu.m(upper) * (-alpha * upper).exp();
    let values = exec.map(a_grid, |&a| {
        let mut acc = 0.0;
        for (c, b) in &terms {
            if *c == 0.0 {
                continue;
            }
            let mut part = 0.0;
            for ((s, w), m) in nodes.iter().zip(&weights).zip(&mvals) {
                part += w * (-b * (s - a)).exp() * m;
            }
            part += c_tail * (b * a - (b - alpha) * upper).exp() / (b - alpha);
            acc += c * b * part;
        }
        acc
    });
    let noise = values.iter().map(|v| EXACT_NOISE_REL * v.abs()).collect();
    ConvolutionData::new(a_grid.to_vec(), values, Provenance::ExactBorn, noise)
}

/// Discretized forward map `h -> D`: `K[i][j] = w_ij m(k_j + a_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    pub a_grid: Vec<f64>,
    pub k_grid: Vec<f64>,
    /// Row-major `a_grid.len() x k_grid.len()`.
    pub entries: Vec<f64>,
    /// Rate of the exponential continuation of `h` beyond `k_max` folded into the last column.
    pub closure_rate: Option<f64>,
}

impl Kernel {
    pub fn rows(&self) -> usize {
        self.a_grid.len()
    }
    pub fn cols(&self) -> usize {
        self.k_grid.len()
    }
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols() + j]
    }
    /// `K h`.
    pub fn apply(&self, h: &[f64]) -> Vec<f64> {
        self.entries.chunks(self.cols()).map(|row| row.iter().zip(h).map(|(a, b)| a * b).sum()).collect()
    }
}

/// Trapezoid weights with Gregory end corrections, in units of the step.
///
/// Exact for quintics once there are at least ten nodes, cubics from six.
fn gregory_weights(n: usize) -> Vec<f64> {
    const END6: [f64; 5] = [95.0 / 288.0, 317.0 / 240.0, 23.0 / 30.0, 793.0 / 720.0, 157.0 / 160.0];
    const END4: [f64; 3] = [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0];
    let mut w = vec![1.0; n];
    let ends: &[f64] = match n {
        0 => return w,
        1 => return vec![0.0],
        2..=5 => &[0.5],
        6..=9 => &END4,
        _ => &END6,
    };
    for (i, e) in ends.iter().enumerate() {
        w[i] = *e;
        w[n - 1 - i] = *e;
    }
    w
}

/// `int_0^inf e^{-r u} m(s0 + u) du`, requiring `r > 1 + 1/d`.
fn closure_integral(mu: &dyn MuSource, s0: f64, r: f64) -> f64 {
    let alpha = convergence_abscissa(mu.dim());
    let upper = 40.0 / (r - alpha).min(1.0);
    let body = integrate(
        |u: f64| (-r * u).exp() * mu.m(s0 + u),
        0.0,
        upper,
        QuadTol { abs: 0.0, rel: 1e-11, max_intervals: 2000 },
    )
    .value;
    let c = mu.m(s0 + upper) * (-alpha * (s0 + upper)).exp();
    body + c * (alpha * s0 - (r - alpha) * upper).exp() / (r - alpha)
}

/// Assembles the forward kernel on a uniform `k_grid`.
///
/// Row `a` integrates over `k >= -a`; when `-a` is a grid node the rule is the
/// Gregory-corrected trapezoid from that node, otherwise a trapezoid with a partial
/// first cell. With `closure_rate = Some(r)`, `h` is continued as
/// `h(k_max) e^{-r (k - k_max)}` and the resulting integral is added to the last column.
pub fn assemble_kernel(
    a_grid: &[f64],
    k_grid: &[f64],
    mu: &dyn MuSource,
    closure_rate: Option<f64>,
    exec: Execution,
) -> Result<Kernel> {
    let dk = uniform_step(k_grid).ok_or_else(|| Error::GridMismatch("k grid must be uniform".into()))?;
    if a_grid.is_empty() || a_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("a grid must be nonempty and increasing");
    }
    let k0 = k_grid[0];
    let kmax = k_grid[k_grid.len() - 1];
    let a_lo = a_grid[0];
    let a_hi = a_grid[a_grid.len() - 1];
    if -a_hi < k0 - 1e-9 || -a_lo > kmax + 1e-9 {
        return Err(Error::GridMismatch(format!(
            "k grid [{k0}, {kmax}] does not cover the lower limits [{}, {}]",
            -a_hi, -a_lo
        )));
    }
    if let Some(r) = closure_rate {
        if !(r > convergence_abscissa(mu.dim())) {
            return invalid(format!("closure rate {r} must exceed 1 + 1/d"));
        }
    }
    let nk = k_grid.len();
    let rows = exec.map(a_grid, |&a| {
        let mut row = vec![0.0; nk];
        let pos = (-a - k0) / dk;
        let j_near = pos.round();
        let aligned = (pos - j_near).abs() < 1e-7;
        let j0 = if aligned { j_near as usize } else { pos.ceil() as usize };
        if j0 < nk {
            let n = nk - j0;
            let w = if aligned { gregory_weights(n) } else { {
                let mut w = vec![1.0; n];
                w[n - 1] = 0.5;
                w[0] = 0.5 + 0.5 * (k_grid[j0] + a) / dk;
                w
            } };
            for (jj, wj) in w.iter().enumerate() {
                let j = j0 + jj;
                row[j] = wj * dk * mu.m(k_grid[j] + a);
            }
            if let Some(r) = closure_rate {
                row[nk - 1] += closure_integral(mu, kmax + a, r);
            }
        }
        row
    });
    Ok(Kernel {
        a_grid: a_grid.to_vec(),
        k_grid: k_grid.to_vec(),
        entries: rows.concat(),
        closure_rate,
    })
}

/// Exponential rate of `D` at small amplitudes: slope of `ln |D|` over the lowest samples.
///
/// For `D(a) = sum_j c_j beta_j M(beta_j) e^{beta_j a}` this approaches the smallest
/// decay rate of `h`.
pub fn estimate_tail_rate(data: &ConvolutionData) -> Option<f64> {
    let n = data.a_grid.len().min(20);
    if n < 3 {
        return None;
    }
    let d = &data.d_values[..n];
    if d.iter().any(|v| *v == 0.0) || d.iter().any(|v| v.signum() != d[0].signum()) {
        return None;
    }
    let ly: Vec<f64> = d.iter().map(|v| v.abs().ln()).collect();
    crate::fit::fit_line(&data.a_grid[..n], &ly).ok().map(|f| f.slope)
}

/// Regularization strength: fixed, or chosen by the discrepancy principle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Regularization {
    Auto,
    Fixed(f64),
}

/// Options of [`recover_h_tikhonov`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TikhonovOptions {
    pub reg: Regularization,
    /// Weight `e^{rate k}` applied to the unknown; `None` estimates it from the data.
    pub weight_rate: Option<f64>,
    /// Distance above `-a_max` where the reported window starts.
    pub window_margin: f64,
}

impl Default for TikhonovOptions {
    fn default() -> Self {
        TikhonovOptions { reg: Regularization::Auto, weight_rate: None, window_margin: 0.5 }
    }
}

/// Which inversion produced a recovery.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecoveryMethod {
    Tikhonov,
    Fourier,
}

/// Recovered `h` with diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct RecoveredPotential {
    pub method: RecoveryMethod,
    pub k_grid: Vec<f64>,
    pub h_hat: Vec<f64>,
    /// `[k_lo, k_hi]` where `h` is determined by the data.
    pub window: (f64, f64),
    /// `||K h - D||_2` (unweighted), when a kernel was used.
    pub residual_norm: Option<f64>,
    /// Root-mean-square of the noise-weighted misfit.
    pub weighted_misfit: Option<f64>,
    pub reg: Option<f64>,
    /// Rate used to continue `h` beyond the grid.
    pub tail_rate: f64,
    /// False when the discrepancy target could not be met within the search range.
    pub discrepancy_met: bool,
}

impl RecoveredPotential {
    /// Linear interpolation of `h_hat`.
    pub fn h_at(&self, k: f64) -> Option<f64> {
        let k0 = self.k_grid[0];
        let n = self.k_grid.len();
        if k < k0 - 1e-9 || k > self.k_grid[n - 1] + 1e-9 {
            return None;
        }
        let j = self.k_grid.partition_point(|x| *x <= k).clamp(1, n - 1);
        let (x0, x1) = (self.k_grid[j - 1], self.k_grid[j]);
        let w = ((k - x0) / (x1 - x0)).clamp(0.0, 1.0);
        Some(self.h_hat[j - 1] * (1.0 - w) + self.h_hat[j] * w)
    }
}

struct TikhonovSystem {
    r: DMatrix<f64>,
    qtb: DVector<f64>,
    /// `||b||^2 - ||Q^T b||^2`, the part of the data outside the range of `A`.
    outside: f64,
    rows: usize,
    n: usize,
}

impl TikhonovSystem {
    fn new(a: DMatrix<f64>, b: DVector<f64>) -> Self {
        let rows = a.nrows();
        let n = a.ncols();
        let (r, qtb) = if rows >= n {
            let qr = a.qr();
            let qtb = qr.q().transpose() * &b;
            (qr.r(), qtb)
        } else {
            // Underdetermined: pad to square so the reduction stays exact.
            let mut padded = DMatrix::zeros(n, n);
            padded.view_mut((0, 0), (rows, n)).copy_from(&a);
            let mut pb = DVector::zeros(n);
            pb.rows_mut(0, rows).copy_from(&b);
            let qr = padded.qr();
            let qtb = qr.q().transpose() * &pb;
            (qr.r(), qtb)
        };
        let outside = (b.norm_squared() - qtb.norm_squared()).max(0.0);
        TikhonovSystem { r, qtb, outside, rows, n }
    }

    /// Minimizer of `||A x - b||^2 + reg ||L x||^2` and its squared misfit.
    fn solve(&self, reg: f64) -> Result<(DVector<f64>, f64)> {
        let n = self.n;
        let mut s = DMatrix::zeros(2 * n - 1, n);
        s.view_mut((0, 0), (n, n)).copy_from(&self.r);
        let sr = reg.sqrt();
        for i in 0..n - 1 {
            s[(n + i, i)] = -sr;
            s[(n + i, i + 1)] = sr;
        }
        let mut rhs = DVector::zeros(2 * n - 1);
        rhs.rows_mut(0, n).copy_from(&self.qtb);
        let qr = s.qr();
        let r = qr.r();
        let diag: Vec<f64> = (0..n).map(|i| r[(i, i)].abs()).collect();
        let dmax = diag.iter().cloned().fold(0.0, f64::max);
        let dmin = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(dmax > 0.0) || dmin <= 1e-14 * dmax {
            return Err(Error::Singular(format!(
                "regularized least-squares system is rank deficient at reg = {reg:.3e}"
            )));
        }
        let qtr = qr.q().transpose() * rhs;
        let x = r
            .solve_upper_triangular(&qtr)
            .ok_or_else(|| Error::Singular("triangular solve failed".into()))?;
        let fit = &self.r * &x - &self.qtb;
        Ok((x, fit.norm_squared() + self.outside))
    }
}

/// Tikhonov inversion in the weighted unknown `phi = e^{rate k} h`, rows scaled by the
/// data noise, first-difference penalty on `phi`.
///
/// `Regularization::Auto` bisects `log10 reg` until the RMS weighted misfit is 1.
pub fn recover_h_tikhonov(
    data: &ConvolutionData,
    kernel: &Kernel,
    opts: TikhonovOptions,
) -> Result<RecoveredPotential> {
    if kernel.a_grid.len() != data.a_grid.len()
        || kernel.a_grid.iter().zip(&data.a_grid).any(|(a, b)| (a - b).abs() > 1e-9)
    {
        return Err(Error::GridMismatch("kernel and data a grids differ".into()));
    }
    if let Regularization::Fixed(r) = opts.reg {
        if !(r >= 0.0) {
            return invalid("regularization must be nonnegative");
        }
    }
    let m = kernel.rows();
    let n = kernel.cols();
    let rate = opts
        .weight_rate
        .or(kernel.closure_rate)
        .or_else(|| estimate_tail_rate(data))
        .unwrap_or(0.0);
    let window = (-data.a_max() + opts.window_margin, kernel.k_grid[n - 1]);
    if data.is_zero() && opts.reg != Regularization::Fixed(0.0) {
        return Ok(RecoveredPotential {
            method: RecoveryMethod::Tikhonov,
            k_grid: kernel.k_grid.clone(),
            h_hat: vec![0.0; n],
            window,
            residual_norm: Some(0.0),
            weighted_misfit: Some(0.0),
            reg: match opts.reg {
                Regularization::Fixed(r) => Some(r),
                Regularization::Auto => None,
            },
            tail_rate: rate,
            discrepancy_met: true,
        });
    }
    // samples reported without noise get the smallest positive level
    let floor = data.noise.iter().cloned().filter(|s| *s > 0.0).fold(f64::INFINITY, f64::min);
    let floor = if floor.is_finite() { floor } else { 1.0 };
    let row_w: Vec<f64> = data.noise.iter().map(|s| 1.0 / s.max(floor)).collect();
    let col_w: Vec<f64> = kernel.k_grid.iter().map(|k| (-rate * k).exp()).collect();
    let a = DMatrix::from_fn(m, n, |i, j| row_w[i] * kernel.get(i, j) * col_w[j]);
    let b = DVector::from_fn(m, |i, _| row_w[i] * data.d_values[i]);
    let scale = a.norm_squared() / n as f64;
    let sys = TikhonovSystem::new(a, b);

    let target = m as f64;
    let (reg, discrepancy_met) = match opts.reg {
        Regularization::Fixed(r) => (r, true),
        Regularization::Auto => {
            // A rank-deficient solve at tiny reg counts as fitting the data exactly.
            let misfit = |t: f64| match sys.solve(10f64.powf(t) * scale) {
                Ok((_, f)) => Ok(f),
                Err(Error::Singular(_)) => Ok(0.0),
                Err(e) => Err(e),
            };
            let mut lo = -20.0f64;
            let mut hi = 5.0f64;
            if misfit(lo)? > target {
                (10f64.powf(lo) * scale, false)
            } else if misfit(hi)? < target {
                (10f64.powf(hi) * scale, false)
            } else {
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if misfit(mid)? > target {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                    if hi - lo < 1e-3 {
                        break;
                    }
                }
                // keep the side of the bracket that solves cleanly
                let r = if sys.solve(10f64.powf(lo) * scale).is_ok() { lo } else { hi };
                (10f64.powf(r) * scale, true)
            }
        }
    };
    let (phi, misfit) = sys.solve(reg)?;
    let h_hat: Vec<f64> = phi.iter().zip(&col_w).map(|(p, w)| p * w).collect();
    let pred = kernel.apply(&h_hat);
    let residual = pred.iter().zip(&data.d_values).map(|(p, d)| (p - d) * (p - d)).sum::<f64>().sqrt();
    let _ = sys.rows;
    Ok(RecoveredPotential {
        method: RecoveryMethod::Tikhonov,
        k_grid: kernel.k_grid.clone(),
        h_hat,
        window,
        residual_norm: Some(residual),
        weighted_misfit: Some((misfit / m as f64).sqrt()),
        reg: Some(reg),
        tail_rate: rate,
        discrepancy_met,
    })
}

/// Frequency cutoff for the Fourier division.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cutoff {
    /// Drop frequencies where `|M(c - i w)|` falls below the relative data noise times `|M(c)|`.
    Auto,
    /// Keep `|w| <= value` (smooth roll-off over the last fifth).
    Frequency(f64),
}

/// Options of [`recover_h_fourier`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FourierOptions {
    /// Vertical line `Re z = c`, inside `(1 + 1/d, 1 + 2/d)`.
    pub c: f64,
    pub cutoff: Cutoff,
    /// Largest `k` reported.
    pub k_max: f64,
    pub window_margin: f64,
    /// Degree of the polynomial continuation below `l = 0`.
    pub edge_degree: usize,
    /// Samples used to fit the exponential tail.
    pub tail_samples: usize,
    pub min_fft_len: usize,
}

impl FourierOptions {
    pub fn new(d: usize) -> Self {
        FourierOptions {
            c: 1.0 + 1.5 / d as f64,
            cutoff: Cutoff::Auto,
            k_max: 8.0,
            window_margin: 0.5,
            edge_degree: 8,
            tail_samples: 40,
            min_fft_len: 1 << 13,
        }
    }
}

/// `C^inf` step: 0 for `x <= 0`, 1 for `x >= 1`.
fn smooth_step(x: f64) -> f64 {
    let f = |y: f64| if y > 0.0 { (-1.0 / y).exp() } else { 0.0 };
    let x = x.clamp(0.0, 1.0);
    let a = f(x);
    let b = f(1.0 - x);
    if a + b == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

/// Least-squares polynomial coefficients (ascending) through `(x_i, y_i)`.
fn poly_fit(x: &[f64], y: &[f64], degree: usize) -> Vec<f64> {
    let v = DMatrix::from_fn(x.len(), degree + 1, |i, j| x[i].powi(j as i32));
    let b = DVector::from_column_slice(y);
    let svd = v.svd(true, true);
    svd.solve(&b, 1e-14).map(|c| c.iter().cloned().collect()).unwrap_or_else(|_| vec![0.0; degree + 1])
}

/// Sum of exponentials fitted to the last samples of a uniformly sampled decaying sequence.
///
/// Tries a two-term Prony fit and falls back to one exponential when the fitted
/// ratios are not real and in `(0, 1)`.
fn exponential_tail(y: &[f64]) -> Vec<(f64, f64)> {
    let n = y.len();
    if n < 4 || y.iter().all(|v| *v == 0.0) {
        return Vec::new();
    }
    // y[k+2] = p1 y[k+1] + p0 y[k]
    let (mut s11, mut s12, mut s22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for k in 0..n - 2 {
        let (u, v, w) = (y[k + 1], y[k], y[k + 2]);
        s11 += u * u;
        s12 += u * v;
        s22 += v * v;
        r1 += u * w;
        r2 += v * w;
    }
    let det = s11 * s22 - s12 * s12;
    if det.abs() > 1e-300 * s11 * s22 {
        let p1 = (r1 * s22 - r2 * s12) / det;
        let p0 = (s11 * r2 - s12 * r1) / det;
        let disc = p1 * p1 + 4.0 * p0;
        if disc > 0.0 {
            let z1 = 0.5 * (p1 + disc.sqrt());
            let z2 = 0.5 * (p1 - disc.sqrt());
            let ok = |z: f64| z > 0.0 && z < 1.0;
            if ok(z1) && ok(z2) && (z1 - z2).abs() > 1e-8 {
                // amplitudes relative to the last sample
                let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for (k, yk) in y.iter().enumerate() {
                    let e = k as f64 - (n - 1) as f64;
                    let (v1, v2) = (z1.powf(e), z2.powf(e));
                    a11 += v1 * v1;
                    a12 += v1 * v2;
                    a22 += v2 * v2;
                    b1 += v1 * yk;
                    b2 += v2 * yk;
                }
                let det = a11 * a22 - a12 * a12;
                if det.abs() > 0.0 {
                    let c1 = (b1 * a22 - b2 * a12) / det;
                    let c2 = (a11 * b2 - a12 * b1) / det;
                    return vec![(c1, z1), (c2, z2)];
                }
            }
        }
    }
    if y.iter().all(|v| *v > 0.0) {
        let x: Vec<f64> = (0..n).map(|k| k as f64 - (n - 1) as f64).collect();
        let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
        if let Ok(f) = crate::fit::fit_line(&x, &ly) {
            let z = f.slope.exp();
            if z < 1.0 {
                return vec![(f.intercept.exp(), z)];
            }
        }
    }
    vec![(y[n - 1], 0.0)]
}

/// Inversion by division on the line `Re z = c`.
///
/// With `R(l) = e^{-c a} D(a)`, `l = a_max - a`, and `psi(u) = e^{c(u - a_max)} h(u - a_max)`,
/// the identity reads `R = psi * v` with `v(w) = e^{-c w} m(w)` supported on `w >= 0`, whose
/// Fourier transform is `M(c - i omega)`. Because `1/M(c - i omega)` is outer, values of `R`
/// for `l < 0` do not affect `psi` on `u >= 0`; they are filled by a tapered polynomial
/// continuation. Beyond the last sample `R` is continued by a fitted sum of exponentials.
pub fn recover_h_fourier(data: &ConvolutionData, dim: usize, opts: FourierOptions) -> Result<RecoveredPotential> {
    let lo = convergence_abscissa(dim);
    let hi = 1.0 + 2.0 / dim as f64;
    if !(opts.c > lo && opts.c < hi) {
        return invalid(format!("line abscissa c = {} outside ({lo}, {hi})", opts.c));
    }
    let step = data.uniform_step().ok_or_else(|| Error::GridMismatch("Fourier route needs a uniform a grid".into()))?;
    let a_max = data.a_max();
    let nl = data.a_grid.len();
    let nk_out = ((opts.k_max + a_max) / step + 1e-9).floor() as usize + 1;
    let window = (-a_max + opts.window_margin, opts.k_max);
    let k_grid: Vec<f64> = (0..nk_out).map(|j| -a_max + j as f64 * step).collect();
    let tail_rate = estimate_tail_rate(data).unwrap_or(hi);
    if data.is_zero() {
        return Ok(RecoveredPotential {
            method: RecoveryMethod::Fourier,
            k_grid,
            h_hat: vec![0.0; nk_out],
            window,
            residual_norm: None,
            weighted_misfit: None,
            reg: None,
            tail_rate,
            discrepancy_met: true,
        });
    }
    let nfft = (4 * nl.max(nk_out)).next_power_of_two().max(opts.min_fft_len);
    let npos = nfft / 2;
    let r: Vec<f64> = (0..nl)
        .map(|n| {
            let i = nl - 1 - n;
            (-opts.c * data.a_grid[i]).exp() * data.d_values[i]
        })
        .collect();
    let mut full = vec![Complex64::new(0.0, 0.0); nfft];
    for (n, v) in r.iter().enumerate() {
        full[n] = Complex64::new(*v, 0.0);
    }
    let nt = opts.tail_samples.min(nl / 2).max(4).min(nl);
    let tail = exponential_tail(&r[nl - nt..]);
    for (n, slot) in full.iter_mut().enumerate().take(npos).skip(nl) {
        let e = (n - (nl - 1)) as f64;
        let v: f64 = tail.iter().map(|(c, z)| if *z > 0.0 { c * z.powf(e) } else { 0.0 }).sum();
        *slot = Complex64::new(v, 0.0);
    }
    let q = opts.edge_degree.min(nl - 1);
    let xs: Vec<f64> = (0..=q).map(|n| n as f64 * step).collect();
    let coef = poly_fit(&xs, &r[..=q], q);
    for m in 1..=(nfft - npos) {
        let l = -(m as f64) * step;
        let taper = 1.0 - smooth_step((-l - 0.5) / 1.5);
        let poly: f64 = coef.iter().rev().fold(0.0, |acc, c| acc * l + c);
        full[nfft - m] = Complex64::new(poly * taper, 0.0);
    }
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(nfft).process(&mut full);
    let m_c = m_closed(dim, Complex64::new(opts.c, 0.0))?.norm();
    let noise_floor = data.relative_noise() * m_c;
    for (j, v) in full.iter_mut().enumerate() {
        let f = if j < nfft / 2 { j as f64 } else { j as f64 - nfft as f64 };
        let omega = 2.0 * std::f64::consts::PI * f / (nfft as f64 * step);
        let sym = m_closed(dim, Complex64::new(opts.c, -omega))?;
        let keep = match opts.cutoff {
            Cutoff::Auto => {
                if noise_floor > 0.0 {
                    smooth_step((sym.norm() / noise_floor).ln() / 2f64.ln())
                } else {
                    1.0
                }
            }
            Cutoff::Frequency(wc) => 1.0 - smooth_step((omega.abs() - 0.8 * wc) / (0.2 * wc)),
        };
        *v = if keep > 0.0 { *v / sym * keep } else { Complex64::new(0.0, 0.0) };
    }
    planner.plan_fft_inverse(nfft).process(&mut full);
    let h_hat: Vec<f64> = k_grid
        .iter()
        .enumerate()
        .map(|(j, k)| full[j].re / nfft as f64 * (-opts.c * k).exp())
        .collect();
    Ok(RecoveredPotential {
        method: RecoveryMethod::Fourier,
        k_grid,
        h_hat,
        window,
        residual_norm: None,
        weighted_misfit: None,
        reg: None,
        tail_rate,
        discrepancy_met: true,
    })
}

/// `g` on a lambda grid and the matching nonlinearity coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct Reconstruction {
    pub lambdas: Vec<f64>,
    pub g: Vec<f64>,
}

impl Reconstruction {
    /// `F(u) = (g(|u|^2) / |u|^2) u` at the tabulated `|u|^2 = lambda_i` (zero at `u = 0`).
    pub fn eval_f(&self, index: usize, u: Complex64) -> Complex64 {
        let lam = self.lambdas[index];
        if lam == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        u * (self.g[index] / lam)
    }
}

/// `g(lambda) = int_{-ln lambda}^inf h(k) dk` by the trapezoid rule on the recovery grid,
/// with `h` continued as `h(k_max) e^{-rate (k - k_max)}`.
pub fn reconstruct_g(recovered: &RecoveredPotential, lambdas: &[f64]) -> Result<Reconstruction> {
    let k = &recovered.k_grid;
    let h = &recovered.h_hat;
    let n = k.len();
    let kmax = k[n - 1];
    let (klo, _) = recovered.window;
    let rate = recovered.tail_rate;
    let tail0 = if rate > 0.0 { h[n - 1] / rate } else { 0.0 };
    // upper[j] = int_{k_j}^{k_max} h
    let mut upper = vec![0.0; n];
    for j in (0..n - 1).rev() {
        upper[j] = upper[j + 1] + 0.5 * (k[j + 1] - k[j]) * (h[j] + h[j + 1]);
    }
    let mut g = Vec::with_capacity(lambdas.len());
    for &lam in lambdas {
        if lam == 0.0 {
            g.push(0.0);
            continue;
        }
        if !(lam > 0.0) {
            return invalid(format!("lambda must be nonnegative, got {lam}"));
        }
        let kk = -lam.ln();
        if kk < klo - 1e-9 {
            return invalid(format!("lambda = {lam} is above the probed range (k = {kk} < {klo})"));
        }
        if kk > kmax + 1e-9 {
            // beyond the grid only the continued tail remains
            g.push(tail0 * (-rate * (kk - kmax)).exp());
            continue;
        }
        let j = k.partition_point(|x| *x <= kk).clamp(1, n - 1);
        let w = (kk - k[j - 1]) / (k[j] - k[j - 1]);
        let hk = h[j - 1] * (1.0 - w) + h[j] * w;
        let part = 0.5 * (k[j] - kk) * (hk + h[j]);
        g.push(upper[j] + part + tail0);
    }
    Ok(Reconstruction { lambdas: lambdas.to_vec(), g })
}

/// Leading exponent `p = 2(beta - 1)` from the log-slope `-beta` of `h_hat` over `[k_lo, k_hi]`.
pub fn fit_leading_exponent(recovered: &RecoveredPotential, k_lo: f64, k_hi: f64) -> Result<crate::fit::LineFit> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (k, h) in recovered.k_grid.iter().zip(&recovered.h_hat) {
        if *k >= k_lo - 1e-9 && *k <= k_hi + 1e-9 {
            if !(*h > 0.0) {
                return invalid(format!("recovered h is not positive at k = {k}"));
            }
            x.push(*k);
            y.push(h.ln());
        }
    }
    let f = crate::fit::fit_line(&x, &y)?;
    Ok(crate::fit::LineFit {
        slope: 2.0 * (-f.slope - 1.0),
        intercept: f.intercept,
        slope_stderr: 2.0 * f.slope_stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mu::MuExact;
    use crate::nonlinearity::{NonlinearitySpec, PowerTerm};

    fn profile(terms: &[(f64, f64)]) -> PotentialProfile {
        let t = terms.iter().map(|(p, c)| PowerTerm::constant(*p, *c)).collect();
        PotentialProfile::new(NonlinearitySpec::new(1, t).unwrap(), 0.0, vec![0.0]).unwrap()
    }

    #[test]
    fn synthesized_matches_closed_form() {
        let a = [-2.0, 0.0, 1.0];
        let data = synthesize_data(&profile(&[(4.0, 1.0)]), &a, &MuExact { d: 1 }, Execution::default()).unwrap();
        let m3 = m_closed(1, Complex64::new(3.0, 0.0)).unwrap().re;
        for (ai, di) in a.iter().zip(&data.d_values) {
            let exact = (3.0 * ai).exp() * 3.0 * m3;
            assert!((di / exact - 1.0).abs() < 1e-9, "{di} {exact}");
        }
    }

    #[test]
    fn zero_profile_gives_zero() {
        let data = synthesize_data(&profile(&[(4.0, 0.0)]), &[0.0, 1.0], &MuExact { d: 1 }, Execution::default()).unwrap();
        assert!(data.is_zero());
    }

    #[test]
    fn reconstruct_exact_h() {
        let k = uniform_grid(-2.0, 8.0, 0.01).unwrap();
        let h: Vec<f64> = k.iter().map(|k| 3.0 * (-3.0 * k).exp()).collect();
        let rec = RecoveredPotential {
            method: RecoveryMethod::Tikhonov,
            k_grid: k,
            h_hat: h,
            window: (-1.5, 8.0),
            residual_norm: None,
            weighted_misfit: None,
            reg: None,
            tail_rate: 3.0,
            discrepancy_met: true,
        };
        let r = reconstruct_g(&rec, &[0.0, 0.5, 1e-4]).unwrap();
        assert_eq!(r.g[0], 0.0);
        assert!((r.g[1] - 0.125).abs() < 1e-4);
        assert!((r.g[2] / 1e-12 - 1.0).abs() < 1e-3);
        assert!(reconstruct_g(&rec, &[10.0]).is_err());
    }

    #[test]
    fn gregory_integrates_polynomials() {
        for (n, deg) in [(8, 3), (21, 5)] {
            let w = gregory_weights(n);
            let h = 0.1;
            let len = (n - 1) as f64 * h;
            let s: f64 = (0..n).map(|i| w[i] * h * (i as f64 * h).powi(deg)).sum();
            assert!((s - len.powi(deg + 1) / (deg + 1) as f64).abs() < 1e-12, "{n} {deg}");
        }
    }

    #[test]
    fn prony_recovers_two_rates() {
        let y: Vec<f64> = (0..40).map(|k| 2.0 * 0.9f64.powi(k) + 0.5 * 0.7f64.powi(k)).collect();
        let t = exponential_tail(&y);
        assert_eq!(t.len(), 2);
        let next: f64 = t.iter().map(|(c, z)| c * z.powi(1)).sum();
        let exact = 2.0 * 0.9f64.powi(40) + 0.5 * 0.7f64.powi(40);
        assert!((next / exact - 1.0).abs() < 1e-8);
    }
}
