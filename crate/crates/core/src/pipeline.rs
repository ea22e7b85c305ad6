//! Scattering to nonlinearity, end to end: concentrated readouts of the simulated
//! scattering map at `(t0, x0)` over a range of amplitudes, then deconvolution.

use crate::born::{localized_readout, ScanConfig};
use crate::deconvolve::{
    assemble_kernel, estimate_tail_rate, fit_leading_exponent, recover_h_tikhonov, synthesize_data,
    uniform_grid, ConvolutionData, Provenance, RecoveredPotential, TikhonovOptions, EXACT_NOISE_REL,
};
use crate::error::{invalid, Result};
use crate::exec::Execution;
use crate::fit::LineFit;
use crate::mu::{MuExact, MuSource};
use crate::nonlinearity::{NonlinearitySpec, PotentialProfile};
use std::time::{Duration, Instant};

/// Inputs of [`run_pipeline`].
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub spec: NonlinearitySpec,
    pub t0: f64,
    pub x0: Vec<f64>,
    pub sigma: f64,
    /// Log-amplitudes `a` probed, each readout uses intensity `e^a`.
    pub a_grid: Vec<f64>,
    pub k_step: f64,
    pub k_span: f64,
    pub scan: ScanConfig,
    pub tikhonov: TikhonovOptions,
    /// `[k_lo, k_hi]` of the exponent fit.
    pub fit_window: (f64, f64),
}

impl PipelineConfig {
    /// One-dimensional defaults for a given nonlinearity.
    pub fn new(spec: NonlinearitySpec) -> Result<Self> {
        let d = spec.dim();
        Ok(PipelineConfig {
            spec,
            t0: 0.0,
            x0: vec![0.0; d],
            sigma: 0.3,
            a_grid: uniform_grid(-4.5, -1.25, 0.05)?,
            k_step: 0.05,
            k_span: 10.5,
            scan: ScanConfig::default(),
            tikhonov: TikhonovOptions::default(),
            fit_window: (1.75, 4.5),
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.scan.validate()?;
        if self.x0.len() != self.spec.dim() {
            return invalid("readout point dimension differs from the nonlinearity");
        }
        if !(self.sigma > 0.0) || !(self.k_step > 0.0) || !(self.k_span > 0.0) {
            return invalid("sigma, k step and k span must be positive");
        }
        if self.a_grid.len() < 3 || self.a_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("pipeline needs an increasing a grid with at least three points");
        }
        if !(self.fit_window.0 < self.fit_window.1) {
            return invalid("exponent fit window is empty");
        }
        Ok(())
    }

    fn k_grid(&self) -> Result<Vec<f64>> {
        let a_max = self.a_grid[self.a_grid.len() - 1];
        uniform_grid(-a_max, -a_max + self.k_span, self.k_step)
    }
}

/// Results of one pipeline run.
#[derive(Clone, Debug)]
pub struct PipelineReport {
    /// Simulated readouts with noise estimated from a sigma-halving comparison.
    pub data: ConvolutionData,
    /// Exact `D(a)` of the frozen profile on the same grid.
    pub exact: ConvolutionData,
    pub noise_rel: f64,
    pub recovered: RecoveredPotential,
    /// Fit of `p = 2 (beta - 1)` from the log-slope of the recovered `h`.
    pub exponent: LineFit,
    pub profile: PotentialProfile,
    pub timings: Vec<(&'static str, Duration)>,
}

/// Simulated `D(a) = Re pairing / sigma^{d+2}` at each amplitude `e^a`.
pub fn readout_curve(
    spec: &NonlinearitySpec,
    t0: f64,
    x0: &[f64],
    sigma: f64,
    a_grid: &[f64],
    scan: &ScanConfig,
    exec: Execution,
) -> Result<Vec<f64>> {
    exec.map(a_grid, |&a| localized_readout(spec, t0, x0, a.exp(), sigma, scan))
        .into_iter()
        .collect()
}

/// Relative noise of the readouts from `|R(sigma) - R(sigma/2)| / |R(sigma/2)|` at the
/// largest amplitude, floored at the exact-data level.
pub fn estimate_readout_noise(
    spec: &NonlinearitySpec,
    t0: f64,
    x0: &[f64],
    sigma: f64,
    a_top: f64,
    coarse: f64,
    scan: &ScanConfig,
) -> Result<f64> {
    let fine = localized_readout(spec, t0, x0, a_top.exp(), 0.5 * sigma, scan)?;
    if fine == 0.0 {
        return Ok(EXACT_NOISE_REL);
    }
    Ok(((coarse - fine) / fine).abs().max(EXACT_NOISE_REL))
}

/// Readouts, noise estimate, Tikhonov recovery and exponent fit.
pub fn run_pipeline(cfg: &PipelineConfig, exec: Execution) -> Result<PipelineReport> {
    cfg.validate()?;
    let mut timings = Vec::new();
    let profile = PotentialProfile::new(cfg.spec.clone(), cfg.t0, cfg.x0.clone())?;
    let mu = MuExact { d: cfg.spec.dim() };

    let clock = Instant::now();
    let values = readout_curve(&cfg.spec, cfg.t0, &cfg.x0, cfg.sigma, &cfg.a_grid, &cfg.scan, exec)?;
    let top = cfg.a_grid.len() - 1;
    let noise_rel =
        estimate_readout_noise(&cfg.spec, cfg.t0, &cfg.x0, cfg.sigma, cfg.a_grid[top], values[top], &cfg.scan)?;
    let noise = values.iter().map(|v| noise_rel * v.abs()).collect();
    let data = ConvolutionData::new(cfg.a_grid.clone(), values, Provenance::SimulatedScattering, noise)?;
    timings.push(("readout", clock.elapsed()));

    let clock = Instant::now();
    let exact = synthesize_data(&profile, &cfg.a_grid, &mu, exec)?;
    timings.push(("synthesize", clock.elapsed()));

    let clock = Instant::now();
    let rate = estimate_tail_rate(&data).filter(|r| *r > crate::laplace::convergence_abscissa(mu.dim()));
    let kernel = assemble_kernel(&cfg.a_grid, &cfg.k_grid()?, &mu, rate, exec)?;
    timings.push(("kernel", clock.elapsed()));

    let clock = Instant::now();
    let recovered = recover_h_tikhonov(&data, &kernel, cfg.tikhonov)?;
    let exponent = fit_leading_exponent(&recovered, cfg.fit_window.0, cfg.fit_window.1)?;
    timings.push(("recover", clock.elapsed()));

    Ok(PipelineReport { data, exact, noise_rel, recovered, exponent, profile, timings })
}

/// `|D_1(a) - D_2(a)| / |D_1(a)|` of two profiles' exact convolution values.
pub fn separation_at(a: f64, first: &PotentialProfile, second: &PotentialProfile, mu: &dyn MuSource) -> Result<f64> {
    let e = Execution::Sequential;
    let d1 = synthesize_data(first, &[a], mu, e)?.d_values[0];
    let d2 = synthesize_data(second, &[a], mu, e)?.d_values[0];
    if d1 == 0.0 {
        return invalid("reference profile has a vanishing convolution value");
    }
    Ok(((d1 - d2) / d1).abs())
}
