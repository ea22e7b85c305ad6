//! Subcommand bodies. Each one reads a validated [`Experiment`] and writes CSVs.

use crate::config::{AutoOr, Experiment};
use crate::output::{Cell, RunOutput};
use num_complex::Complex64;
use scatinv_core::born::{born_concentrated, sigma_scan, ConcentratedData};
use scatinv_core::deconvolve::{
    assemble_kernel, estimate_tail_rate, reconstruct_g, recover_h_fourier, recover_h_tikhonov, synthesize_data,
    uniform_grid, ConvolutionData, Cutoff, FourierOptions, Provenance, RecoveredPotential, Regularization,
    TikhonovOptions,
};
use scatinv_core::fit::fit_loglog;
use scatinv_core::grid::{sample_gaussian, Field};
use scatinv_core::laplace::{check_bounds, convergence_abscissa, m_closed, m_quadrature, outer_criterion};
use scatinv_core::laplace::LineIntegralOptions;
use scatinv_core::mu::{default_lambda_grid, mu_monte_carlo, mu_quadrature, MuExact, MuTable};
use scatinv_core::nonlinearity::{NonlinearitySpec, PotentialProfile};
use scatinv_core::pipeline::{run_pipeline, separation_at, PipelineConfig};
use scatinv_core::propagator::{free_propagate, gaussian_exact};
use scatinv_core::solver::{evolve_endpoint, scattering_map};
use scatinv_core::{Error, Execution};
use std::path::Path;
use std::time::Instant;

/// Why a run stopped.
#[derive(Debug)]
pub enum Failure {
    /// Bad config or input data (exit 2).
    Invalid(Vec<String>),
    /// A numerical stage aborted (exit 3).
    Numerical { stage: &'static str, error: Error },
    /// File system trouble (exit 1).
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Invalid(_) => 2,
            Failure::Numerical { .. } => 3,
            Failure::Io(_) => 1,
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

trait Stage<T> {
    fn at(self, stage: &'static str) -> Result<T, Failure>;
}

impl<T> Stage<T> for scatinv_core::Result<T> {
    fn at(self, stage: &'static str) -> Result<T, Failure> {
        self.map_err(|error| Failure::Numerical { stage, error })
    }
}

type Outcome = Result<(), Failure>;

fn timed<T>(out: &mut RunOutput, stage: &str, f: impl FnOnce() -> T) -> T {
    let clock = Instant::now();
    let r = f();
    out.time(stage, clock.elapsed());
    r
}

fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![hi];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (b + (a - b) * i as f64 / (n - 1) as f64).exp()).collect()
}

pub fn propagate(exp: &Experiment, out: &mut RunOutput, exec: Execution) -> Outcome {
    let grid = &exp.grid;
    let d = grid.dim();
    let psi = sample_gaussian(grid);
    let m0 = psi.mass();
    let edge = vec![grid.half_extent(); d];
    let times = &exp.cfg.propagate.times;
    let rows = timed(out, "propagate", || {
        exec.map(times, |&t| -> scatinv_core::Result<Vec<Cell>> {
            let flowed = free_propagate(&psi, t);
            let exact = Field::from_fn(grid, |x| gaussian_exact(d, t, x));
            let err = flowed.max_abs_diff(&exact)?;
            let mass = (flowed.mass() / m0 - 1.0).abs();
            let boundary = gaussian_exact(d, t, &edge).norm();
            Ok(vec![t.into(), err.into(), mass.into(), boundary.into()])
        })
    });
    let rows = rows.into_iter().collect::<scatinv_core::Result<Vec<_>>>().at("propagate")?;
    out.csv("propagate_oracle.csv", &["t", "max_abs_error", "mass_rel_error", "boundary_modulus"], &rows)?;
    Ok(())
}

pub fn scatter(exp: &Experiment, out: &mut RunOutput, exec: Execution) -> Outcome {
    let cfg = &exp.scattering;
    let sc = &exp.cfg.scattering;
    let spec = &exp.spec;
    let psi = sample_gaussian(&cfg.grid);
    let amps = &sc.amplitudes;
    let devs = timed(out, "amplitude_scan", || {
        exec.map(amps, |&e| -> scatinv_core::Result<f64> {
            let phi = psi.scaled(Complex64::new(e, 0.0));
            Ok(scattering_map(spec, &phi, cfg)?.sub(&phi)?.mass().sqrt())
        })
    });
    let devs = devs.into_iter().collect::<scatinv_core::Result<Vec<_>>>().at("amplitude_scan")?;
    let slope = if devs.iter().all(|v| *v > 0.0) { fit_loglog(amps, &devs).ok().map(|f| f.slope) } else { None };

    let top = amps.iter().cloned().fold(0.0, f64::max);
    let phi = psi.scaled(Complex64::new(top, 0.0));
    let clock = Instant::now();
    let free = NonlinearitySpec::free(spec.dim());
    let identity = scattering_map(&free, &phi, cfg).at("free_identity")?.max_abs_diff(&phi).at("free_identity")?;
    let rot = Complex64::from_polar(1.0, sc.gauge_theta);
    let a = scattering_map(spec, &phi, cfg).at("gauge")?.scaled(rot);
    let b = scattering_map(spec, &phi.scaled(rot), cfg).at("gauge")?;
    let gauge = a.max_abs_diff(&b).at("gauge")?;
    let start = free_propagate(&phi, -cfg.horizon);
    let end = evolve_endpoint(spec, &start, -cfg.horizon, cfg.horizon, cfg.dt).at("mass")?;
    let drift = (end.mass() / start.mass() - 1.0).abs();
    out.time("checks", clock.elapsed());

    let rows: Vec<Vec<Cell>> = amps.iter().zip(&devs).map(|(e, v)| vec![(*e).into(), (*v).into()]).collect();
    out.csv("scatter_amplitude.csv", &["epsilon", "deviation_norm"], &rows)?;
    out.summary(
        "scatter_checks.csv",
        &[
            ("free_identity_max_error", identity.into()),
            ("gauge_max_error", gauge.into()),
            ("amplitude_slope", slope.into()),
            ("expected_slope", (spec.terms().iter().map(|t| t.p).fold(f64::INFINITY, f64::min) + 1.0).into()),
            ("mass_rel_drift", drift.into()),
        ],
    )?;
    Ok(())
}

pub fn born(exp: &Experiment, out: &mut RunOutput, exec: Execution) -> Outcome {
    let b = &exp.cfg.born;
    let d = exp.spec.dim();
    let rep = timed(out, "sigma_scan", || sigma_scan(&exp.spec, b.t0, &b.x0, b.amplitude, &b.sigmas, &exp.scan, exec))
        .at("sigma_scan")?;
    let rows: Vec<Vec<Cell>> = rep
        .rows
        .iter()
        .map(|r| {
            vec![
                r.sigma.into(),
                r.pairing.re.into(),
                r.pairing.im.into(),
                r.born.into(),
                r.residual.into(),
                r.born_scaled(d).into(),
            ]
        })
        .collect();
    out.csv(
        "sigma_scan.csv",
        &["sigma", "pairing_re", "pairing_im", "born", "residual", "born_over_sigma_d2"],
        &rows,
    )?;
    let scaled: Vec<f64> = rep.rows.iter().map(|r| r.born_scaled(d)).collect();
    let spread = scaled.iter().map(|s| (s / scaled[0] - 1.0).abs()).fold(0.0, f64::max);
    out.summary(
        "born_summary.csv",
        &[
            ("born_slope", rep.born_slope.map(|f| f.slope).into()),
            ("residual_slope", rep.residual_slope.map(|f| f.slope).into()),
            ("residual_slope_stderr", rep.residual_slope.map(|f| f.slope_stderr).into()),
            ("residual_inversions", rep.residual_inversions.into()),
            ("born_scaled_rel_spread", spread.into()),
        ],
    )?;
    Ok(())
}

pub fn mu(exp: &Experiment, out: &mut RunOutput, exec: Execution) -> Outcome {
    let m = &exp.cfg.mu;
    let d = exp.spec.dim();
    let lambdas = default_lambda_grid(m.points, m.lambda_min);
    let table = timed(out, "table", || MuTable::quadrature(d, &lambdas, exec)).at("mu_table")?;
    let rows: Vec<Vec<Cell>> =
        table.lambdas.iter().zip(&table.values).map(|(l, v)| vec![(*l).into(), (*v).into()]).collect();
    out.csv("mu_table.csv", &["lambda", "mu"], &rows)?;
    let zero_rows = table.lambdas.iter().zip(&table.values).filter(|(l, v)| **l >= 1.0 && **v == 0.0).count();
    let above = table.lambdas.iter().filter(|l| **l >= 1.0).count();

    let mut max_z: Option<f64> = None;
    if m.mc_samples > 0 {
        let probe = log_spaced(m.mc_lambda_min, m.mc_lambda_max, m.mc_points);
        let clock = Instant::now();
        let mut rows = Vec::with_capacity(probe.len());
        for (i, &l) in probe.iter().enumerate() {
            let seed = exp.cfg.seed.wrapping_add(i as u64);
            let (est, se) = mu_monte_carlo(d, l, m.mc_samples, seed, exec).at("mu_monte_carlo")?;
            let q = mu_quadrature(d, l).at("mu_quadrature")?;
            let z = if se > 0.0 { (est - q) / se } else { 0.0 };
            max_z = Some(max_z.unwrap_or(0.0).max(z.abs()));
            rows.push(vec![l.into(), q.into(), est.into(), se.into(), z.into()]);
        }
        out.time("monte_carlo", clock.elapsed());
        out.csv("mu_monte_carlo.csv", &["lambda", "mu_quadrature", "mu_monte_carlo", "stderr", "z_score"], &rows)?;
    }
    out.summary(
        "mu_summary.csv",
        &[
            ("rows", table.lambdas.len().into()),
            ("rows_at_or_above_one", above.into()),
            ("zero_rows_at_or_above_one", zero_rows.into()),
            ("monotone", table.is_monotone().into()),
            ("max_abs_z_score", max_z.into()),
        ],
    )?;
    Ok(())
}

pub fn laplace(exp: &Experiment, out: &mut RunOutput, exec: Execution) -> Outcome {
    let l = &exp.cfg.laplace;
    let d = exp.spec.dim();
    let mut zs = Vec::new();
    for &re in &l.bounds_re {
        for &im in &l.bounds_im {
            zs.push(Complex64::new(re, im));
        }
    }
    let bounds = timed(out, "bounds", || check_bounds(d, &zs)).at("bounds")?;
    let rows: Vec<Vec<Cell>> = bounds
        .rows
        .iter()
        .map(|r| vec![r.z.re.into(), r.z.im.into(), r.abs_m.into(), r.weighted.into()])
        .collect();
    out.csv("laplace_bounds.csv", &["re_z", "im_z", "abs_M", "weighted_ratio"], &rows)?;

    let mu = MuExact { d };
    let cross = timed(out, "crosscheck", || {
        exec.map(&zs, |&z| -> scatinv_core::Result<(Complex64, Complex64)> { Ok((m_closed(d, z)?, m_quadrature(z, &mu)?)) })
    });
    let cross = cross.into_iter().collect::<scatinv_core::Result<Vec<_>>>().at("crosscheck")?;
    let mut max_cross: f64 = 0.0;
    let rows: Vec<Vec<Cell>> = zs
        .iter()
        .zip(&cross)
        .map(|(z, (c, q))| {
            let rel = ((q - c) / c).norm();
            max_cross = max_cross.max(rel);
            vec![z.re.into(), z.im.into(), c.re.into(), c.im.into(), q.re.into(), q.im.into(), rel.into()]
        })
        .collect();
    out.csv(
        "laplace_crosscheck.csv",
        &["re_z", "im_z", "closed_re", "closed_im", "quadrature_re", "quadrature_im", "rel_error"],
        &rows,
    )?;

    // z M(z) against the space-time integral of |e^{it Laplacian} psi|^{2z}
    let clock = Instant::now();
    let unit = ConcentratedData::new(0.0, vec![0.0; d], 1.0, 1.0).at("identity")?;
    let mut max_identity: f64 = 0.0;
    let mut rows = Vec::new();
    for &z in &l.identity_points {
        let spec = NonlinearitySpec::pure_power(d, 2.0 * (z - 1.0)).at("identity")?;
        let integral = born_concentrated(&spec, &unit).at("identity")?;
        let zm = z * m_closed(d, Complex64::new(z, 0.0)).at("identity")?.re;
        let rel = ((zm - integral) / integral).abs();
        max_identity = max_identity.max(rel);
        rows.push(vec![z.into(), zm.into(), integral.into(), rel.into()]);
    }
    out.time("identity", clock.elapsed());
    out.csv("laplace_identity.csv", &["z", "z_times_M", "spacetime_integral", "rel_error"], &rows)?;

    let opts = LineIntegralOptions::default();
    let outer = timed(out, "outer", || outer_criterion(d, l.outer_c, l.outer_n, &l.outer_x, opts, exec)).at("outer")?;
    let rows: Vec<Vec<Cell>> = outer
        .rows
        .iter()
        .map(|r| {
            vec![
                r.x.into(),
                r.modulus.value.into(),
                r.modulus.stable.into(),
                r.weighted_inverse.value.into(),
                r.weighted_inverse.stable.into(),
            ]
        })
        .collect();
    out.csv(
        "laplace_outer.csv",
        &["x", "modulus_integral", "modulus_stable", "weighted_inverse_integral", "weighted_inverse_stable"],
        &rows,
    )?;
    out.summary(
        "laplace_summary.csv",
        &[
            ("bounds_ratio", bounds.ratio().into()),
            ("bounds_pass", bounds.pass.into()),
            ("max_crosscheck_rel_error", max_cross.into()),
            ("max_identity_rel_error", max_identity.into()),
            ("outer_weight_condition", outer.weight_condition.into()),
            ("outer_pass", outer.pass.into()),
        ],
    )?;
    Ok(())
}

fn profile(exp: &Experiment) -> Result<PotentialProfile, Failure> {
    let b = &exp.cfg.born;
    PotentialProfile::new(exp.spec.clone(), b.t0, b.x0.clone()).at("profile")
}

fn exact_data(exp: &Experiment, out: &mut RunOutput, exec: Execution) -> Result<ConvolutionData, Failure> {
    let dc = &exp.cfg.deconvolve;
    let a = uniform_grid(dc.a_min, dc.a_max, dc.a_step).at("synthesize")?;
    let prof = profile(exp)?;
    let mu = MuExact { d: exp.spec.dim() };
    timed(out, "synthesize", || synthesize_data(&prof, &a, &mu, exec)).at("synthesize")
}

fn write_data(out: &mut RunOutput, data: &ConvolutionData) -> std::io::Result<()> {
    let rows: Vec<Vec<Cell>> = data
        .a_grid
        .iter()
        .zip(&data.d_values)
        .zip(&data.noise)
        .map(|((a, v), n)| vec![(*a).into(), (*v).into(), (*n).into()])
        .collect();
    out.csv("convolution_data.csv", &["a", "d_value", "noise"], &rows)
}

pub fn synthesize(exp: &Experiment, out: &mut RunOutput, exec: Execution) -> Outcome {
    let data = exact_data(exp, out, exec)?;
    write_data(out, &data)?;
    Ok(())
}

/// Reads `a,d_value,noise` rows as written by `synthesize`.
pub fn read_data(path: &Path) -> Result<ConvolutionData, Failure> {
    let name = path.display().to_string();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Failure::Io(format!("{name}: {e}")))?;
    let headers = rdr.headers().map_err(|e| Failure::Invalid(vec![format!("{name}:1: {e}")]))?.clone();
    let col = |h: &str| headers.iter().position(|x| x == h);
    let (Some(ia), Some(id), Some(inz)) = (col("a"), col("d_value"), col("noise")) else {
        return Err(Failure::Invalid(vec![format!("{name}:1: expected columns a, d_value, noise")]));
    };
    let (mut a, mut v, mut n) = (Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Failure::Invalid(vec![format!("{name}:{line}: {e}")]))?;
        let get = |j: usize| -> Result<f64, Failure> {
            rec.get(j)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| Failure::Invalid(vec![format!("{name}:{line}: column {} is not a number", j + 1)]))
        };
        a.push(get(ia)?);
        v.push(get(id)?);
        n.push(get(inz)?);
    }
    ConvolutionData::new(a, v, Provenance::SimulatedScattering, n)
        .map_err(|e| Failure::Invalid(vec![format!("{name}: {e}")]))
}

fn tikhonov_options(reg: AutoOr) -> TikhonovOptions {
    TikhonovOptions {
        reg: reg.value().map_or(Regularization::Auto, Regularization::Fixed),
        ..TikhonovOptions::default()
    }
}

/// Largest `|x - y| / |y|` over pairs with `y` defined.
fn sup_rel(pairs: impl Iterator<Item = (Option<f64>, Option<f64>)>) -> Option<f64> {
    let mut worst: Option<f64> = None;
    for (x, y) in pairs {
        if let (Some(x), Some(y)) = (x, y) {
            let e = ((x - y) / y).abs();
            worst = Some(worst.unwrap_or(0.0).max(if e.is_nan() { f64::INFINITY } else { e }));
        }
    }
    worst
}

pub fn recover(exp: &Experiment, out: &mut RunOutput, exec: Execution, data_path: Option<&Path>) -> Outcome {
    let dc = &exp.cfg.deconvolve;
    let d = exp.spec.dim();
    let (data, known) = match data_path {
        Some(p) => (read_data(p)?, false),
        None => {
            let data = exact_data(exp, out, exec)?;
            write_data(out, &data)?;
            (data, true)
        }
    };
    let prof = profile(exp)?;
    let mu = MuExact { d };
    let k_grid = uniform_grid(dc.k_min, dc.k_max, dc.k_step).at("kernel")?;

    let tik = if dc.method.tikhonov() {
        let rate = estimate_tail_rate(&data).filter(|r| *r > convergence_abscissa(d));
        let kernel = timed(out, "kernel", || assemble_kernel(&data.a_grid, &k_grid, &mu, rate, exec)).at("kernel")?;
        let r = timed(out, "tikhonov", || recover_h_tikhonov(&data, &kernel, tikhonov_options(dc.reg))).at("tikhonov")?;
        if !r.discrepancy_met {
            out.note("tikhonov: discrepancy target not reached inside the search range");
        }
        Some(r)
    } else {
        None
    };
    let four = if dc.method.fourier() {
        let mut opts = FourierOptions::new(d);
        if let Some(c) = dc.c_line.value() {
            opts.c = c;
        }
        if let Some(w) = dc.cutoff.value() {
            opts.cutoff = Cutoff::Frequency(w);
        }
        opts.k_max = dc.k_max;
        Some(timed(out, "fourier", || recover_h_fourier(&data, d, opts)).at("fourier")?)
    } else {
        None
    };

    let lo = -data.a_max() + 0.5;
    let hi = dc.report_k_max;
    let in_window = |k: f64| k >= lo - 1e-9 && k <= hi + 1e-9;
    let base: &RecoveredPotential = tik.as_ref().or(four.as_ref()).expect("a method is always selected");
    let truth = |k: f64| known.then(|| prof.h(k));
    let rows: Vec<Vec<Cell>> = k_grid
        .iter()
        .map(|&k| {
            vec![
                k.into(),
                truth(k).into(),
                tik.as_ref().and_then(|r| r.h_at(k)).into(),
                four.as_ref().and_then(|r| r.h_at(k)).into(),
            ]
        })
        .collect();
    out.csv("recovery_h.csv", &["k", "h_true", "h_hat_tikhonov", "h_hat_fourier"], &rows)?;

    let window_k: Vec<f64> = k_grid.iter().cloned().filter(|k| in_window(*k)).collect();
    let err_of = |r: &Option<RecoveredPotential>| {
        r.as_ref().and_then(|r| sup_rel(window_k.iter().map(|&k| (r.h_at(k), truth(k)))))
    };
    let cross = match (&tik, &four) {
        (Some(t), Some(f)) => sup_rel(window_k.iter().map(|&k| (f.h_at(k), t.h_at(k)))),
        _ => None,
    };

    let lam_hi = (-base.window.0).exp().min(1.0);
    let lambdas = log_spaced(dc.lambda_min, lam_hi, dc.lambda_points);
    let g_tik = tik.as_ref().map(|r| reconstruct_g(r, &lambdas)).transpose().at("reconstruct")?;
    let g_four = four.as_ref().map(|r| reconstruct_g(r, &lambdas)).transpose().at("reconstruct")?;
    let g_true: Vec<Option<f64>> =
        lambdas.iter().map(|&l| if known { prof.g(l).ok() } else { None }).collect();
    let rows: Vec<Vec<Cell>> = lambdas
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            vec![
                l.into(),
                g_true[i].into(),
                g_tik.as_ref().map(|g| g.g[i]).into(),
                g_four.as_ref().map(|g| g.g[i]).into(),
            ]
        })
        .collect();
    out.csv("recovery_g.csv", &["lambda", "g_true", "g_hat_tikhonov", "g_hat_fourier"], &rows)?;
    let g_primary = g_tik.as_ref().or(g_four.as_ref()).expect("a method is always selected");
    let g_err = sup_rel(
        lambdas
            .iter()
            .enumerate()
            .filter(|(_, l)| **l >= 0.05 - 1e-12 && **l <= 1.0 + 1e-12)
            .map(|(i, _)| (Some(g_primary.g[i]), g_true[i])),
    );

    out.summary(
        "recovery_summary.csv",
        &[
            ("window_k_min", lo.into()),
            ("window_k_max", hi.into()),
            ("sup_rel_error_tikhonov", err_of(&tik).into()),
            ("sup_rel_error_fourier", err_of(&four).into()),
            ("cross_method_rel_diff", cross.into()),
            ("sup_rel_error_g", g_err.into()),
            ("reg", tik.as_ref().and_then(|r| r.reg).into()),
            ("weighted_misfit", tik.as_ref().and_then(|r| r.weighted_misfit).into()),
            ("discrepancy_met", tik.as_ref().map_or(Cell::Empty, |r| r.discrepancy_met.into())),
            ("tail_rate", base.tail_rate.into()),
        ],
    )?;
    Ok(())
}

pub fn pipeline(exp: &Experiment, out: &mut RunOutput, exec: Execution) -> Outcome {
    let pl = &exp.cfg.pipeline;
    let b = &exp.cfg.born;
    let d = exp.spec.dim();
    let mut cfg = PipelineConfig::new(exp.spec.clone()).at("pipeline")?;
    cfg.t0 = b.t0;
    cfg.x0 = b.x0.clone();
    cfg.sigma = pl.sigma;
    cfg.a_grid = uniform_grid(pl.a_min, pl.a_max, pl.a_step).at("pipeline")?;
    cfg.k_step = pl.k_step;
    cfg.k_span = pl.k_span;
    cfg.scan = exp.scan.clone();
    cfg.tikhonov = tikhonov_options(exp.cfg.deconvolve.reg);
    cfg.fit_window = (pl.fit_k_min, pl.fit_k_max);
    let rep = run_pipeline(&cfg, exec).at("pipeline")?;
    for (stage, t) in &rep.timings {
        out.time(stage, *t);
    }

    let rows: Vec<Vec<Cell>> = (0..rep.data.a_grid.len())
        .map(|i| {
            vec![
                rep.data.a_grid[i].into(),
                rep.data.d_values[i].into(),
                rep.exact.d_values[i].into(),
                rep.data.noise[i].into(),
            ]
        })
        .collect();
    out.csv("pipeline_readout.csv", &["a", "d_simulated", "d_exact", "noise"], &rows)?;
    let r = &rep.recovered;
    let rows: Vec<Vec<Cell>> =
        r.k_grid.iter().zip(&r.h_hat).map(|(&k, &h)| vec![k.into(), rep.profile.h(k).into(), h.into()]).collect();
    out.csv("pipeline_recovery.csv", &["k", "h_true", "h_hat"], &rows)?;

    let h_err = sup_rel(
        r.k_grid
            .iter()
            .zip(&r.h_hat)
            .filter(|(k, _)| **k >= r.window.0 - 1e-9 && **k <= pl.fit_k_max + 1e-9)
            .map(|(&k, &h)| (Some(h), Some(rep.profile.h(k)))),
    );
    let other = NonlinearitySpec::pure_power(d, pl.compare_p).at("separation")?;
    let other = PotentialProfile::new(other, b.t0, b.x0.clone()).at("separation")?;
    let sep = timed(out, "separation", || separation_at(0.0, &rep.profile, &other, &MuExact { d })).at("separation")?;
    let leading = exp.spec.terms().iter().map(|t| t.p).fold(f64::INFINITY, f64::min);
    out.summary(
        "pipeline_summary.csv",
        &[
            ("fitted_p", rep.exponent.slope.into()),
            ("fitted_p_stderr", rep.exponent.slope_stderr.into()),
            ("leading_p", leading.into()),
            ("noise_rel", rep.noise_rel.into()),
            ("reg", r.reg.into()),
            ("weighted_misfit", r.weighted_misfit.into()),
            ("discrepancy_met", r.discrepancy_met.into()),
            ("sup_rel_error_h", h_err.into()),
            ("compare_p", pl.compare_p.into()),
            ("separation_at_zero", sep.into()),
        ],
    )?;
    Ok(())
}
