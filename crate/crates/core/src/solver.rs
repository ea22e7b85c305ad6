//! Strang split-step integration and the numerical scattering map.

use crate::error::{invalid, Error, Result};
use crate::grid::{Field, SpatialGrid, Trajectory};
use crate::nonlinearity::{Coefficient, NonlinearitySpec};
use crate::propagator::{bessel_norm, free_propagate, LinearStep};
use num_complex::Complex64;

/// Horizon, step and smallness cap for scattering runs.
#[derive(Clone, Debug)]
pub struct ScatteringConfig {
    pub horizon: f64,
    pub dt: f64,
    pub grid: SpatialGrid,
    pub amplitude_cap: f64,
}

impl ScatteringConfig {
    pub fn new(horizon: f64, dt: f64, grid: SpatialGrid, amplitude_cap: f64) -> Result<Self> {
        let cfg = ScatteringConfig { horizon, dt, grid, amplitude_cap };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) {
            return invalid(format!("horizon must be positive, got {}", self.horizon));
        }
        if !(self.dt > 0.0) || self.dt > self.horizon / 100.0 {
            return invalid(format!("dt must lie in (0, T/100], got {}", self.dt));
        }
        if !(self.amplitude_cap > 0.0) {
            return invalid("amplitude cap must be positive");
        }
        Ok(())
    }
}

/// Smoothness index `s = max(0, d/2 - 2/p1)` of the smallness norm.
pub fn smallness_index(spec: &NonlinearitySpec) -> f64 {
    (0.5 * spec.dim() as f64 - 2.0 / spec.p1()).max(0.0)
}

/// Size of scattering data in the smallness norm `|| <grad>^s u ||_{L^2}`.
pub fn data_norm(spec: &NonlinearitySpec, field: &Field) -> f64 {
    bessel_norm(field, smallness_index(spec))
}

pub(crate) fn check_cap(spec: &NonlinearitySpec, field: &Field, cap: f64) -> Result<()> {
    let norm = data_norm(spec, field);
    if norm > cap {
        return Err(Error::AmplitudeCap { norm, cap });
    }
    Ok(())
}

/// One power term with its coefficient split into time and space factors.
struct SplitTerm {
    half_p: f64,
    int_power: Option<i32>,
    scale: f64,
    time_center: f64,
    time_width: Option<f64>,
    spatial: Option<Vec<f64>>,
}

impl SplitTerm {
    fn time_factor(&self, t: f64) -> f64 {
        match self.time_width {
            None => self.scale,
            Some(tau) => {
                let s = (t - self.time_center) / tau;
                self.scale * (-s * s).exp()
            }
        }
    }
}

/// Nonlinear substep: exact phase rotation `u <- u exp(-i rho dt)` with frozen `|u|`.
struct PhaseRotation {
    terms: Vec<SplitTerm>,
    phase: Vec<f64>,
}

impl PhaseRotation {
    fn new(spec: &NonlinearitySpec, grid: &SpatialGrid) -> Result<Self> {
        if spec.dim() != grid.dim() {
            return Err(Error::GridMismatch(format!(
                "spec dimension {} on a {}-d grid",
                spec.dim(),
                grid.dim()
            )));
        }
        let nodes = grid.nodes();
        let d = grid.dim();
        let terms = spec
            .terms()
            .iter()
            .filter(|t| !matches!(t.coeff, Coefficient::Constant(c) if c == 0.0))
            .map(|t| {
                let half_p = 0.5 * t.p;
                let int_power =
                    (half_p == half_p.round() && half_p <= 32.0).then_some(half_p as i32);
                match &t.coeff {
                    Coefficient::Constant(c) => SplitTerm {
                        half_p,
                        int_power,
                        scale: *c,
                        time_center: 0.0,
                        time_width: None,
                        spatial: None,
                    },
                    Coefficient::Bump { c, t_c, tau, x_c, w } => {
                        let spatial = nodes
                            .chunks(d)
                            .map(|x| {
                                let r2: f64 =
                                    x.iter().zip(x_c).map(|(a, b)| (a - b) * (a - b)).sum();
                                (-r2 / (w * w)).exp()
                            })
                            .collect();
                        SplitTerm {
                            half_p,
                            int_power,
                            scale: *c,
                            time_center: *t_c,
                            time_width: Some(*tau),
                            spatial: Some(spatial),
                        }
                    }
                }
            })
            .collect();
        Ok(PhaseRotation { terms, phase: vec![0.0; grid.len()] })
    }

    fn is_trivial(&self) -> bool {
        self.terms.is_empty()
    }

    /// Applies the rotations of consecutive substeps `(midpoint time, duration)` at once.
    /// Exact because each rotation leaves `|u|` unchanged.
    fn apply(&mut self, u: &mut [Complex64], stages: &[(f64, f64)]) {
        if self.terms.is_empty() {
            return;
        }
        self.phase.iter_mut().for_each(|p| *p = 0.0);
        for term in &self.terms {
            let weight: f64 = stages.iter().map(|(t, dur)| dur * term.time_factor(*t)).sum();
            if weight == 0.0 {
                continue;
            }
            for (j, (p, v)) in self.phase.iter_mut().zip(u.iter()).enumerate() {
                let lam = v.norm_sqr();
                let pw = match term.int_power {
                    Some(k) => lam.powi(k),
                    None => lam.powf(term.half_p),
                };
                let s = term.spatial.as_ref().map_or(1.0, |s| s[j]);
                *p += weight * s * pw;
            }
        }
        for (v, p) in u.iter_mut().zip(&self.phase) {
            let (sn, cs) = p.sin_cos();
            *v *= Complex64::new(cs, -sn);
        }
    }
}

fn check_finite(u: &[Complex64], t: f64) -> Result<()> {
    if u.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::NonFinite { t });
    }
    Ok(())
}

/// Strang split-step solution of `(i d_t + Laplacian) u = F(t,x,u)` from `t_a` to `t_b`.
///
/// The step is `dt` rounded down so that it divides the interval. Frames are
/// recorded at `t_a`, every `stride` steps (when `stride > 0`) and at `t_b`.
pub fn evolve(
    spec: &NonlinearitySpec,
    u_init: &Field,
    t_a: f64,
    t_b: f64,
    dt: f64,
    stride: usize,
) -> Result<Trajectory> {
    if !(t_b > t_a) {
        return invalid(format!("evolve needs t_a < t_b, got [{t_a}, {t_b}]"));
    }
    if !(dt > 0.0) {
        return invalid("time step must be positive");
    }
    let grid = u_init.grid().clone();
    let steps = ((t_b - t_a) / dt).ceil().max(1.0) as usize;
    let h = (t_b - t_a) / steps as f64;
    let mut rot = PhaseRotation::new(spec, &grid)?;
    let mut lin = LinearStep::new(&grid, h);
    let mut u = u_init.values().to_vec();
    let mut times = vec![t_a];
    let mut frames = vec![u_init.clone()];

    rot.apply(&mut u, &[(t_a + 0.25 * h, 0.5 * h)]);
    for n in 0..steps {
        lin.apply(&mut u);
        let t_end = t_a + (n + 1) as f64 * h;
        let last = n + 1 == steps;
        let record = last || (stride > 0 && (n + 1) % stride == 0);
        if record {
            rot.apply(&mut u, &[(t_end - 0.25 * h, 0.5 * h)]);
            check_finite(&u, t_end)?;
            let t_rec = if last { t_b } else { t_end };
            times.push(t_rec);
            frames.push(Field::from_raw(grid.clone(), u.clone()));
            if !last {
                rot.apply(&mut u, &[(t_end + 0.25 * h, 0.5 * h)]);
            }
        } else if !rot.is_trivial() {
            rot.apply(&mut u, &[(t_end - 0.25 * h, 0.5 * h), (t_end + 0.25 * h, 0.5 * h)]);
        }
    }
    Trajectory::new(times, frames)
}

/// Final state of [`evolve`] without storing intermediate frames.
pub fn evolve_endpoint(
    spec: &NonlinearitySpec,
    u_init: &Field,
    t_a: f64,
    t_b: f64,
    dt: f64,
) -> Result<Field> {
    Ok(evolve(spec, u_init, t_a, t_b, dt, 0)?.into_last().expect("nonempty trajectory"))
}

/// `S_F(u_-)`: backward free flight to `-T`, nonlinear evolution to `T`, free flight back.
pub fn scattering_map(spec: &NonlinearitySpec, u_minus: &Field, cfg: &ScatteringConfig) -> Result<Field> {
    cfg.validate()?;
    if u_minus.grid() != &cfg.grid {
        return Err(Error::GridMismatch("scattering data not on the configured grid".into()));
    }
    check_cap(spec, u_minus, cfg.amplitude_cap)?;
    let t = cfg.horizon;
    let start = free_propagate(u_minus, -t);
    let end = evolve_endpoint(spec, &start, -t, t, cfg.dt)?;
    Ok(free_propagate(&end, -t))
}

/// `i <(S_F - I) phi, phi>`, inner product linear in the first slot.
pub fn scattering_pairing(spec: &NonlinearitySpec, phi: &Field, cfg: &ScatteringConfig) -> Result<Complex64> {
    let out = scattering_map(spec, phi, cfg)?;
    let diff = out.sub(phi)?;
    Ok(Complex64::i() * diff.inner(phi)?)
}
