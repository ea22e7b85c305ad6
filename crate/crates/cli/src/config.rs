//! Experiment configuration: TOML schema, overrides and validation.

use scatinv_core::born::{ConcentratedData, ScanConfig};
use scatinv_core::grid::{make_grid, SpatialGrid};
use scatinv_core::laplace::{bounds_abscissa, convergence_abscissa};
use scatinv_core::nonlinearity::{check_admissible, Coefficient, NonlinearitySpec, PowerTerm};
use scatinv_core::solver::{data_norm, ScatteringConfig};
use serde::{Deserialize, Serialize};
use std::fmt;

/// The shipped default configuration.
pub const DEFAULT_CONFIG: &str = include_str!("../config/default.toml");

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub dimension: usize,
    /// Output directory; `--out` takes precedence.
    #[serde(default)]
    pub out_dir: Option<String>,
    pub nonlinearity: NonlinearityConfig,
    pub grid: GridSection,
    pub scattering: ScatteringSection,
    pub propagate: PropagateSection,
    pub born: BornSection,
    pub mu: MuSection,
    pub laplace: LaplaceSection,
    pub deconvolve: DeconvolveSection,
    pub pipeline: PipelineSection,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NonlinearityConfig {
    #[serde(default)]
    pub terms: Vec<TermConfig>,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum CoeffType {
    Constant,
    Bump,
}

fn constant_type() -> CoeffType {
    CoeffType::Constant
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub p: f64,
    #[serde(default = "constant_type")]
    pub coeff_type: CoeffType,
    pub c: f64,
    pub t_c: Option<f64>,
    pub tau: Option<f64>,
    pub x_c: Option<Vec<f64>>,
    pub w: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub half_extent: f64,
    pub points: usize,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScatteringSection {
    pub horizon: f64,
    pub dt: f64,
    pub amplitude_cap: f64,
    pub amplitudes: Vec<f64>,
    pub gauge_theta: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PropagateSection {
    pub times: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BornSection {
    pub t0: f64,
    pub x0: Vec<f64>,
    pub amplitude: f64,
    pub sigmas: Vec<f64>,
    pub base_half_extent: f64,
    pub base_points: usize,
    pub base_dt: f64,
    pub base_window: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MuSection {
    pub points: usize,
    pub lambda_min: f64,
    pub mc_samples: u64,
    pub mc_points: usize,
    pub mc_lambda_min: f64,
    pub mc_lambda_max: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LaplaceSection {
    pub bounds_re: Vec<f64>,
    pub bounds_im: Vec<f64>,
    pub identity_points: Vec<f64>,
    pub outer_c: f64,
    pub outer_n: u32,
    pub outer_x: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Tikhonov,
    Fourier,
    Both,
}

impl Method {
    pub fn tikhonov(self) -> bool {
        matches!(self, Method::Tikhonov | Method::Both)
    }
    pub fn fourier(self) -> bool {
        matches!(self, Method::Fourier | Method::Both)
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum AutoWord {
    Auto,
}

/// A number or the word `"auto"`.
#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq)]
#[serde(untagged)]
pub enum AutoOr {
    Value(f64),
    Auto(AutoWord),
}

impl AutoOr {
    pub fn value(self) -> Option<f64> {
        match self {
            AutoOr::Value(v) => Some(v),
            AutoOr::Auto(_) => None,
        }
    }

    pub fn parse(text: &str) -> Result<AutoOr, String> {
        if text.eq_ignore_ascii_case("auto") {
            return Ok(AutoOr::Auto(AutoWord::Auto));
        }
        text.parse::<f64>().map(AutoOr::Value).map_err(|_| format!("expected a number or \"auto\", got {text:?}"))
    }
}

impl fmt::Display for AutoOr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AutoOr::Value(v) => write!(f, "{v}"),
            AutoOr::Auto(_) => write!(f, "auto"),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DeconvolveSection {
    pub a_min: f64,
    pub a_max: f64,
    pub a_step: f64,
    pub k_min: f64,
    pub k_max: f64,
    pub k_step: f64,
    pub method: Method,
    pub reg: AutoOr,
    pub c_line: AutoOr,
    pub cutoff: AutoOr,
    /// Upper end of the window where recovery errors are reported.
    pub report_k_max: f64,
    pub lambda_min: f64,
    pub lambda_points: usize,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PipelineSection {
    pub sigma: f64,
    pub a_min: f64,
    pub a_max: f64,
    pub a_step: f64,
    pub k_step: f64,
    pub k_span: f64,
    pub fit_k_min: f64,
    pub fit_k_max: f64,
    /// Exponent of the pure power compared against for the separation check.
    pub compare_p: f64,
}

/// Command-line values that replace config entries.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub sigma: Option<f64>,
    pub reg: Option<AutoOr>,
    pub c_line: Option<AutoOr>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(s) = self.sigma {
            cfg.pipeline.sigma = s;
            cfg.born.sigmas = vec![s];
        }
        if let Some(r) = self.reg {
            cfg.deconvolve.reg = r;
        }
        if let Some(c) = self.c_line {
            cfg.deconvolve.c_line = c;
        }
    }

    fn flag_for(&self, key: &str) -> Option<&'static str> {
        match key {
            "seed" if self.seed.is_some() => Some("--seed"),
            "pipeline.sigma" | "born.sigmas" if self.sigma.is_some() => Some("--sigma"),
            "deconvolve.reg" if self.reg.is_some() => Some("--reg"),
            "deconvolve.c_line" if self.c_line.is_some() => Some("--c-line"),
            _ => None,
        }
    }
}

/// Where a config problem sits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Anchor {
    Line(usize),
    Flag(&'static str),
    Unknown,
}

/// One validation failure, keyed by its dotted config path.
#[derive(Clone, Debug, PartialEq)]
pub struct Issue {
    pub key: String,
    pub anchor: Anchor,
    pub message: String,
}

impl Issue {
    pub fn render(&self, source_name: &str) -> String {
        match &self.anchor {
            Anchor::Line(n) => format!("{source_name}:{n}: {}: {}", self.key, self.message),
            Anchor::Flag(f) => format!("{f}: {}: {}", self.key, self.message),
            Anchor::Unknown => format!("{source_name}: {}: {}", self.key, self.message),
        }
    }
}

/// Failure to read a config at all.
#[derive(Debug)]
pub struct ParseError {
    pub line: Option<usize>,
    pub message: String,
}

/// Parses config text; syntax and schema errors carry a 1-based line.
pub fn parse(src: &str) -> Result<ExperimentConfig, ParseError> {
    toml::from_str(src).map_err(|e| {
        let line = e.span().map(|s| line_of_offset(src, s.start));
        ParseError { line, message: e.message().to_string() }
    })
}

fn line_of_offset(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

/// Line of `key` inside table `table` (array-of-tables entries addressed as `name#index`).
pub fn locate(src: &str, dotted: &str) -> Option<usize> {
    let mut parts: Vec<&str> = dotted.split('.').collect();
    let key = parts.pop()?;
    let (table, index) = match parts.last().and_then(|p| p.split_once('#')) {
        Some((name, idx)) => {
            let mut t: Vec<&str> = parts[..parts.len() - 1].to_vec();
            t.push(name);
            (t.join("."), idx.parse::<usize>().ok())
        }
        None => (parts.join("."), None),
    };
    let mut seen = 0usize;
    let mut in_target = table.is_empty();
    let mut header_line = None;
    for (n, raw) in src.lines().enumerate() {
        let line = raw.trim();
        if let Some(inner) = line.strip_prefix("[[").and_then(|l| l.split("]]").next()) {
            in_target = false;
            if inner.trim() == table {
                if Some(seen) == index {
                    in_target = true;
                    header_line = Some(n + 1);
                }
                seen += 1;
            }
            continue;
        }
        if let Some(inner) = line.strip_prefix('[').and_then(|l| l.split(']').next()) {
            in_target = inner.trim() == table && index.is_none();
            if in_target {
                header_line = Some(n + 1);
            }
            continue;
        }
        if in_target {
            if let Some((lhs, _)) = line.split_once('=') {
                if lhs.trim() == key {
                    return Some(n + 1);
                }
            }
        }
    }
    header_line
}

/// A validated experiment with its core-level objects.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub cfg: ExperimentConfig,
    pub spec: NonlinearitySpec,
    pub grid: SpatialGrid,
    pub scattering: ScatteringConfig,
    pub scan: ScanConfig,
}

/// Outcome of [`validate`]: named checks and the issues found.
#[derive(Clone, Debug)]
pub struct Report {
    pub checks: Vec<(&'static str, bool)>,
    pub issues: Vec<Issue>,
    pub experiment: Option<Experiment>,
}

impl Report {
    pub fn ok(&self) -> bool {
        self.issues.is_empty()
    }
}

struct Collector<'a> {
    src: &'a str,
    overrides: &'a Overrides,
    issues: Vec<Issue>,
}

impl Collector<'_> {
    fn push(&mut self, key: &str, message: impl Into<String>) {
        let anchor = match self.overrides.flag_for(key) {
            Some(f) => Anchor::Flag(f),
            None => locate(self.src, key).map_or(Anchor::Unknown, Anchor::Line),
        };
        self.issues.push(Issue { key: key.to_string(), anchor, message: message.into() });
    }

    fn check(&mut self, ok: bool, key: &str, message: impl FnOnce() -> String) -> bool {
        if !ok {
            self.push(key, message());
        }
        ok
    }
}

fn build_terms(cfg: &ExperimentConfig, col: &mut Collector) -> Vec<PowerTerm> {
    let d = cfg.dimension;
    let mut terms = Vec::new();
    for (i, t) in cfg.nonlinearity.terms.iter().enumerate() {
        let at = |k: &str| format!("nonlinearity.terms#{i}.{k}");
        if !t.p.is_finite() || !t.c.is_finite() {
            col.push(&at("p"), "exponent and coefficient must be finite");
            continue;
        }
        let coeff = match t.coeff_type {
            CoeffType::Constant => Coefficient::Constant(t.c),
            CoeffType::Bump => {
                let (Some(t_c), Some(tau), Some(x_c), Some(w)) = (t.t_c, t.tau, t.x_c.clone(), t.w) else {
                    col.push(&at("coeff_type"), "bump coefficients need t_c, tau, x_c and w");
                    continue;
                };
                if !(tau > 0.0) || !(w > 0.0) {
                    col.push(&at("tau"), "bump widths tau and w must be positive");
                    continue;
                }
                if x_c.len() != d {
                    col.push(&at("x_c"), format!("bump center needs {d} coordinates, got {}", x_c.len()));
                    continue;
                }
                Coefficient::Bump { c: t.c, t_c, tau, x_c, w }
            }
        };
        terms.push(PowerTerm { p: t.p, coeff });
    }
    terms
}

fn positive(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

/// Checks admissibility, grid resolution (`sigma >= 4 dx`), amplitude caps and the
/// consistency of every grid; no side effects.
pub fn validate(mut cfg: ExperimentConfig, src: &str, overrides: &Overrides) -> Report {
    overrides.apply(&mut cfg);
    let mut col = Collector { src, overrides, issues: Vec::new() };
    let mut checks = Vec::new();
    let d = cfg.dimension;

    if !col.check((1..=2).contains(&d), "dimension", || format!("dimension must be 1 or 2, got {d}")) {
        return Report { checks: vec![("dimension", false)], issues: col.issues, experiment: None };
    }

    // admissibility
    let before = col.issues.len();
    let terms = build_terms(&cfg, &mut col);
    let spec = NonlinearitySpec::new(d, terms.clone());
    let spec = match spec {
        Ok(s) => {
            let rep = check_admissible(&s);
            for v in &rep.violations {
                let key = v
                    .strip_prefix("term ")
                    .and_then(|r| r.split(':').next())
                    .map_or("nonlinearity.terms#0.p".to_string(), |i| format!("nonlinearity.terms#{i}.p"));
                col.push(&key, format!("admissibility violation (power-type window [4/d, p1]): {v}"));
            }
            Some(s)
        }
        Err(e) => {
            col.push("nonlinearity.terms#0.p", format!("admissibility violation: {e}"));
            None
        }
    };
    checks.push(("admissibility", col.issues.len() == before));

    // grids and solver settings
    let before = col.issues.len();
    let grid = match make_grid(d, cfg.grid.half_extent, cfg.grid.points) {
        Ok(g) => Some(g),
        Err(e) => {
            col.push("grid.points", e.to_string());
            None
        }
    };
    let scattering = grid.as_ref().and_then(|g| {
        let s = &cfg.scattering;
        match ScatteringConfig::new(s.horizon, s.dt, g.clone(), s.amplitude_cap) {
            Ok(c) => Some(c),
            Err(e) => {
                col.push("scattering.dt", e.to_string());
                None
            }
        }
    });
    let b = &cfg.born;
    let scan = ScanConfig {
        base_half_extent: b.base_half_extent,
        base_points: b.base_points,
        base_dt: b.base_dt,
        base_window: b.base_window,
        amplitude_cap: cfg.scattering.amplitude_cap,
    };
    if let Err(e) = scan.validate() {
        col.push("born.base_dt", e.to_string());
    }
    if let Err(e) = make_grid(d, b.base_half_extent, b.base_points) {
        col.push("born.base_points", e.to_string());
    }
    col.check(b.x0.len() == d, "born.x0", || format!("readout point needs {d} coordinates, got {}", b.x0.len()));
    col.check(positive(b.amplitude), "born.amplitude", || "amplitude must be positive".into());
    col.check(!b.sigmas.is_empty(), "born.sigmas", || "sigma list is empty".into());
    col.check(!cfg.propagate.times.is_empty(), "propagate.times", || "no times given".into());
    col.check(
        cfg.scattering.amplitudes.iter().all(|e| positive(*e)) && cfg.scattering.amplitudes.len() >= 2,
        "scattering.amplitudes",
        || "amplitude scan needs at least two positive amplitudes".into(),
    );

    let m = &cfg.mu;
    col.check(m.points >= 2, "mu.points", || "table needs at least two points".into());
    col.check(m.lambda_min > 0.0 && m.lambda_min < 1.0, "mu.lambda_min", || "lambda_min must lie in (0, 1)".into());
    col.check(
        m.mc_samples == 0 || (m.mc_points >= 1 && 0.0 < m.mc_lambda_min && m.mc_lambda_min <= m.mc_lambda_max && m.mc_lambda_max < 1.0),
        "mu.mc_lambda_min",
        || "Monte Carlo lambdas must satisfy 0 < min <= max < 1".into(),
    );

    let l = &cfg.laplace;
    let ab = bounds_abscissa(d);
    col.check(
        !l.bounds_re.is_empty() && !l.bounds_im.is_empty() && l.bounds_re.iter().all(|r| *r >= ab - 1e-12),
        "laplace.bounds_re",
        || format!("bounds grid needs Re z >= 1 + 3/(2d) = {ab}"),
    );
    col.check(
        l.identity_points.iter().all(|z| *z > convergence_abscissa(d)),
        "laplace.identity_points",
        || format!("identity points must exceed 1 + 1/d = {}", convergence_abscissa(d)),
    );
    col.check(l.outer_c >= ab - 1e-12, "laplace.outer_c", || format!("outer line must satisfy c >= {ab}"));
    col.check(l.outer_n >= 1, "laplace.outer_n", || "weight power must be at least 1".into());
    col.check(
        !l.outer_x.is_empty() && l.outer_x.iter().all(|x| *x >= 0.0 && x.is_finite()),
        "laplace.outer_x",
        || "outer abscissae must be nonnegative".into(),
    );

    let dc = &cfg.deconvolve;
    let grids_ok = positive(dc.a_step) && positive(dc.k_step) && dc.a_max > dc.a_min && dc.k_max > dc.k_min;
    if col.check(grids_ok, "deconvolve.a_step", || "a and k grids need positive steps and increasing ends".into()) {
        col.check(
            dc.k_min <= -dc.a_max + 1e-9 && dc.k_max >= -dc.a_min - 1e-9,
            "deconvolve.k_min",
            || format!("k grid must cover [-a_max, -a_min] = [{}, {}]", -dc.a_max, -dc.a_min),
        );
        col.check(
            dc.report_k_max > -dc.a_max + 0.5 && dc.report_k_max <= dc.k_max,
            "deconvolve.report_k_max",
            || "report window must lie inside the k grid".into(),
        );
    }
    if let Some(r) = dc.reg.value() {
        col.check(r >= 0.0 && r.is_finite(), "deconvolve.reg", || format!("regularization must be nonnegative, got {r}"));
    }
    if let Some(c) = dc.c_line.value() {
        let (lo, hi) = (convergence_abscissa(d), 1.0 + 2.0 / d as f64);
        col.check(c > lo && c < hi, "deconvolve.c_line", || format!("c must lie in (1 + 1/d, 1 + 2/d) = ({lo}, {hi}), got {c}"));
    }
    if let Some(w) = dc.cutoff.value() {
        col.check(positive(w), "deconvolve.cutoff", || "frequency cutoff must be positive".into());
    }
    col.check(
        dc.lambda_points >= 2 && dc.lambda_min > 0.0 && dc.lambda_min < 1.0,
        "deconvolve.lambda_min",
        || "g reconstruction grid needs lambda_min in (0, 1) and at least two points".into(),
    );

    let pl = &cfg.pipeline;
    col.check(
        positive(pl.a_step) && pl.a_max > pl.a_min + 2.0 * pl.a_step && positive(pl.k_step) && positive(pl.k_span),
        "pipeline.a_step",
        || "pipeline grids need positive steps and at least three amplitudes".into(),
    );
    col.check(pl.fit_k_max > pl.fit_k_min, "pipeline.fit_k_min", || "exponent fit window is empty".into());
    col.check(pl.compare_p >= 4.0 / d as f64, "pipeline.compare_p", || "comparison exponent must be admissible".into());
    checks.push(("grids", col.issues.len() == before));

    // resolution rule on the main grid
    let before = col.issues.len();
    if let Some(g) = &grid {
        let dx = g.spacing();
        for (i, s) in cfg.born.sigmas.iter().enumerate() {
            col.check(*s >= 4.0 * dx, "born.sigmas", || {
                format!("resolution rule: sigma[{i}] = {s} is below 4 dx = {:.6e} of the main grid", 4.0 * dx)
            });
        }
        let s = cfg.pipeline.sigma;
        col.check(s >= 4.0 * dx, "pipeline.sigma", || {
            format!("resolution rule: sigma = {s} is below 4 dx = {:.6e} of the main grid", 4.0 * dx)
        });
    }
    checks.push(("resolution", col.issues.len() == before));

    // amplitude caps
    let before = col.issues.len();
    let cap = cfg.scattering.amplitude_cap;
    if let (Some(spec), true) = (&spec, col.issues.is_empty()) {
        if let Some(sc) = &scattering {
            let psi = scatinv_core::grid::sample_gaussian(&sc.grid);
            let top = cfg.scattering.amplitudes.iter().cloned().fold(0.0, f64::max);
            let n = data_norm(spec, &psi) * top;
            col.check(n <= cap, "scattering.amplitudes", || {
                format!("amplitude cap: largest scan amplitude has norm {n:.4e} > cap {cap}")
            });
        }
        let mut cap_check = |key: &str, sigma: f64, amplitude: f64| -> Option<()> {
            let data = ConcentratedData::new(b.t0, b.x0.clone(), sigma, amplitude).ok()?;
            let field = data.sample(&scan.grid_for(&data).ok()?, data.t0).ok()?;
            let n = data_norm(spec, &field);
            col.check(n <= cap, key, || {
                format!("amplitude cap: sigma = {sigma}, amplitude = {amplitude:.4e} gives norm {n:.4e} > cap {cap}")
            });
            Some(())
        };
        for s in &cfg.born.sigmas {
            cap_check("born.amplitude", *s, b.amplitude);
        }
        let top = cfg.pipeline.a_max.exp();
        cap_check("pipeline.a_max", cfg.pipeline.sigma, top);
        cap_check("pipeline.a_max", 0.5 * cfg.pipeline.sigma, top);
    }
    checks.push(("amplitude_cap", col.issues.len() == before));

    let experiment = match (col.issues.is_empty(), spec, grid, scattering) {
        (true, Some(spec), Some(grid), Some(scattering)) => Some(Experiment { cfg, spec, grid, scattering, scan }),
        _ => None,
    };
    Report { checks, issues: col.issues, experiment }
}
