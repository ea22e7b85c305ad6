//! Gauge-invariant power nonlinearities `F(t,x,u) = rho(t,x,|u|^2) u`.

use crate::error::{invalid, Result};
use num_complex::Complex64;

/// Space-time dependence of a power term's coefficient.
#[derive(Clone, Debug, PartialEq)]
pub enum Coefficient {
    Constant(f64),
    /// `c * exp(-(t-t_c)^2/tau^2) * exp(-|x-x_c|^2/w^2)`
    Bump { c: f64, t_c: f64, tau: f64, x_c: Vec<f64>, w: f64 },
}

impl Coefficient {
    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Bump { c, t_c, tau, x_c, w } => {
                let dt = (t - t_c) / tau;
                let r2: f64 = x.iter().zip(x_c).map(|(a, b)| (a - b) * (a - b)).sum();
                c * (-dt * dt - r2 / (w * w)).exp()
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Coefficient::Constant(_))
    }
}

/// One term `c(t,x) |u|^p u`.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerTerm {
    pub p: f64,
    pub coeff: Coefficient,
}

impl PowerTerm {
    pub fn constant(p: f64, c: f64) -> Self {
        PowerTerm { p, coeff: Coefficient::Constant(c) }
    }

    /// `lambda^(p/2)`, through `powi` when `p/2` is an integer.
    #[inline]
    pub fn lambda_power(&self, lambda: f64) -> f64 {
        let h = 0.5 * self.p;
        if h == h.round() && h.abs() <= 32.0 {
            lambda.powi(h as i32)
        } else {
            lambda.powf(h)
        }
    }
}

/// A finite sum of power terms in dimension `dim`.
///
/// An empty term list is the zero nonlinearity.
#[derive(Clone, Debug, PartialEq)]
pub struct NonlinearitySpec {
    dim: usize,
    terms: Vec<PowerTerm>,
    p1: f64,
}

impl NonlinearitySpec {
    /// Spec whose upper exponent bound is the largest term exponent.
    pub fn new(dim: usize, terms: Vec<PowerTerm>) -> Result<Self> {
        let p1 = terms.iter().map(|t| t.p).fold(4.0 / dim.max(1) as f64, f64::max);
        Self::with_upper_bound(dim, terms, p1)
    }

    pub fn with_upper_bound(dim: usize, terms: Vec<PowerTerm>, p1: f64) -> Result<Self> {
        if dim == 0 {
            return invalid("dimension must be positive");
        }
        for t in &terms {
            if !(t.p > 0.0) || !t.p.is_finite() {
                return invalid(format!("term exponent must be positive, got {}", t.p));
            }
            if let Coefficient::Bump { c, tau, w, x_c, t_c } = &t.coeff {
                if !(*tau > 0.0) || !(*w > 0.0) {
                    return invalid("bump widths tau and w must be positive");
                }
                if x_c.len() != dim {
                    return invalid(format!("bump center needs {dim} coordinates"));
                }
                if !c.is_finite() || !t_c.is_finite() || x_c.iter().any(|v| !v.is_finite()) {
                    return invalid("bump parameters must be finite");
                }
            }
            if let Coefficient::Constant(c) = t.coeff {
                if !c.is_finite() {
                    return invalid("coefficient must be finite");
                }
            }
        }
        Ok(NonlinearitySpec { dim, terms, p1 })
    }

    /// The zero nonlinearity.
    pub fn free(dim: usize) -> Self {
        NonlinearitySpec { dim, terms: Vec::new(), p1: 4.0 / dim as f64 }
    }

    /// `|u|^p u` with unit coefficient.
    pub fn pure_power(dim: usize, p: f64) -> Result<Self> {
        Self::new(dim, vec![PowerTerm::constant(p, 1.0)])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn terms(&self) -> &[PowerTerm] {
        &self.terms
    }
    /// Mass-critical lower exponent `4/d`.
    pub fn p0(&self) -> f64 {
        4.0 / self.dim as f64
    }
    pub fn p1(&self) -> f64 {
        self.p1
    }
    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| matches!(t.coeff, Coefficient::Constant(c) if c == 0.0))
    }
    pub fn is_autonomous(&self) -> bool {
        self.terms.iter().all(|t| t.coeff.is_constant())
    }
    pub fn max_exponent(&self) -> f64 {
        self.terms.iter().map(|t| t.p).fold(self.p0(), f64::max)
    }

    /// `rho(t, x, lambda) = sum_j c_j(t,x) lambda^(p_j/2)`.
    pub fn rho(&self, t: f64, x: &[f64], lambda: f64) -> f64 {
        self.terms.iter().map(|term| term.coeff.eval(t, x) * term.lambda_power(lambda)).sum()
    }
}

/// Outcome of [`check_admissible`].
#[derive(Clone, Debug, PartialEq)]
pub struct AdmissibilityReport {
    pub ok: bool,
    pub violations: Vec<String>,
}

/// Checks the exponent window `[4/d, p1]` (and `p1 <= 4/(d-2)` for `d >= 3`).
pub fn check_admissible(spec: &NonlinearitySpec) -> AdmissibilityReport {
    let mut violations = Vec::new();
    let d = spec.dim();
    let p0 = spec.p0();
    if d >= 3 {
        let crit = 4.0 / (d as f64 - 2.0);
        if spec.p1() > crit + 1e-12 {
            violations.push(format!(
                "upper exponent p1={} exceeds the energy-critical bound 4/(d-2)={crit}",
                spec.p1()
            ));
        }
    }
    if spec.p1() < p0 - 1e-12 {
        violations.push(format!("upper exponent p1={} is below p0=4/d={p0}", spec.p1()));
    }
    for (i, t) in spec.terms().iter().enumerate() {
        if t.p < p0 - 1e-12 {
            violations.push(format!(
                "term {i}: exponent p={} is below the mass-critical bound p0=4/d={p0}",
                t.p
            ));
        }
        if t.p > spec.p1() + 1e-12 {
            violations.push(format!("term {i}: exponent p={} exceeds p1={}", t.p, spec.p1()));
        }
    }
    AdmissibilityReport { ok: violations.is_empty(), violations }
}

/// `F(t,x,u) = rho(t,x,|u|^2) u`.
pub fn eval_f(spec: &NonlinearitySpec, t: f64, x: &[f64], u: Complex64) -> Complex64 {
    u * spec.rho(t, x, u.norm_sqr())
}

/// `G(t,x,lambda) = sum_j c_j(t,x) lambda^(p_j/2+1)`, so that `conj(u) F = G(|u|^2)`.
pub fn eval_g(spec: &NonlinearitySpec, t: f64, x: &[f64], lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return invalid(format!("potential argument must be nonnegative, got {lambda}"));
    }
    Ok(lambda * spec.rho(t, x, lambda))
}

/// The potential of a spec frozen at one space-time point.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialProfile {
    pub t0: f64,
    pub x0: Vec<f64>,
    pub spec: NonlinearitySpec,
}

impl PotentialProfile {
    pub fn new(spec: NonlinearitySpec, t0: f64, x0: Vec<f64>) -> Result<Self> {
        if x0.len() != spec.dim() {
            return invalid(format!("evaluation point needs {} coordinates", spec.dim()));
        }
        Ok(PotentialProfile { t0, x0, spec })
    }

    /// Pairs `(c_j(t0,x0), p_j)`.
    pub fn frozen_terms(&self) -> Vec<(f64, f64)> {
        self.spec.terms().iter().map(|t| (t.coeff.eval(self.t0, &self.x0), t.p)).collect()
    }

    /// `g(lambda) = G(t0, x0, lambda)`.
    pub fn g(&self, lambda: f64) -> Result<f64> {
        eval_g(&self.spec, self.t0, &self.x0, lambda)
    }

    /// `g'(lambda)`.
    pub fn g_prime(&self, lambda: f64) -> f64 {
        self.frozen_terms()
            .iter()
            .map(|(c, p)| c * (0.5 * p + 1.0) * lambda.powf(0.5 * p))
            .sum()
    }

    /// `h(k) = e^{-k} g'(e^{-k}) = sum_j c_j (p_j/2+1) e^{-(p_j/2+1) k}`.
    pub fn h(&self, k: f64) -> f64 {
        self.frozen_terms()
            .iter()
            .map(|(c, p)| {
                let b = 0.5 * p + 1.0;
                c * b * (-b * k).exp()
            })
            .sum()
    }
}

/// `h(k)` of a profile.
pub fn eval_h(profile: &PotentialProfile, k: f64) -> f64 {
    profile.h(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mix() -> NonlinearitySpec {
        NonlinearitySpec::new(1, vec![PowerTerm::constant(4.0, 1.0), PowerTerm::constant(6.0, 1.0)])
            .unwrap()
    }

    #[test]
    fn admissibility_window() {
        assert!(check_admissible(&NonlinearitySpec::pure_power(1, 4.0).unwrap()).ok);
        let r = check_admissible(&NonlinearitySpec::pure_power(1, 2.0).unwrap());
        assert!(!r.ok);
        assert!(r.violations[0].contains("mass-critical"));
        let s = NonlinearitySpec::new(2, vec![PowerTerm::constant(2.0, 1.0), PowerTerm::constant(6.0, -1.0)])
            .unwrap();
        assert!(check_admissible(&s).ok);
        let s = NonlinearitySpec::with_upper_bound(3, vec![PowerTerm::constant(2.0, 1.0)], 5.0).unwrap();
        assert!(!check_admissible(&s).ok);
    }

    #[test]
    fn evaluations() {
        let s = NonlinearitySpec::pure_power(1, 4.0).unwrap();
        assert_eq!(eval_f(&s, 0.0, &[0.0], Complex64::new(2.0, 0.0)), Complex64::new(32.0, 0.0));
        assert_eq!(eval_f(&s, 0.0, &[0.0], Complex64::new(0.0, 0.0)), Complex64::new(0.0, 0.0));
        assert_eq!(eval_g(&s, 0.0, &[0.0], 2.0).unwrap(), 8.0);
        assert_eq!(eval_g(&s, 0.0, &[0.0], 0.0).unwrap(), 0.0);
        assert!(eval_g(&s, 0.0, &[0.0], -1.0).is_err());
        assert_eq!(eval_g(&mix(), 0.0, &[0.0], 1.0).unwrap(), 2.0);
    }

    #[test]
    fn gauge() {
        let s = mix();
        let u = Complex64::new(1.0, 1.0);
        let rot = Complex64::from_polar(1.0, 0.7);
        let a = eval_f(&s, 0.0, &[0.0], rot * u);
        let b = rot * eval_f(&s, 0.0, &[0.0], u);
        assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn deconvolution_target() {
        let p = PotentialProfile::new(NonlinearitySpec::pure_power(1, 4.0).unwrap(), 0.0, vec![0.0]).unwrap();
        assert_eq!(eval_h(&p, 0.0), 3.0);
        assert!(eval_h(&p, 20.0) < 1e-20);
        let q = PotentialProfile::new(mix(), 0.0, vec![0.0]).unwrap();
        assert_eq!(eval_h(&q, 0.0), 7.0);
    }

    #[test]
    fn bump_coefficient() {
        let c = Coefficient::Bump { c: 2.0, t_c: 1.0, tau: 2.0, x_c: vec![0.5], w: 1.0 };
        assert_eq!(c.eval(1.0, &[0.5]), 2.0);
        assert!((c.eval(3.0, &[1.5]) - 2.0 * (-2.0f64).exp()).abs() < 1e-15);
    }
}
