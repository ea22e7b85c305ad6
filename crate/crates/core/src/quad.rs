//! Quadrature rules: adaptive Gauss-Kronrod (7/15) and fixed Gauss-Legendre.

use num_complex::Complex64;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Values that can be integrated: reals and complex numbers.
pub trait QuadValue:
    Copy
    + Send
    + Sync
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<f64, Output = Self>
{
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

/// Outcome of an adaptive integration.
#[derive(Clone, Copy, Debug)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: f64,
    pub converged: bool,
    pub evaluations: usize,
}

/// Tolerances for [`integrate`].
#[derive(Clone, Copy, Debug)]
pub struct QuadTol {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for QuadTol {
    fn default() -> Self {
        QuadTol { abs: 1e-13, rel: 1e-11, max_intervals: 2000 }
    }
}

fn gk15<T: QuadValue, F: FnMut(f64) -> T>(f: &mut F, a: f64, b: f64) -> (T, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k = k + s * WGK[j];
        if j % 2 == 1 {
            g = g + s * WG[j / 2];
        }
    }
    let k = k * h;
    let g = g * h;
    (k, (k - g).magnitude())
}

struct Piece<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

impl<T> PartialEq for Piece<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T> Eq for Piece<T> {}
impl<T> PartialOrd for Piece<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Piece<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss-Kronrod integration of `f` over `[a, b]`.
pub fn integrate<T: QuadValue, F: FnMut(f64) -> T>(
    mut f: F,
    a: f64,
    b: f64,
    tol: QuadTol,
) -> QuadResult<T> {
    integrate_breaks(&mut f, &[a, b], tol)
}

/// Like [`integrate`] but starting from the given break points.
pub fn integrate_breaks<T: QuadValue, F: FnMut(f64) -> T>(
    f: &mut F,
    breaks: &[f64],
    tol: QuadTol,
) -> QuadResult<T> {
    let mut heap = BinaryHeap::new();
    let mut total = T::zero();
    let mut err = 0.0;
    for w in breaks.windows(2) {
        let (v, e) = gk15(f, w[0], w[1]);
        total = total + v;
        err += e;
        heap.push(Piece { a: w[0], b: w[1], value: v, error: e });
    }
    let mut evals = 15 * heap.len();
    while err > tol.abs.max(tol.rel * total.magnitude()) {
        if heap.len() >= tol.max_intervals {
            return QuadResult { value: total, error: err, converged: false, evaluations: evals };
        }
        let worst = heap.pop().expect("non-empty");
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            heap.push(worst);
            return QuadResult { value: total, error: err, converged: false, evaluations: evals };
        }
        let (v1, e1) = gk15(f, worst.a, m);
        let (v2, e2) = gk15(f, m, worst.b);
        evals += 30;
        total = total - worst.value + v1 + v2;
        err += e1 + e2 - worst.error;
        heap.push(Piece { a: worst.a, b: m, value: v1, error: e1 });
        heap.push(Piece { a: m, b: worst.b, value: v2, error: e2 });
    }
    // Re-sum to shed accumulated cancellation in the running totals.
    let mut value = T::zero();
    let mut error = 0.0;
    for p in heap.iter() {
        value = value + p.value;
        error += p.error;
    }
    QuadResult { value, error, converged: true, evaluations: evals }
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Gauss-Legendre nodes and weights mapped to consecutive panels.
pub fn composite_gauss(breaks: &[f64], order: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(order);
    let mut nodes = Vec::with_capacity(order * breaks.len());
    let mut weights = Vec::with_capacity(order * breaks.len());
    for p in breaks.windows(2) {
        let c = 0.5 * (p[0] + p[1]);
        let h = 0.5 * (p[1] - p[0]);
        for (xi, wi) in x.iter().zip(&w) {
            nodes.push(c + h * xi);
            weights.push(h * wi);
        }
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gk_polynomial_and_smooth() {
        let r = integrate(|x: f64| x.powi(5) - 3.0 * x * x, 0.0, 2.0, QuadTol::default());
        assert!((r.value - (64.0 / 6.0 - 8.0)).abs() < 1e-12);
        let r = integrate(|x: f64| (-x * x).exp(), -10.0, 10.0, QuadTol::default());
        assert!((r.value - std::f64::consts::PI.sqrt()).abs() < 1e-12);
        assert!(r.converged);
    }

    #[test]
    fn gk_endpoint_singularity() {
        let r = integrate(|x: f64| x.sqrt(), 0.0, 1.0, QuadTol::default());
        assert!((r.value - 2.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn gk_complex() {
        let r = integrate(|x: f64| Complex64::new(0.0, x).exp(), 0.0, 1.0, QuadTol::default());
        let exact = (Complex64::new(0.0, 1.0).exp() - 1.0) / Complex64::new(0.0, 1.0);
        assert!((r.value - exact).norm() < 1e-13);
    }

    #[test]
    fn legendre_exact_degree() {
        let (x, w) = gauss_legendre(10);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert!((s - 2.0 / 19.0).abs() < 1e-14);
        let sw: f64 = w.iter().sum();
        assert!((sw - 2.0).abs() < 1e-14);
    }
}
