//! Free Schrodinger flow `e^{it Laplacian}`: spectral multiplier and Gaussian closed form.

use crate::grid::{Field, SpatialGrid};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Wavenumbers `xi_m = pi m / L` in transform order (`0, 1, .., N/2-1, -N/2, .., -1`).
#[derive(Clone, Debug)]
pub struct FrequencyGrid {
    dim: usize,
    points: usize,
    axis: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(grid: &SpatialGrid) -> Self {
        let n = grid.points_per_dim();
        let k0 = std::f64::consts::PI / grid.half_extent();
        let axis = (0..n)
            .map(|j| {
                let m = if j < n / 2 { j as isize } else { j as isize - n as isize };
                k0 * m as f64
            })
            .collect();
        FrequencyGrid { dim: grid.dim(), points: n, axis }
    }

    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    /// `|xi|^2` for every mode, row-major.
    pub fn squared_norms(&self) -> Vec<f64> {
        match self.dim {
            1 => self.axis.iter().map(|k| k * k).collect(),
            _ => {
                let mut out = Vec::with_capacity(self.points * self.points);
                for a in &self.axis {
                    for b in &self.axis {
                        out.push(a * a + b * b);
                    }
                }
                out
            }
        }
    }
}

/// FFT plans and scratch space for one grid shape. Not shared between workers.
pub struct Spectral {
    dim: usize,
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    column: Vec<Complex64>,
    xi2: Vec<f64>,
}

impl Spectral {
    pub fn new(grid: &SpatialGrid) -> Self {
        let n = grid.points_per_dim();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        Spectral {
            dim: grid.dim(),
            n,
            fwd,
            inv,
            scratch: vec![Complex64::new(0.0, 0.0); len],
            column: vec![Complex64::new(0.0, 0.0); if grid.dim() == 2 { n * n } else { 0 }],
            xi2: FrequencyGrid::new(grid).squared_norms(),
        }
    }

    /// `|xi|^2` per mode in transform order.
    pub fn xi2(&self) -> &[f64] {
        &self.xi2
    }

    /// Unnormalized forward transform in place.
    pub fn forward(&mut self, data: &mut [Complex64]) {
        let plan = self.fwd.clone();
        self.apply(&*plan, data);
    }

    /// Inverse transform in place, including the `1/N^d` normalization.
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        let plan = self.inv.clone();
        self.apply(&*plan, data);
        let s = 1.0 / data.len() as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }

    fn apply(&mut self, plan: &dyn Fft<f64>, data: &mut [Complex64]) {
        plan.process_with_scratch(data, &mut self.scratch);
        if self.dim == 2 {
            let n = self.n;
            transpose(data, &mut self.column, n);
            plan.process_with_scratch(&mut self.column, &mut self.scratch);
            transpose(&self.column, data, n);
        }
    }

    /// Multiplies the spectrum of `data` by `m(|xi|^2)`.
    pub fn multiply<F: Fn(f64) -> Complex64>(&mut self, data: &mut [Complex64], m: F) {
        self.forward(data);
        for (v, k2) in data.iter_mut().zip(&self.xi2) {
            *v *= m(*k2);
        }
        self.inverse(data);
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in 0..n {
            dst[j * n + i] = src[i * n + j];
        }
    }
}

/// Linear step `e^{i dt Laplacian}` with a cached multiplier.
pub struct LinearStep {
    spectral: Spectral,
    multiplier: Vec<Complex64>,
}

impl LinearStep {
    pub fn new(grid: &SpatialGrid, dt: f64) -> Self {
        let spectral = Spectral::new(grid);
        let multiplier =
            spectral.xi2().iter().map(|k2| Complex64::from_polar(1.0, -k2 * dt)).collect();
        LinearStep { spectral, multiplier }
    }

    pub fn apply(&mut self, data: &mut [Complex64]) {
        self.spectral.forward(data);
        for (v, m) in data.iter_mut().zip(&self.multiplier) {
            *v *= m;
        }
        self.spectral.inverse(data);
    }
}

/// `e^{it Laplacian} field` via the multiplier `e^{-i|xi|^2 t}`.
pub fn free_propagate(field: &Field, t: f64) -> Field {
    if t == 0.0 {
        return field.clone();
    }
    let mut sp = Spectral::new(field.grid());
    let mut values = field.values().to_vec();
    sp.multiply(&mut values, |k2| Complex64::from_polar(1.0, -k2 * t));
    Field::from_raw(field.grid().clone(), values)
}

/// Bessel-potential norm `|| <grad>^s u ||_{L^2}`, computed spectrally.
pub fn bessel_norm(field: &Field, s: f64) -> f64 {
    let mut sp = Spectral::new(field.grid());
    let mut values = field.values().to_vec();
    sp.forward(&mut values);
    let total: f64 =
        values.iter().zip(sp.xi2()).map(|(v, k2)| v.norm_sqr() * (1.0 + k2).powf(s)).sum();
    (total * field.grid().cell_volume() / field.values().len() as f64).sqrt()
}

/// `e^{it Laplacian} psi (x) = (1+it)^{-d/2} exp(-|x|^2 / (4(1+it)))`, principal branch.
pub fn gaussian_exact(d: usize, t: f64, x: &[f64]) -> Complex64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    gaussian_exact_r2(d, t, r2)
}

pub(crate) fn gaussian_exact_r2(d: usize, t: f64, r2: f64) -> Complex64 {
    let w = Complex64::new(1.0, t);
    (-(d as f64) * 0.5 * w.ln() - r2 / (4.0 * w)).exp()
}

/// `|e^{it Laplacian} psi|^2 = (1+t^2)^{-d/2} exp(-|x|^2 / (2(1+t^2)))`.
pub fn gaussian_intensity(d: usize, t: f64, r2: f64) -> f64 {
    let s = 1.0 + t * t;
    s.powf(-0.5 * d as f64) * (-r2 / (2.0 * s)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{lebesgue_norm, make_grid, sample_gaussian};

    #[test]
    fn identity_and_unitarity() {
        let g = make_grid(1, 40.0, 1024).unwrap();
        let psi = sample_gaussian(&g);
        assert_eq!(free_propagate(&psi, 0.0), psi);
        let u = free_propagate(&psi, 3.7);
        let a = lebesgue_norm(&u, 2.0).unwrap();
        let b = lebesgue_norm(&psi, 2.0).unwrap();
        assert!((a - b).abs() < 1e-12 * b);
    }

    #[test]
    fn closed_form_values() {
        assert!((gaussian_exact(1, 1.0, &[0.0]).norm() - 2f64.powf(-0.25)).abs() < 1e-15);
        assert_eq!(gaussian_exact(1, 0.0, &[2.0]).re, (-1.0f64).exp());
        assert!((gaussian_intensity(1, 1.0, 0.0) - 0.5f64.sqrt()).abs() < 1e-15);
        let z = gaussian_exact(2, 2.5, &[0.3, -1.0]);
        assert!((z.norm_sqr() - gaussian_intensity(2, 2.5, 0.09 + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn grid_flow_matches_closed_form_2d() {
        let g = make_grid(2, 16.0, 128).unwrap();
        let psi = sample_gaussian(&g);
        let u = free_propagate(&psi, 1.0);
        let exact = Field::from_fn(&g, |x| gaussian_exact(2, 1.0, x));
        assert!(u.max_abs_diff(&exact).unwrap() < 1e-9);
    }

    #[test]
    fn bessel_norm_of_gaussian() {
        // ||psi||_{H^1}^2 = ||psi||^2 + ||psi'||^2 = sqrt(2 pi) (1 + 1/4)
        let g = make_grid(1, 40.0, 1024).unwrap();
        let psi = sample_gaussian(&g);
        let n = bessel_norm(&psi, 1.0);
        let exact = ((2.0 * std::f64::consts::PI).sqrt() * 1.25).sqrt();
        assert!((n - exact).abs() < 1e-12);
    }
}
