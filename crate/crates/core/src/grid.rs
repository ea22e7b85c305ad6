//! Uniform periodic grids, sampled complex fields and Lebesgue norms.

use crate::error::{invalid, Error, Result};
use num_complex::Complex64;

/// Uniform periodic grid on `center + [-L, L)^d`, `N` points per dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialGrid {
    dim: usize,
    half_extent: f64,
    points: usize,
    center: Vec<f64>,
}

impl SpatialGrid {
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn half_extent(&self) -> f64 {
        self.half_extent
    }
    pub fn points_per_dim(&self) -> usize {
        self.points
    }
    pub fn center(&self) -> &[f64] {
        &self.center
    }
    /// Grid spacing `2L/N`.
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_extent / self.points as f64
    }
    /// Volume element `dx^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }
    /// Total node count `N^d`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    /// One-dimensional node coordinates along axis `axis`.
    pub fn axis(&self, axis: usize) -> Vec<f64> {
        let h = self.spacing();
        let c = self.center[axis];
        (0..self.points).map(|j| c - self.half_extent + j as f64 * h).collect()
    }
    /// Coordinates of node `index` (row-major) written into `out`.
    pub fn node(&self, index: usize, out: &mut [f64]) {
        let h = self.spacing();
        let mut rem = index;
        for a in (0..self.dim).rev() {
            let j = rem % self.points;
            rem /= self.points;
            out[a] = self.center[a] - self.half_extent + j as f64 * h;
        }
    }
    /// All node coordinates, `dim` values per node.
    pub fn nodes(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len() * self.dim];
        for (i, chunk) in out.chunks_mut(self.dim).enumerate() {
            self.node(i, chunk);
        }
        out
    }
    /// Same grid shape moved to a new center.
    pub fn recentered(&self, center: &[f64]) -> Result<SpatialGrid> {
        make_grid_centered(self.dim, self.half_extent, self.points, center)
    }
}

/// Builds the grid `[-L, L)^d` with `N` points per axis.
pub fn make_grid(dim: usize, half_extent: f64, points_per_dim: usize) -> Result<SpatialGrid> {
    make_grid_centered(dim, half_extent, points_per_dim, &vec![0.0; dim])
}

/// Builds the grid `center + [-L, L)^d`.
pub fn make_grid_centered(
    dim: usize,
    half_extent: f64,
    points_per_dim: usize,
    center: &[f64],
) -> Result<SpatialGrid> {
    if !(1..=2).contains(&dim) {
        return invalid(format!("grid dimension must be 1 or 2, got {dim}"));
    }
    if !(half_extent > 0.0) || !half_extent.is_finite() {
        return invalid(format!("half extent must be positive, got {half_extent}"));
    }
    if points_per_dim < 16 || !points_per_dim.is_power_of_two() {
        return invalid(format!(
            "points per dimension must be a power of two >= 16, got {points_per_dim}"
        ));
    }
    if center.len() != dim || center.iter().any(|c| !c.is_finite()) {
        return invalid("grid center must have one finite coordinate per dimension");
    }
    Ok(SpatialGrid { dim, half_extent, points: points_per_dim, center: center.to_vec() })
}

/// Complex samples on a grid, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: SpatialGrid,
    values: Vec<Complex64>,
}

impl Field {
    pub fn new(grid: SpatialGrid, values: Vec<Complex64>) -> Result<Field> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return invalid("field values must be finite");
        }
        Ok(Field { grid, values })
    }

    pub fn zeros(grid: &SpatialGrid) -> Field {
        Field { grid: grid.clone(), values: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    /// Samples `f(x)` at every node.
    pub fn from_fn<F: FnMut(&[f64]) -> Complex64>(grid: &SpatialGrid, mut f: F) -> Field {
        let mut x = vec![0.0; grid.dim()];
        let values = (0..grid.len())
            .map(|i| {
                grid.node(i, &mut x);
                f(&x)
            })
            .collect();
        Field { grid: grid.clone(), values }
    }

    pub(crate) fn from_raw(grid: SpatialGrid, values: Vec<Complex64>) -> Field {
        debug_assert_eq!(values.len(), grid.len());
        Field { grid, values }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn scaled(&self, s: Complex64) -> Field {
        Field { grid: self.grid.clone(), values: self.values.iter().map(|v| v * s).collect() }
    }

    /// `self - other`, erroring on mismatched grids.
    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.check_same(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Field { grid: self.grid.clone(), values })
    }

    /// L2 inner product, linear in `self` and conjugate-linear in `other`.
    pub fn inner(&self, other: &Field) -> Result<Complex64> {
        self.check_same(other)?;
        let s: Complex64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b.conj()).sum();
        Ok(s * self.grid.cell_volume())
    }

    /// Squared L2 norm.
    pub fn mass(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn max_abs_diff(&self, other: &Field) -> Result<f64> {
        self.check_same(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }

    fn check_same(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("fields live on different grids".into()));
        }
        Ok(())
    }
}

/// Time-indexed frames on one grid.
#[derive(Clone, Debug)]
pub struct Trajectory {
    times: Vec<f64>,
    frames: Vec<Field>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, frames: Vec<Field>) -> Result<Trajectory> {
        if times.len() != frames.len() {
            return invalid("trajectory needs one time per frame");
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("trajectory times must be strictly increasing");
        }
        if let Some(first) = frames.first() {
            if frames.iter().any(|f| f.grid() != first.grid()) {
                return Err(Error::GridMismatch("trajectory frames on different grids".into()));
            }
        }
        Ok(Trajectory { times, frames })
    }
    pub fn times(&self) -> &[f64] {
        &self.times
    }
    pub fn frames(&self) -> &[Field] {
        &self.frames
    }
    pub fn last(&self) -> Option<&Field> {
        self.frames.last()
    }
    pub fn into_last(self) -> Option<Field> {
        self.frames.into_iter().last()
    }
    pub fn len(&self) -> usize {
        self.times.len()
    }
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Exponents of `L^q_t L^r_x`; use `f64::INFINITY` for sup norms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpaceTimeExponents {
    pub q: f64,
    pub r: f64,
}

impl SpaceTimeExponents {
    pub fn new(q: f64, r: f64) -> Result<Self> {
        if !(q >= 1.0) || !(r >= 1.0) {
            return invalid(format!("exponents must be >= 1, got q={q}, r={r}"));
        }
        Ok(SpaceTimeExponents { q, r })
    }

    /// The diagonal space `L^{2(d+2)/d}_{t,x}`.
    pub fn strichartz_diagonal(d: usize) -> Self {
        let e = 2.0 * (d as f64 + 2.0) / d as f64;
        SpaceTimeExponents { q: e, r: e }
    }

    /// The space `L^{p(d+2)/2}_{t,x}` matched to exponent `p`.
    pub fn power_space(d: usize, p: f64) -> Self {
        let e = p * (d as f64 + 2.0) / 2.0;
        SpaceTimeExponents { q: e, r: e }
    }
}

/// The standard Gaussian `exp(-|x|^2/4)` sampled on `grid`.
pub fn sample_gaussian(grid: &SpatialGrid) -> Field {
    Field::from_fn(grid, |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        Complex64::new((-r2 / 4.0).exp(), 0.0)
    })
}

fn norm_of_moduli<I: Iterator<Item = f64>>(moduli: I, r: f64, weight: f64) -> f64 {
    if r.is_infinite() {
        moduli.fold(0.0, f64::max)
    } else if r == 2.0 {
        (moduli.map(|m| m * m).sum::<f64>() * weight).sqrt()
    } else {
        (moduli.map(|m| m.powf(r)).sum::<f64>() * weight).powf(1.0 / r)
    }
}

/// `(sum |u_j|^r dx^d)^(1/r)`, or the max modulus for `r = inf`.
pub fn lebesgue_norm(field: &Field, r: f64) -> Result<f64> {
    if !(r >= 1.0) {
        return invalid(format!("Lebesgue exponent must be >= 1, got {r}"));
    }
    Ok(norm_of_moduli(field.values().iter().map(|v| v.norm()), r, field.grid().cell_volume()))
}

/// `|| ||u(t)||_{L^r_x} ||_{L^q_t}`, trapezoid rule in time.
///
/// A single frame is treated as constant over a unit time window.
pub fn spacetime_norm(traj: &Trajectory, exps: SpaceTimeExponents) -> Result<f64> {
    if traj.is_empty() {
        return invalid("space-time norm of an empty trajectory");
    }
    let SpaceTimeExponents { q, r } = SpaceTimeExponents::new(exps.q, exps.r)?;
    let spatial: Vec<f64> =
        traj.frames().iter().map(|f| lebesgue_norm(f, r)).collect::<Result<_>>()?;
    if q.is_infinite() {
        return Ok(spatial.iter().cloned().fold(0.0, f64::max));
    }
    if spatial.len() == 1 {
        return Ok(spatial[0]);
    }
    let t = traj.times();
    let mut acc = 0.0;
    for i in 0..spatial.len() - 1 {
        acc += 0.5 * (t[i + 1] - t[i]) * (spatial[i].powf(q) + spatial[i + 1].powf(q));
    }
    Ok(acc.powf(1.0 / q))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_construction() {
        let g = make_grid(1, 40.0, 4096).unwrap();
        assert!((g.spacing() - 0.01953125).abs() < 1e-15);
        assert!(make_grid(1, 40.0, 4095).is_err());
        assert!(make_grid(1, -1.0, 64).is_err());
        assert!(make_grid(1, 1.0, 8).is_err());
        assert_eq!(make_grid(2, 20.0, 256).unwrap().len(), 65536);
        assert_eq!(g.axis(0)[0], -40.0);
    }

    #[test]
    fn gaussian_samples() {
        let g = make_grid(1, 32.0, 4096).unwrap();
        let psi = sample_gaussian(&g);
        assert_eq!(psi.values()[2048].re, 1.0);
        // x = 2 is node 2048 + 2/dx
        let j = 2048 + (2.0 / g.spacing()) as usize;
        assert!((psi.values()[j].re - (-1.0f64).exp()).abs() < 1e-15);
        let n2 = lebesgue_norm(&psi, 2.0).unwrap();
        assert!((n2 - (2.0 * std::f64::consts::PI).powf(0.25)).abs() < 1e-12);
    }

    #[test]
    fn constant_field_l1() {
        let g = make_grid(1, 3.0, 64).unwrap();
        let f = Field::from_fn(&g, |_| Complex64::new(0.0, -2.0));
        assert!((lebesgue_norm(&f, 1.0).unwrap() - 12.0).abs() < 1e-12);
        assert!(lebesgue_norm(&f, 0.5).is_err());
        assert_eq!(lebesgue_norm(&Field::zeros(&g), 3.0).unwrap(), 0.0);
    }

    #[test]
    fn node_coordinates_row_major() {
        let g = make_grid_centered(2, 1.0, 16, &[5.0, -3.0]).unwrap();
        let mut x = [0.0; 2];
        g.node(16 + 3, &mut x);
        assert_eq!(x, [5.0 - 1.0 + 0.125, -3.0 - 1.0 + 3.0 * 0.125]);
    }

    #[test]
    fn single_frame_spacetime() {
        let g = make_grid(1, 10.0, 256).unwrap();
        let psi = sample_gaussian(&g);
        let tr = Trajectory::new(vec![0.0], vec![psi.clone()]).unwrap();
        let e = SpaceTimeExponents::new(6.0, 6.0).unwrap();
        assert_eq!(spacetime_norm(&tr, e).unwrap(), lebesgue_norm(&psi, 6.0).unwrap());
        let empty = Trajectory::new(vec![], vec![]).unwrap();
        assert!(spacetime_norm(&empty, e).is_err());
    }
}
