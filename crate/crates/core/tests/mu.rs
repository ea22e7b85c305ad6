use proptest::prelude::*;
use scatinv_core::mu::*;
use scatinv_core::Execution;

/// `mu(lambda)` in one dimension as `int 2 x(t) dt`, with `x(t)` the half-width of the
/// superlevel slice at time `t`; midpoint rule in `t`.
fn mu_slices_1d(lambda: f64) -> f64 {
    let s = -lambda.ln();
    let ts = (2.0 * s).exp_m1().sqrt();
    let n = 400_000;
    let h = 2.0 * ts / n as f64;
    (0..n)
        .map(|i| {
            let t = -ts + (i as f64 + 0.5) * h;
            let q = 1.0 + t * t;
            let r = s - 0.5 * q.ln();
            if r > 0.0 { 2.0 * (2.0 * q * r).sqrt() } else { 0.0 }
        })
        .sum::<f64>()
        * h
}

#[test]
fn support_law() {
    for d in 1..=3 {
        assert_eq!(mu_quadrature(d, 1.0).unwrap(), 0.0);
        assert_eq!(mu_quadrature(d, 1.5).unwrap(), 0.0);
    }
}

#[test]
fn quadrature_matches_slice_integral() {
    for l in [0.9, 0.5, 0.1, 1e-3] {
        let a = mu_quadrature(1, l).unwrap();
        let b = mu_slices_1d(l);
        assert!((a / b - 1.0).abs() < 1e-6, "{l}: {a} {b}");
    }
}

#[test]
fn monte_carlo_cross_check() {
    let (est, se) = mu_monte_carlo(1, 0.5, 2_000_000, 7, Execution::default()).unwrap();
    let q = mu_quadrature(1, 0.5).unwrap();
    assert!((est - q).abs() <= 3.0 * se, "{est} {q} {se}");
    let (near, se1) = mu_monte_carlo(1, 0.999, 200_000, 7, Execution::default()).unwrap();
    assert!(near <= 3.0 * se1 + mu_quadrature(1, 0.999).unwrap());
    assert!(mu_monte_carlo(1, 1.0, 200_000, 7, Execution::default()).is_err());
}

#[test]
fn monte_carlo_is_mode_independent() {
    let a = mu_monte_carlo(2, 0.3, 300_000, 11, Execution::Sequential).unwrap();
    let b = mu_monte_carlo(2, 0.3, 300_000, 11, Execution::Parallel).unwrap();
    assert_eq!(a, b);
}

#[test]
fn default_table() {
    let grid = default_lambda_grid(200, 1e-6);
    assert_eq!(grid.len(), 200);
    assert_eq!(grid[0], 1.0);
    assert!((grid[199] - 1e-6).abs() < 1e-18);
    let t = MuTable::quadrature(1, &grid, Execution::default()).unwrap();
    assert_eq!(t.values[0], 0.0);
    assert!(t.is_monotone());
    assert!(t.values.iter().all(|v| *v >= 0.0));
    // interpolation between nodes stays close to direct evaluation
    for l in [0.93, 0.42, 3.3e-3, 2e-6] {
        let a = t.mu(l);
        let b = mu_quadrature(1, l).unwrap();
        assert!((a / b - 1.0).abs() < 1e-3, "{l}: {a} {b}");
    }
    // beyond the table the continuation follows the power law
    let far = 1e-9;
    assert!((t.mu(far) / mu_quadrature(1, far).unwrap() - 1.0).abs() < 1e-2);
}

#[test]
fn growth_is_logarithmic_at_most() {
    for d in 1..=3 {
        let g = growth_diagnostic(d, &default_lambda_grid(40, 1e-6)[1..]).unwrap();
        assert!(g.is_finite() && g < 1e3);
    }
}

#[test]
fn bounding_box_contains_superlevel_set() {
    for d in 1..=3 {
        let (ts, xm) = bounding_box(d, 0.2);
        let s = -(0.2f64).ln();
        // at the box edges the intensity is at most lambda
        let at_t = 0.5 * d as f64 * (1.0 + ts * ts).ln();
        assert!(at_t >= s - 1e-12);
        let q: f64 = 1.0;
        assert!(xm * xm / (2.0 * q) >= s - 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn monotone_in_lambda(a in 1e-6..1.0f64, b in 1e-6..1.0f64, d in 1usize..4) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(mu_quadrature(d, lo).unwrap() >= mu_quadrature(d, hi).unwrap());
    }
}
