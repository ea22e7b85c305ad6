use num_complex::Complex64;
use proptest::prelude::*;
use scatinv_core::laplace::gamma::*;
use scatinv_core::laplace::*;
use scatinv_core::mu::MuExact;
use scatinv_core::Execution;
use std::f64::consts::PI;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `int int |e^{it Laplacian} psi|^{2z} dx dt` in one dimension by a 2-D midpoint rule
/// over `t = tan theta`, `x = sqrt(1+t^2) y`.
fn power_integral_1d(z: f64) -> f64 {
    let (nt, ny) = (4000, 4000);
    let ymax = 12.0;
    let ht = PI / nt as f64;
    let hy = 2.0 * ymax / ny as f64;
    let mut acc = 0.0;
    for i in 0..nt {
        let th = -0.5 * PI + (i as f64 + 0.5) * ht;
        let t = th.tan();
        let q = 1.0 + t * t;
        let jac = q * q.sqrt();
        let mut row = 0.0;
        for j in 0..ny {
            let y = -ymax + (j as f64 + 0.5) * hy;
            let intensity = q.powf(-0.5) * (-y * y / 2.0).exp();
            row += intensity.powf(z);
        }
        acc += row * hy * jac;
    }
    acc * ht
}

#[test]
fn gamma_values() {
    assert!((gamma(1.0).unwrap() - 1.0).abs() < 1e-14);
    assert!((gamma(0.5).unwrap() - PI.sqrt()).abs() < 1e-13);
    assert!((gamma(5.0).unwrap() - 24.0).abs() < 1e-11);
    let z = c(2.3, 1.7);
    let r = complex_gamma(z + 1.0).unwrap() / (z * complex_gamma(z).unwrap());
    assert!((r - 1.0).norm() < 1e-12);
    assert!(complex_gamma(c(-2.0, 0.0)).is_err());
    assert!(complex_gamma(c(0.0, 0.0)).is_err());
}

#[test]
fn beta_integral() {
    for cc in [1.0, 1.5, 2.5] {
        // int (1+t^2)^{-c} dt = int cos^{2c-2} theta d theta
        let n = 200_000;
        let h = PI / n as f64;
        let direct: f64 = (0..n).map(|i| ((-0.5 * PI + (i as f64 + 0.5) * h).cos()).powf(2.0 * cc - 2.0)).sum::<f64>() * h;
        let closed = PI.sqrt() * gamma(cc - 0.5).unwrap() / gamma(cc).unwrap();
        assert!((direct - closed).abs() < 1e-8, "{cc}: {direct} {closed}");
    }
}

#[test]
fn m_closed_values() {
    let m3 = m_closed(1, c(3.0, 0.0)).unwrap();
    let exact = 2f64.sqrt() * PI.powf(1.5) / 3f64.powf(1.5);
    assert!((m3.re - exact).abs() < 1e-13 && m3.im == 0.0);
    assert!((m3.re - 1.515510).abs() < 5e-6);
    assert!(m_closed(1, c(2.001, 0.0)).unwrap().re > 100.0 * m3.re);
    assert!(m_closed(1, c(0.0, 0.0)).is_err());
}

#[test]
fn power_integrals_match_laplace_values() {
    for z in [3.0, 4.0, 5.0] {
        let direct = power_integral_1d(z);
        let zm = z * m_closed(1, c(z, 0.0)).unwrap().re;
        assert!((direct / zm - 1.0).abs() < 1e-6, "{z}: {direct} {zm}");
    }
}

fn six_points(d: usize) -> Vec<Complex64> {
    let a = bounds_abscissa(d);
    vec![c(a, 0.0), c(a, 1.0), c(a + 0.5, -3.0), c(a + 1.0, 7.5), c(a + 2.0, 0.0), c(2.0 * a + 1.0, -15.0)]
}

#[test]
fn quadrature_matches_closed_form() {
    for d in 1..=3 {
        let mu = MuExact { d };
        for z in six_points(d) {
            let q = m_quadrature(z, &mu).unwrap();
            let e = m_closed(d, z).unwrap();
            assert!(((q - e) / e).norm() <= 1e-6, "d={d} z={z}: {q} {e}");
        }
    }
    let q = m_quadrature(c(2.5, 0.0), &MuExact { d: 2 }).unwrap();
    assert!((q / m_closed(2, c(2.5, 0.0)).unwrap() - 1.0).norm() <= 1e-6);
    let q = m_quadrature(c(2.05, 0.0), &MuExact { d: 1 }).unwrap();
    assert!((q / m_closed(1, c(2.05, 0.0)).unwrap() - 1.0).norm() <= 1e-4);
    assert!(m_quadrature(c(2.0, 0.0), &MuExact { d: 1 }).is_err());
}

#[test]
fn decay_bounds() {
    let mut grid = Vec::new();
    for re in [2.5, 3.0, 5.0] {
        for im in [0.0, 1.0, -1.0, 10.0, -10.0, 100.0, -100.0] {
            grid.push(c(re, im));
        }
    }
    let r = check_bounds(1, &grid).unwrap();
    assert!(r.pass && r.ratio() <= BOUNDS_FACTOR);
    let one = check_bounds(1, &[c(3.0, 2.0)]).unwrap();
    assert!(one.pass && one.ratio() == 1.0);
    let g3: Vec<Complex64> = grid.iter().map(|z| z - 1.0).collect();
    assert!(check_bounds(3, &g3).unwrap().pass);
    assert!(check_bounds(1, &[c(2.2, 0.0)]).is_err());
}

#[test]
fn outer_criterion_cases() {
    let xs = [0.0, 0.5, 1.0, 2.0, 4.0];
    let opts = LineIntegralOptions::default();
    let e = Execution::default();
    let r = outer_criterion(1, 2.5, 3, &xs, opts, e).unwrap();
    assert!(r.pass && r.weight_condition);
    let weak = outer_criterion(1, 2.5, 1, &xs, opts, e).unwrap();
    assert!(!weak.pass && !weak.weight_condition);
    // at d = 2 the weight power must exceed 3
    let border = outer_criterion(2, 1.75, 3, &xs, opts, e).unwrap();
    assert!(!border.weight_condition && !border.pass);
    let above = outer_criterion(2, 1.75, 4, &xs, opts, e).unwrap();
    assert!(above.pass && above.weight_condition);
    assert!(outer_criterion(1, 2.0, 3, &xs, opts, e).is_err());
    assert!(outer_criterion(1, 2.5, 0, &xs, opts, e).is_err());
    assert!(outer_criterion(1, 2.5, 3, &[-1.0], opts, e).is_err());
}

#[test]
fn weighted_weight_is_square_integrable() {
    let r = weighted_square_norm(2.5, &MuExact { d: 1 }, LineIntegralOptions::default());
    assert!(r.stable && r.value.is_finite() && r.value > 0.0);
}

proptest! {
    #[test]
    fn gamma_ratio_inequality(re in 0.0..20.0f64, im in -50.0..50.0f64, k in 0usize..3) {
        let alpha = [0.25, 0.5, 1.0][k];
        let z = c(re.max(0.5 * (1.0 - alpha)), im);
        prop_assume!(z.norm() > 1e-6);
        let r = gamma_ratio(z + alpha, z).unwrap().norm();
        prop_assert!(r <= z.norm().powf(alpha) * (1.0 + 1e-12));
    }

    #[test]
    fn recurrence(re in -5.0..10.0f64, im in 0.1..40.0f64) {
        let z = c(re, im);
        let r = gamma_ratio(z + 1.0, z).unwrap();
        prop_assert!((r / z - 1.0).norm() < 1e-10);
    }
}
