//! Complex Gamma function by the Lanczos approximation (g = 7, 9 terms).

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

const G: f64 = 7.0;
const COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

fn is_pole(z: Complex64) -> bool {
    z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round()
}

/// `ln Gamma(z)` for `Re z >= 1/2`.
fn ln_gamma_right(z: Complex64) -> Complex64 {
    let z = z - 1.0;
    let mut x = Complex64::new(COEF[0], 0.0);
    for (i, c) in COEF.iter().enumerate().skip(1) {
        x += c / (z + i as f64);
    }
    let t = z + G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + x.ln()
}

/// `ln sin(pi z)`, stable for large `|Im z|`.
fn ln_sin_pi(z: Complex64) -> Complex64 {
    let i = Complex64::i();
    if z.im.abs() < 20.0 {
        return (z * PI).sin().ln();
    }
    // sin(pi z) = (e^{i pi z} - e^{-i pi z}) / 2i; factor out the dominant exponential.
    if z.im > 0.0 {
        -i * PI * z + (0.5 * i).ln() + (1.0 - (2.0 * i * PI * z).exp()).ln()
    } else {
        i * PI * z + (-0.5 * i).ln() + (1.0 - (-2.0 * i * PI * z).exp()).ln()
    }
}

/// Principal-sheet `ln Gamma(z)` up to multiples of `2 pi i`; suitable for exponentiation and
/// for differences of nearby arguments.
pub fn ln_gamma(z: Complex64) -> Result<Complex64> {
    if is_pole(z) {
        return Err(Error::Pole(format!("{z}")));
    }
    if z.re < 0.5 {
        Ok(Complex64::new(PI.ln(), 0.0) - ln_sin_pi(z) - ln_gamma_right(1.0 - z))
    } else {
        Ok(ln_gamma_right(z))
    }
}

/// `Gamma(z)`; reflection `Gamma(z) Gamma(1-z) = pi / sin(pi z)` for `Re z < 1/2`.
pub fn complex_gamma(z: Complex64) -> Result<Complex64> {
    if is_pole(z) {
        return Err(Error::Pole(format!("{z}")));
    }
    if z.re < 0.5 && z.im.abs() < 20.0 {
        let s = (z * PI).sin();
        return Ok(PI / (s * ln_gamma_right(1.0 - z).exp()));
    }
    Ok(ln_gamma(z)?.exp())
}

/// Real `Gamma(x)`.
pub fn gamma(x: f64) -> Result<f64> {
    Ok(complex_gamma(Complex64::new(x, 0.0))?.re)
}

/// `Gamma(a) / Gamma(b)` through log-gamma differences (no overflow for large `|Im|`).
pub fn gamma_ratio(a: Complex64, b: Complex64) -> Result<Complex64> {
    if is_pole(a) {
        return Err(Error::Pole(format!("{a}")));
    }
    if is_pole(b) {
        return Ok(Complex64::new(0.0, 0.0));
    }
    Ok((ln_gamma(a)? - ln_gamma(b)?).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn classical_values() {
        assert!((complex_gamma(c(1.0, 0.0)).unwrap() - 1.0).norm() < 1e-14);
        assert!((gamma(0.5).unwrap() - PI.sqrt()).abs() < 1e-14);
        assert!((gamma(5.0).unwrap() - 24.0).abs() < 1e-12);
        assert!((gamma(-0.5).unwrap() + 2.0 * PI.sqrt()).abs() < 1e-13);
        assert!(complex_gamma(c(-3.0, 0.0)).is_err());
        assert!(complex_gamma(c(0.0, 0.0)).is_err());
    }

    #[test]
    fn recurrence() {
        for z in [c(2.3, 1.7), c(0.2, -3.0), c(-2.7, 0.4), c(4.0, 40.0), c(-1.3, -25.0)] {
            let r = complex_gamma(z + 1.0).unwrap() / (z * complex_gamma(z).unwrap());
            assert!((r - 1.0).norm() < 1e-12, "{z}: {r}");
        }
    }

    #[test]
    fn modulus_on_imaginary_axis() {
        // |Gamma(iy)|^2 = pi / (y sinh(pi y))
        for y in [0.5, 2.0, 7.0] {
            let g = complex_gamma(c(0.0, y)).unwrap();
            let exact = PI / (y * (PI * y).sinh());
            assert!((g.norm_sqr() / exact - 1.0).abs() < 1e-12);
        }
    }
}
