//! Small numerical helpers shared by the phase-space engine.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

/// Neumaier-compensated accumulator for complex sums.
///
/// Sums over ring-approximation components mix weights of size `1/eps^k`
/// with alternating signs, so plain summation loses most significant digits.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    re: f64,
    re_c: f64,
    im: f64,
    im_c: f64,
}

#[inline]
fn neumaier(sum: &mut f64, comp: &mut f64, x: f64) {
    let t = *sum + x;
    if sum.abs() >= x.abs() {
        *comp += (*sum - t) + x;
    } else {
        *comp += (x - t) + *sum;
    }
    *sum = t;
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, z: Complex64) {
        neumaier(&mut self.re, &mut self.re_c, z.re);
        neumaier(&mut self.im, &mut self.im_c, z.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re + self.re_c, self.im + self.im_c)
    }
}

impl FromIterator<Complex64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = Complex64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for z in iter {
            acc.add(z);
        }
        acc
    }
}

/// Compensated sum of complex values.
pub fn csum<I: IntoIterator<Item = Complex64>>(iter: I) -> Complex64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// Real part of `z` after checking `|Im z| <= tol * (1 + |Re z|)`.
pub fn real_checked(z: Complex64, tol: f64) -> crate::Result<f64> {
    if z.im.abs() > tol * (1.0 + z.re.abs()) {
        return Err(crate::Error::RealityViolation {
            imag: z.im,
            real: z.re,
        });
    }
    Ok(z.re)
}

/// Block-diagonal symplectic form with per-mode blocks `[[0, 1], [-1, 0]]`.
pub fn symplectic_form(n_modes: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n_modes, 2 * n_modes);
    for m in 0..n_modes {
        j[(2 * m, 2 * m + 1)] = 1.0;
        j[(2 * m + 1, 2 * m)] = -1.0;
    }
    j
}

/// Ratio of largest to smallest eigenvalue of a symmetric matrix; infinite
/// when the matrix is not positive definite.
pub fn spd_condition(m: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(m.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// `C(n, k)` as a float.
pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * f64::from(n - i) / f64::from(i + 1);
    }
    acc
}

/// `(2j - 1)!!` with the convention `(-1)!! = 1`.
pub fn double_factorial_odd(j: u32) -> f64 {
    (1..=j).map(|i| f64::from(2 * i - 1)).product()
}

pub fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_survives_cancellation() {
        let big = 1e16;
        let vals = [big, 1.0, -big, 1.0];
        let s = csum(vals.iter().map(|&v| Complex64::new(v, -v)));
        assert_eq!(s, Complex64::new(2.0, -2.0));
    }

    #[test]
    fn binomials_and_double_factorials() {
        assert_eq!(binomial(8, 4), 70.0);
        assert_eq!(binomial(3, 5), 0.0);
        assert_eq!(double_factorial_odd(0), 1.0);
        assert_eq!(double_factorial_odd(3), 15.0);
        assert_eq!(factorial(5), 120.0);
    }

    #[test]
    fn reality_check_rejects_large_imaginary_part() {
        assert!(real_checked(Complex64::new(1.0, 1e-12), 1e-10).is_ok());
        assert!(real_checked(Complex64::new(1.0, 1e-6), 1e-10).is_err());
    }
}
