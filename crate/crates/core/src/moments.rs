//! Wigner-distribution (Weyl-ordered) moments and cumulants.
//!
//! Every component of a [`GaussianSumState`] is a (possibly complex-shifted)
//! Gaussian, so moments of linear forms reduce to scalar Gaussian moments and
//! mixed moments follow from Isserlis' theorem with nonzero means. Component
//! sums are compensated because ring approximations mix large weights of
//! alternating sign.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::numeric::{binomial, csum, double_factorial_odd, real_checked};
use crate::phase_space::{GaussianSumState, REALITY_TOL};
use crate::{Error, Result};

/// Highest raw moment order supported.
pub const MAX_ORDER: u32 = 8;

/// Tolerance for the centered / standard-form preconditions.
pub const PRECONDITION_TOL: f64 = 1e-10;

/// `E[z^n]` for a scalar Gaussian with complex mean and real variance:
/// `Σ_j C(n,2j) (2j−1)!! s^j m^{n−2j}`.
pub fn gaussian_scalar_moment(mean: Complex64, variance: f64, n: u32) -> Result<Complex64> {
    if n > MAX_ORDER {
        return Err(Error::OrderBudget { order: n });
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..=n / 2 {
        let coeff = binomial(n, 2 * j) * double_factorial_odd(j) * variance.powi(j as i32);
        acc += mean.powu(n - 2 * j) * coeff;
    }
    Ok(acc)
}

/// A real linear combination `L = w·ξ` of the quadratures.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearForm {
    coefficients: DVector<f64>,
}

impl LinearForm {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.iter().all(|&c| c == 0.0) {
            return Err(Error::InvalidParameter(
                "linear form needs at least one nonzero coefficient".into(),
            ));
        }
        if !coefficients.len().is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "linear form length {} is not even",
                coefficients.len()
            )));
        }
        Ok(Self {
            coefficients: DVector::from_vec(coefficients),
        })
    }

    /// `x̂` of `mode` in an `n_modes` system.
    pub fn x(mode: usize, n_modes: usize) -> Result<Self> {
        Self::unit(2 * mode, n_modes)
    }

    /// `p̂` of `mode` in an `n_modes` system.
    pub fn p(mode: usize, n_modes: usize) -> Result<Self> {
        Self::unit(2 * mode + 1, n_modes)
    }

    fn unit(index: usize, n_modes: usize) -> Result<Self> {
        if index >= 2 * n_modes {
            return Err(Error::InvalidMode {
                mode: index / 2,
                n_modes,
            });
        }
        let mut w = vec![0.0; 2 * n_modes];
        w[index] = 1.0;
        Self::new(w)
    }

    pub fn coefficients(&self) -> &DVector<f64> {
        &self.coefficients
    }
}

/// Raw moments `μ₁..μ₄` of a scalar quadrature variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentTable {
    pub raw: [f64; 4],
}

impl MomentTable {
    pub fn new(raw: [f64; 4]) -> Self {
        Self { raw }
    }

    /// `μ₂ ≥ μ₁² − 1e-12`; affine sums that are not physical states can fail.
    pub fn check_variance(&self) -> Result<()> {
        let [m1, m2, ..] = self.raw;
        if m2 < m1 * m1 - 1e-12 {
            return Err(Error::Precondition(format!(
                "negative variance: second moment {m2} below squared mean {}",
                m1 * m1
            )));
        }
        Ok(())
    }
}

/// Cumulants up to fourth order of a scalar variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cumulants {
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
}

/// Wigner moments `E_W[L^n]`, `n = 1..4`.
pub fn linear_form_moments(state: &GaussianSumState, form: &LinearForm) -> Result<MomentTable> {
    let w = form.coefficients();
    if w.len() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: state.dim(),
            found: w.len(),
        });
    }
    let wc = w.map(|v| Complex64::new(v, 0.0));
    let params: Vec<(Complex64, Complex64, f64)> = state
        .components()
        .iter()
        .map(|c| {
            let mean = wc.dot(c.mean());
            let var = (w.transpose() * c.cov() * w)[(0, 0)];
            (c.weight(), mean, var)
        })
        .collect();
    let mut raw = [0.0; 4];
    for (n, slot) in raw.iter_mut().enumerate() {
        let mut terms = Vec::with_capacity(params.len());
        for &(c, m, s) in &params {
            terms.push(c * gaussian_scalar_moment(m, s, n as u32 + 1)?);
        }
        *slot = real_checked(csum(terms), REALITY_TOL)?;
    }
    Ok(MomentTable { raw })
}

/// General-mean cumulants from raw moments.
pub fn cumulants_from_moments(m: &MomentTable) -> Cumulants {
    let [m1, m2, m3, m4] = m.raw;
    Cumulants {
        k2: m2 - m1 * m1,
        k3: m3 - 3.0 * m2 * m1 + 2.0 * m1.powi(3),
        k4: m4 - 4.0 * m3 * m1 - 3.0 * m2 * m2 + 12.0 * m2 * m1 * m1 - 6.0 * m1.powi(4),
    }
}

/// Per-mode Wigner moments `(E[x²], E[p²], E[xp], E[x²p²])`.
fn mode_moments(state: &GaussianSumState, mode: usize) -> Result<(f64, f64, f64, f64)> {
    if mode >= state.n_modes() {
        return Err(Error::InvalidMode {
            mode,
            n_modes: state.n_modes(),
        });
    }
    let (ix, ip) = (2 * mode, 2 * mode + 1);
    let n = state.len();
    let mut xx = Vec::with_capacity(n);
    let mut pp = Vec::with_capacity(n);
    let mut xp = Vec::with_capacity(n);
    let mut x2p2 = Vec::with_capacity(n);
    for c in state.components() {
        let (mx, mp) = (c.mean()[ix], c.mean()[ip]);
        let (sxx, spp, sxp) = (c.cov()[(ix, ix)], c.cov()[(ip, ip)], c.cov()[(ix, ip)]);
        let w = c.weight();
        xx.push(w * (mx * mx + sxx));
        pp.push(w * (mp * mp + spp));
        xp.push(w * (mx * mp + sxp));
        x2p2.push(
            w * (Complex64::new(sxx * spp + 2.0 * sxp * sxp, 0.0)
                + mp * mp * sxx
                + mx * mx * spp
                + mx * mp * (4.0 * sxp)
                + mx * mx * mp * mp),
        );
    }
    Ok((
        real_checked(csum(xx), REALITY_TOL)?,
        real_checked(csum(pp), REALITY_TOL)?,
        real_checked(csum(xp), REALITY_TOL)?,
        real_checked(csum(x2p2), REALITY_TOL)?,
    ))
}

/// `E_W[x_i² p_i²]` for one mode.
pub fn weyl_moment_22(state: &GaussianSumState, mode: usize) -> Result<f64> {
    Ok(mode_moments(state, mode)?.3)
}

/// Errors unless the state has vanishing first moments and vanishing
/// per-mode `x–p` correlations.
pub fn check_centered_standard(state: &GaussianSumState) -> Result<()> {
    let first = state.first_moments()?;
    let worst = first.amax();
    if worst > PRECONDITION_TOL {
        return Err(Error::Precondition(format!(
            "state is not centered (largest first moment {worst:.3e}); apply center_state first"
        )));
    }
    for mode in 0..state.n_modes() {
        let (_, _, xp, _) = mode_moments(state, mode)?;
        if xp.abs() > PRECONDITION_TOL {
            return Err(Error::Precondition(format!(
                "mode {mode} has x-p correlation {xp:.3e}; apply reduce_to_standard_form first"
            )));
        }
    }
    Ok(())
}

/// `κ₂,₂(x_i, p_i) = E[x²p²] − E[x²]E[p²] − 2E[xp]²` for a centered,
/// standard-form state.
pub fn joint_cumulant_22(state: &GaussianSumState, mode: usize) -> Result<f64> {
    check_centered_standard(state)?;
    let (xx, pp, xp, x2p2) = mode_moments(state, mode)?;
    Ok(x2p2 - xx * pp - 2.0 * xp * xp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::{ComplexGaussianComponent, Gate};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn single(mean: Vec<f64>, cov: DMatrix<f64>) -> GaussianSumState {
        let n = mean.len() / 2;
        let c =
            ComplexGaussianComponent::real(Complex64::new(1.0, 0.0), DVector::from_vec(mean), cov)
                .unwrap();
        GaussianSumState::new(n, vec![c]).unwrap()
    }

    fn vacuum(n: usize) -> GaussianSumState {
        single(vec![0.0; 2 * n], DMatrix::identity(2 * n, 2 * n) * 0.5)
    }

    #[test]
    fn scalar_moment_examples() {
        let s = 0.7;
        let z = Complex64::new(0.0, 0.0);
        assert_relative_eq!(gaussian_scalar_moment(z, s, 4).unwrap().re, 3.0 * s * s);
        let m = Complex64::new(0.3, 0.4);
        assert_eq!(gaussian_scalar_moment(m, s, 1).unwrap(), m);
        let expect = m.powu(3) + m * 3.0 * 0.5;
        assert!((gaussian_scalar_moment(m, 0.5, 3).unwrap() - expect).norm() < 1e-15);
        assert!(matches!(
            gaussian_scalar_moment(m, s, 9),
            Err(Error::OrderBudget { order: 9 })
        ));
    }

    #[test]
    fn scalar_moment_matches_quadrature_with_complex_shift() {
        // ∫ (t + m)^3 N(t; 0, s) dt by trapezoid on a wide grid
        let m = Complex64::new(0.3, 0.4);
        let s: f64 = 0.5;
        let n = 100_000;
        let half = 12.0 * s.sqrt();
        let h = 2.0 * half / n as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..=n {
            let t = -half + h * i as f64;
            let g = (-t * t / (2.0 * s)).exp() / (2.0 * std::f64::consts::PI * s).sqrt();
            let wt = if i == 0 || i == n { 0.5 } else { 1.0 };
            acc += (m + t).powu(3) * g * wt * h;
        }
        assert!((acc - gaussian_scalar_moment(m, s, 3).unwrap()).norm() < 1e-10);
    }

    #[test]
    fn vacuum_epr_moments() {
        let v = vacuum(2);
        let u = LinearForm::new(vec![1.0, 0.0, -1.0, 0.0]).unwrap();
        let t = linear_form_moments(&v, &u).unwrap();
        assert_relative_eq!(t.raw[1], 1.0, epsilon = 1e-15);
        assert_relative_eq!(t.raw[3], 3.0, epsilon = 1e-15);
        assert_eq!(t.raw[0], 0.0);
    }

    #[test]
    fn tmsv_difference_variance() {
        let r = 0.8;
        let s = vacuum(2)
            .apply_symplectic(&Gate::TwoModeSqueeze { r, i: 0, j: 1 }.to_map(2).unwrap())
            .unwrap();
        let u = LinearForm::new(vec![1.0, 0.0, -1.0, 0.0]).unwrap();
        let t = linear_form_moments(&s, &u).unwrap();
        assert_relative_eq!(t.raw[1], (-2.0 * r).exp(), epsilon = 1e-13);
    }

    #[test]
    fn cumulant_examples() {
        let s = 0.8;
        let g = cumulants_from_moments(&MomentTable::new([0.0, s, 0.0, 3.0 * s * s]));
        assert_eq!((g.k2, g.k3, g.k4), (s, 0.0, 0.0));
        let m: f64 = 1.3;
        let shifted = MomentTable::new([
            m,
            s + m * m,
            3.0 * s * m + m.powi(3),
            3.0 * s * s + 6.0 * s * m * m + m.powi(4),
        ]);
        let c = cumulants_from_moments(&shifted);
        assert_relative_eq!(c.k2, s, epsilon = 1e-12);
        assert!(c.k3.abs() < 1e-12);
        assert!(c.k4.abs() < 1e-12);
    }

    #[test]
    fn weyl_22_gaussian_examples() {
        assert_relative_eq!(
            weyl_moment_22(&vacuum(1), 0).unwrap(),
            0.25,
            epsilon = 1e-15
        );
        let sq = vacuum(1)
            .apply_symplectic(&Gate::Squeeze { r: 0.9, mode: 0 }.to_map(1).unwrap())
            .unwrap();
        assert_relative_eq!(weyl_moment_22(&sq, 0).unwrap(), 0.25, epsilon = 1e-14);
        assert_eq!(joint_cumulant_22(&vacuum(2), 1).unwrap(), 0.0);
    }

    #[test]
    fn joint_cumulant_precondition_enforced() {
        let coh = single(vec![0.4, 0.0], DMatrix::identity(2, 2) * 0.5);
        assert!(matches!(
            joint_cumulant_22(&coh, 0),
            Err(Error::Precondition(_))
        ));
        let rot = vacuum(1)
            .apply_symplectic(&Gate::Squeeze { r: 0.5, mode: 0 }.to_map(1).unwrap())
            .unwrap()
            .apply_symplectic(&Gate::Rotate { phi: 0.3, mode: 0 }.to_map(1).unwrap())
            .unwrap();
        assert!(joint_cumulant_22(&rot, 0).is_err());
        assert!(
            joint_cumulant_22(&rot.to_standard_form().unwrap(), 0)
                .unwrap()
                .abs()
                < 1e-12
        );
    }

    #[test]
    fn negative_variance_flagged() {
        assert!(MomentTable::new([1.0, 0.5, 0.0, 0.0])
            .check_variance()
            .is_err());
        assert!(MomentTable::new([0.0, 0.5, 0.0, 0.75])
            .check_variance()
            .is_ok());
    }

    #[test]
    fn zero_form_rejected() {
        assert!(LinearForm::new(vec![0.0, 0.0]).is_err());
        assert!(LinearForm::x(2, 2).is_err());
    }
}
