//! Constructors for the two-mode states studied with the witness.
//!
//! Split states place the single-mode input in mode index 1 and vacuum in
//! mode index 0 before a balanced beamsplitter `beamsplitter(π/4, 0, 1)`.
//! With the default pair this makes `û = √2 x̂₀` probe the vacuum port and
//! `v̂ = √2 p̂₁` probe the input's momentum.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, PI};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::numeric::{csum, factorial, real_checked};
use crate::phase_space::{
    ComplexGaussianComponent, Gate, GaussianSumState, MAX_CONDITION, REALITY_TOL,
};
use crate::{Error, Result};

/// Largest stellar rank accepted by [`make_fock_ring`].
pub const MAX_STELLAR_RANK: usize = 6;
/// Smallest heralding probability accepted by [`make_phssv`].
pub const MIN_CLICK_PROBABILITY: f64 = 1e-12;

/// Reflectivity 1% tap used to herald the photon-subtracted state.
pub fn default_tap_theta() -> f64 {
    0.99f64.sqrt().acos()
}

pub fn make_vacuum(n_modes: usize) -> GaussianSumState {
    make_coherent(&vec![Complex64::new(0.0, 0.0); n_modes.max(1)])
}

/// Product of coherent states, `x = √2 Re α`, `p = √2 Im α`.
pub fn make_coherent(alphas: &[Complex64]) -> GaussianSumState {
    let n = alphas.len().max(1);
    let mut mean = DVector::zeros(2 * n);
    for (i, a) in alphas.iter().enumerate() {
        mean[2 * i] = 2f64.sqrt() * a.re;
        mean[2 * i + 1] = 2f64.sqrt() * a.im;
    }
    let c = ComplexGaussianComponent::real(
        Complex64::new(1.0, 0.0),
        mean,
        DMatrix::identity(2 * n, 2 * n) * 0.5,
    )
    .expect("vacuum covariance is valid");
    GaussianSumState::new(n, vec![c]).expect("shapes agree")
}

fn check_r(r: f64) -> Result<()> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "squeezing must be finite and >= 0, got {r}"
        )));
    }
    Ok(())
}

fn gaussian(cov: DMatrix<f64>) -> GaussianSumState {
    let n = cov.nrows() / 2;
    let c = ComplexGaussianComponent::real(Complex64::new(1.0, 0.0), DVector::zeros(2 * n), cov)
        .expect("closed-form covariance is symmetric");
    GaussianSumState::new(n, vec![c]).expect("shapes agree")
}

/// Two-mode squeezed vacuum: `½cosh2r` on the diagonal, `+½sinh2r` between
/// the `x` quadratures and `−½sinh2r` between the `p` quadratures.
pub fn make_tmsv(r: f64) -> Result<GaussianSumState> {
    check_r(r)?;
    let (c, s) = (0.5 * (2.0 * r).cosh(), 0.5 * (2.0 * r).sinh());
    #[rustfmt::skip]
    let cov = DMatrix::from_row_slice(4, 4, &[
        c, 0.0, s, 0.0,
        0.0, c, 0.0, -s,
        s, 0.0, c, 0.0,
        0.0, -s, 0.0, c,
    ]);
    Ok(gaussian(cov))
}

/// Squeezed vacuum in mode 1 split with vacuum on a balanced beamsplitter.
pub fn make_split_squeezed_vacuum(r: f64) -> Result<GaussianSumState> {
    check_r(r)?;
    let (ep, em) = ((2.0 * r).exp(), (-2.0 * r).exp());
    let (a, b) = ((1.0 + ep) / 4.0, (ep - 1.0) / 4.0);
    let (c, d) = ((1.0 + em) / 4.0, (em - 1.0) / 4.0);
    #[rustfmt::skip]
    let cov = DMatrix::from_row_slice(4, 4, &[
        a, 0.0, b, 0.0,
        0.0, c, 0.0, d,
        b, 0.0, a, 0.0,
        0.0, d, 0.0, c,
    ]);
    Ok(gaussian(cov))
}

/// Amplitudes `c₀..c_k` of the Fock state `|n⟩`.
pub fn fock_coefficients(n: usize) -> Vec<Complex64> {
    let mut c = vec![Complex64::new(0.0, 0.0); n + 1];
    c[n] = Complex64::new(1.0, 0.0);
    c
}

/// A superposition of `k+1` coherent states on a ring of radius `epsilon`
/// reproducing the first `k+1` Fock amplitudes of a target state.
#[derive(Debug, Clone, PartialEq)]
pub struct RingApproximation {
    pub epsilon: f64,
    pub stellar_rank: usize,
    pub amplitudes: Vec<Complex64>,
    pub fidelity: f64,
}

fn check_ring_target(coeffs: &[Complex64]) -> Result<usize> {
    if coeffs.is_empty() {
        return Err(Error::InvalidParameter(
            "ring target needs at least one amplitude".into(),
        ));
    }
    let k = coeffs.len() - 1;
    if k > MAX_STELLAR_RANK {
        return Err(Error::InvalidParameter(format!(
            "stellar rank {k} exceeds the supported maximum {MAX_STELLAR_RANK}"
        )));
    }
    let norm: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter(format!(
            "ring target is not normalized (norm² {norm})"
        )));
    }
    Ok(k)
}

/// Squared norm of the ring state outside the target's support, relative to
/// the target: `Σ_{m>k} |c_{m mod (k+1)}|² j!/m! ε^{2(m−j)}`.
fn ring_tail(coeffs: &[Complex64], epsilon: f64) -> f64 {
    let period = coeffs.len();
    let mut tail = 0.0;
    for (j, c) in coeffs.iter().enumerate() {
        let w = c.norm_sqr();
        if w == 0.0 {
            continue;
        }
        // term for m = j + q·period, built by ratio to avoid overflow
        let mut term = w;
        let mut m = j;
        for _ in 0..200 {
            for step in 1..=period {
                term *= epsilon * epsilon / (m + step) as f64;
            }
            m += period;
            tail += term;
            if term <= 1e-34 * tail.max(f64::MIN_POSITIVE) || term == 0.0 {
                break;
            }
        }
    }
    tail
}

/// Fidelity `|⟨target|ring⟩|² / ⟨ring|ring⟩ = 1/(1 + tail)`.
pub fn ring_fidelity(coeffs: &[Complex64], epsilon: f64) -> Result<f64> {
    check_ring_target(coeffs)?;
    Ok(1.0 / (1.0 + ring_tail(coeffs, epsilon)))
}

/// `1 − fidelity`, evaluated without cancellation.
pub fn ring_infidelity(coeffs: &[Complex64], epsilon: f64) -> Result<f64> {
    check_ring_target(coeffs)?;
    let t = ring_tail(coeffs, epsilon);
    Ok(t / (1.0 + t))
}

/// Ring radius giving the requested infidelity, found by bisection in
/// `log ε` on the exact fidelity series.
pub fn calibrate_ring_epsilon(coeffs: &[Complex64], infidelity: f64) -> Result<f64> {
    check_ring_target(coeffs)?;
    if !(infidelity > 0.0 && infidelity < 0.1) {
        return Err(Error::InvalidParameter(format!(
            "target infidelity must lie in (0, 0.1), got {infidelity}"
        )));
    }
    let f = |e: f64| ring_tail(coeffs, e) / (1.0 + ring_tail(coeffs, e));
    let (mut lo, mut hi) = (1e-8f64.ln(), 3f64.ln());
    if f(lo.exp()) > infidelity || f(hi.exp()) < infidelity {
        return Err(Error::InvalidParameter(format!(
            "infidelity {infidelity} is not reachable for this target"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid.exp()) < infidelity {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// Wigner parameters of `|α⟩⟨β|`: weight `⟨β|α⟩` and complex mean; the
/// covariance is always `½I`.
fn coherent_outer(alpha: Complex64, beta: Complex64) -> (Complex64, [Complex64; 2]) {
    let d = (-0.5 * alpha.norm_sqr() - 0.5 * beta.norm_sqr() + beta.conj() * alpha).exp();
    let mx = (alpha + beta.conj()) * FRAC_1_SQRT_2;
    let mp = (alpha - beta.conj()) / Complex64::new(0.0, 2f64.sqrt());
    (d, [mx, mp])
}

/// Single-mode ring approximation of the target amplitudes `c₀..c_k`.
pub fn make_fock_ring(
    coeffs: &[Complex64],
    epsilon: f64,
) -> Result<(GaussianSumState, RingApproximation)> {
    let k = check_ring_target(coeffs)?;
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "ring radius must be positive, got {epsilon}"
        )));
    }
    if k == 0 {
        let approx = RingApproximation {
            epsilon,
            stellar_rank: 0,
            amplitudes: vec![coeffs[0]],
            fidelity: 1.0,
        };
        return Ok((make_vacuum(1), approx));
    }
    let period = k + 1;
    // The system matrix is a DFT scaled row-wise by ε^m/√m!, so its
    // condition number is the ratio of the extreme row scales.
    let scales: Vec<f64> = (0..period)
        .map(|m| epsilon.powi(m as i32) / factorial(m as u32).sqrt())
        .collect();
    let max = scales.iter().cloned().fold(0.0, f64::max);
    let min = scales.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = max / min;
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned { condition });
    }
    let tail = ring_tail(coeffs, epsilon);
    if tail > 0.1 {
        return Err(Error::PoorApproximation { tail });
    }

    let omega = |e: i64| Complex64::from_polar(1.0, 2.0 * PI * e as f64 / period as f64);
    let prefactor = (0.5 * epsilon * epsilon).exp();
    let b: Vec<Complex64> = coeffs
        .iter()
        .enumerate()
        .map(|(m, c)| c * factorial(m as u32).sqrt() * prefactor / epsilon.powi(m as i32))
        .collect();
    let amplitudes: Vec<Complex64> = (0..period)
        .map(|n| csum((0..period).map(|m| omega(-((n * m) as i64)) * b[m])) / period as f64)
        .collect();
    let alphas: Vec<Complex64> = (0..period).map(|n| omega(n as i64) * epsilon).collect();

    let mut terms = Vec::with_capacity(period * period);
    for n in 0..period {
        for m in 0..period {
            let (d, mu) = coherent_outer(alphas[n], alphas[m]);
            let w = amplitudes[n] * amplitudes[m].conj() * d;
            terms.push((w, mu));
        }
    }
    let total = real_checked(csum(terms.iter().map(|t| t.0)), REALITY_TOL * 1e3)?;
    let components = terms
        .into_iter()
        .map(|(w, mu)| {
            ComplexGaussianComponent::new(
                w / total,
                DVector::from_vec(mu.to_vec()),
                DMatrix::identity(2, 2) * 0.5,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let state = GaussianSumState::new(1, components)?;
    let approx = RingApproximation {
        epsilon,
        stellar_rank: k,
        amplitudes,
        fidelity: 1.0 / (1.0 + tail),
    };
    Ok((state, approx))
}

/// Places a single-mode state in mode 1 next to vacuum in mode 0 and mixes
/// them on a balanced beamsplitter.
pub fn split_with_vacuum(single: &GaussianSumState) -> Result<GaussianSumState> {
    if single.n_modes() != 1 {
        return Err(Error::Precondition(
            "only single-mode states can be split".into(),
        ));
    }
    let joint = make_vacuum(1).tensor(single);
    joint.apply_symplectic(
        &Gate::Beamsplitter {
            theta: FRAC_PI_4,
            i: 0,
            j: 1,
        }
        .to_map(2)?,
    )
}

/// Ring-approximated `|n⟩` split on a balanced beamsplitter; `(n+1)²`
/// components.
pub fn make_split_fock(n: usize, epsilon: f64) -> Result<GaussianSumState> {
    if n > 4 {
        return Err(Error::InvalidParameter(format!(
            "split Fock states support n <= 4, got {n}"
        )));
    }
    let (ring, _) = make_fock_ring(&fock_coefficients(n), epsilon)?;
    split_with_vacuum(&ring)
}

/// Heralded photon-subtracted squeezed vacuum: squeeze mode 1, tap it onto
/// mode 0 with `beamsplitter(tap_theta, 0, 1)`, and condition on a click in
/// mode 0. Returns the two-component single-mode state and the click
/// probability.
pub fn make_phssv(r: f64, tap_theta: f64) -> Result<(GaussianSumState, f64)> {
    check_r(r)?;
    let phi = make_vacuum(2)
        .apply_symplectic(&Gate::Squeeze { r, mode: 1 }.to_map(2)?)?
        .apply_symplectic(
            &Gate::Beamsplitter {
                theta: tap_theta,
                i: 0,
                j: 1,
            }
            .to_map(2)?,
        )?;
    // p(no click) = 1/√det(Σ₀ + ½I) = 1/√(1 + tr D + det D) with D = Σ₀ − ½I,
    // evaluated through log1p/expm1 so that tiny click rates keep precision.
    let cov = phi.components()[0].cov();
    let d = DMatrix::from_fn(2, 2, |i, j| cov[(i, j)] - if i == j { 0.5 } else { 0.0 });
    let x = d.trace() + d.determinant();
    let p_click = -(-0.5 * x.ln_1p()).exp_m1();
    if !(p_click >= MIN_CLICK_PROBABILITY) {
        return Err(Error::HeraldTooUnlikely {
            probability: p_click,
        });
    }
    let traced = phi.partial_trace(0)?;
    let (projected, _) = phi.project_vacuum(0)?;
    let traced_c = &traced.components()[0];
    let projected_c = &projected.components()[0];
    let w = 1.0 / p_click;
    let components = vec![
        traced_c.with_weight(Complex64::new(w, 0.0)),
        projected_c.with_weight(Complex64::new(1.0 - w, 0.0)),
    ];
    Ok((GaussianSumState::new(1, components)?, p_click))
}

/// PhSSV after pure loss `eta`, split with vacuum on a balanced beamsplitter.
pub fn make_split_lossy_phssv(r: f64, eta: f64) -> Result<GaussianSumState> {
    let (s, _) = make_phssv(r, default_tap_theta())?;
    split_with_vacuum(&s.apply_loss(0, eta)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn max_cov_diff(a: &GaussianSumState, b: &GaussianSumState) -> f64 {
        (a.components()[0].cov() - b.components()[0].cov()).amax()
    }

    #[test]
    fn coherent_conventions() {
        let c = make_coherent(&[Complex64::new(1.0, 0.0)]);
        assert_relative_eq!(c.components()[0].mean()[0].re, 2f64.sqrt());
        let o = c.overlap(&make_vacuum(1)).unwrap();
        assert_relative_eq!(o, (-1.0f64).exp(), epsilon = 1e-14);
    }

    #[test]
    fn closed_forms_match_circuits() {
        for &r in &[0.0, 0.3, 1.2] {
            let t = make_vacuum(2)
                .apply_symplectic(&Gate::TwoModeSqueeze { r, i: 0, j: 1 }.to_map(2).unwrap())
                .unwrap();
            assert!(max_cov_diff(&make_tmsv(r).unwrap(), &t) < 1e-12);
            let sq = make_vacuum(1)
                .apply_symplectic(&Gate::Squeeze { r, mode: 0 }.to_map(1).unwrap())
                .unwrap();
            let s = split_with_vacuum(&sq).unwrap();
            assert!(max_cov_diff(&make_split_squeezed_vacuum(r).unwrap(), &s) < 1e-12);
        }
        assert!(max_cov_diff(&make_tmsv(0.0).unwrap(), &make_vacuum(2)) < 1e-15);
        assert!(make_tmsv(-0.1).is_err());
    }

    #[test]
    fn ring_vacuum_special_case() {
        let (s, a) = make_fock_ring(&fock_coefficients(0), 0.3).unwrap();
        assert_eq!(s, make_vacuum(1));
        assert_eq!(a.fidelity, 1.0);
    }

    #[test]
    fn ring_single_photon_is_normalized_and_pure() {
        let (s, a) = make_fock_ring(&fock_coefficients(1), 0.21).unwrap();
        assert_eq!(s.len(), 4);
        s.check_normalized(1e-12).unwrap();
        assert_relative_eq!(s.overlap(&s).unwrap(), 1.0, epsilon = 1e-10);
        assert!((1.0 - a.fidelity - 0.21f64.powi(4) / 6.0).abs() < 1e-5);
        let w0 = s.wigner(&[0.0, 0.0]).unwrap();
        assert!(w0 < -0.3);
    }

    #[test]
    fn ring_fidelity_calibration_round_trip() {
        let c = fock_coefficients(1);
        let eps = calibrate_ring_epsilon(&c, 1e-3).unwrap();
        assert_relative_eq!(ring_infidelity(&c, eps).unwrap(), 1e-3, max_relative = 1e-9);
        assert!(eps > 0.25 && eps < 0.3);
    }

    #[test]
    fn ring_rejections() {
        assert!(matches!(
            make_fock_ring(&fock_coefficients(6), 1e-3),
            Err(Error::IllConditioned { .. })
        ));
        assert!(matches!(
            make_fock_ring(&fock_coefficients(1), 1.2),
            Err(Error::PoorApproximation { .. })
        ));
        assert!(make_fock_ring(&fock_coefficients(7), 0.2).is_err());
        assert!(make_fock_ring(&[Complex64::new(0.5, 0.0)], 0.2).is_err());
    }

    #[test]
    fn phssv_structure() {
        let (s, p) = make_phssv(1.0, default_tap_theta()).unwrap();
        assert_eq!(s.len(), 2);
        s.check_normalized(1e-12).unwrap();
        assert!(p > 0.0 && p < 0.05);
        let (_, p_small) = make_phssv(1e-3, default_tap_theta()).unwrap();
        assert!(p_small > 1e-9 && p_small < 1e-7);
        assert!(matches!(
            make_phssv(0.0, default_tap_theta()),
            Err(Error::HeraldTooUnlikely { .. })
        ));
    }

    #[test]
    fn split_lossy_phssv_components() {
        let s = make_split_lossy_phssv(0.5, 0.8).unwrap();
        assert_eq!((s.n_modes(), s.len()), (2, 2));
        s.check_normalized(1e-10).unwrap();
    }
}
