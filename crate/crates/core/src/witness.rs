//! Fourth-order cumulant inseparability witness, its Gaussian (Duan) limit,
//! the single-mode fourth-moment uncertainty bound and loss scaling.
//!
//! A report is `violated` when `lhs < rhs`; that certifies inseparability.
//! A non-violated report is inconclusive.

use std::fmt;
use std::str::FromStr;

use crate::moments::{
    check_centered_standard, cumulants_from_moments, joint_cumulant_22, linear_form_moments,
    LinearForm,
};
use crate::phase_space::GaussianSumState;
use crate::{Error, Result};

/// Coefficients of `û = g₁x̂₁ + g₂x̂₂` and `v̂ = h₁p̂₁ + h₂p̂₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EprOperatorPair {
    pub g1: f64,
    pub g2: f64,
    pub h1: f64,
    pub h2: f64,
}

impl Default for EprOperatorPair {
    fn default() -> Self {
        Self {
            g1: 1.0,
            g2: -1.0,
            h1: 1.0,
            h2: 1.0,
        }
    }
}

impl EprOperatorPair {
    pub fn new(g1: f64, g2: f64, h1: f64, h2: f64) -> Result<Self> {
        if [g1, g2, h1, h2].iter().any(|v| *v == 0.0 || !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "EPR pair coefficients must be finite and nonzero, got ({g1}, {g2}, {h1}, {h2})"
            )));
        }
        Ok(Self { g1, g2, h1, h2 })
    }

    /// The Duan family `(a, −1/a, a, 1/a)`.
    pub fn duan(a: f64) -> Result<Self> {
        if a == 0.0 || !a.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "Duan parameter must be nonzero, got {a}"
            )));
        }
        Self::new(a, -1.0 / a, a, 1.0 / a)
    }

    pub fn u_form(&self) -> LinearForm {
        LinearForm::new(vec![self.g1, 0.0, self.g2, 0.0]).expect("nonzero by construction")
    }

    pub fn v_form(&self) -> LinearForm {
        LinearForm::new(vec![0.0, self.h1, 0.0, self.h2]).expect("nonzero by construction")
    }

    fn close_to(&self, other: &Self) -> bool {
        let a = [self.g1, self.g2, self.h1, self.h2];
        let b = [other.g1, other.g2, other.h1, other.h2];
        a.iter()
            .zip(b.iter())
            .all(|(x, y)| (x - y).abs() <= 1e-12 * (1.0 + x.abs()))
    }
}

impl fmt::Display for EprOperatorPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.g1, self.g2, self.h1, self.h2)
    }
}

impl FromStr for EprOperatorPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 4 {
            return Err(Error::parse(
                1,
                1,
                format!("pair needs four comma-separated values, got `{s}`"),
            ));
        }
        let mut vals = [0.0; 4];
        let mut col = 1;
        for (slot, part) in vals.iter_mut().zip(&parts) {
            *slot = part
                .trim()
                .parse()
                .map_err(|_| Error::parse(1, col, format!("bad number `{part}`")))?;
            col += part.len() + 1;
        }
        Self::new(vals[0], vals[1], vals[2], vals[3])
    }
}

/// Every cumulant entering the fourth-order criterion, for one state and
/// one operator pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CumulantSet {
    pub pair: EprOperatorPair,
    pub k2_u: f64,
    pub k4_u: f64,
    pub k2_v: f64,
    pub k4_v: f64,
    pub k22_m1: f64,
    pub k22_m2: f64,
    pub k2_x1: f64,
    pub k2_x2: f64,
    pub k2_p1: f64,
    pub k2_p2: f64,
}

impl CumulantSet {
    pub const FIELD_NAMES: [&'static str; 10] = [
        "k2_u", "k4_u", "k2_v", "k4_v", "k22_m1", "k22_m2", "k2_x1", "k2_x2", "k2_p1", "k2_p2",
    ];

    pub fn to_array(&self) -> [f64; 10] {
        [
            self.k2_u,
            self.k4_u,
            self.k2_v,
            self.k4_v,
            self.k22_m1,
            self.k22_m2,
            self.k2_x1,
            self.k2_x2,
            self.k2_p1,
            self.k2_p2,
        ]
    }

    pub fn from_array(pair: EprOperatorPair, v: [f64; 10]) -> Self {
        Self {
            pair,
            k2_u: v[0],
            k4_u: v[1],
            k2_v: v[2],
            k4_v: v[3],
            k22_m1: v[4],
            k22_m2: v[5],
            k2_x1: v[6],
            k2_x2: v[7],
            k2_p1: v[8],
            k2_p2: v[9],
        }
    }

    pub fn fields(&self) -> impl Iterator<Item = (&'static str, f64)> {
        Self::FIELD_NAMES.into_iter().zip(self.to_array())
    }

    /// Heisenberg bound `κ₂(x_i) κ₂(p_i) ≥ 1/4` on both modes.
    pub fn check_heisenberg(&self) -> Result<()> {
        for (mode, (x, p)) in [(self.k2_x1, self.k2_p1), (self.k2_x2, self.k2_p2)]
            .into_iter()
            .enumerate()
        {
            if x * p < 0.25 - 1e-9 {
                return Err(Error::Precondition(format!(
                    "mode {mode} violates the uncertainty bound: κ2(x)κ2(p) = {}",
                    x * p
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    FourthOrder,
    Duan,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Criterion::FourthOrder => f.write_str("fourth-order"),
            Criterion::Duan => f.write_str("duan"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WitnessReport {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub violated: bool,
    pub criterion: Criterion,
}

impl WitnessReport {
    pub fn new(lhs: f64, rhs: f64, criterion: Criterion) -> Self {
        let margin = lhs - rhs;
        Self {
            lhs,
            rhs,
            margin,
            violated: margin < 0.0,
            criterion,
        }
    }

    pub fn verdict(&self) -> &'static str {
        if self.violated {
            "violated (inseparable)"
        } else {
            "not violated (inconclusive)"
        }
    }
}

/// Assembles the criterion inputs from the analytic moment engine.
pub fn compute_cumulant_set(
    state: &GaussianSumState,
    pair: EprOperatorPair,
) -> Result<CumulantSet> {
    if state.n_modes() != 2 {
        return Err(Error::Precondition(format!(
            "the witness needs a two-mode state, got {} modes",
            state.n_modes()
        )));
    }
    check_centered_standard(state)?;
    let u = cumulants_from_moments(&linear_form_moments(state, &pair.u_form())?);
    let v = cumulants_from_moments(&linear_form_moments(state, &pair.v_form())?);
    let k2 = |form: LinearForm| -> Result<f64> {
        Ok(cumulants_from_moments(&linear_form_moments(state, &form)?).k2)
    };
    Ok(CumulantSet {
        pair,
        k2_u: u.k2,
        k4_u: u.k4,
        k2_v: v.k2,
        k4_v: v.k4,
        k22_m1: joint_cumulant_22(state, 0)?,
        k22_m2: joint_cumulant_22(state, 1)?,
        k2_x1: k2(LinearForm::x(0, 2)?)?,
        k2_x2: k2(LinearForm::x(1, 2)?)?,
        k2_p1: k2(LinearForm::p(0, 2)?)?,
        k2_p2: k2(LinearForm::p(1, 2)?)?,
    })
}

/// The fourth-order criterion, evaluated with the pair stored in `c`.
pub fn fourth_order_witness(c: &CumulantSet) -> WitnessReport {
    let EprOperatorPair { g1, g2, h1, h2 } = c.pair;
    let gg = g1 * g1 * g2 * g2;
    let hh = h1 * h1 * h2 * h2;
    let lhs = c.k4_u + c.k4_v + 3.0 * c.k2_u * c.k2_u + 3.0 * c.k2_v * c.k2_v
        - (2.0 * gg * c.k22_m1 - 1.0).abs()
        - (2.0 * hh * c.k22_m2 - 1.0).abs()
        - 6.0 * gg * c.k2_x1 * c.k2_x2
        - 6.0 * hh * c.k2_p1 * c.k2_p2;
    let rhs = 0.5 * (g1 * g1 * h1 * h1 + g2 * g2 * h2 * h2);
    WitnessReport::new(lhs, rhs, Criterion::FourthOrder)
}

/// Second-order (Duan) criterion; `c` must have been built with
/// [`EprOperatorPair::duan`]`(a)`.
pub fn duan_witness(c: &CumulantSet, a: f64) -> Result<WitnessReport> {
    let expected = EprOperatorPair::duan(a)?;
    if !c.pair.close_to(&expected) {
        return Err(Error::PairMismatch {
            expected: expected.to_string(),
            found: c.pair.to_string(),
        });
    }
    Ok(WitnessReport::new(
        c.k2_u + c.k2_v,
        a * a + 1.0 / (a * a),
        Criterion::Duan,
    ))
}

/// `μ₄(x) + μ₄(p) − |2κ₂,₂ − 1| − ⟨x²⟩² − ⟨p²⟩²` for one mode; nonnegative
/// for every physical state.
pub fn fourth_moment_uncertainty_margin(state: &GaussianSumState, mode: usize) -> Result<f64> {
    check_centered_standard(state)?;
    let n = state.n_modes();
    let mx = linear_form_moments(state, &LinearForm::x(mode, n)?)?;
    let mp = linear_form_moments(state, &LinearForm::p(mode, n)?)?;
    let k22 = joint_cumulant_22(state, mode)?;
    Ok(uncertainty_margin_from_moments(
        mx.raw[1], mx.raw[3], mp.raw[1], mp.raw[3], k22,
    ))
}

pub(crate) fn uncertainty_margin_from_moments(x2: f64, x4: f64, p2: f64, p4: f64, k22: f64) -> f64 {
    x4 + p4 - (2.0 * k22 - 1.0).abs() - x2 * x2 - p2 * p2
}

/// Cumulants after equal pure loss `eta` on both modes.
pub fn loss_scaled_cumulants(c: &CumulantSet, eta: f64) -> Result<CumulantSet> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter(format!(
            "loss efficiency {eta} outside [0, 1]"
        )));
    }
    let EprOperatorPair { g1, g2, h1, h2 } = c.pair;
    let noise = 0.5 * (1.0 - eta);
    let quad = |k: f64| eta * k + noise;
    Ok(CumulantSet {
        pair: c.pair,
        k2_u: eta * c.k2_u + noise * (g1 * g1 + g2 * g2),
        k4_u: eta * eta * c.k4_u,
        k2_v: eta * c.k2_v + noise * (h1 * h1 + h2 * h2),
        k4_v: eta * eta * c.k4_v,
        k22_m1: eta * eta * c.k22_m1,
        k22_m2: eta * eta * c.k22_m2,
        k2_x1: quad(c.k2_x1),
        k2_x2: quad(c.k2_x2),
        k2_p1: quad(c.k2_p1),
        k2_p2: quad(c.k2_p2),
    })
}

/// Computes the cumulant set and both reports, the Duan one only when the
/// pair belongs to the Duan family with `a = g₁`.
pub fn evaluate(
    state: &GaussianSumState,
    pair: EprOperatorPair,
) -> Result<(CumulantSet, WitnessReport, Option<WitnessReport>)> {
    let c = compute_cumulant_set(state, pair)?;
    let fourth = fourth_order_witness(&c);
    let duan = duan_witness(&c, pair.g1).ok();
    Ok((c, fourth, duan))
}

/// Bisection for a sign change of `margin` on `[lo, hi]`, to absolute
/// parameter tolerance `tol`.
pub fn find_threshold<F>(mut margin: F, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(lo < hi) || !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bad bracket [{lo}, {hi}] or tolerance {tol}"
        )));
    }
    let (mut a, mut b) = (lo, hi);
    let mut fa = margin(a)?;
    let fb = margin(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(Error::NoCrossing {
            lo,
            hi,
            margin_lo: fa,
            margin_hi: fb,
        });
    }
    while b - a > tol {
        let mid = 0.5 * (a + b);
        let fm = margin(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}
