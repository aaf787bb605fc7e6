//! Truncated Fock-space reference engine.
//!
//! States are ensembles of unnormalized sparse kets, `ρ = Σ_i |ψ_i⟩⟨ψ_i|`,
//! over one or two modes. Kets are truncated only when they are built;
//! ladder operators act on the sparse maps without a cutoff, so operator
//! products carry no truncation edge. This engine is slow and exists to
//! cross-check the phase-space code.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use rustc_hash::FxHashMap;

use crate::descriptor::{StateDescriptor, StateKind};
use crate::factory::{self, default_tap_theta};
use crate::moments::{cumulants_from_moments, MomentTable};
use crate::numeric::real_checked;
use crate::witness::{uncertainty_margin_from_moments, CumulantSet, EprOperatorPair};
use crate::{Error, Result};

/// Largest truncation leakage accepted by [`build_fock`].
pub const MAX_LEAKAGE: f64 = 1e-6;
/// Default per-mode cutoff.
pub const DEFAULT_CUTOFF: usize = 30;
const PRUNE: f64 = 1e-20;
const ORACLE_REALITY_TOL: f64 = 1e-9;

pub type Ket = FxHashMap<(u32, u32), Complex64>;

/// A single quadrature `x` or `p` of one mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Quadrature {
    X(usize),
    P(usize),
}

/// A real linear combination of quadratures, used as one operator factor.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOp(pub Vec<(Quadrature, f64)>);

impl LinearOp {
    pub fn x(mode: usize) -> Self {
        Self(vec![(Quadrature::X(mode), 1.0)])
    }

    pub fn p(mode: usize) -> Self {
        Self(vec![(Quadrature::P(mode), 1.0)])
    }
}

#[derive(Debug, Clone)]
pub struct FockState {
    n_modes: usize,
    kets: Vec<Ket>,
    leakage: f64,
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut t = vec![0.0; n + 1];
    for i in 1..=n {
        t[i] = t[i - 1] + (i as f64).ln();
    }
    t
}

fn norm_sqr(k: &Ket) -> f64 {
    k.values().map(|z| z.norm_sqr()).sum()
}

fn inner(a: &Ket, b: &Ket) -> Complex64 {
    let (small, large, conj_small) = if a.len() <= b.len() {
        (a, b, true)
    } else {
        (b, a, false)
    };
    let mut acc = Complex64::new(0.0, 0.0);
    for (k, v) in small {
        if let Some(w) = large.get(k) {
            acc += if conj_small {
                v.conj() * w
            } else {
                w.conj() * v
            };
        }
    }
    acc
}

fn apply_quadrature(ket: &Ket, q: Quadrature, coeff: f64, out: &mut Ket) {
    let (mode, down, up) = match q {
        Quadrature::X(m) => (m, Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)),
        Quadrature::P(m) => (m, Complex64::new(0.0, -1.0), Complex64::new(0.0, 1.0)),
    };
    let c = coeff * FRAC_1_SQRT_2;
    for (&(n0, n1), &amp) in ket {
        let n = if mode == 0 { n0 } else { n1 };
        let key = |v: u32| if mode == 0 { (v, n1) } else { (n0, v) };
        if n > 0 {
            *out.entry(key(n - 1)).or_default() += amp * down * (c * (n as f64).sqrt());
        }
        *out.entry(key(n + 1)).or_default() += amp * up * (c * ((n + 1) as f64).sqrt());
    }
}

fn apply_linear(ket: &Ket, op: &LinearOp) -> Ket {
    let mut out = Ket::default();
    for &(q, c) in &op.0 {
        if c != 0.0 {
            apply_quadrature(ket, q, c, &mut out);
        }
    }
    out
}

fn apply_chain<'a>(ket: &Ket, ops: impl Iterator<Item = &'a LinearOp>) -> Ket {
    let mut cur = ket.clone();
    for op in ops {
        cur = apply_linear(&cur, op);
    }
    cur
}

/// `⟨ψ|F₁…F_k|ψ⟩` as `⟨F_h…F₁ψ | F_{h+1}…F_kψ⟩` for Hermitian factors.
fn ket_expectation(ket: &Ket, factors: &[LinearOp]) -> Complex64 {
    let h = factors.len() / 2;
    let left = apply_chain(ket, factors[..h].iter());
    let right = apply_chain(ket, factors[h..].iter().rev());
    inner(&left, &right)
}

/// Distinct orderings of a multiset of factors.
fn distinct_permutations(factors: &[LinearOp]) -> Vec<Vec<LinearOp>> {
    fn rec(
        pool: &mut Vec<(LinearOp, usize)>,
        cur: &mut Vec<LinearOp>,
        len: usize,
        out: &mut Vec<Vec<LinearOp>>,
    ) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        for i in 0..pool.len() {
            if pool[i].1 == 0 {
                continue;
            }
            pool[i].1 -= 1;
            cur.push(pool[i].0.clone());
            rec(pool, cur, len, out);
            cur.pop();
            pool[i].1 += 1;
        }
    }
    let mut pool: Vec<(LinearOp, usize)> = Vec::new();
    for f in factors {
        match pool.iter_mut().find(|(g, _)| g == f) {
            Some(slot) => slot.1 += 1,
            None => pool.push((f.clone(), 1)),
        }
    }
    let mut out = Vec::new();
    rec(&mut pool, &mut Vec::new(), factors.len(), &mut out);
    out
}

/// Truncated squeezed-vacuum amplitudes on `|0⟩..|cutoff⟩` (the sign
/// antisqueezes `x` for `r > 0`) and the norm left outside.
pub fn squeezed_amplitudes(r: f64, cutoff: usize) -> (Vec<f64>, f64) {
    let mut amps = vec![0.0; cutoff + 1];
    let t = r.tanh();
    let mut a = 1.0 / r.cosh().sqrt();
    let mut captured = 0.0;
    let mut n = 0usize;
    while 2 * n <= cutoff {
        amps[2 * n] = a;
        captured += a * a;
        a *= t * (((2 * n + 1) * (2 * n + 2)) as f64).sqrt() / (2 * (n + 1)) as f64;
        n += 1;
    }
    (amps, (1.0 - captured).max(0.0))
}

/// Coherent amplitudes `⟨m|α⟩` for `m ≤ cutoff`.
fn coherent_amplitudes(alpha: Complex64, cutoff: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(cutoff + 1);
    let mut a = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for m in 0..=cutoff {
        out.push(a);
        a *= alpha / ((m + 1) as f64).sqrt();
    }
    out
}

/// Kraus weight `√C(n,l) η^{(n−l)/2} (1−η)^{l/2}` in log form.
fn kraus(lf: &[f64], n: usize, l: usize, eta: f64) -> f64 {
    let mut lg = 0.5 * (lf[n] - lf[l] - lf[n - l]);
    if n > l {
        if eta == 0.0 {
            return 0.0;
        }
        lg += 0.5 * (n - l) as f64 * eta.ln();
    }
    if l > 0 {
        if eta == 1.0 {
            return 0.0;
        }
        lg += 0.5 * l as f64 * (1.0 - eta).ln();
    }
    lg.exp()
}

/// Signed `base^exp` in log form, with `0^0 = 1`.
fn signed_power(base: f64, exp: usize) -> Option<(f64, f64)> {
    if exp == 0 {
        return Some((0.0, 1.0));
    }
    if base == 0.0 {
        return None;
    }
    let sign = if base < 0.0 && exp % 2 == 1 {
        -1.0
    } else {
        1.0
    };
    Some((exp as f64 * base.abs().ln(), sign))
}

/// Beamsplitter on modes (0, 1) with the phase-space convention
/// `U a₀† U† = cosθ a₀† − sinθ a₁†`, `U a₁† U† = sinθ a₀† + cosθ a₁†`.
fn beamsplitter_ket(ket: &Ket, theta: f64, lf: &[f64]) -> Ket {
    let (s, c) = theta.sin_cos();
    let mut out = Ket::default();
    let lc = |n: usize, k: usize| lf[n] - lf[k] - lf[n - k];
    for (&(n0, n1), &amp) in ket {
        let (n0, n1) = (n0 as usize, n1 as usize);
        let total = n0 + n1;
        for k in 0..=n0 {
            for l in 0..=n1 {
                let Some((lc_pow, sc)) = signed_power(c, k + n1 - l) else {
                    continue;
                };
                let Some((ls_pow, ss)) = signed_power(s, n0 - k + l) else {
                    continue;
                };
                let m0 = k + l;
                let lg = lc(n0, k)
                    + lc(n1, l)
                    + 0.5 * (lf[m0] + lf[total - m0] - lf[n0] - lf[n1])
                    + lc_pow
                    + ls_pow;
                let sign = sc * ss * if (n0 - k) % 2 == 1 { -1.0 } else { 1.0 };
                *out.entry((m0 as u32, (total - m0) as u32)).or_default() +=
                    amp * (sign * lg.exp());
            }
        }
    }
    out
}

impl FockState {
    fn from_kets(n_modes: usize, kets: Vec<Ket>, leakage: f64) -> Result<Self> {
        let total: f64 = kets.iter().map(norm_sqr).sum();
        if !(total > 0.0) {
            return Err(Error::Precondition("oracle state has zero norm".into()));
        }
        let scale = 1.0 / total.sqrt();
        let kets = kets
            .into_iter()
            .filter(|k| norm_sqr(k) > PRUNE * total)
            .map(|mut k| {
                k.values_mut().for_each(|v| *v *= scale);
                k.retain(|_, v| v.norm_sqr() > 0.0);
                k
            })
            .collect();
        Ok(Self {
            n_modes,
            kets,
            leakage,
        })
    }

    /// Single-mode pure state from amplitudes on `|0⟩, |1⟩, …`.
    pub fn from_amplitudes(amps: &[Complex64], leakage: f64) -> Result<Self> {
        let ket: Ket = amps
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm_sqr() > 0.0)
            .map(|(n, a)| ((n as u32, 0), *a))
            .collect();
        Self::from_kets(1, vec![ket], leakage)
    }

    pub fn fock(n: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); n + 1];
        amps[n] = Complex64::new(1.0, 0.0);
        Self::from_amplitudes(&amps, 0.0).expect("nonzero")
    }

    pub fn vacuum(n_modes: usize) -> Self {
        let mut k = Ket::default();
        k.insert((0, 0), Complex64::new(1.0, 0.0));
        Self {
            n_modes,
            kets: vec![k],
            leakage: 0.0,
        }
    }

    pub fn squeezed_vacuum(r: f64, cutoff: usize) -> Result<Self> {
        let (amps, leak) = squeezed_amplitudes(r, cutoff);
        let amps: Vec<Complex64> = amps.into_iter().map(|a| Complex64::new(a, 0.0)).collect();
        Self::from_amplitudes(&amps, leak)
    }

    /// Coherent-state ring matching the Fock amplitudes `coeffs`, with
    /// superposition weights from a direct LU solve.
    pub fn ring(coeffs: &[Complex64], epsilon: f64, cutoff: usize) -> Result<Self> {
        let period = coeffs.len();
        let alphas: Vec<Complex64> = (0..period)
            .map(|n| {
                Complex64::from_polar(
                    epsilon,
                    2.0 * std::f64::consts::PI * n as f64 / period as f64,
                )
            })
            .collect();
        let kets: Vec<Vec<Complex64>> = alphas
            .iter()
            .map(|a| coherent_amplitudes(*a, cutoff))
            .collect();
        let m = DMatrix::from_fn(period, period, |row, col| kets[col][row]);
        let a = m
            .lu()
            .solve(&DVector::from_column_slice(coeffs))
            .ok_or(Error::IllConditioned {
                condition: f64::INFINITY,
            })?;
        let amps: Vec<Complex64> = (0..=cutoff)
            .map(|row| (0..period).map(|n| a[n] * kets[n][row]).sum())
            .collect();
        let mut full = Complex64::new(0.0, 0.0);
        for i in 0..period {
            for j in 0..period {
                let overlap = (-0.5 * alphas[i].norm_sqr() - 0.5 * alphas[j].norm_sqr()
                    + alphas[i].conj() * alphas[j])
                    .exp();
                full += a[i].conj() * a[j] * overlap;
            }
        }
        let captured: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
        Self::from_amplitudes(&amps, (1.0 - captured / full.re).max(0.0))
    }

    /// Photon-subtracted squeezed vacuum heralded by a click on a tap of
    /// angle `tap_theta`; also returns the click probability.
    pub fn phssv(r: f64, tap_theta: f64, cutoff: usize) -> Result<(Self, f64)> {
        let (amps, leak) = squeezed_amplitudes(r, cutoff);
        let lf = ln_factorials(2 * cutoff + 8);
        let input: Ket = amps
            .iter()
            .enumerate()
            .filter(|(_, a)| **a != 0.0)
            .map(|(n, a)| ((0, n as u32), Complex64::new(*a, 0.0)))
            .collect();
        let out = beamsplitter_ket(&input, tap_theta, &lf);
        let mut branches: FxHashMap<u32, Ket> = FxHashMap::default();
        for (&(n0, n1), &amp) in &out {
            if n0 >= 1 {
                branches.entry(n0).or_default().insert((n1, 0), amp);
            }
        }
        let mut keys: Vec<u32> = branches.keys().copied().collect();
        keys.sort_unstable();
        let kets: Vec<Ket> = keys
            .into_iter()
            .map(|k| branches.remove(&k).unwrap())
            .collect();
        let p_click: f64 = kets.iter().map(norm_sqr).sum();
        if !(p_click >= factory::MIN_CLICK_PROBABILITY) {
            return Err(Error::HeraldTooUnlikely {
                probability: p_click,
            });
        }
        Ok((Self::from_kets(1, kets, leak / p_click)?, p_click))
    }

    /// Two-mode squeezed vacuum `Σ tanhʳⁿ/cosh r |n,n⟩`.
    pub fn tmsv(r: f64, cutoff: usize) -> Result<Self> {
        let l = r.tanh();
        let mut ket = Ket::default();
        let mut a = 1.0 / r.cosh();
        let mut captured = 0.0;
        for n in 0..=cutoff {
            ket.insert((n as u32, n as u32), Complex64::new(a, 0.0));
            captured += a * a;
            a *= l;
        }
        Self::from_kets(2, vec![ket], (1.0 - captured).max(0.0))
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn leakage(&self) -> f64 {
        self.leakage
    }

    pub fn kets(&self) -> &[Ket] {
        &self.kets
    }

    fn max_photons(&self) -> usize {
        self.kets
            .iter()
            .flat_map(|k| k.keys())
            .map(|&(a, b)| a.max(b) as usize)
            .max()
            .unwrap_or(0)
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.n_modes {
            return Err(Error::InvalidMode {
                mode,
                n_modes: self.n_modes,
            });
        }
        Ok(())
    }

    /// Pure loss on one mode as an exact Kraus sum over every branch.
    pub fn apply_loss(&self, mode: usize, eta: f64) -> Result<Self> {
        self.check_mode(mode)?;
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidParameter(format!(
                "loss efficiency {eta} outside [0, 1]"
            )));
        }
        if eta == 1.0 {
            return Ok(self.clone());
        }
        let lf = ln_factorials(self.max_photons() + 2);
        let kets: Vec<Ket> = self
            .kets
            .par_iter()
            .flat_map_iter(|ket| {
                let mut branches: FxHashMap<usize, Ket> = FxHashMap::default();
                for (&(n0, n1), &amp) in ket {
                    let n = if mode == 0 { n0 } else { n1 } as usize;
                    for l in 0..=n {
                        let k = kraus(&lf, n, l, eta);
                        if k == 0.0 {
                            continue;
                        }
                        let m = (n - l) as u32;
                        let key = if mode == 0 { (m, n1) } else { (n0, m) };
                        *branches.entry(l).or_default().entry(key).or_default() += amp * k;
                    }
                }
                let mut ls: Vec<usize> = branches.keys().copied().collect();
                ls.sort_unstable();
                ls.into_iter()
                    .map(|l| branches.remove(&l).unwrap())
                    .collect::<Vec<_>>()
            })
            .collect();
        Self::from_kets(self.n_modes, kets, self.leakage)
    }

    /// Dense density matrix of one mode (partial trace over the other).
    pub fn reduced_density(&self, mode: usize) -> Result<DMatrix<Complex64>> {
        self.check_mode(mode)?;
        let dim = self.max_photons() + 1;
        let mut rho = DMatrix::<Complex64>::zeros(dim, dim);
        for ket in &self.kets {
            let mut by_other: FxHashMap<u32, Vec<(usize, Complex64)>> = FxHashMap::default();
            for (&(n0, n1), &amp) in ket {
                let (this, other) = if mode == 0 { (n0, n1) } else { (n1, n0) };
                by_other
                    .entry(other)
                    .or_default()
                    .push((this as usize, amp));
            }
            for entries in by_other.values() {
                for &(m, a) in entries {
                    for &(n, b) in entries {
                        rho[(m, n)] += a * b.conj();
                    }
                }
            }
        }
        Ok(rho)
    }

    /// Smallest eigenvalue of a single-mode reduced density matrix.
    pub fn min_eigenvalue(&self, mode: usize) -> Result<f64> {
        let rho = self.reduced_density(mode)?;
        Ok(SymmetricEigen::new(rho).eigenvalues.min())
    }

    /// Splits a single-mode state with vacuum on `beamsplitter(π/4, 0, 1)`
    /// after equal loss `eta` (applied before the split, which is equivalent
    /// to equal loss on both outputs). The mixed input is diagonalized so
    /// that each eigenvector is split as one ket.
    pub fn split(&self, eta: f64) -> Result<Self> {
        if self.n_modes != 1 {
            return Err(Error::Precondition(
                "only single-mode states can be split".into(),
            ));
        }
        let rho = lossy_density(&self.reduced_density(0)?, eta)?;
        let eig = SymmetricEigen::new(rho);
        let lf = ln_factorials(2 * eig.eigenvalues.len() + 8);
        let top = eig.eigenvalues.max();
        let inputs: Vec<Ket> = eig
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, &l)| l > PRUNE * top)
            .map(|(i, &l)| {
                let v = eig.eigenvectors.column(i);
                v.iter()
                    .enumerate()
                    .filter(|(_, z)| z.norm_sqr() > 0.0)
                    .map(|(n, z)| ((0u32, n as u32), z * l.sqrt()))
                    .collect()
            })
            .collect();
        let kets: Vec<Ket> = inputs
            .par_iter()
            .map(|k| beamsplitter_ket(k, std::f64::consts::FRAC_PI_4, &lf))
            .collect();
        Self::from_kets(2, kets, self.leakage)
    }

    /// `Tr[ρ F₁…F_k]` (not symmetrized).
    pub fn expectation(&self, factors: &[LinearOp]) -> Complex64 {
        self.kets
            .par_iter()
            .map(|k| ket_expectation(k, factors))
            .reduce(|| Complex64::new(0.0, 0.0), |a, b| a + b)
    }

    /// Weyl-ordered expectation: the average over all distinct orderings of
    /// the factors.
    pub fn weyl_ordered_expectation(&self, factors: &[LinearOp]) -> Result<f64> {
        if factors.is_empty() {
            return Ok(1.0);
        }
        let perms = distinct_permutations(factors);
        let total: Complex64 = perms.iter().map(|p| self.expectation(p)).sum();
        real_checked(total / perms.len() as f64, ORACLE_REALITY_TOL)
    }

    /// Weyl-ordered `x^a p^b` on one mode, `a + b ≤ 4`.
    pub fn weyl_monomial(&self, mode: usize, a: usize, b: usize) -> Result<f64> {
        self.check_mode(mode)?;
        if a + b > 4 {
            return Err(Error::OrderBudget {
                order: (a + b) as u32,
            });
        }
        let mut f = vec![LinearOp::x(mode); a];
        f.extend(std::iter::repeat_n(LinearOp::p(mode), b));
        self.weyl_ordered_expectation(&f)
    }

    /// Raw moments `⟨L^n⟩`, `n = 1..4`, of a linear operator.
    pub fn power_moments(&self, op: &LinearOp) -> Result<MomentTable> {
        let sums = self
            .kets
            .par_iter()
            .map(|k| {
                let a = apply_linear(k, op);
                let b = apply_linear(&a, op);
                [
                    inner(k, &a),
                    Complex64::new(norm_sqr(&a), 0.0),
                    inner(&a, &b),
                    Complex64::new(norm_sqr(&b), 0.0),
                ]
            })
            .reduce(
                || [Complex64::new(0.0, 0.0); 4],
                |x, y| [x[0] + y[0], x[1] + y[1], x[2] + y[2], x[3] + y[3]],
            );
        let mut raw = [0.0; 4];
        for (slot, z) in raw.iter_mut().zip(sums) {
            *slot = real_checked(z, ORACLE_REALITY_TOL)?;
        }
        Ok(MomentTable { raw })
    }

    /// `κ₂,₂(x, p)` of one mode from Weyl-ordered moments, for a centered
    /// state.
    pub fn joint_cumulant_22(&self, mode: usize) -> Result<f64> {
        let x2p2 = self.weyl_monomial(mode, 2, 2)?;
        let xx = self.weyl_monomial(mode, 2, 0)?;
        let pp = self.weyl_monomial(mode, 0, 2)?;
        let xp = self.weyl_monomial(mode, 1, 1)?;
        Ok(x2p2 - xx * pp - 2.0 * xp * xp)
    }

    /// Every witness input computed by brute force.
    pub fn cumulant_set(&self, pair: EprOperatorPair) -> Result<CumulantSet> {
        if self.n_modes != 2 {
            return Err(Error::Precondition(
                "cumulant sets need a two-mode state".into(),
            ));
        }
        let u = LinearOp(vec![
            (Quadrature::X(0), pair.g1),
            (Quadrature::X(1), pair.g2),
        ]);
        let v = LinearOp(vec![
            (Quadrature::P(0), pair.h1),
            (Quadrature::P(1), pair.h2),
        ]);
        let cu = cumulants_from_moments(&self.power_moments(&u)?);
        let cv = cumulants_from_moments(&self.power_moments(&v)?);
        let k2 = |op: LinearOp| -> Result<f64> {
            Ok(cumulants_from_moments(&self.power_moments(&op)?).k2)
        };
        Ok(CumulantSet {
            pair,
            k2_u: cu.k2,
            k4_u: cu.k4,
            k2_v: cv.k2,
            k4_v: cv.k4,
            k22_m1: self.joint_cumulant_22(0)?,
            k22_m2: self.joint_cumulant_22(1)?,
            k2_x1: k2(LinearOp::x(0))?,
            k2_x2: k2(LinearOp::x(1))?,
            k2_p1: k2(LinearOp::p(0))?,
            k2_p2: k2(LinearOp::p(1))?,
        })
    }

    /// `μ₄(x) + μ₄(p) − |2κ₂,₂ − 1| − ⟨x²⟩² − ⟨p²⟩²` on one mode.
    pub fn fourth_moment_uncertainty_margin(&self, mode: usize) -> Result<f64> {
        let mx = self.power_moments(&LinearOp::x(mode))?;
        let mp = self.power_moments(&LinearOp::p(mode))?;
        let k22 = self.joint_cumulant_22(mode)?;
        Ok(uncertainty_margin_from_moments(
            mx.raw[1], mx.raw[3], mp.raw[1], mp.raw[3], k22,
        ))
    }

    /// Margin of
    /// `μ₄(x)+μ₄(p) ≥ 2√(|⟨{x,p}⟩|² + |½⟨{x²,p²}⟩ − ⟨x²⟩⟨p²⟩|²) + ⟨x²⟩² + ⟨p²⟩²`,
    /// with `{·,·}` the anticommutator, for a centered state.
    pub fn anticommutator_bound_margin(&self, mode: usize) -> Result<f64> {
        let (x, p) = (LinearOp::x(mode), LinearOp::p(mode));
        let mx = self.power_moments(&x)?;
        let mp = self.power_moments(&p)?;
        let xp = self.expectation(&[x.clone(), p.clone()]);
        let px = self.expectation(&[p.clone(), x.clone()]);
        let xxpp = self.expectation(&[x.clone(), x.clone(), p.clone(), p.clone()]);
        let ppxx = self.expectation(&[p.clone(), p, x.clone(), x]);
        let anti1 = real_checked(xp + px, ORACLE_REALITY_TOL)?;
        let anti2 = real_checked(xxpp + ppxx, ORACLE_REALITY_TOL)?;
        let (x2, p2) = (mx.raw[1], mp.raw[1]);
        let bound =
            2.0 * (anti1 * anti1 + (0.5 * anti2 - x2 * p2).powi(2)).sqrt() + x2 * x2 + p2 * p2;
        Ok(mx.raw[3] + mp.raw[3] - bound)
    }

    /// `⟨n̂_mode⟩`.
    pub fn mean_photons(&self, mode: usize) -> Result<f64> {
        self.check_mode(mode)?;
        Ok(self
            .kets
            .iter()
            .flat_map(|k| k.iter())
            .map(|(&(a, b), z)| z.norm_sqr() * if mode == 0 { a } else { b } as f64)
            .sum())
    }

    /// `⟨n̂₀ n̂₁⟩`.
    pub fn photon_correlation(&self) -> f64 {
        self.kets
            .iter()
            .flat_map(|k| k.iter())
            .map(|(&(a, b), z)| z.norm_sqr() * (a as f64) * (b as f64))
            .sum()
    }
}

/// Single-mode pure loss on a dense density matrix:
/// `ρ'_{mn} = Σ_l K(m+l,l) K(n+l,l) ρ_{m+l,n+l}`.
fn lossy_density(rho: &DMatrix<Complex64>, eta: f64) -> Result<DMatrix<Complex64>> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter(format!(
            "loss efficiency {eta} outside [0, 1]"
        )));
    }
    if eta == 1.0 {
        return Ok(rho.clone());
    }
    let dim = rho.nrows();
    let lf = ln_factorials(dim + 2);
    let k = DMatrix::from_fn(
        dim,
        dim,
        |n, l| if l <= n { kraus(&lf, n, l, eta) } else { 0.0 },
    );
    let mut out = DMatrix::<Complex64>::zeros(dim, dim);
    for m in 0..dim {
        for n in 0..dim {
            let mut acc = Complex64::new(0.0, 0.0);
            for l in 0..dim - m.max(n) {
                acc += rho[(m + l, n + l)] * (k[(m + l, l)] * k[(n + l, l)]);
            }
            out[(m, n)] = acc;
        }
    }
    Ok(out)
}

/// Per-mode cutoff that keeps the construction leakage of `desc` far below
/// [`MAX_LEAKAGE`].
pub fn suggested_cutoff(desc: &StateDescriptor) -> usize {
    let squeezed = |r: f64| {
        let mut n = DEFAULT_CUTOFF;
        while squeezed_amplitudes(r, n).1 > 1e-15 && n < 4000 {
            n += 10;
        }
        n
    };
    match desc.kind {
        StateKind::Vacuum => DEFAULT_CUTOFF,
        StateKind::Tmsv => {
            let t = desc.r.unwrap_or(0.0).tanh();
            if t == 0.0 {
                DEFAULT_CUTOFF
            } else {
                ((-15.0 * 10f64.ln() / (2.0 * t.ln())).ceil() as usize).max(DEFAULT_CUTOFF)
            }
        }
        StateKind::SplitSqueezedVacuum | StateKind::SplitPhssv => squeezed(desc.r.unwrap_or(0.0)),
        StateKind::SplitFock => DEFAULT_CUTOFF + 10,
    }
}

/// Builds the oracle version of a factory state at the given cutoff.
pub fn build_fock(desc: &StateDescriptor, cutoff: usize) -> Result<FockState> {
    let eta = desc.eta();
    let need = |v: Option<f64>, name: &str| {
        v.ok_or_else(|| Error::InvalidParameter(format!("descriptor `{desc}` is missing `{name}`")))
    };
    let state = match desc.kind {
        StateKind::Vacuum => FockState::vacuum(2),
        StateKind::Tmsv => FockState::tmsv(need(desc.r, "r")?, cutoff)?
            .apply_loss(0, eta)?
            .apply_loss(1, eta)?,
        StateKind::SplitSqueezedVacuum => {
            FockState::squeezed_vacuum(need(desc.r, "r")?, cutoff)?.split(eta)?
        }
        StateKind::SplitFock => {
            let n = desc.n.ok_or_else(|| {
                Error::InvalidParameter(format!("descriptor `{desc}` is missing `n`"))
            })?;
            FockState::ring(&factory::fock_coefficients(n), desc.ring_epsilon()?, cutoff)?
                .split(eta)?
        }
        StateKind::SplitPhssv => FockState::phssv(need(desc.r, "r")?, default_tap_theta(), cutoff)?
            .0
            .split(eta)?,
    };
    if state.leakage > MAX_LEAKAGE {
        return Err(Error::Leakage {
            leakage: state.leakage,
            cutoff,
        });
    }
    Ok(state)
}

/// Operator-norm residual of `[x^k, p^k] = i k Σ_{m<k} x^{k−1−m} p^{k−1} x^m`
/// on the interior of a `cutoff`-level truncation, excluding the outermost
/// five levels.
pub fn verify_commutator_identity(k: u32, cutoff: usize) -> Result<f64> {
    if !(1..=3).contains(&k) {
        return Err(Error::InvalidParameter(format!(
            "commutator check supports k in 1..=3, got {k}"
        )));
    }
    if cutoff < 12 {
        return Err(Error::InvalidParameter(format!(
            "cutoff {cutoff} too small for the check"
        )));
    }
    let mut x = DMatrix::<Complex64>::zeros(cutoff, cutoff);
    let mut p = DMatrix::<Complex64>::zeros(cutoff, cutoff);
    for n in 1..cutoff {
        let s = (n as f64).sqrt() * FRAC_1_SQRT_2;
        x[(n - 1, n)] = Complex64::new(s, 0.0);
        x[(n, n - 1)] = Complex64::new(s, 0.0);
        p[(n - 1, n)] = Complex64::new(0.0, -s);
        p[(n, n - 1)] = Complex64::new(0.0, s);
    }
    let pow = |m: &DMatrix<Complex64>, e: u32| {
        (0..e).fold(DMatrix::identity(cutoff, cutoff), |acc, _| acc * m)
    };
    let (xk, pk) = (pow(&x, k), pow(&p, k));
    let lhs = &xk * &pk - &pk * &xk;
    let pk1 = pow(&p, k - 1);
    let mut rhs = DMatrix::<Complex64>::zeros(cutoff, cutoff);
    for m in 0..k {
        rhs += pow(&x, k - 1 - m) * &pk1 * pow(&x, m);
    }
    rhs *= Complex64::new(0.0, k as f64);
    let interior = cutoff - 5;
    let diff = (lhs - rhs).view((0, 0), (interior, interior)).into_owned();
    Ok(diff.singular_values().max())
}
