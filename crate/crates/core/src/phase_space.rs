//! Sum-of-Gaussians phase-space representation and Gaussian circuit operations.
//!
//! States are Wigner functions written as affine combinations
//! `W(ξ) = Σ_k c_k G_{μ_k, Σ_k}(ξ)` with complex weights `c_k`, complex means
//! `μ_k` and real covariances `Σ_k`. Quadratures are ordered
//! `(x₁, p₁, x₂, p₂, …)`, with `ħ = 1` and vacuum variance `1/2`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;

use crate::numeric::{csum, real_checked, spd_condition, symplectic_form};
use crate::{Error, Result};

/// Tolerance on the imaginary residue of quantities that must be real.
pub const REALITY_TOL: f64 = 1e-10;
/// Largest covariance condition number accepted before a component is
/// declared degenerate.
pub const MAX_CONDITION: f64 = 1e12;
const SYMMETRY_TOL: f64 = 1e-12;
const SYMPLECTIC_TOL: f64 = 1e-12;

/// One weighted Gaussian term of a Wigner function.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGaussianComponent {
    weight: Complex64,
    mean: DVector<Complex64>,
    cov: DMatrix<f64>,
}

impl ComplexGaussianComponent {
    /// Builds a component, checking shapes and that `cov` is symmetric to
    /// within `1e-12` of its largest entry. The stored covariance is exactly
    /// symmetrized.
    pub fn new(weight: Complex64, mean: DVector<Complex64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 || !d.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "mean length {d} is not a positive even number"
            )));
        }
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: cov.nrows(),
            });
        }
        let scale = cov.amax().max(f64::MIN_POSITIVE);
        let asymmetry = (&cov - cov.transpose()).amax() / scale;
        if asymmetry > SYMMETRY_TOL {
            return Err(Error::NotSymmetric {
                index: 0,
                asymmetry,
            });
        }
        let cov = (&cov + cov.transpose()) * 0.5;
        Ok(Self { weight, mean, cov })
    }

    /// Real-mean component, the common case for Gaussian states.
    pub fn real(weight: Complex64, mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        Self::new(weight, mean.map(|m| Complex64::new(m, 0.0)), cov)
    }

    pub fn weight(&self) -> Complex64 {
        self.weight
    }

    pub fn mean(&self) -> &DVector<Complex64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn with_weight(&self, weight: Complex64) -> Self {
        Self {
            weight,
            mean: self.mean.clone(),
            cov: self.cov.clone(),
        }
    }
}

/// Cholesky factor of a component covariance plus its log-determinant.
pub(crate) struct Factored {
    chol: Cholesky<f64, Dyn>,
    log_det: f64,
}

impl Factored {
    pub(crate) fn new(cov: &DMatrix<f64>, index: usize) -> Result<Self> {
        let condition = spd_condition(cov);
        if !(condition <= MAX_CONDITION) {
            return Err(Error::DegenerateComponent { index, condition });
        }
        let chol =
            Cholesky::new(cov.clone()).ok_or(Error::DegenerateComponent { index, condition })?;
        let log_det = 2.0
            * chol
                .l_dirty()
                .diagonal()
                .iter()
                .map(|d| d.ln())
                .sum::<f64>();
        Ok(Self { chol, log_det })
    }

    /// Normalized Gaussian density at complex offset `delta`.
    pub(crate) fn density(&self, delta: &DVector<Complex64>) -> Complex64 {
        let d = delta.len() as f64;
        let re = self.chol.solve(&delta.map(|z| z.re));
        let im = self.chol.solve(&delta.map(|z| z.im));
        let solved = DVector::from_fn(delta.len(), |i, _| Complex64::new(re[i], im[i]));
        let quad: Complex64 = delta.iter().zip(solved.iter()).map(|(a, b)| a * b).sum();
        let log_norm = -0.5 * (d * (2.0 * PI).ln() + self.log_det);
        (-0.5 * quad + log_norm).exp()
    }

    pub(crate) fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }
}

/// An N-mode state as an ordered list of complex-weighted Gaussians.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSumState {
    n_modes: usize,
    components: Vec<ComplexGaussianComponent>,
}

impl GaussianSumState {
    /// Wraps components after checking that their dimensions match `n_modes`.
    /// Normalization is not enforced here; see [`Self::check_normalized`].
    pub fn new(n_modes: usize, components: Vec<ComplexGaussianComponent>) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::InvalidParameter("n_modes must be positive".into()));
        }
        if components.is_empty() {
            return Err(Error::InvalidParameter(
                "a state needs at least one component".into(),
            ));
        }
        for c in &components {
            if c.dim() != 2 * n_modes {
                return Err(Error::DimensionMismatch {
                    expected: 2 * n_modes,
                    found: c.dim(),
                });
            }
        }
        Ok(Self {
            n_modes,
            components,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn dim(&self) -> usize {
        2 * self.n_modes
    }

    pub fn components(&self) -> &[ComplexGaussianComponent] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// `Σ_k c_k`, which equals `∫ W` because every Gaussian factor is normalized.
    pub fn total_weight(&self) -> Complex64 {
        csum(self.components.iter().map(|c| c.weight))
    }

    pub fn check_normalized(&self, tol: f64) -> Result<()> {
        let w = self.total_weight();
        if (w - Complex64::new(1.0, 0.0)).norm() > tol {
            return Err(Error::Precondition(format!(
                "state is not normalized: total weight {w}"
            )));
        }
        Ok(())
    }

    /// Multiplies every weight by `factor`.
    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            n_modes: self.n_modes,
            components: self
                .components
                .iter()
                .map(|c| c.with_weight(c.weight * factor))
                .collect(),
        }
    }

    /// Divides every weight by the (real) total weight.
    pub fn normalized(&self) -> Result<Self> {
        let w = real_checked(self.total_weight(), REALITY_TOL)?;
        if w.abs() < f64::MIN_POSITIVE {
            return Err(Error::Precondition(
                "cannot normalize a zero-weight state".into(),
            ));
        }
        Ok(self.scaled(Complex64::new(1.0 / w, 0.0)))
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

    /// Evaluates the Wigner function at a real phase-space point.
    pub fn wigner(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: point.len(),
            });
        }
        let xi = DVector::from_iterator(point.len(), point.iter().map(|&v| Complex64::new(v, 0.0)));
        let mut terms = Vec::with_capacity(self.components.len());
        for (k, c) in self.components.iter().enumerate() {
            let f = Factored::new(&c.cov, k)?;
            terms.push(c.weight * f.density(&(&xi - &c.mean)));
        }
        real_checked(csum(terms), REALITY_TOL)
    }

    /// Maps means as `μ → Sμ + d` and covariances as `Σ → S Σ Sᵀ`.
    pub fn apply_symplectic(&self, map: &SymplecticMap) -> Result<Self> {
        if map.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: map.dim(),
            });
        }
        let s = &map.matrix;
        let sc = s.map(|v| Complex64::new(v, 0.0));
        let components = self
            .components
            .iter()
            .map(|c| {
                let mut mean = &sc * &c.mean;
                if let Some(d) = &map.displacement {
                    mean += d.map(|v| Complex64::new(v, 0.0));
                }
                let cov = s * &c.cov * s.transpose();
                ComplexGaussianComponent {
                    weight: c.weight,
                    mean,
                    cov: (&cov + cov.transpose()) * 0.5,
                }
            })
            .collect();
        Ok(Self {
            n_modes: self.n_modes,
            components,
        })
    }

    /// Pure-loss channel of efficiency `eta` on one mode.
    pub fn apply_loss(&self, mode: usize, eta: f64) -> Result<Self> {
        self.check_mode(mode)?;
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidParameter(format!(
                "loss efficiency {eta} outside [0, 1]"
            )));
        }
        let d = self.dim();
        let mut scale = DVector::from_element(d, 1.0);
        scale[2 * mode] = eta.sqrt();
        scale[2 * mode + 1] = eta.sqrt();
        let components = self
            .components
            .iter()
            .map(|c| {
                let mean = DVector::from_fn(d, |i, _| c.mean[i] * scale[i]);
                let mut cov = DMatrix::from_fn(d, d, |i, j| c.cov[(i, j)] * scale[i] * scale[j]);
                cov[(2 * mode, 2 * mode)] += 0.5 * (1.0 - eta);
                cov[(2 * mode + 1, 2 * mode + 1)] += 0.5 * (1.0 - eta);
                ComplexGaussianComponent {
                    weight: c.weight,
                    mean,
                    cov,
                }
            })
            .collect();
        Ok(Self {
            n_modes: self.n_modes,
            components,
        })
    }

    /// Equal-efficiency loss on every mode.
    pub fn apply_loss_all(&self, eta: f64) -> Result<Self> {
        (0..self.n_modes).try_fold(self.clone(), |s, m| s.apply_loss(m, eta))
    }

    /// Marginalizes one mode away.
    pub fn partial_trace(&self, mode: usize) -> Result<Self> {
        self.check_mode(mode)?;
        if self.n_modes < 2 {
            return Err(Error::Precondition(
                "partial trace needs at least two modes".into(),
            ));
        }
        let keep: Vec<usize> = (0..self.dim()).filter(|&i| i / 2 != mode).collect();
        let components = self
            .components
            .iter()
            .map(|c| ComplexGaussianComponent {
                weight: c.weight,
                mean: c.mean.select_rows(keep.iter()),
                cov: c.cov.select_rows(keep.iter()).select_columns(keep.iter()),
            })
            .collect();
        Ok(Self {
            n_modes: self.n_modes - 1,
            components,
        })
    }

    /// Applies `⟨0|·|0⟩` on `mode`, returning the unnormalized conditional
    /// state of the remaining modes and its total weight (the vacuum
    /// probability).
    pub fn project_vacuum(&self, mode: usize) -> Result<(Self, f64)> {
        self.check_mode(mode)?;
        if self.n_modes < 2 {
            return Err(Error::Precondition(
                "vacuum projection needs at least two modes".into(),
            ));
        }
        let a = [2 * mode, 2 * mode + 1];
        let b: Vec<usize> = (0..self.dim()).filter(|&i| i / 2 != mode).collect();
        let mut components = Vec::with_capacity(self.components.len());
        for (k, c) in self.components.iter().enumerate() {
            let mut saa = c.cov.select_rows(a.iter()).select_columns(a.iter());
            saa[(0, 0)] += 0.5;
            saa[(1, 1)] += 0.5;
            let f = Factored::new(&saa, k)?;
            let inv = f.inverse();
            let sba = c.cov.select_rows(b.iter()).select_columns(a.iter());
            let sbb = c.cov.select_rows(b.iter()).select_columns(b.iter());
            let mean_a = c.mean.select_rows(a.iter());
            let mean_b = c.mean.select_rows(b.iter());
            let gain = &sba * &inv;
            let gain_c = gain.map(|v| Complex64::new(v, 0.0));
            let inv_c = inv.map(|v| Complex64::new(v, 0.0));
            let quad = (mean_a.transpose() * &inv_c * &mean_a)[(0, 0)];
            let overlap = (-0.5 * quad - 0.5 * Complex64::new(f.log_det, 0.0)).exp();
            let cov = &sbb - &gain * sba.transpose();
            components.push(ComplexGaussianComponent {
                weight: c.weight * overlap,
                mean: mean_b - gain_c * mean_a,
                cov: (&cov + cov.transpose()) * 0.5,
            });
        }
        let state = Self {
            n_modes: self.n_modes - 1,
            components,
        };
        let p = real_checked(state.total_weight(), REALITY_TOL)?;
        Ok((state, p))
    }

    /// Hilbert–Schmidt overlap `Tr[ρ_a ρ_b] = (2π)^N ∫ W_a W_b`.
    pub fn overlap(&self, other: &Self) -> Result<f64> {
        if other.n_modes != self.n_modes {
            return Err(Error::DimensionMismatch {
                expected: self.n_modes,
                found: other.n_modes,
            });
        }
        let prefactor = (2.0 * PI).powi(self.n_modes as i32);
        let mut terms = Vec::with_capacity(self.len() * other.len());
        for (j, a) in self.components.iter().enumerate() {
            for b in &other.components {
                let f = Factored::new(&(&a.cov + &b.cov), j)?;
                terms.push(a.weight * b.weight * f.density(&(&a.mean - &b.mean)) * prefactor);
            }
        }
        real_checked(csum(terms), REALITY_TOL)
    }

    /// First moments `⟨ξ⟩ = Σ_k c_k μ_k`.
    pub fn first_moments(&self) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(self.dim());
        for i in 0..self.dim() {
            let z = csum(self.components.iter().map(|c| c.weight * c.mean[i]));
            out[i] = real_checked(z, REALITY_TOL)?;
        }
        Ok(out)
    }

    /// Shifts every mean so the state has zero first moments.
    pub fn centered(&self) -> Result<Self> {
        let shift = self.first_moments()?.map(|v| Complex64::new(v, 0.0));
        Ok(Self {
            n_modes: self.n_modes,
            components: self
                .components
                .iter()
                .map(|c| ComplexGaussianComponent {
                    weight: c.weight,
                    mean: &c.mean - &shift,
                    cov: c.cov.clone(),
                })
                .collect(),
        })
    }

    /// State-level symmetrized second moments `E_W[ξ_i ξ_j]`.
    pub fn second_moments(&self) -> Result<DMatrix<f64>> {
        let d = self.dim();
        let mut out = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in i..d {
                let z = csum(self.components.iter().map(|c| {
                    c.weight * (c.mean[i] * c.mean[j] + Complex64::new(c.cov[(i, j)], 0.0))
                }));
                let v = real_checked(z, REALITY_TOL)?;
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        Ok(out)
    }

    /// Rotates each mode so its marginal `x–p` correlation vanishes.
    ///
    /// The rotation angle is the one of smallest magnitude that diagonalizes
    /// the mode's 2×2 second-moment block; an isotropic block is left alone.
    pub fn to_standard_form(&self) -> Result<Self> {
        let m = self.second_moments()?;
        let mut state = self.clone();
        for mode in 0..self.n_modes {
            let (a, b, c) = (
                m[(2 * mode, 2 * mode)],
                m[(2 * mode, 2 * mode + 1)],
                m[(2 * mode + 1, 2 * mode + 1)],
            );
            let scale = a.abs().max(c.abs()).max(f64::MIN_POSITIVE);
            if b.abs() <= 1e-15 * scale {
                continue;
            }
            let diff = a - c;
            let phi = if diff.abs() <= 1e-15 * scale {
                -0.25 * PI * b.signum()
            } else {
                -0.5 * (2.0 * b / diff).atan()
            };
            let map = Gate::Rotate { phi, mode }.to_map(self.n_modes)?;
            state = state.apply_symplectic(&map)?;
        }
        Ok(state)
    }

    /// Tensor product `self ⊗ other`; `self` occupies the leading modes.
    pub fn tensor(&self, other: &Self) -> Self {
        let da = self.dim();
        let db = other.dim();
        let mut components = Vec::with_capacity(self.len() * other.len());
        for a in &self.components {
            for b in &other.components {
                let mut mean = DVector::zeros(da + db);
                mean.rows_mut(0, da).copy_from(&a.mean);
                mean.rows_mut(da, db).copy_from(&b.mean);
                let mut cov = DMatrix::zeros(da + db, da + db);
                cov.view_mut((0, 0), (da, da)).copy_from(&a.cov);
                cov.view_mut((da, da), (db, db)).copy_from(&b.cov);
                components.push(ComplexGaussianComponent {
                    weight: a.weight * b.weight,
                    mean,
                    cov,
                });
            }
        }
        Self {
            n_modes: self.n_modes + other.n_modes,
            components,
        }
    }

    /// Conjugate-pairing check at a point: the Wigner value's imaginary
    /// residue must be negligible.
    pub fn check_reality_at(&self, point: &[f64]) -> Result<()> {
        self.wigner(point).map(|_| ())
    }

    /// Plain-text serialization: a `modes=N components=K` header then one
    /// line per component with weight, mean (real then imaginary parts) and
    /// the row-major covariance, all at 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = format!("modes={} components={}\n", self.n_modes, self.len());
        for c in &self.components {
            let mut fields: Vec<f64> = vec![c.weight.re, c.weight.im];
            fields.extend(c.mean.iter().map(|z| z.re));
            fields.extend(c.mean.iter().map(|z| z.im));
            for i in 0..c.cov.nrows() {
                fields.extend(c.cov.row(i).iter().copied());
            }
            let line: Vec<String> = fields.iter().map(|v| format!("{v:.16e}")).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }
}

impl FromStr for GaussianSumState {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (hline, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, 1, "empty state file"))?;
        let mut n_modes = None;
        let mut n_comp = None;
        for tok in header.split_whitespace() {
            let col = tok.as_ptr() as usize - header.as_ptr() as usize + 1;
            let (key, val) = tok.split_once('=').ok_or_else(|| {
                Error::parse(hline + 1, col, format!("expected key=value, got `{tok}`"))
            })?;
            let v: usize = val
                .parse()
                .map_err(|_| Error::parse(hline + 1, col, format!("bad integer `{val}`")))?;
            match key {
                "modes" => n_modes = Some(v),
                "components" => n_comp = Some(v),
                _ => {
                    return Err(Error::parse(
                        hline + 1,
                        col,
                        format!("unknown header key `{key}`"),
                    ))
                }
            }
        }
        let n_modes = n_modes.ok_or_else(|| Error::parse(hline + 1, 1, "missing modes="))?;
        let n_comp = n_comp.ok_or_else(|| Error::parse(hline + 1, 1, "missing components="))?;
        let d = 2 * n_modes;
        let expected = 2 + 2 * d + d * d;
        let mut components = Vec::with_capacity(n_comp);
        for (lno, line) in lines {
            let mut vals = Vec::with_capacity(expected);
            for tok in line.split_whitespace() {
                let col = tok.as_ptr() as usize - line.as_ptr() as usize + 1;
                vals.push(
                    tok.parse::<f64>()
                        .map_err(|_| Error::parse(lno + 1, col, format!("bad number `{tok}`")))?,
                );
            }
            if vals.len() != expected {
                return Err(Error::parse(
                    lno + 1,
                    1,
                    format!("expected {expected} fields, found {}", vals.len()),
                ));
            }
            let weight = Complex64::new(vals[0], vals[1]);
            let mean = DVector::from_fn(d, |i, _| Complex64::new(vals[2 + i], vals[2 + d + i]));
            let cov = DMatrix::from_row_slice(d, d, &vals[2 + 2 * d..]);
            let comp = ComplexGaussianComponent::new(weight, mean, cov)
                .map_err(|e| Error::parse(lno + 1, 1, format!("invalid component: {e}")))?;
            components.push(comp);
        }
        if components.len() != n_comp {
            return Err(Error::parse(
                hline + 1,
                1,
                format!(
                    "header declares {n_comp} components, found {}",
                    components.len()
                ),
            ));
        }
        GaussianSumState::new(n_modes, components)
    }
}

/// A real symplectic matrix with an optional displacement.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticMap {
    matrix: DMatrix<f64>,
    displacement: Option<DVector<f64>>,
}

impl SymplecticMap {
    pub fn new(matrix: DMatrix<f64>, displacement: Option<DVector<f64>>) -> Result<Self> {
        let d = matrix.nrows();
        if d == 0 || !d.is_multiple_of(2) || matrix.ncols() != d {
            return Err(Error::InvalidParameter(format!(
                "symplectic matrix must be square with even size, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if let Some(disp) = &displacement {
            if disp.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: disp.len(),
                });
            }
        }
        let j = symplectic_form(d / 2);
        let residual = (&matrix * &j * matrix.transpose() - &j).amax();
        if !(residual <= SYMPLECTIC_TOL) {
            return Err(Error::NotSymplectic { residual });
        }
        Ok(Self {
            matrix,
            displacement,
        })
    }

    pub fn identity(n_modes: usize) -> Self {
        Self {
            matrix: DMatrix::identity(2 * n_modes, 2 * n_modes),
            displacement: None,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn displacement(&self) -> Option<&DVector<f64>> {
        self.displacement.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `other ∘ self`: apply `self` first.
    pub fn then(&self, other: &SymplecticMap) -> Result<SymplecticMap> {
        if other.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        let matrix = &other.matrix * &self.matrix;
        let displacement = match (&self.displacement, &other.displacement) {
            (None, None) => None,
            (a, b) => {
                let mut d = match a {
                    Some(a) => &other.matrix * a,
                    None => DVector::zeros(self.dim()),
                };
                if let Some(b) = b {
                    d += b;
                }
                Some(d)
            }
        };
        Ok(SymplecticMap {
            matrix,
            displacement,
        })
    }
}

/// Elementary Gaussian gates.
///
/// * `Beamsplitter`: `x_i → cosθ x_i + sinθ x_j`, `x_j → −sinθ x_i + cosθ x_j`
///   (identically for `p`); transmittivity `cos²θ`.
/// * `Squeeze`: `x → e^r x`, `p → e^{−r} p`, so the vacuum covariance becomes
///   `diag(e^{2r}, e^{−2r})/2`.
/// * `TwoModeSqueeze`: `x_i → cosh r x_i + sinh r x_j`,
///   `p_i → cosh r p_i − sinh r p_j` (and symmetrically for mode `j`).
/// * `Rotate`: `x → cosφ x − sinφ p`, `p → sinφ x + cosφ p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    Beamsplitter { theta: f64, i: usize, j: usize },
    Squeeze { r: f64, mode: usize },
    TwoModeSqueeze { r: f64, i: usize, j: usize },
    Rotate { phi: f64, mode: usize },
}

impl Gate {
    pub fn to_map(&self, n_modes: usize) -> Result<SymplecticMap> {
        let check = |m: usize| {
            if m >= n_modes {
                Err(Error::InvalidMode { mode: m, n_modes })
            } else {
                Ok(())
            }
        };
        let distinct = |i: usize, j: usize| {
            if i == j {
                Err(Error::InvalidParameter(format!(
                    "two-mode gate needs distinct modes, got {i} twice"
                )))
            } else {
                Ok(())
            }
        };
        let mut s = DMatrix::<f64>::identity(2 * n_modes, 2 * n_modes);
        match *self {
            Gate::Beamsplitter { theta, i, j } => {
                check(i)?;
                check(j)?;
                distinct(i, j)?;
                let (sn, cs) = theta.sin_cos();
                for q in 0..2 {
                    let (a, b) = (2 * i + q, 2 * j + q);
                    s[(a, a)] = cs;
                    s[(a, b)] = sn;
                    s[(b, a)] = -sn;
                    s[(b, b)] = cs;
                }
            }
            Gate::Squeeze { r, mode } => {
                check(mode)?;
                s[(2 * mode, 2 * mode)] = r.exp();
                s[(2 * mode + 1, 2 * mode + 1)] = (-r).exp();
            }
            Gate::TwoModeSqueeze { r, i, j } => {
                check(i)?;
                check(j)?;
                distinct(i, j)?;
                let (ch, sh) = (r.cosh(), r.sinh());
                let (xi, pi, xj, pj) = (2 * i, 2 * i + 1, 2 * j, 2 * j + 1);
                s[(xi, xi)] = ch;
                s[(xi, xj)] = sh;
                s[(xj, xj)] = ch;
                s[(xj, xi)] = sh;
                s[(pi, pi)] = ch;
                s[(pi, pj)] = -sh;
                s[(pj, pj)] = ch;
                s[(pj, pi)] = -sh;
            }
            Gate::Rotate { phi, mode } => {
                check(mode)?;
                let (sn, cs) = phi.sin_cos();
                let (x, p) = (2 * mode, 2 * mode + 1);
                s[(x, x)] = cs;
                s[(x, p)] = -sn;
                s[(p, x)] = sn;
                s[(p, p)] = cs;
            }
        }
        SymplecticMap::new(s, None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn vacuum(n: usize) -> GaussianSumState {
        let c = ComplexGaussianComponent::real(
            Complex64::new(1.0, 0.0),
            DVector::zeros(2 * n),
            DMatrix::identity(2 * n, 2 * n) * 0.5,
        )
        .unwrap();
        GaussianSumState::new(n, vec![c]).unwrap()
    }

    fn coherent(x: f64, p: f64) -> GaussianSumState {
        let c = ComplexGaussianComponent::real(
            Complex64::new(1.0, 0.0),
            DVector::from_vec(vec![x, p]),
            DMatrix::identity(2, 2) * 0.5,
        )
        .unwrap();
        GaussianSumState::new(1, vec![c]).unwrap()
    }

    fn max_diff(a: &GaussianSumState, b: &GaussianSumState) -> f64 {
        a.components()
            .iter()
            .zip(b.components())
            .map(|(x, y)| {
                let dm = (x.mean() - y.mean())
                    .iter()
                    .map(|z| z.norm())
                    .fold(0.0, f64::max);
                let dc = (x.cov() - y.cov()).amax();
                dm.max(dc).max((x.weight() - y.weight()).norm())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn vacuum_peak_and_tail() {
        let v = vacuum(1);
        assert_relative_eq!(v.wigner(&[0.0, 0.0]).unwrap(), 1.0 / PI, epsilon = 1e-15);
        let tail = v.wigner(&[10.0, 10.0]).unwrap();
        assert!(tail > 0.0);
        assert_relative_eq!(tail, (-200.0f64).exp() / PI, max_relative = 1e-10);
    }

    #[test]
    fn wigner_rejects_wrong_point_length() {
        assert!(matches!(
            vacuum(2).wigner(&[0.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn degenerate_component_is_named() {
        let c = ComplexGaussianComponent::real(
            Complex64::new(1.0, 0.0),
            DVector::zeros(2),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-14]),
        )
        .unwrap();
        let ok = ComplexGaussianComponent::real(
            Complex64::new(0.0, 0.0),
            DVector::zeros(2),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let s = GaussianSumState::new(1, vec![ok, c]).unwrap();
        match s.wigner(&[0.0, 0.0]) {
            Err(Error::DegenerateComponent { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected degenerate component error, got {other:?}"),
        }
    }

    #[test]
    fn asymmetric_covariance_rejected() {
        let r = ComplexGaussianComponent::real(
            Complex64::new(1.0, 0.0),
            DVector::zeros(2),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]),
        );
        assert!(matches!(r, Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn beamsplitter_convention() {
        let bs = Gate::Beamsplitter {
            theta: PI / 4.0,
            i: 0,
            j: 1,
        }
        .to_map(2)
        .unwrap();
        let v = bs.matrix() * DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        assert_relative_eq!(v[0], FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_relative_eq!(v[2], -FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_eq!(v[1], 0.0);
        assert_eq!(v[3], 0.0);

        let id = Gate::Beamsplitter {
            theta: 0.0,
            i: 0,
            j: 1,
        }
        .to_map(2)
        .unwrap();
        assert_eq!(id.matrix(), &DMatrix::<f64>::identity(4, 4));
    }

    #[test]
    fn gate_mode_errors() {
        assert!(matches!(
            Gate::Squeeze { r: 0.1, mode: 2 }.to_map(2),
            Err(Error::InvalidMode { .. })
        ));
        assert!(Gate::Beamsplitter {
            theta: 0.1,
            i: 1,
            j: 1
        }
        .to_map(2)
        .is_err());
    }

    #[test]
    fn non_symplectic_rejected_with_residual() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 2.0]));
        match SymplecticMap::new(m, None) {
            Err(Error::NotSymplectic { residual }) => assert_relative_eq!(residual, 3.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn squeezer_on_vacuum() {
        let r = 0.7;
        let s = vacuum(1)
            .apply_symplectic(&Gate::Squeeze { r, mode: 0 }.to_map(1).unwrap())
            .unwrap();
        let cov = s.components()[0].cov();
        assert_relative_eq!(cov[(0, 0)], (2.0 * r).exp() / 2.0, epsilon = 1e-14);
        assert_relative_eq!(cov[(1, 1)], (-2.0 * r).exp() / 2.0, epsilon = 1e-14);
        assert_eq!(cov[(0, 1)], 0.0);
    }

    #[test]
    fn beamsplitter_round_trip() {
        let s = coherent(0.3, -0.2).tensor(&coherent(1.1, 0.4));
        let s = s
            .apply_symplectic(&Gate::Squeeze { r: 0.3, mode: 1 }.to_map(2).unwrap())
            .unwrap();
        let fwd = Gate::Beamsplitter {
            theta: PI / 4.0,
            i: 0,
            j: 1,
        }
        .to_map(2)
        .unwrap();
        let back = Gate::Beamsplitter {
            theta: -PI / 4.0,
            i: 0,
            j: 1,
        }
        .to_map(2)
        .unwrap();
        let out = s
            .apply_symplectic(&fwd)
            .unwrap()
            .apply_symplectic(&back)
            .unwrap();
        assert!(max_diff(&s, &out) < 1e-12);
    }

    #[test]
    fn two_mode_squeezer_covariance() {
        let r = 0.4;
        let s = vacuum(2)
            .apply_symplectic(&Gate::TwoModeSqueeze { r, i: 0, j: 1 }.to_map(2).unwrap())
            .unwrap();
        let cov = s.components()[0].cov();
        let (c, sh) = ((2.0 * r).cosh() / 2.0, (2.0 * r).sinh() / 2.0);
        for i in 0..4 {
            assert_relative_eq!(cov[(i, i)], c, epsilon = 1e-14);
        }
        assert_relative_eq!(cov[(0, 2)], sh, epsilon = 1e-14);
        assert_relative_eq!(cov[(1, 3)], -sh, epsilon = 1e-14);
        assert_eq!(cov[(0, 1)], 0.0);
    }

    #[test]
    fn loss_edge_cases() {
        let s = coherent(1.0, 2.0)
            .apply_symplectic(&Gate::Squeeze { r: 0.5, mode: 0 }.to_map(1).unwrap())
            .unwrap();
        assert!(max_diff(&s, &s.apply_loss(0, 1.0).unwrap()) < 1e-15);
        let dead = s.apply_loss(0, 0.0).unwrap();
        assert!(max_diff(&dead, &vacuum(1)) < 1e-15);
        let v = vacuum(1).apply_loss(0, 0.5).unwrap();
        assert!(max_diff(&v, &vacuum(1)) < 1e-15);
        assert!(s.apply_loss(0, 1.5).is_err());
        assert!(s.apply_loss(1, 0.5).is_err());
    }

    #[test]
    fn partial_trace_of_product_and_errors() {
        let a = coherent(0.5, 0.1);
        let b = coherent(-0.2, 0.9)
            .apply_symplectic(&Gate::Squeeze { r: 0.2, mode: 0 }.to_map(1).unwrap())
            .unwrap();
        let ab = a.tensor(&b);
        assert_eq!(ab.partial_trace(0).unwrap(), b);
        assert_eq!(ab.partial_trace(1).unwrap(), a);
        assert!(a.partial_trace(0).is_err());
        assert!(ab.partial_trace(2).is_err());
    }

    #[test]
    fn project_vacuum_of_vacuum() {
        let (rest, p) = vacuum(2).project_vacuum(0).unwrap();
        assert_relative_eq!(p, 1.0, epsilon = 1e-15);
        assert!(max_diff(&rest, &vacuum(1)) < 1e-15);
    }

    #[test]
    fn overlaps() {
        assert_relative_eq!(vacuum(1).overlap(&vacuum(1)).unwrap(), 1.0, epsilon = 1e-14);
        // |α| = 0.8 in the x = √2 Re α convention
        let alpha: f64 = 0.8;
        let coh = coherent(2f64.sqrt() * alpha, 0.0);
        assert_relative_eq!(
            vacuum(1).overlap(&coh).unwrap(),
            (-alpha * alpha).exp(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn centering_removes_displacement() {
        let c = coherent(1.3, -0.4).centered().unwrap();
        assert!(max_diff(&c, &vacuum(1)) < 1e-15);
        assert_eq!(vacuum(1).centered().unwrap(), vacuum(1));
    }

    #[test]
    fn standard_form_undoes_rotation() {
        let r = 0.6;
        let sq = vacuum(1)
            .apply_symplectic(&Gate::Squeeze { r, mode: 0 }.to_map(1).unwrap())
            .unwrap();
        let rotated = sq
            .apply_symplectic(
                &Gate::Rotate {
                    phi: PI / 8.0,
                    mode: 0,
                }
                .to_map(1)
                .unwrap(),
            )
            .unwrap();
        let std = rotated.to_standard_form().unwrap();
        let m = std.second_moments().unwrap();
        assert!(m[(0, 1)].abs() <= 1e-10);
        assert_relative_eq!(m[(0, 0)], (2.0 * r).exp() / 2.0, epsilon = 1e-12);
        assert_relative_eq!(m[(1, 1)], (-2.0 * r).exp() / 2.0, epsilon = 1e-12);
        // Already standard: untouched.
        assert!(max_diff(&sq.to_standard_form().unwrap(), &sq) < 1e-12);
        let rv = vacuum(2)
            .apply_symplectic(
                &Gate::Rotate {
                    phi: PI / 6.0,
                    mode: 1,
                }
                .to_map(2)
                .unwrap(),
            )
            .unwrap();
        assert!(max_diff(&rv.to_standard_form().unwrap(), &vacuum(2)) < 1e-12);
    }

    #[test]
    fn text_round_trip() {
        let s = coherent(0.3, 0.1)
            .tensor(&coherent(-1.0, 0.25))
            .apply_symplectic(
                &Gate::TwoModeSqueeze { r: 0.3, i: 0, j: 1 }
                    .to_map(2)
                    .unwrap(),
            )
            .unwrap();
        let text = s.to_text();
        assert!(text.starts_with("modes=2 components=1\n"));
        let back: GaussianSumState = text.parse().unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn text_parse_errors_carry_position() {
        let err = "modes=1 components=1\n1 0 0 0 0 0 0.5 0 0 zz\n"
            .parse::<GaussianSumState>()
            .unwrap_err();
        match err {
            Error::Parse { line, column, .. } => {
                assert_eq!(line, 2);
                assert_eq!(column, 21);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!("modes=1 components=2\n1 0 0 0 0 0 0.5 0 0 0.5\n"
            .parse::<GaussianSumState>()
            .is_err());
    }
}
