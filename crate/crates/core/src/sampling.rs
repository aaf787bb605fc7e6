//! Homodyne and heterodyne sample streams drawn from phase-space marginals,
//! and finite-sample estimators of the witness cumulants.
//!
//! Marginals of a sum of Gaussians are signed mixtures `f = Σ c_k G_k` that
//! are nonnegative as a whole. They are sampled exactly by rejection from the
//! envelope `Σ_k e_k N(x; Re μ_k, Σ_k)`, where a term with complex mean
//! `m + iν` contributes `e_k = |c_k| exp(½ νᵀΣ⁻¹ν)` and a term with real mean
//! and negative real weight is left out (it can only lower `f`).

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::phase_space::GaussianSumState;
use crate::witness::{duan_witness, fourth_order_witness, CumulantSet, EprOperatorPair};
use crate::{Error, Result};

/// Accepted samples produced per RNG substream.
pub const CHUNK: usize = 1 << 16;
/// Expected acceptance rates below this abort sampling.
pub const MIN_ACCEPTANCE: f64 = 1e-4;
/// Smallest sample count accepted by [`estimate_cumulant_set`].
pub const MIN_SAMPLES: usize = 10_000;
/// Jackknife block count.
pub const JACKKNIFE_BLOCKS: usize = 100;

#[derive(Debug, Clone)]
struct Term {
    weight: Complex64,
    re_mean: [f64; 2],
    im_mean: [f64; 2],
    inv: [[f64; 2]; 2],
    chol: [[f64; 2]; 2],
    log_norm: f64,
}

/// A signed mixture of Gaussians in one or two dimensions.
#[derive(Debug, Clone)]
pub struct SignedMixture {
    dim: usize,
    terms: Vec<Term>,
    envelope: Vec<f64>,
    envelope_total: f64,
    total: f64,
}

impl SignedMixture {
    /// Builds a mixture from `(weight, mean, covariance)` triples.
    pub fn new(terms: &[(Complex64, DVector<Complex64>, DMatrix<f64>)]) -> Result<Self> {
        let dim = terms
            .first()
            .map(|t| t.1.len())
            .ok_or_else(|| Error::Sampling("empty mixture".into()))?;
        if !(1..=2).contains(&dim) {
            return Err(Error::Sampling(format!(
                "mixture dimension {dim} not in 1..=2"
            )));
        }
        let mut out = Vec::with_capacity(terms.len());
        let mut envelope = Vec::with_capacity(terms.len());
        for (k, (w, mean, cov)) in terms.iter().enumerate() {
            if mean.len() != dim || cov.nrows() != dim || cov.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: mean.len(),
                });
            }
            let mut full = [[1.0, 0.0], [0.0, 1.0]];
            for i in 0..dim {
                for j in 0..dim {
                    full[i][j] = cov[(i, j)];
                }
            }
            let det = full[0][0] * full[1][1] - full[0][1] * full[1][0];
            if !(det > 0.0 && full[0][0] > 0.0) {
                return Err(Error::DegenerateComponent {
                    index: k,
                    condition: f64::INFINITY,
                });
            }
            let inv = [
                [full[1][1] / det, -full[0][1] / det],
                [-full[1][0] / det, full[0][0] / det],
            ];
            let l00 = full[0][0].sqrt();
            let l10 = full[1][0] / l00;
            let l11 = (full[1][1] - l10 * l10).sqrt();
            let mut re_mean = [0.0; 2];
            let mut im_mean = [0.0; 2];
            for i in 0..dim {
                re_mean[i] = mean[i].re;
                im_mean[i] = mean[i].im;
            }
            let nu = im_mean;
            let q = nu[0] * (inv[0][0] * nu[0] + inv[0][1] * nu[1])
                + nu[1] * (inv[1][0] * nu[0] + inv[1][1] * nu[1]);
            let real_term = w.im == 0.0 && nu.iter().all(|v| *v == 0.0);
            let e = if real_term && w.re <= 0.0 {
                0.0
            } else {
                w.norm() * (0.5 * q).exp()
            };
            envelope.push(e);
            out.push(Term {
                weight: *w,
                re_mean,
                im_mean,
                inv,
                chol: [[l00, 0.0], [l10, l11]],
                log_norm: -0.5 * (dim as f64 * (2.0 * std::f64::consts::PI).ln() + det.ln()),
            });
        }
        let total: f64 = out.iter().map(|t| t.weight.re).sum();
        let envelope_total: f64 = envelope.iter().sum();
        if !(envelope_total > 0.0) {
            return Err(Error::Sampling("mixture has no positive part".into()));
        }
        Ok(Self {
            dim,
            terms: out,
            envelope,
            envelope_total,
            total,
        })
    }

    /// Marginal of `state` on the given quadrature indices, with
    /// `extra_variance` added to each kept quadrature (½ for heterodyne).
    pub fn marginal(
        state: &GaussianSumState,
        indices: &[usize],
        extra_variance: f64,
    ) -> Result<Self> {
        if indices.iter().any(|&i| i >= state.dim()) {
            return Err(Error::InvalidMode {
                mode: indices.iter().max().copied().unwrap_or(0) / 2,
                n_modes: state.n_modes(),
            });
        }
        let terms: Vec<_> = state
            .components()
            .iter()
            .map(|c| {
                let mean = c.mean().select_rows(indices.iter());
                let mut cov = c
                    .cov()
                    .select_rows(indices.iter())
                    .select_columns(indices.iter());
                for i in 0..indices.len() {
                    cov[(i, i)] += extra_variance;
                }
                (c.weight(), mean, cov)
            })
            .collect();
        Self::new(&terms)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Expected fraction of accepted proposals.
    pub fn acceptance_rate(&self) -> f64 {
        self.total / self.envelope_total
    }

    /// Target density `f(x)` and envelope `Σ e_k N(x)`.
    fn evaluate(&self, x: [f64; 2]) -> (f64, f64) {
        let mut f = 0.0;
        let mut env = 0.0;
        for (t, &e) in self.terms.iter().zip(&self.envelope) {
            let dr = [x[0] - t.re_mean[0], x[1] - t.re_mean[1]];
            let (qr, qi, qn) = if self.dim == 1 {
                (
                    t.inv[0][0] * dr[0] * dr[0],
                    t.inv[0][0] * dr[0] * t.im_mean[0],
                    t.inv[0][0] * t.im_mean[0] * t.im_mean[0],
                )
            } else {
                let quad = |a: [f64; 2], b: [f64; 2]| {
                    a[0] * (t.inv[0][0] * b[0] + t.inv[0][1] * b[1])
                        + a[1] * (t.inv[1][0] * b[0] + t.inv[1][1] * b[1])
                };
                (
                    quad(dr, dr),
                    quad(dr, t.im_mean),
                    quad(t.im_mean, t.im_mean),
                )
            };
            let gauss = (-0.5 * qr + t.log_norm).exp();
            // (δ − iν)ᵀΣ⁻¹(δ − iν) = qr − 2i qi − qn
            let phase = Complex64::new(0.5 * qn, qi).exp();
            f += (t.weight * phase).re * gauss;
            env += e * gauss * (0.5 * qn).exp();
        }
        (f, env)
    }

    /// Density at a point of length `dim`.
    pub fn density(&self, x: &[f64]) -> f64 {
        let mut p = [0.0; 2];
        p[..self.dim].copy_from_slice(&x[..self.dim]);
        self.evaluate(p).0
    }

    fn draw_chunk(
        &self,
        count: usize,
        seed: u64,
        stream: u64,
        picker: &WeightedIndex<f64>,
    ) -> Result<Vec<[f64; 2]>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let t = &self.terms[picker.sample(&mut rng)];
            let z0: f64 = rng.sample(StandardNormal);
            let z1: f64 = if self.dim == 2 {
                rng.sample(StandardNormal)
            } else {
                0.0
            };
            let x = [
                t.re_mean[0] + t.chol[0][0] * z0,
                if self.dim == 2 {
                    t.re_mean[1] + t.chol[1][0] * z0 + t.chol[1][1] * z1
                } else {
                    0.0
                },
            ];
            let (f, env) = self.evaluate(x);
            let ratio = f / env;
            if !(-1e-12..=1.0 + 1e-12).contains(&ratio) {
                return Err(Error::Sampling(format!(
                    "acceptance ratio {ratio:.6e} outside [0, 1] at {x:?}; the target is not a nonnegative marginal"
                )));
            }
            let u: f64 = rng.random();
            if u < ratio {
                out.push(x);
            }
        }
        Ok(out)
    }

    /// Draws `count` samples; identical `(seed, count)` give identical
    /// output whatever the thread count, since chunk `i` always uses
    /// substream `i`.
    pub fn sample(&self, count: usize, seed: u64) -> Result<Vec<[f64; 2]>> {
        let rate = self.acceptance_rate();
        if !(rate >= MIN_ACCEPTANCE) {
            return Err(Error::Sampling(format!(
                "expected acceptance rate {rate:.3e} is below {MIN_ACCEPTANCE:e}; the mixture cancels too strongly"
            )));
        }
        let picker = WeightedIndex::new(&self.envelope)
            .map_err(|e| Error::Sampling(format!("bad envelope weights: {e}")))?;
        let n_chunks = count.div_ceil(CHUNK);
        let chunks: Vec<Vec<[f64; 2]>> = (0..n_chunks)
            .into_par_iter()
            .map(|i| {
                let len = CHUNK.min(count - i * CHUNK);
                self.draw_chunk(len, seed, i as u64, &picker)
            })
            .collect::<Result<_>>()?;
        Ok(chunks.concat())
    }
}

/// Which pair of quadratures a sample file holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Layout {
    /// `(x₁, x₂)`
    Xx,
    /// `(p₁, p₂)`
    Pp,
    /// heterodyne `(x, p)` of mode 1
    Het1,
    /// heterodyne `(x, p)` of mode 2
    Het2,
}

impl Layout {
    pub const ALL: [Layout; 4] = [Layout::Xx, Layout::Pp, Layout::Het1, Layout::Het2];
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Layout::Xx => "xx",
            Layout::Pp => "pp",
            Layout::Het1 => "het1",
            Layout::Het2 => "het2",
        })
    }
}

impl FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xx" => Ok(Layout::Xx),
            "pp" => Ok(Layout::Pp),
            "het1" => Ok(Layout::Het1),
            "het2" => Ok(Layout::Het2),
            other => Err(Error::InvalidParameter(format!("unknown layout `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureSamples {
    pub layout: Layout,
    pub data: Vec<[f64; 2]>,
    pub seed: u64,
    pub state: String,
}

impl QuadratureSamples {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.data.iter().map(|r| r[i]).collect()
    }

    /// CSV with a `# state=… layout=… seed=… S=…` header line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "# state={} layout={} seed={} S={}",
            self.state,
            self.layout,
            self.seed,
            self.data.len()
        )?;
        writeln!(w, "a,b")?;
        for r in &self.data {
            writeln!(w, "{:e},{:e}", r[0], r[1])?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(1, 1, "empty sample file"))??;
        let body = header
            .strip_prefix('#')
            .ok_or_else(|| Error::parse(1, 1, "missing `#` metadata header"))?;
        let (mut state, mut layout, mut seed, mut count) = (None, None, None, None);
        for tok in body.split_whitespace() {
            let col = tok.as_ptr() as usize - header.as_ptr() as usize + 1;
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::parse(1, col, format!("expected key=value, got `{tok}`")))?;
            let bad = |what: &str| Error::parse(1, col, format!("bad {what} `{v}`"));
            match k {
                "state" => state = Some(v.to_string()),
                "layout" => layout = Some(v.parse::<Layout>().map_err(|_| bad("layout"))?),
                "seed" => seed = Some(v.parse::<u64>().map_err(|_| bad("seed"))?),
                "S" => count = Some(v.parse::<usize>().map_err(|_| bad("count"))?),
                _ => return Err(Error::parse(1, col, format!("unknown header key `{k}`"))),
            }
        }
        let missing = |k: &str| Error::parse(1, 1, format!("header lacks `{k}=`"));
        let layout = layout.ok_or_else(|| missing("layout"))?;
        let seed = seed.ok_or_else(|| missing("seed"))?;
        let count = count.ok_or_else(|| missing("S"))?;
        let state = state.ok_or_else(|| missing("state"))?;
        match lines.next() {
            Some(Ok(l)) if l.trim() == "a,b" => {}
            _ => return Err(Error::parse(2, 1, "expected column header `a,b`")),
        }
        let mut data = Vec::with_capacity(count);
        for (i, line) in lines.enumerate() {
            let line = line?;
            let lno = i + 3;
            if line.trim().is_empty() {
                continue;
            }
            let (a, b) = line
                .split_once(',')
                .ok_or_else(|| Error::parse(lno, 1, "expected two comma-separated values"))?;
            let a: f64 = a
                .trim()
                .parse()
                .map_err(|_| Error::parse(lno, 1, format!("bad number `{a}`")))?;
            let b: f64 = b.trim().parse().map_err(|_| {
                Error::parse(
                    lno,
                    line.find(',').unwrap() + 2,
                    format!("bad number `{b}`"),
                )
            })?;
            data.push([a, b]);
        }
        if data.len() != count {
            return Err(Error::parse(
                1,
                1,
                format!("header declares S={count}, found {} rows", data.len()),
            ));
        }
        if data.is_empty() {
            return Err(Error::parse(1, 1, "sample file has no data"));
        }
        Ok(Self {
            layout,
            data,
            seed,
            state,
        })
    }
}

/// Homodyne samples of `(x₁, x₂)` or `(p₁, p₂)` from a two-mode state.
pub fn sample_homodyne_pair(
    state: &GaussianSumState,
    layout: Layout,
    count: usize,
    seed: u64,
    descriptor: &str,
) -> Result<QuadratureSamples> {
    if state.n_modes() != 2 {
        return Err(Error::Precondition(
            "homodyne pairs need a two-mode state".into(),
        ));
    }
    let idx = match layout {
        Layout::Xx => [0, 2],
        Layout::Pp => [1, 3],
        _ => {
            return Err(Error::InvalidParameter(format!(
                "`{layout}` is not a homodyne layout"
            )))
        }
    };
    let data = SignedMixture::marginal(state, &idx, 0.0)?.sample(count, seed)?;
    Ok(QuadratureSamples {
        layout,
        data,
        seed,
        state: descriptor.to_string(),
    })
}

/// Heterodyne `(x, p)` samples of one mode: the Husimi density, i.e. the
/// Wigner marginal with `½` added to each variance.
pub fn sample_heterodyne(
    state: &GaussianSumState,
    mode: usize,
    count: usize,
    seed: u64,
    descriptor: &str,
) -> Result<QuadratureSamples> {
    if mode >= state.n_modes() {
        return Err(Error::InvalidMode {
            mode,
            n_modes: state.n_modes(),
        });
    }
    let data =
        SignedMixture::marginal(state, &[2 * mode, 2 * mode + 1], 0.5)?.sample(count, seed)?;
    Ok(QuadratureSamples {
        layout: if mode == 0 {
            Layout::Het1
        } else {
            Layout::Het2
        },
        data,
        seed,
        state: descriptor.to_string(),
    })
}

/// The four sample sets an estimate needs. Each uses its own substream of
/// `seed` (`seed`, `seed+1`, `seed+2`, `seed+3`).
pub fn sample_all(
    state: &GaussianSumState,
    count: usize,
    seed: u64,
    descriptor: &str,
) -> Result<[QuadratureSamples; 4]> {
    Ok([
        sample_homodyne_pair(state, Layout::Xx, count, seed, descriptor)?,
        sample_homodyne_pair(state, Layout::Pp, count, seed.wrapping_add(1), descriptor)?,
        sample_heterodyne(state, 0, count, seed.wrapping_add(2), descriptor)?,
        sample_heterodyne(state, 1, count, seed.wrapping_add(3), descriptor)?,
    ])
}

/// Power sums of mean-shifted scalar data.
#[derive(Debug, Clone, Copy, Default)]
struct PowerSums {
    n: f64,
    s: [f64; 4],
}

impl PowerSums {
    fn push(&mut self, v: f64) {
        let v2 = v * v;
        self.n += 1.0;
        self.s[0] += v;
        self.s[1] += v2;
        self.s[2] += v2 * v;
        self.s[3] += v2 * v2;
    }

    fn minus(&self, o: &Self) -> Self {
        let mut s = self.s;
        for (a, b) in s.iter_mut().zip(o.s) {
            *a -= b;
        }
        Self { n: self.n - o.n, s }
    }

    fn add(&mut self, o: &Self) {
        self.n += o.n;
        for (a, b) in self.s.iter_mut().zip(o.s) {
            *a += b;
        }
    }

    /// Fisher k-statistics `(k₂, k₄)`.
    fn k_stats(&self) -> (f64, f64) {
        let n = self.n;
        let [s1, s2, s3, s4] = self.s;
        let k2 = (n * s2 - s1 * s1) / (n * (n - 1.0));
        let k4 = (-6.0 * s1.powi(4) + 12.0 * n * s1 * s1 * s2
            - 3.0 * n * (n - 1.0) * s2 * s2
            - 4.0 * n * (n + 1.0) * s1 * s3
            + n * n * (n + 1.0) * s4)
            / (n * (n - 1.0) * (n - 2.0) * (n - 3.0));
        (k2, k4)
    }
}

/// Bivariate sums for the plug-in `κ₂,₂`.
#[derive(Debug, Clone, Copy, Default)]
struct CrossSums {
    n: f64,
    // x, p, x², p², xp, x²p, xp², x²p²
    s: [f64; 8],
}

impl CrossSums {
    fn push(&mut self, x: f64, p: f64) {
        let (x2, p2) = (x * x, p * p);
        self.n += 1.0;
        let t = [x, p, x2, p2, x * p, x2 * p, x * p2, x2 * p2];
        for (a, b) in self.s.iter_mut().zip(t) {
            *a += b;
        }
    }

    fn minus(&self, o: &Self) -> Self {
        let mut s = self.s;
        for (a, b) in s.iter_mut().zip(o.s) {
            *a -= b;
        }
        Self { n: self.n - o.n, s }
    }

    fn add(&mut self, o: &Self) {
        self.n += o.n;
        for (a, b) in self.s.iter_mut().zip(o.s) {
            *a += b;
        }
    }

    /// `m₂₂ − m₂₀m₀₂ − 2m₁₁²` from central moments.
    fn k22(&self) -> f64 {
        let e: Vec<f64> = self.s.iter().map(|v| v / self.n).collect();
        let (a, b) = (e[0], e[1]);
        let m22 = e[7] - 2.0 * b * e[5] - 2.0 * a * e[6]
            + b * b * e[2]
            + a * a * e[3]
            + 4.0 * a * b * e[4]
            - 3.0 * a * a * b * b;
        let m20 = e[2] - a * a;
        let m02 = e[3] - b * b;
        let m11 = e[4] - a * b;
        m22 - m20 * m02 - 2.0 * m11 * m11
    }
}

fn mean(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = v.clone().count() as f64;
    v.sum::<f64>() / n
}

/// Per-block sums for all ten fields.
#[derive(Debug, Clone, Copy, Default)]
struct BlockSums {
    uni: [PowerSums; 6],
    cross: [CrossSums; 2],
}

impl BlockSums {
    fn minus(&self, o: &Self) -> Self {
        let mut out = *self;
        for i in 0..6 {
            out.uni[i] = self.uni[i].minus(&o.uni[i]);
        }
        for i in 0..2 {
            out.cross[i] = self.cross[i].minus(&o.cross[i]);
        }
        out
    }

    fn add(&mut self, o: &Self) {
        for i in 0..6 {
            self.uni[i].add(&o.uni[i]);
        }
        for i in 0..2 {
            self.cross[i].add(&o.cross[i]);
        }
    }

    fn cumulants(&self, pair: EprOperatorPair) -> CumulantSet {
        let (k2u, k4u) = self.uni[0].k_stats();
        let (k2v, k4v) = self.uni[1].k_stats();
        CumulantSet {
            pair,
            k2_u: k2u,
            k4_u: k4u,
            k2_v: k2v,
            k4_v: k4v,
            k22_m1: self.cross[0].k22(),
            k22_m2: self.cross[1].k22(),
            k2_x1: self.uni[2].k_stats().0,
            k2_x2: self.uni[3].k_stats().0,
            k2_p1: self.uni[4].k_stats().0,
            k2_p2: self.uni[5].k_stats().0,
        }
    }
}

fn check_layouts(sets: [&QuadratureSamples; 4]) -> Result<()> {
    for (s, want) in sets.iter().zip(Layout::ALL) {
        if s.layout != want {
            return Err(Error::InvalidParameter(format!(
                "expected a `{want}` sample set, got `{}`",
                s.layout
            )));
        }
    }
    Ok(())
}

/// Sums over `[start, end)` of every sample set, after shifting each column
/// by its full-sample mean.
struct Shifted<'a> {
    sets: [&'a QuadratureSamples; 4],
    pair: EprOperatorPair,
    shifts: [f64; 10],
}

impl<'a> Shifted<'a> {
    fn new(sets: [&'a QuadratureSamples; 4], pair: EprOperatorPair) -> Self {
        let [xx, pp, h1, h2] = sets;
        let u = |r: &[f64; 2]| pair.g1 * r[0] + pair.g2 * r[1];
        let v = |r: &[f64; 2]| pair.h1 * r[0] + pair.h2 * r[1];
        let shifts = [
            mean(xx.data.iter().map(u)),
            mean(pp.data.iter().map(v)),
            mean(xx.data.iter().map(|r| r[0])),
            mean(xx.data.iter().map(|r| r[1])),
            mean(pp.data.iter().map(|r| r[0])),
            mean(pp.data.iter().map(|r| r[1])),
            mean(h1.data.iter().map(|r| r[0])),
            mean(h1.data.iter().map(|r| r[1])),
            mean(h2.data.iter().map(|r| r[0])),
            mean(h2.data.iter().map(|r| r[1])),
        ];
        Self { sets, pair, shifts }
    }

    /// Sums of block `b` of `blocks` in every set.
    fn block(&self, b: usize, blocks: usize) -> BlockSums {
        let [xx, pp, h1, h2] = self.sets;
        let range = |len: usize| (b * len / blocks)..((b + 1) * len / blocks);
        let sh = &self.shifts;
        let p = self.pair;
        let mut out = BlockSums::default();
        for r in &xx.data[range(xx.len())] {
            out.uni[0].push(p.g1 * r[0] + p.g2 * r[1] - sh[0]);
            out.uni[2].push(r[0] - sh[2]);
            out.uni[3].push(r[1] - sh[3]);
        }
        for r in &pp.data[range(pp.len())] {
            out.uni[1].push(p.h1 * r[0] + p.h2 * r[1] - sh[1]);
            out.uni[4].push(r[0] - sh[4]);
            out.uni[5].push(r[1] - sh[5]);
        }
        for r in &h1.data[range(h1.len())] {
            out.cross[0].push(r[0] - sh[6], r[1] - sh[7]);
        }
        for r in &h2.data[range(h2.len())] {
            out.cross[1].push(r[0] - sh[8], r[1] - sh[9]);
        }
        out
    }
}

/// Point estimate without error bars; needs only four samples per set.
pub fn point_estimate(sets: [&QuadratureSamples; 4], pair: EprOperatorPair) -> Result<CumulantSet> {
    check_layouts(sets)?;
    if let Some(s) = sets.iter().find(|s| s.len() < 4) {
        return Err(Error::InsufficientSamples {
            required: 4,
            found: s.len(),
        });
    }
    Ok(Shifted::new(sets, pair).block(0, 1).cumulants(pair))
}

/// Estimated cumulants with delete-one-block jackknife errors.
#[derive(Debug, Clone)]
pub struct EstimatedCumulantSet {
    pub value: CumulantSet,
    /// Standard error of each field, in [`CumulantSet::FIELD_NAMES`] order.
    pub std_error: [f64; 10],
    pub replicates: Vec<CumulantSet>,
}

fn jackknife_se(values: &[f64]) -> f64 {
    let b = values.len() as f64;
    let m = values.iter().sum::<f64>() / b;
    ((b - 1.0) / b * values.iter().map(|v| (v - m) * (v - m)).sum::<f64>()).sqrt()
}

impl EstimatedCumulantSet {
    /// Jackknife error of an arbitrary statistic of the cumulant set.
    pub fn std_error_of<F: Fn(&CumulantSet) -> f64>(&self, f: F) -> f64 {
        let v: Vec<f64> = self.replicates.iter().map(f).collect();
        jackknife_se(&v)
    }

    pub fn fourth_order_margin_se(&self) -> f64 {
        self.std_error_of(|c| fourth_order_witness(c).margin)
    }

    pub fn duan_margin_se(&self) -> f64 {
        self.std_error_of(|c| c.k2_u + c.k2_v)
    }

    /// Duan report when the pair belongs to the Duan family.
    pub fn duan(&self) -> Option<crate::witness::WitnessReport> {
        duan_witness(&self.value, self.value.pair.g1).ok()
    }
}

/// Cumulant estimates from the four sample sets: k-statistics for `κ₂`,
/// `κ₄`, the plug-in central-moment formula for `κ₂,₂` (bias `O(1/S)`),
/// and jackknife errors over 100 contiguous blocks.
pub fn estimate_cumulant_set(
    xx: &QuadratureSamples,
    pp: &QuadratureSamples,
    het1: &QuadratureSamples,
    het2: &QuadratureSamples,
    pair: EprOperatorPair,
) -> Result<EstimatedCumulantSet> {
    let sets = [xx, pp, het1, het2];
    check_layouts(sets)?;
    if let Some(s) = sets.iter().find(|s| s.len() < MIN_SAMPLES) {
        return Err(Error::InsufficientSamples {
            required: MIN_SAMPLES,
            found: s.len(),
        });
    }
    let shifted = Shifted::new(sets, pair);
    let blocks: Vec<BlockSums> = (0..JACKKNIFE_BLOCKS)
        .into_par_iter()
        .map(|b| shifted.block(b, JACKKNIFE_BLOCKS))
        .collect();
    let mut total = BlockSums::default();
    for b in &blocks {
        total.add(b);
    }
    let value = total.cumulants(pair);
    let replicates: Vec<CumulantSet> = blocks
        .iter()
        .map(|b| total.minus(b).cumulants(pair))
        .collect();
    let mut std_error = [0.0; 10];
    for (i, se) in std_error.iter_mut().enumerate() {
        let v: Vec<f64> = replicates.iter().map(|c| c.to_array()[i]).collect();
        *se = jackknife_se(&v);
    }
    Ok(EstimatedCumulantSet {
        value,
        std_error,
        replicates,
    })
}

/// Empirical variance of every field at one sample size.
#[derive(Debug, Clone)]
pub struct ScalingRow {
    pub samples: usize,
    pub variance: [f64; 10],
}

/// Repeats the full sample-and-estimate pipeline `repeats` times per sample
/// size and records the spread of each field.
pub fn variance_scaling_study(
    state: &GaussianSumState,
    pair: EprOperatorPair,
    sizes: &[usize],
    repeats: usize,
    seed: u64,
) -> Result<Vec<ScalingRow>> {
    if repeats < 2 {
        return Err(Error::InvalidParameter("need at least two repeats".into()));
    }
    let mut rows = Vec::with_capacity(sizes.len());
    for (si, &s) in sizes.iter().enumerate() {
        let mut estimates = Vec::with_capacity(repeats);
        for rep in 0..repeats {
            let run_seed = seed
                .wrapping_add((si as u64) << 32)
                .wrapping_add((rep as u64) << 8);
            let sets = sample_all(state, s, run_seed, "study")?;
            estimates
                .push(point_estimate([&sets[0], &sets[1], &sets[2], &sets[3]], pair)?.to_array());
        }
        let mut variance = [0.0; 10];
        for (f, var) in variance.iter_mut().enumerate() {
            let m = estimates.iter().map(|e| e[f]).sum::<f64>() / repeats as f64;
            *var =
                estimates.iter().map(|e| (e[f] - m).powi(2)).sum::<f64>() / (repeats as f64 - 1.0);
        }
        rows.push(ScalingRow {
            samples: s,
            variance,
        });
    }
    Ok(rows)
}

/// Least-squares slope of `log Var` against `log S` for one field.
pub fn log_log_slope(rows: &[ScalingRow], field: usize) -> f64 {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| ((r.samples as f64).ln(), r.variance[field].ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
