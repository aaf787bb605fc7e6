//! Text names for factory states, e.g. `split-phssv:r=1,eta=0.8`.
//!
//! Accepted forms:
//!
//! ```text
//! vacuum
//! tmsv:r=<r>[,eta=<eta>]
//! split-sqv:r=<r>[,eta=<eta>]
//! split-fock:n=<n>,eps=<eps>[,eta=<eta>]
//! split-fock:n=<n>,fid=<fidelity>[,eta=<eta>]
//! split-phssv:r=<r>[,eta=<eta>]
//! ```
//!
//! Parameters may be left out while parsing so that a sweep can fill them
//! in with [`StateDescriptor::with_param`]; [`StateDescriptor::build`]
//! rejects a descriptor that is still incomplete. `eta` defaults to 1 and is
//! applied as equal loss on both output modes.

use std::fmt;
use std::str::FromStr;

use crate::factory;
use crate::phase_space::GaussianSumState;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateKind {
    Vacuum,
    Tmsv,
    SplitSqueezedVacuum,
    SplitFock,
    SplitPhssv,
}

impl StateKind {
    fn name(self) -> &'static str {
        match self {
            StateKind::Vacuum => "vacuum",
            StateKind::Tmsv => "tmsv",
            StateKind::SplitSqueezedVacuum => "split-sqv",
            StateKind::SplitFock => "split-fock",
            StateKind::SplitPhssv => "split-phssv",
        }
    }

    fn allowed(self) -> &'static [&'static str] {
        match self {
            StateKind::Vacuum => &["eta"],
            StateKind::Tmsv | StateKind::SplitSqueezedVacuum | StateKind::SplitPhssv => {
                &["r", "eta"]
            }
            StateKind::SplitFock => &["n", "eps", "fid", "eta"],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateDescriptor {
    pub kind: StateKind,
    pub r: Option<f64>,
    pub eta: Option<f64>,
    pub n: Option<usize>,
    pub eps: Option<f64>,
    pub fid: Option<f64>,
}

impl StateDescriptor {
    pub fn new(kind: StateKind) -> Self {
        Self {
            kind,
            r: None,
            eta: None,
            n: None,
            eps: None,
            fid: None,
        }
    }

    /// Sets a numeric parameter by name (`r`, `eta`, `eps`, `fid`, `n`).
    pub fn with_param(&self, name: &str, value: f64) -> Result<Self> {
        if !self.kind.allowed().contains(&name) {
            return Err(Error::InvalidParameter(format!(
                "`{}` has no parameter `{name}`",
                self.kind.name()
            )));
        }
        let mut out = self.clone();
        match name {
            "r" => out.r = Some(value),
            "eta" => out.eta = Some(value),
            "eps" => {
                out.eps = Some(value);
                out.fid = None;
            }
            "fid" => {
                out.fid = Some(value);
                out.eps = None;
            }
            "n" => {
                if value < 0.0 || value.fract() != 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "n must be a non-negative integer, got {value}"
                    )));
                }
                out.n = Some(value as usize)
            }
            _ => unreachable!(),
        }
        Ok(out)
    }

    pub fn eta(&self) -> f64 {
        self.eta.unwrap_or(1.0)
    }

    fn require<T: Copy>(&self, v: Option<T>, name: &str) -> Result<T> {
        v.ok_or_else(|| {
            Error::InvalidParameter(format!("`{}` needs a value for `{name}`", self.kind.name()))
        })
    }

    /// Ring radius for split Fock states, calibrating from the fidelity if
    /// that is what was given.
    pub fn ring_epsilon(&self) -> Result<f64> {
        let n = self.require(self.n, "n")?;
        match (self.eps, self.fid) {
            (Some(e), _) => Ok(e),
            (None, Some(f)) => {
                factory::calibrate_ring_epsilon(&factory::fock_coefficients(n), 1.0 - f)
            }
            (None, None) => Err(Error::InvalidParameter(
                "`split-fock` needs `eps` or `fid`".into(),
            )),
        }
    }

    /// Builds the phase-space state.
    pub fn build(&self) -> Result<GaussianSumState> {
        let eta = self.eta();
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidParameter(format!(
                "eta must lie in [0, 1], got {eta}"
            )));
        }
        let lossy = |s: GaussianSumState| -> Result<GaussianSumState> {
            if eta == 1.0 {
                Ok(s)
            } else {
                s.apply_loss_all(eta)
            }
        };
        match self.kind {
            StateKind::Vacuum => Ok(factory::make_vacuum(2)),
            StateKind::Tmsv => lossy(factory::make_tmsv(self.require(self.r, "r")?)?),
            StateKind::SplitSqueezedVacuum => lossy(factory::make_split_squeezed_vacuum(
                self.require(self.r, "r")?,
            )?),
            StateKind::SplitFock => {
                let n = self.require(self.n, "n")?;
                lossy(factory::make_split_fock(n, self.ring_epsilon()?)?)
            }
            StateKind::SplitPhssv => {
                factory::make_split_lossy_phssv(self.require(self.r, "r")?, eta)
            }
        }
    }
}

impl fmt::Display for StateDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind.name())?;
        let mut parts = Vec::new();
        if let Some(n) = self.n {
            parts.push(format!("n={n}"));
        }
        if let Some(r) = self.r {
            parts.push(format!("r={r}"));
        }
        if let Some(e) = self.eps {
            parts.push(format!("eps={e}"));
        }
        if let Some(v) = self.fid {
            parts.push(format!("fid={v}"));
        }
        if let Some(e) = self.eta {
            parts.push(format!("eta={e}"));
        }
        if !parts.is_empty() {
            write!(f, ":{}", parts.join(","))?;
        }
        Ok(())
    }
}

impl FromStr for StateDescriptor {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let text = text.trim();
        let (name, rest) = match text.split_once(':') {
            Some((n, r)) => (n, Some(r)),
            None => (text, None),
        };
        let kind = match name {
            "vacuum" => StateKind::Vacuum,
            "tmsv" => StateKind::Tmsv,
            "split-sqv" => StateKind::SplitSqueezedVacuum,
            "split-fock" => StateKind::SplitFock,
            "split-phssv" => StateKind::SplitPhssv,
            other => return Err(Error::parse(1, 1, format!("unknown state `{other}`"))),
        };
        let mut d = StateDescriptor::new(kind);
        let Some(rest) = rest else { return Ok(d) };
        let mut col = name.len() + 2;
        for item in rest.split(',') {
            let (key, val) = item
                .split_once('=')
                .ok_or_else(|| Error::parse(1, col, format!("expected key=value, got `{item}`")))?;
            let key = key.trim();
            let v: f64 = val
                .trim()
                .parse()
                .map_err(|_| Error::parse(1, col + key.len() + 1, format!("bad number `{val}`")))?;
            d = d
                .with_param(key, v)
                .map_err(|e| Error::parse(1, col, e.to_string()))?;
            col += item.len() + 1;
        }
        Ok(d)
    }
}
