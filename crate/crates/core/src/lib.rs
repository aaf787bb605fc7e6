//! Phase-space simulation of two-mode continuous-variable states written as
//! affine sums of complex-weighted Gaussians, together with a fourth-order
//! cumulant inseparability witness, its Gaussian (Duan) limit, finite-sample
//! estimators and a truncated Fock-space reference engine.
//!
//! Conventions used throughout: quadratures ordered `(x₁, p₁, x₂, p₂)`,
//! `ħ = 1`, `[x, p] = i`, vacuum variance `1/2`, and moments taken against the
//! Wigner function (Weyl ordering).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod error;

pub mod descriptor;
pub mod factory;
pub mod moments;
pub mod numeric;
pub mod oracle;
pub mod phase_space;
pub mod sampling;
pub mod witness;

pub use descriptor::StateDescriptor;
pub use error::{Error, Result};
pub use moments::{LinearForm, MomentTable};
pub use phase_space::{ComplexGaussianComponent, Gate, GaussianSumState, SymplecticMap};
pub use witness::{Criterion, CumulantSet, EprOperatorPair, WitnessReport};
