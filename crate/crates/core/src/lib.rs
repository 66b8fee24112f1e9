//! Simulation and exact criteria for Lévy-type perpetuities
//! `S = ∫ e^{-X_{s-}} dZ_s` and for Biggins' additive martingale of branching
//! Lévy processes.
//!
//! Modules map onto the pieces of the toolkit:
//!
//! - [`measures`]: jump measures and the integrals every criterion needs,
//! - [`exponents`]: Laplace exponent of `X`, the truncated-tail function `A`,
//!   the branching cumulant `κ` and the spine exponent `Ψ`,
//! - [`sampler`]: paths of the bivariate process `(X, Z)` and the embedding
//!   pair `(e^{-X_1}, ∫_{[0,1]} e^{-X_{s-}} dZ_s)`,
//! - [`perpetuity`]: finiteness and moment criteria, affine iteration,
//!   moment and tail-index estimation,
//! - [`branching`]: population and spine simulators, the additive martingale
//!   and the uniform-integrability / `L_p` criteria.

pub mod branching;
pub mod error;
pub mod exponents;
pub mod io;
pub mod measures;
pub mod mc;
pub mod perpetuity;
pub mod quadrature;
pub mod report;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
pub use measures::{Atom, DensityLaw, DensityPiece, Domain, LevyMeasure};
pub use quadrature::{IntegralResult, Method, QuadConfig};
pub use report::{Component, Computed, CriterionReport, Verdict};
