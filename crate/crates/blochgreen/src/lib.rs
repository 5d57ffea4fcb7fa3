//! Spectral analysis of periodic operators on crystal graphs.
//!
//! A crystal graph is an infinite graph carrying a free ℤ^d action whose
//! quotient is a finite graph with N vertices. A periodic operator L on the
//! cover is specified by the quotient graph together with integer deck shifts
//! and edge weights. Conjugating L by the character e^{ik·h} produces the
//! N×N Floquet matrix family L(k); its eigenvalue branches λ_j(k) over the
//! Brillouin zone sweep out the spectral bands of L.
//!
//! The crate computes, for such operators:
//!
//! - band structures, spectral gaps, and certified non-degenerate gap edges
//!   ([`floquet`]);
//! - the analytic continuation E(β) = λ_j(k0+iβ) of an edge band to imaginary
//!   quasimomenta, and the convex level-set geometry (β_s, projected Hessian
//!   determinants) that controls exponential decay rates ([`continuation`]);
//! - closed-form leading-order asymptotics of the Green's function
//!   (L−λ)^{-1}(x,y) inside a spectral gap and at a gap edge
//!   ([`asymptotics`]);
//! - exact Green's function oracles — Brillouin-zone resolvent quadrature,
//!   edge-limit extrapolation, and truncated-lattice sparse solves — used to
//!   verify the asymptotic formulas ([`oracle`]);
//! - the Perron dispersion Λ_A(β), generalized principal eigenvalue, and
//!   Martin-kernel limits for nonsymmetric operators with negative weights
//!   ([`martin`]).

pub mod asymptotics;
pub mod continuation;
pub mod crystal;
pub mod error;
pub mod floquet;
pub mod io;
pub mod linalg;
pub mod martin;
pub mod oracle;

mod gamma;
mod par;

pub use error::{Error, Result};

pub use crystal::{AdditiveFunction, CoverPoint, CrystalModel};
pub use floquet::{AssumptionReport, BandStructure, BrillouinGrid, EdgeData, GapRecord};
pub use continuation::{ContinuationState, DirectionSolve};
pub use asymptotics::AsymptoticValue;
pub use oracle::{GreenComparison, QuadratureSpec};
pub use martin::{MartinCheck, PerronState};
