//! Symmetric periodic orbits of the Newtonian n-body problem.
//!
//! This crate finds periodic solutions as critical points of a discretized
//! equivariant action functional and computes two stability indicators for
//! them: Floquet multipliers (eigenvalues of the monodromy matrix) and
//! discrete Morse indices (negative-eigenvalue counts of the action
//! Hessian), on both the fundamental time domain and the full period.
//!
//! The pipeline: describe a finite symmetry group by generators acting on
//! space, time and body labels ([`symmetry`]); reduce the loop space to the
//! equivariant trigonometric coefficients; minimize and Newton-refine the
//! reduced action ([`optimizer`]); then analyze the critical point
//! ([`floquet`], [`morse`]). The `equistab` binary exposes the whole flow
//! on JSON problem and orbit files ([`cli`]).

pub mod action;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod export;
pub mod floquet;
pub mod io;
pub mod morse;
pub mod optimizer;
pub mod report;
pub mod symmetry;

pub use action::{FundamentalPath, SampledLoop, TrigLoop};
pub use dynamics::{PhaseState, ProblemSpec};
pub use error::{Error, Result};
pub use floquet::{IntegrationMode, MonodromyOptions, MonodromyResult, StabilityVerdict};
pub use morse::{EpsZero, MorseDomain, MorseResult};
pub use optimizer::{MinimizeOptions, OptimizationReport, SolveOptions};
pub use symmetry::{
    Configuration, GroupElement, Permutation, ReducedSpace, SymmetryGroup, TimeAction,
};
