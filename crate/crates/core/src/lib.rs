//! Diploid birth-death population model with Mendelian reproduction and
//! logistic competition.
//!
//! The crate computes fixation probabilities of a mutant allele (exactly on a
//! truncated lattice and to first order through two-layer matrix recurrences),
//! the stationary population-size law of the monomorphic process, the
//! trait-substitution rate built from both, and stochastic simulations of the
//! three-type process, the substitution (meltdown) sequence and an
//! individual-based model with per-strand mutations.
//!
//! Module map:
//!
//! - [`model`]: states, parameters, transition rates, generator application.
//! - [`exact`]: Dirichlet problems on a truncated lattice.
//! - [`perturbation`]: the `x_N, y_N, x'_N, y'_N` recurrences and the
//!   first-order fixation probability.
//! - [`demography`]: stationary law of the population size.
//! - [`substitution`]: substitution rate, mean fixation time, vortex curves.
//! - [`simulate`]: exact-event and individual-based simulation.
//! - [`acceptance`]: the verification suite shared by tests and the CLI.

// NaN must fail parameter checks, so `!(x > 0.0)` is intended.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod csv;
pub mod demography;
pub mod error;
pub mod exact;
pub mod lattice;
pub mod model;
pub mod perturbation;
pub mod simulate;
mod sparse;
pub mod substitution;

pub use error::{Error, Result};
pub use model::{DemographicParams, GeneralRates, Genotype, PopulationState, StateClass};
