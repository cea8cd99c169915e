//! Stability switches and long-term dynamics of an SIRS model with waning
//! and boosting of immunity, written as a delay system with one discrete
//! and one distributed delay.
//!
//! The pieces, bottom up:
//!
//! * [`model`]: parameters, equilibria, the right-hand side and histories.
//! * [`characteristic`]: `P`, `Q`, `W`, the frequency polynomial `F` and
//!   its feasibility intervals.
//! * [`switches`]: switch functions `S_n`, their zeros and the resulting
//!   stability verdicts.
//! * [`eigen`]: pseudospectral discretization for checking roots of `W`.
//! * [`dynamics`]: integration, orbit classification, attractor scans.
//! * [`scan`]: warm-started bifurcation sweeps over `τ`.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod characteristic;
pub mod dynamics;
pub mod eigen;
pub mod error;
pub mod model;
pub mod scan;
pub mod switches;

pub use error::{Error, Result};
pub use model::{Equilibrium, History, ModelParams, State};
