//! Joint-probability behaviors for two-party, two-setting, two-outcome Bell
//! experiments.
//!
//! - [`behavior`]: the 16-entry probability table, validation, correlations and the CHSH sum.
//! - [`linsys`]: normalization and no-signaling as an integer linear system, its exact rank,
//!   and the closed-form solution for the dependent probabilities.
//! - [`quantum`]: Born-rule behaviors of two-qubit pure states under spin measurements.
//! - [`boxes`]: PR boxes, deterministic and uniform boxes, quantum extremal boxes, locality test.
//! - [`hardy`]: Hardy quadruples, the causality window and the quantum/no-signaling discriminator.
//! - [`optimizer`]: multi-start Nelder–Mead search for extremal quantum values.

pub mod behavior;
pub mod boxes;
mod error;
pub mod hardy;
pub mod linsys;
mod nelder_mead;
pub mod optimizer;
pub mod quantum;
mod report;
mod simplex;

pub use behavior::{Behavior, CorrelationVector, Outcome, Setting, Shorthand, Side};
pub use error::{Error, Result};
pub use report::{Check, ConstraintReport};
