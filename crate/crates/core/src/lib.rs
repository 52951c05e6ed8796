//! Cascaded open-system model of single-photon detection: a cavity emits one
//! photon, a three-level Λ molecule absorbs it, and the molecule's final
//! state gates a driven, damped amplifier mode whose output flux is the
//! macroscopic signal.
//!
//! The crate provides the Lindblad generator of the cascade, Schrödinger and
//! Heisenberg propagation, two-time correlations via the quantum regression
//! theorem, the output-signal integral computed two independent ways, and
//! closed-form results for cross-checking all of them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod correlations;
pub mod error;
pub mod evolution;
pub mod model;
pub mod ode;
pub mod operators;
pub mod oracles;
pub mod quadrature;

pub mod cli;

pub use error::{Error, Result};
pub use model::{build_generator, build_reduced_generator, LindbladGenerator, ModelParams, Tolerances};
pub use operators::{CompositeSpace, OperatorMatrix, StateMatrix, C64};
