//! Quantum phase-space quasiprobabilities for a single mode.
//!
//! Wigner, Weyl and Husimi representations of number-basis density
//! matrices and position wavefunctions; probabilities on rectangular
//! phase-space cells whose area is bounded below by `ħ/2`; a plate-detector
//! model; and nonclassicality measures built on the best-fitting coherent
//! state.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cells;
pub mod detector;
pub mod error;
pub mod grid;
pub mod nonclassicality;
pub mod phase_space;
pub mod smoothing;
pub mod special;
pub mod states;
pub mod verify;

pub use error::{Error, Result};
