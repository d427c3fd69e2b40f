//! Reverse-mode automatic differentiation over dense `f64` arrays.
//!
//! A [`Tape`] records primitive operations as they are evaluated; a single
//! reverse sweep then produces gradients for every leaf registered with
//! [`Tape::param`]. Tapes are cheap and meant to be rebuilt for each
//! training step.

mod array;
mod gradcheck;
mod params;
mod tape;

pub use array::DenseArray;
pub use gradcheck::{grad_check, CoordinateCheck, GradCheckReport, REL_FLOOR};
pub use params::ParamSet;
pub use tape::{NodeId, Op, Tape};
