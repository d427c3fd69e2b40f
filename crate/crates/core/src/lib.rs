//! Generative parameter sampling.
//!
//! A noise-driven generator network produces one parameter draw per
//! observation; it is trained so that the predictive distribution it
//! induces matches the observed data under a kernel MMD. Sampling the
//! trained generator then yields uncertainty intervals, classification
//! uncertainty thresholds and simulated point patterns.

pub mod baselines;
pub mod diffcore;
pub mod error;
pub mod generator;
pub mod io;
pub mod mmd;
pub mod obsmodels;
pub mod plot;
pub mod pointproc;
pub mod rng;
pub mod synthdata;
pub mod trainer;
pub mod uq;

pub use error::{Error, Result};
