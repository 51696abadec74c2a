//! Moment operators, cubature construction and PSD recovery for low-rank
//! projector measurements `<P_j, xx^T>`.
// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod cubature;
pub mod error;
pub mod moments;
mod nnls;
pub mod recover;
pub mod rng;
pub mod symcore;
pub mod zonal;

pub use error::{Error, Result};
pub use moments::MomentCoefficients;
pub use symcore::{Spectrum, SymMatrix, TangentAnchor};
