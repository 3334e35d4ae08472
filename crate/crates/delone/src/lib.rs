//! Diffusion, Dirichlet forms and harmonic analysis on hulls of aperiodic
//! Delone sets of finite local complexity.
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calculus;
pub mod diffusion;
pub mod ergodic;
pub mod error;
pub mod golden;
pub mod hodge;
pub mod hull;
pub mod par;
pub mod quad;
pub mod sets;
pub mod spectral;

pub use error::{Error, Result};
pub use golden::GoldenNumber;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
