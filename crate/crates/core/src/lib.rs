//! Uniform parametrization checks for Bayesian model criticism.
//!
//! A model is written as (θ, Y) = g(U) with U i.i.d. Uniform(0, 1). Posterior
//! draws are mapped back to u-values, and calibrated tests for uniformity,
//! independence and extremeness are run per draw and combined across draws.

pub mod aggregate;
pub mod analysis;
pub mod ecdf;
pub mod error;
pub mod io;
pub mod model;
pub mod models;
pub mod pvalue;
pub mod rng;
pub mod scalar;
pub mod simharness;
pub mod special;
pub mod stat_tests;
pub mod udraw;

pub use error::{Result, UpcError};
pub use pvalue::PValue;
pub use scalar::Scalar;
pub use udraw::{LabelSchema, Role, StrataValue, UDraw, UDrawSet, ULabel};

pub type UDraw64 = UDraw<f64>;
pub type UDraw32 = UDraw<f32>;
pub type UDrawSet64 = UDrawSet<f64>;
pub type UDrawSet32 = UDrawSet<f32>;
pub type PValue64 = PValue<f64>;
pub type PValue32 = PValue<f32>;
pub type TiltedCdfCurve64 = ecdf::TiltedCdfCurve<f64>;
pub type TiltedCdfCurve32 = ecdf::TiltedCdfCurve<f32>;
