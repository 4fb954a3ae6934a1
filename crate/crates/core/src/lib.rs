//! Many-interacting-worlds discretizations of harmonic oscillator states.
//!
//! The library solves the signed radial recursion, assembles d-dimensional
//! configurations, and measures how far they sit from their continuum laws,
//! both exactly (Wasserstein-1 on the line) and through Stein-kernel bounds.
//! Everything is generic over [`Real`]; the aliases below fix the precision.

// `!(a < b)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod coupling;
pub mod error;
pub mod radial;
pub mod rates;
pub mod scalar;
pub mod specfn;
pub mod stein;
pub mod wasser;

pub use error::{MiwError, Result};
pub use scalar::Real;

pub type RadialSolution64 = radial::RadialSolution<f64>;
pub type RadialSolution32 = radial::RadialSolution<f32>;
pub type TiltedGaussianTarget64 = stein::TiltedGaussianTarget<f64>;
pub type TiltedGaussianTarget32 = stein::TiltedGaussianTarget<f32>;
pub type BoundReport64 = stein::BoundReport<f64>;
pub type BoundReport32 = stein::BoundReport<f32>;
pub type MiwConfiguration64 = config::MiwConfiguration<f64>;
pub type MiwConfiguration32 = config::MiwConfiguration<f32>;
pub type BiasTransform64 = coupling::BiasTransform<f64>;
pub type BiasTransform32 = coupling::BiasTransform<f32>;
