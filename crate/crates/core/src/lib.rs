//! Sound field analysis for open-sphere microphone arrays (OSMAs).
//!
//! An OSMA samples the pressure field on a sphere of radius `r_a`; projecting
//! the samples onto spherical harmonics and dividing by the radial factor
//! `j_u(k r_a)` yields the sound field coefficients `K_uv` that characterize
//! the incident field. At frequencies where `j_u(k r_a)` has a null, the
//! coefficients of order `u` are unrecoverable from that radius. This crate
//! implements the classical decomposition together with two ways around the
//! nulls: a physics-informed neural network that re-synthesizes the field on a
//! virtual sphere of different radius, and the rigid-sphere array baseline
//! with its radial translator.
//!
//! Modules mirror the processing chain:
//!
//! - [`specfun`]: spherical Bessel/Hankel functions and complex spherical harmonics
//! - [`geometry`]: spherical point sets with quadrature weights
//! - [`acoustics`]: free-field and rigid-sphere ground-truth simulation
//! - [`shd`]: coefficient estimation, null detection, synthesis, radial translation
//! - [`pinn`]: the tiny Helmholtz-informed MLP and its training loop
//! - [`harness`]: experiment configs, reconstruction pipelines and reports
//!
//! Core math is generic over the scalar type through the [`Float`] trait;
//! `f64` aliases for the main types are exported at the crate root.

pub mod acoustics;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod pinn;
pub mod shd;
pub mod specfun;

pub use error::{Error, Result};

/// Scalar type for all field computations: `f32` or `f64`.
///
/// The bound collects what the numerics actually use: transcendental
/// functions, conversions from literal constants, accumulation, and serde for
/// the on-disk formats.
pub trait Float:
    num_traits::Float
    + num_traits::FloatConst
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + num_traits::NumAssignOps
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
    + 'static
{
}

impl Float for f32 {}
impl Float for f64 {}

/// Shorthand for converting literal constants into the working scalar type.
#[inline]
pub(crate) fn cast<T: Float>(x: f64) -> T {
    T::from_f64(x).expect("constant representable in scalar type")
}

pub type Complex<T> = num_complex::Complex<T>;

// Concrete aliases for the common double-precision instantiation.
pub type Complex64 = num_complex::Complex<f64>;
pub type Grid64 = geometry::SphericalGrid<f64>;
pub type Snapshot64 = acoustics::FieldSnapshot<f64>;
pub type CoeffSet64 = shd::CoeffSet<f64>;
pub type MlpParams64 = pinn::MlpParams<f64>;
pub type TrainConfig64 = pinn::TrainConfig<f64>;
pub type ExperimentConfig64 = harness::ExperimentConfig<f64>;
pub type ExperimentReport64 = harness::ExperimentReport<f64>;
