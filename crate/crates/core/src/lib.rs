//! Delay-beam channel priors for sparse-pilot OFDM massive-MIMO channel estimation.
//!
//! The crate is `no_std` (with `alloc`) and contains every numerical piece of the
//! pipeline:
//!
//! * [`radio`]: OFDM grid and ULA geometry, delay-beam transforms, leakage kernels,
//!   the Kronecker-structured pilot sensing model and the NMSE metric.
//! * [`scene`]: a parametric railway-corridor simulator (LoS plus single-bounce
//!   scatterers with Doppler) that produces CFR snapshots and pilot observations.
//! * [`prior`]: the scene-level Gaussian map, the UE-position-conditioned deformer
//!   and the measurement-guided initializer.
//! * [`render`]: the differentiable incoherent delay-beam renderer and its
//!   reverse-mode gradients.
//! * [`train`]: spectral, marginal and support-aware losses, Adam, the training
//!   loop and the finite-difference gradient checker.
//! * [`estimator`]: covariance priors, prior-aided LMMSE, the scalar temporal
//!   predictor and the zero-prior / genie / LoS-seeded OMP baselines.
//! * [`online`]: the per-window online estimation loop used for evaluation.
//!
//! File formats, configuration parsing and the command line live in the
//! companion `dbprior` crate.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod error;
pub mod estimator;
pub mod exec;
pub mod linalg;
pub mod model;
pub mod online;
pub mod prior;
pub mod radio;
pub mod render;
pub mod scene;
pub mod train;

pub use error::{Error, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Cartesian position or direction in metres.
pub type Vec3 = nalgebra::Vector3<f64>;
