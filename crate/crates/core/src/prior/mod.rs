//! Scene-level Gaussian channel map and its UE-conditioned deformer.

mod deformer;
mod init;

// std inherents shadow these when a dependency links std
#[allow(unused_imports)]
use num_traits::Float;

use alloc::vec::Vec;

pub use deformer::{
    deform, deform_traced, DeformedAttributes, DeformerParams, DeformerTrace, InputNormalization, PrimitiveGrad,
    ResidualBounds, DEFORMER_HIDDEN,
    DEFORMER_INPUTS, DEFORMER_OUTPUTS,
};
pub use init::{backproject_scatterer, init_from_measurements, random_init, InitConfig};

use crate::{Error, Result, Vec3};

/// One Gaussian scatterer candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPrimitive {
    pub mu: Vec3,
    /// Isotropic spatial scale (m); widens the rendered beam footprint.
    pub scale: f64,
    pub opacity_logit: f64,
    /// Delay residual (s).
    pub delay_residual: f64,
    /// Pre-softplus gain.
    pub gain_raw: f64,
}

impl GaussianPrimitive {
    pub fn validate(&self) -> Result<()> {
        let finite = self.mu.iter().all(|v| v.is_finite())
            && self.scale.is_finite()
            && self.opacity_logit.is_finite()
            && self.delay_residual.is_finite()
            && self.gain_raw.is_finite();
        if !finite {
            return Err(Error::invalid("Gaussian primitive has non-finite fields"));
        }
        if !(self.scale > 0.0) {
            return Err(Error::invalid("Gaussian scale must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneMap {
    pub primitives: Vec<GaussianPrimitive>,
    /// Pre-softplus power of the virtual LoS path.
    pub los_gain_raw: f64,
    pub bs_position: Vec3,
}

impl SceneMap {
    pub fn new(primitives: Vec<GaussianPrimitive>, los_gain_raw: f64, bs_position: Vec3) -> Result<Self> {
        if primitives.is_empty() {
            return Err(Error::invalid("scene map needs at least one Gaussian"));
        }
        for p in &primitives {
            p.validate()?;
        }
        Ok(Self {
            primitives,
            los_gain_raw,
            bs_position,
        })
    }

    pub fn len(&self) -> usize {
        self.primitives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primitives.is_empty()
    }
}

/// Indices with effective opacity at least `threshold`, keeping the
/// `max_paths` most opaque; ties go to the lower index.
pub fn select_active(attrs: &[DeformedAttributes], threshold: f64, max_paths: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..attrs.len())
        .filter(|&i| attrs[i].opacity >= threshold)
        .collect();
    // stable sort keeps index order among equal opacities
    idx.sort_by(|&a, &b| attrs[b].opacity.total_cmp(&attrs[a].opacity));
    idx.truncate(max_paths);
    idx.sort_unstable();
    idx
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Inverse of [`softplus`] for `y > 0`.
pub fn softplus_inv(y: f64) -> f64 {
    if y > 30.0 {
        y + (-(-y).exp()).ln_1p()
    } else {
        y.exp_m1().ln()
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}
