//! Learnable state of the prior and its flat parameter layout.

use alloc::vec::Vec;

use crate::prior::{DeformerParams, SceneMap};
use crate::radio::DelayBeamSpectrum;
use crate::{Error, Result, Vec3};

/// One offline training pair: UE position and its target spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub ue_position: Vec3,
    pub target: DelayBeamSpectrum,
}

/// Scene map plus deformer.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorModel {
    pub map: SceneMap,
    pub deformer: DeformerParams,
}

/// Named slices of the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamGroup {
    Opacity,
    DelayResidual,
    Gain,
    Position,
    Scale,
    LosGain,
    Deformer,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 7] = [
        ParamGroup::Opacity,
        ParamGroup::DelayResidual,
        ParamGroup::Gain,
        ParamGroup::Position,
        ParamGroup::Scale,
        ParamGroup::LosGain,
        ParamGroup::Deformer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParamGroup::Opacity => "opacity",
            ParamGroup::DelayResidual => "delay_residual",
            ParamGroup::Gain => "gain",
            ParamGroup::Position => "position",
            ParamGroup::Scale => "scale",
            ParamGroup::LosGain => "los_gain",
            ParamGroup::Deformer => "deformer",
        }
    }
}

/// Offsets of each group for a map of `g` Gaussians:
/// `[o | Δτ | g | μ (xyz per Gaussian) | s | LoS | network]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamLayout {
    pub gaussians: usize,
}

impl ParamLayout {
    pub fn new(gaussians: usize) -> Self {
        Self { gaussians }
    }

    pub fn range(&self, group: ParamGroup) -> core::ops::Range<usize> {
        let g = self.gaussians;
        match group {
            ParamGroup::Opacity => 0..g,
            ParamGroup::DelayResidual => g..2 * g,
            ParamGroup::Gain => 2 * g..3 * g,
            ParamGroup::Position => 3 * g..6 * g,
            ParamGroup::Scale => 6 * g..7 * g,
            ParamGroup::LosGain => 7 * g..7 * g + 1,
            ParamGroup::Deformer => 7 * g + 1..7 * g + 1 + DeformerParams::PARAM_COUNT,
        }
    }

    pub fn len(&self) -> usize {
        7 * self.gaussians + 1 + DeformerParams::PARAM_COUNT
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn group_of(&self, index: usize) -> Option<ParamGroup> {
        ParamGroup::ALL.into_iter().find(|g| self.range(*g).contains(&index))
    }
}

impl PriorModel {
    pub fn layout(&self) -> ParamLayout {
        ParamLayout::new(self.map.len())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let lay = self.layout();
        let mut v = alloc::vec![0.0; lay.len()];
        let g = self.map.len();
        for (i, p) in self.map.primitives.iter().enumerate() {
            v[i] = p.opacity_logit;
            v[g + i] = p.delay_residual;
            v[2 * g + i] = p.gain_raw;
            v[3 * g + 3 * i..3 * g + 3 * i + 3].copy_from_slice(p.mu.as_slice());
            v[6 * g + i] = p.scale;
        }
        v[7 * g] = self.map.los_gain_raw;
        v[lay.range(ParamGroup::Deformer)].copy_from_slice(&self.deformer.weights);
        v
    }

    /// Writes `flat` back; scales are clamped to stay positive.
    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        let lay = self.layout();
        if flat.len() != lay.len() {
            return Err(Error::invalid("flat parameter vector has the wrong length"));
        }
        if !flat.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("flat parameter vector has non-finite entries"));
        }
        let g = self.map.len();
        for (i, p) in self.map.primitives.iter_mut().enumerate() {
            p.opacity_logit = flat[i];
            p.delay_residual = flat[g + i];
            p.gain_raw = flat[2 * g + i];
            p.mu = Vec3::from_column_slice(&flat[3 * g + 3 * i..3 * g + 3 * i + 3]);
            p.scale = flat[6 * g + i].max(MIN_SCALE);
        }
        self.map.los_gain_raw = flat[7 * g];
        self.deformer.weights.copy_from_slice(&flat[lay.range(ParamGroup::Deformer)]);
        Ok(())
    }
}

/// Smallest spatial scale kept after an optimizer step (m).
pub const MIN_SCALE: f64 = 1e-3;
