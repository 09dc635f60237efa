//! UE-conditioned residual network: `(μ_i, u_k) -> (δo, δτ, δg)`.

// std inherents shadow these when a dependency links std
#[allow(unused_imports)]
use num_traits::Float;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{sigmoid, softplus, SceneMap};
use crate::{Error, Result, Vec3};

pub const DEFORMER_INPUTS: usize = 6;
pub const DEFORMER_HIDDEN: usize = 64;
pub const DEFORMER_OUTPUTS: usize = 3;

const H: usize = DEFORMER_HIDDEN;
const W1: usize = 0;
const B1: usize = W1 + H * DEFORMER_INPUTS;
const W2: usize = B1 + H;
const B2: usize = W2 + H * H;
const W3: usize = B2 + H;
const B3: usize = W3 + DEFORMER_OUTPUTS * H;
const PARAM_COUNT: usize = B3 + DEFORMER_OUTPUTS;

/// Affine map applied to every position before it enters the network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputNormalization {
    pub center: Vec3,
    pub extent: f64,
}

impl InputNormalization {
    pub fn new(center: Vec3, extent: f64) -> Result<Self> {
        if !(extent > 0.0) || !extent.is_finite() || !center.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("input normalization needs a finite center and positive extent"));
        }
        Ok(Self { center, extent })
    }

    /// Bounding-box center and half-diagonal of `points`.
    pub fn fit(points: &[Vec3]) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::invalid("cannot fit a normalization to zero points"))?;
        let (mut lo, mut hi) = (*first, *first);
        for p in points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let extent = ((hi - lo).norm() / 2.0).max(1.0);
        Self::new((lo + hi) / 2.0, extent)
    }

    fn apply(&self, p: &Vec3) -> Vec3 {
        (p - self.center) / self.extent
    }
}

/// Saturation bounds on the three residual channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualBounds {
    /// Logit units.
    pub opacity: f64,
    /// Seconds.
    pub delay: f64,
    pub gain: f64,
}

impl ResidualBounds {
    pub fn new(opacity: f64, delay: f64, gain: f64) -> Result<Self> {
        for (name, v) in [("opacity", opacity), ("delay", delay), ("gain", gain)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} residual bound must be positive, got {v}")));
            }
        }
        Ok(Self { opacity, delay, gain })
    }

    /// `η_o = 2`, `η_τ = 2` delay taps, `η_g = 1`.
    pub fn with_tap_spacing(tap_spacing: f64) -> Result<Self> {
        Self::new(2.0, 2.0 * tap_spacing, 1.0)
    }
}

/// Two tanh hidden layers of width 64 and a linear head.
///
/// Weights are stored row-major in one flat vector so the optimizer can
/// treat them as a single parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformerParams {
    pub weights: Vec<f64>,
    pub bounds: ResidualBounds,
    pub normalization: InputNormalization,
}

impl DeformerParams {
    pub const PARAM_COUNT: usize = PARAM_COUNT;

    /// Xavier-uniform hidden layers and a zero output layer, so the initial
    /// residuals vanish.
    pub fn new(bounds: ResidualBounds, normalization: InputNormalization, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = vec![0.0; PARAM_COUNT];
        let a1 = (6.0 / (DEFORMER_INPUTS + H) as f64).sqrt();
        for w in &mut weights[W1..B1] {
            *w = rng.random_range(-a1..a1);
        }
        let a2 = (6.0 / (2 * H) as f64).sqrt();
        for w in &mut weights[W2..B2] {
            *w = rng.random_range(-a2..a2);
        }
        Self {
            weights,
            bounds,
            normalization,
        }
    }

    pub fn from_weights(weights: Vec<f64>, bounds: ResidualBounds, normalization: InputNormalization) -> Result<Self> {
        if weights.len() != PARAM_COUNT {
            return Err(Error::invalid(format!(
                "deformer expects {PARAM_COUNT} weights, got {}",
                weights.len()
            )));
        }
        if !weights.iter().all(|w| w.is_finite()) {
            return Err(Error::invalid("deformer weights must be finite"));
        }
        Ok(Self {
            weights,
            bounds,
            normalization,
        })
    }

    /// Fills the output layer with uniform draws in `[-scale, scale]`.
    pub fn randomize_output(&mut self, scale: f64, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for w in &mut self.weights[W3..] {
            *w = rng.random_range(-scale..=scale);
        }
    }

    pub fn output_is_zero(&self) -> bool {
        self.weights[W3..].iter().all(|&w| w == 0.0)
    }

    fn forward(&self, mu: &Vec3, ue: &Vec3) -> Activations {
        let w = &self.weights;
        let a = self.normalization.apply(mu);
        let b = self.normalization.apply(ue);
        let x = [a.x, a.y, a.z, b.x, b.y, b.z];
        let mut h1 = [0.0; H];
        for (j, h) in h1.iter_mut().enumerate() {
            let row = &w[W1 + j * DEFORMER_INPUTS..W1 + (j + 1) * DEFORMER_INPUTS];
            let z: f64 = row.iter().zip(&x).map(|(p, q)| p * q).sum();
            *h = (z + w[B1 + j]).tanh();
        }
        let mut h2 = [0.0; H];
        for (j, h) in h2.iter_mut().enumerate() {
            let row = &w[W2 + j * H..W2 + (j + 1) * H];
            let z: f64 = row.iter().zip(&h1).map(|(p, q)| p * q).sum();
            *h = (z + w[B2 + j]).tanh();
        }
        let mut out = [0.0; DEFORMER_OUTPUTS];
        for (k, o) in out.iter_mut().enumerate() {
            let row = &w[W3 + k * H..W3 + (k + 1) * H];
            let z: f64 = row.iter().zip(&h2).map(|(p, q)| p * q).sum();
            *o = z + w[B3 + k];
        }
        Activations { x, h1, h2, out }
    }
}

#[derive(Clone)]
struct Activations {
    x: [f64; DEFORMER_INPUTS],
    h1: [f64; H],
    h2: [f64; H],
    out: [f64; DEFORMER_OUTPUTS],
}

/// Effective per-Gaussian attributes at one UE position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeformedAttributes {
    pub opacity: f64,
    /// Effective delay residual (s).
    pub delay: f64,
    pub gain: f64,
}

/// Sensitivities of a scalar objective with respect to the primitive fields.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PrimitiveGrad {
    pub mu: Vec3,
    pub scale: f64,
    pub opacity_logit: f64,
    pub delay_residual: f64,
    pub gain_raw: f64,
}

/// Forward state retained for the reverse pass.
pub struct DeformerTrace {
    acts: Vec<Activations>,
    /// Pre-activation opacity and gain arguments.
    opacity_arg: Vec<f64>,
    gain_arg: Vec<f64>,
}

fn forward_all(
    map: &SceneMap,
    params: &DeformerParams,
    ue: &Vec3,
    keep: bool,
) -> (Vec<DeformedAttributes>, DeformerTrace) {
    let eta = params.bounds;
    // a zero head outputs exactly zero whatever the hidden state
    let skip_net = !keep && params.output_is_zero();
    let g = map.primitives.len();
    let mut attrs = Vec::with_capacity(g);
    let mut trace = DeformerTrace {
        acts: Vec::with_capacity(if keep { g } else { 0 }),
        opacity_arg: Vec::with_capacity(g),
        gain_arg: Vec::with_capacity(g),
    };
    for p in &map.primitives {
        let d = if skip_net {
            [0.0; DEFORMER_OUTPUTS]
        } else {
            let acts = params.forward(&p.mu, ue);
            let d = acts.out;
            if keep {
                trace.acts.push(acts);
            }
            d
        };
        let oa = p.opacity_logit + eta.opacity * d[0].tanh();
        let ga = p.gain_raw + eta.gain * d[2].tanh();
        attrs.push(DeformedAttributes {
            opacity: sigmoid(oa),
            delay: p.delay_residual + eta.delay * d[1].tanh(),
            gain: softplus(ga),
        });
        trace.opacity_arg.push(oa);
        trace.gain_arg.push(ga);
    }
    (attrs, trace)
}

/// `õ = σ(o + η_o tanh δo)`, `τ̃ = Δτ + η_τ tanh δτ`, `g̃ = softplus(g + η_g tanh δg)`.
pub fn deform(map: &SceneMap, params: &DeformerParams, ue: &Vec3) -> Vec<DeformedAttributes> {
    forward_all(map, params, ue, false).0
}

/// [`deform`] plus the activations needed by [`DeformerTrace::backward`].
pub fn deform_traced(map: &SceneMap, params: &DeformerParams, ue: &Vec3) -> (Vec<DeformedAttributes>, DeformerTrace) {
    forward_all(map, params, ue, true)
}

impl DeformerTrace {
    /// Pulls `upstream` (attribute sensitivities, one per Gaussian) back onto
    /// the primitive fields and accumulates network gradients into
    /// `weight_grad`. The `scale` entries of the result are zero.
    pub fn backward(
        &self,
        params: &DeformerParams,
        upstream: &[DeformedAttributes],
        weight_grad: &mut [f64],
    ) -> Vec<PrimitiveGrad> {
        assert_eq!(upstream.len(), self.acts.len());
        assert_eq!(weight_grad.len(), PARAM_COUNT);
        let eta = params.bounds;
        let w = &params.weights;
        let inv_extent = 1.0 / params.normalization.extent;
        let mut grads = Vec::with_capacity(upstream.len());
        for (i, up) in upstream.iter().enumerate() {
            let acts = &self.acts[i];
            let so = sigmoid(self.opacity_arg[i]);
            let d_oa = up.opacity * so * (1.0 - so);
            let d_ga = up.gain * sigmoid(self.gain_arg[i]);
            let t = acts.out.map(|d| d.tanh());
            let d_out = [
                d_oa * eta.opacity * (1.0 - t[0] * t[0]),
                up.delay * eta.delay * (1.0 - t[1] * t[1]),
                d_ga * eta.gain * (1.0 - t[2] * t[2]),
            ];
            let mut g = PrimitiveGrad {
                opacity_logit: d_oa,
                delay_residual: up.delay,
                gain_raw: d_ga,
                ..PrimitiveGrad::default()
            };
            if d_out.iter().all(|&v| v == 0.0) {
                grads.push(g);
                continue;
            }

            let mut d_h2 = [0.0; H];
            for (k, &dk) in d_out.iter().enumerate() {
                weight_grad[B3 + k] += dk;
                for j in 0..H {
                    weight_grad[W3 + k * H + j] += dk * acts.h2[j];
                    d_h2[j] += dk * w[W3 + k * H + j];
                }
            }
            let mut d_h1 = [0.0; H];
            for j in 0..H {
                let dz = d_h2[j] * (1.0 - acts.h2[j] * acts.h2[j]);
                if dz == 0.0 {
                    continue;
                }
                weight_grad[B2 + j] += dz;
                let base = W2 + j * H;
                for (l, dh) in d_h1.iter_mut().enumerate() {
                    weight_grad[base + l] += dz * acts.h1[l];
                    *dh += dz * w[base + l];
                }
            }
            let mut d_x = [0.0; DEFORMER_INPUTS];
            for j in 0..H {
                let dz = d_h1[j] * (1.0 - acts.h1[j] * acts.h1[j]);
                weight_grad[B1 + j] += dz;
                let base = W1 + j * DEFORMER_INPUTS;
                for (l, dx) in d_x.iter_mut().enumerate() {
                    weight_grad[base + l] += dz * acts.x[l];
                    *dx += dz * w[base + l];
                }
            }
            g.mu = Vec3::new(d_x[0], d_x[1], d_x[2]) * inv_extent;
            grads.push(g);
        }
        grads
    }
}
