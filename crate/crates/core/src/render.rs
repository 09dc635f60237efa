//! Incoherent delay-beam rendering of the deformed Gaussian path set.
//!
//! Every path contributes `w K_τ(τ_ℓ - τ) K_b(ν_b - ν)` to bin `(ℓ, b)`; the
//! beam factor of a Gaussian is smoothed by its spatial footprint.

// std inherents shadow these when a dependency links std
#[allow(unused_imports)]
use num_traits::Float;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::RMat;
use crate::model::{ParamGroup, PriorModel};
use crate::prior::{deform, deform_traced, select_active, sigmoid, softplus, DeformedAttributes, GaussianPrimitive};
use crate::radio::{
    beam_grid, beam_kernel, beam_kernel_deriv, delay_kernel, delay_kernel_deriv, wrap_beam, ArrayGeometry,
    DelayBeamSpectrum, DelayWindow, OfdmGrid,
};
use crate::{Error, Result, Vec3, SPEED_OF_LIGHT};

/// Gauss-Hermite nodes and weights for an expectation over a standard normal.
const GH_NODES: [f64; 5] = [0.0, 1.355_626_179_974_265_9, -1.355_626_179_974_265_9, 2.856_970_013_872_805_6, -2.856_970_013_872_805_6];
const GH_WEIGHTS: [f64; 5] = [
    0.533_333_333_333_333_3,
    0.222_075_922_005_612_6,
    0.222_075_922_005_612_6,
    0.011_257_411_327_720_691,
    0.011_257_411_327_720_691,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelMode {
    /// Closed-form Dirichlet leakage kernels.
    Leakage,
    /// All power of a path in its nearest bin.
    NearestBin,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderConfig {
    pub threshold: f64,
    pub max_paths: usize,
    pub kernel: KernelMode,
    pub virtual_los: bool,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            threshold: 0.05,
            max_paths: 64,
            kernel: KernelMode::Leakage,
            virtual_los: true,
        }
    }
}

/// Grid, array and window plus the beam coordinates of the DFT columns.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderGeometry {
    pub grid: OfdmGrid,
    pub array: ArrayGeometry,
    pub window: DelayWindow,
    pub beams: Vec<f64>,
}

impl RenderGeometry {
    pub fn new(grid: OfdmGrid, array: ArrayGeometry, window: DelayWindow) -> Result<Self> {
        if window.subcarriers != grid.subcarriers {
            return Err(Error::invalid("delay window does not match the OFDM grid"));
        }
        let beams = beam_grid(&array);
        Ok(Self {
            grid,
            array,
            window,
            beams,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.window.taps, self.array.antennas)
    }

    /// Largest footprint width along the beam axis.
    pub fn max_beam_width(&self) -> f64 {
        2.0 / self.array.antennas as f64
    }

    fn nearest_column(&self, nu: f64) -> usize {
        let mut best = (0, f64::INFINITY);
        for (u, &b) in self.beams.iter().enumerate() {
            let d = wrap_beam(b - nu).abs();
            if d < best.1 {
                best = (u, d);
            }
        }
        best.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathSource {
    Los,
    Gaussian(usize),
}

/// One rendered path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderedPath {
    pub source: PathSource,
    pub weight: f64,
    pub delay: f64,
    pub beam: f64,
    /// Footprint standard deviation along the beam axis.
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedSpectrum {
    pub total: DelayBeamSpectrum,
    pub nlos_only: DelayBeamSpectrum,
    pub paths: Vec<RenderedPath>,
}

/// `‖μ - b‖ / c + τ̃`.
pub fn nlos_delay(primitive: &GaussianPrimitive, deformed: &DeformedAttributes, bs: &Vec3) -> f64 {
    (primitive.mu - bs).norm() / SPEED_OF_LIGHT + deformed.delay
}

/// `‖u - b‖ / c`.
pub fn los_delay(ue: &Vec3, bs: &Vec3) -> Result<f64> {
    let d = (ue - bs).norm();
    if !(d > 0.0) {
        return Err(Error::invalid("UE and BS positions coincide"));
    }
    Ok(d / SPEED_OF_LIGHT)
}

/// Delay profile over the window rows and its derivative with respect to
/// the path delay.
fn delay_profile(geom: &RenderGeometry, tau: f64, mode: KernelMode) -> (Vec<f64>, Vec<f64>) {
    let taps = geom.window.taps;
    match mode {
        KernelMode::Leakage => {
            let k = geom.window.tap_delays.iter().map(|&t| delay_kernel(t - tau, &geom.grid)).collect();
            let d = geom
                .window
                .tap_delays
                .iter()
                .map(|&t| -delay_kernel_deriv(t - tau, &geom.grid))
                .collect();
            (k, d)
        }
        KernelMode::NearestBin => {
            let mut k = vec![0.0; taps];
            if let Some(r) = geom.window.nearest_row(tau, &geom.grid) {
                k[r] = 1.0;
            }
            (k, vec![0.0; taps])
        }
    }
}

/// Beam profile smoothed by a Gaussian of standard deviation `width`, plus
/// derivatives with respect to the centre and the width.
fn beam_profile(geom: &RenderGeometry, nu: f64, width: f64, mode: KernelMode) -> [Vec<f64>; 3] {
    let m = geom.array.antennas;
    match mode {
        KernelMode::Leakage => {
            let mut k = vec![0.0; m];
            let mut d_nu = vec![0.0; m];
            let mut d_w = vec![0.0; m];
            let nodes = if width > 0.0 { GH_NODES.len() } else { 1 };
            for q in 0..nodes {
                let (z, wq) = if width > 0.0 { (GH_NODES[q], GH_WEIGHTS[q]) } else { (0.0, 1.0) };
                let centre = nu + width * z;
                for (b, &nb) in geom.beams.iter().enumerate() {
                    k[b] += wq * beam_kernel(nb, centre, &geom.array);
                    let dk = -beam_kernel_deriv(nb, centre, &geom.array);
                    d_nu[b] += wq * dk;
                    d_w[b] += wq * z * dk;
                }
            }
            [k, d_nu, d_w]
        }
        KernelMode::NearestBin => {
            let mut k = vec![0.0; m];
            k[geom.nearest_column(nu)] = 1.0;
            [k, vec![0.0; m], vec![0.0; m]]
        }
    }
}

struct NlosGeometry {
    delay: f64,
    beam: f64,
    width: f64,
    /// The footprint width hit its cap.
    clipped: bool,
    dist: f64,
}

fn nlos_geometry(geom: &RenderGeometry, p: &GaussianPrimitive, a: &DeformedAttributes) -> Result<NlosGeometry> {
    let bs = geom.array.bs_position;
    let v = p.mu - bs;
    let dist = v.norm();
    if !(dist > 0.0) {
        return Err(Error::invalid("Gaussian centre coincides with the base station"));
    }
    let beam = geom
        .array
        .beam_coord(&v)
        .map_err(|_| Error::invalid(format!("Gaussian at {:?} is directly above the array", p.mu)))?;
    let raw = p.scale / dist;
    let cap = geom.max_beam_width();
    Ok(NlosGeometry {
        delay: nlos_delay(p, a, &bs),
        beam,
        width: raw.clamp(0.0, cap),
        clipped: raw > cap,
        dist,
    })
}

fn accumulate(q: &mut RMat, w: f64, kt: &[f64], kb: &[f64]) {
    for (b, &vb) in kb.iter().enumerate() {
        if vb == 0.0 {
            continue;
        }
        let s = w * vb;
        for (l, &vt) in kt.iter().enumerate() {
            q[(l, b)] += s * vt;
        }
    }
}

/// `kτᵀ U kb`.
fn bilinear(u: &RMat, kt: &[f64], kb: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (b, &vb) in kb.iter().enumerate() {
        if vb == 0.0 {
            continue;
        }
        let col: f64 = kt.iter().enumerate().map(|(l, &vt)| u[(l, b)] * vt).sum();
        acc += vb * col;
    }
    acc
}

fn los_path(model: &PriorModel, geom: &RenderGeometry, ue: &Vec3) -> Result<RenderedPath> {
    let bs = geom.array.bs_position;
    Ok(RenderedPath {
        source: PathSource::Los,
        weight: softplus(model.map.los_gain_raw),
        delay: los_delay(ue, &bs)?,
        beam: geom.array.beam_coord(&(ue - bs))?,
        width: 0.0,
    })
}

/// Renders the prior spectrum at `ue`.
pub fn render(model: &PriorModel, ue: &Vec3, geom: &RenderGeometry, cfg: &RenderConfig) -> Result<RenderedSpectrum> {
    let attrs = deform(&model.map, &model.deformer, ue);
    render_from_attributes(model, &attrs, ue, geom, cfg)
}

fn render_from_attributes(
    model: &PriorModel,
    attrs: &[DeformedAttributes],
    ue: &Vec3,
    geom: &RenderGeometry,
    cfg: &RenderConfig,
) -> Result<RenderedSpectrum> {
    let (l, m) = geom.shape();
    let mut nlos = RMat::zeros(l, m);
    let mut paths = Vec::new();
    for i in select_active(attrs, cfg.threshold, cfg.max_paths) {
        let p = &model.map.primitives[i];
        let ng = nlos_geometry(geom, p, &attrs[i])?;
        let w = attrs[i].opacity * attrs[i].gain;
        let (kt, _) = delay_profile(geom, ng.delay, cfg.kernel);
        let [kb, _, _] = beam_profile(geom, ng.beam, ng.width, cfg.kernel);
        accumulate(&mut nlos, w, &kt, &kb);
        paths.push(RenderedPath {
            source: PathSource::Gaussian(i),
            weight: w,
            delay: ng.delay,
            beam: ng.beam,
            width: ng.width,
        });
    }
    let mut total = nlos.clone();
    if cfg.virtual_los {
        let lp = los_path(model, geom, ue)?;
        let (kt, _) = delay_profile(geom, lp.delay, cfg.kernel);
        let [kb, _, _] = beam_profile(geom, lp.beam, 0.0, cfg.kernel);
        accumulate(&mut total, lp.weight, &kt, &kb);
        paths.push(lp);
    }
    Ok(RenderedSpectrum {
        total: DelayBeamSpectrum { q: total },
        nlos_only: DelayBeamSpectrum { q: nlos },
        paths,
    })
}

/// Window row and beam column nearest to the geometric LoS path, if the
/// LoS delay falls inside the window.
pub fn los_bin(geom: &RenderGeometry, ue: &Vec3) -> Option<(usize, usize)> {
    let bs = geom.array.bs_position;
    let tau = los_delay(ue, &bs).ok()?;
    let nu = geom.array.beam_coord(&(ue - bs)).ok()?;
    Some((geom.window.nearest_row(tau, &geom.grid)?, geom.nearest_column(nu)))
}

/// Rendered spectrum plus the gradient of `⟨U_total, Q̂⟩ + ⟨U_nlos, Q̂_nlos⟩`
/// with respect to every model parameter, laid out as
/// [`PriorModel::to_flat`].
pub fn render_gradients(
    model: &PriorModel,
    ue: &Vec3,
    geom: &RenderGeometry,
    cfg: &RenderConfig,
    upstream_total: &RMat,
    upstream_nlos: &RMat,
) -> Result<(RenderedSpectrum, Vec<f64>)> {
    let (r, (), grad) = render_and_backprop(model, ue, geom, cfg, |_| {
        Ok(((), upstream_total.clone(), upstream_nlos.clone()))
    })?;
    Ok((r, grad))
}

/// Renders, asks `upstream` for the sensitivities `(U_total, U_nlos)` of a
/// scalar objective given the rendered spectrum, and pulls them back onto
/// the parameters in one pass.
pub fn render_and_backprop<T, F>(
    model: &PriorModel,
    ue: &Vec3,
    geom: &RenderGeometry,
    cfg: &RenderConfig,
    upstream: F,
) -> Result<(RenderedSpectrum, T, Vec<f64>)>
where
    F: FnOnce(&RenderedSpectrum) -> Result<(T, RMat, RMat)>,
{
    let (attrs, trace) = deform_traced(&model.map, &model.deformer, ue);
    let spectrum = render_from_attributes(model, &attrs, ue, geom, cfg)?;
    let (value, upstream_total, upstream_nlos) = upstream(&spectrum)?;
    let shape = geom.shape();
    if upstream_total.shape() != shape || upstream_nlos.shape() != shape {
        return Err(Error::invalid("upstream sensitivity does not match the spectrum shape"));
    }
    let upstream_total = &upstream_total;

    let layout = model.layout();
    let g = model.map.len();
    let mut grad = vec![0.0; layout.len()];
    let u_nlos = upstream_total + &upstream_nlos;
    let mut attr_up = vec![
        DeformedAttributes {
            opacity: 0.0,
            delay: 0.0,
            gain: 0.0
        };
        g
    ];
    let bs = geom.array.bs_position;
    let pos = layout.range(ParamGroup::Position).start;
    let scale = layout.range(ParamGroup::Scale).start;

    for path in &spectrum.paths {
        let PathSource::Gaussian(i) = path.source else {
            continue;
        };
        let p = &model.map.primitives[i];
        let a = &attrs[i];
        let ng = nlos_geometry(geom, p, a)?;
        let (kt, kt_d) = delay_profile(geom, ng.delay, cfg.kernel);
        let [kb, kb_nu, kb_w] = beam_profile(geom, ng.beam, ng.width, cfg.kernel);
        let d_w = bilinear(&u_nlos, &kt, &kb);
        let d_tau = path.weight * bilinear(&u_nlos, &kt_d, &kb);
        let d_nu = path.weight * bilinear(&u_nlos, &kt, &kb_nu);
        let d_width = if ng.clipped || ng.width == 0.0 {
            0.0
        } else {
            path.weight * bilinear(&u_nlos, &kt, &kb_w)
        };

        attr_up[i] = DeformedAttributes {
            opacity: d_w * a.gain,
            delay: d_tau,
            gain: d_w * a.opacity,
        };

        // direct dependence of delay, beam and width on μ and s
        let v = p.mu - bs;
        let mut d_mu = v * (d_tau / (ng.dist * SPEED_OF_LIGHT));
        let axis = geom.array.axis();
        let hn = v.x.hypot(v.y);
        let proj = v.x * axis.x + v.y * axis.y;
        let h3 = hn * hn * hn;
        d_mu.x += d_nu * (axis.x / hn - proj * v.x / h3);
        d_mu.y += d_nu * (axis.y / hn - proj * v.y / h3);
        d_mu -= v * (d_width * p.scale / (ng.dist * ng.dist * ng.dist));
        for c in 0..3 {
            grad[pos + 3 * i + c] += d_mu[c];
        }
        grad[scale + i] += d_width / ng.dist;
    }

    if cfg.virtual_los {
        if let Some(lp) = spectrum.paths.iter().find(|p| p.source == PathSource::Los) {
            let (kt, _) = delay_profile(geom, lp.delay, cfg.kernel);
            let [kb, _, _] = beam_profile(geom, lp.beam, 0.0, cfg.kernel);
            grad[layout.range(ParamGroup::LosGain).start] = bilinear(upstream_total, &kt, &kb) * sigmoid(model.map.los_gain_raw);
        }
    }

    let dr = layout.range(ParamGroup::Deformer);
    let prim_grads = trace.backward(&model.deformer, &attr_up, &mut grad[dr]);
    for (i, pg) in prim_grads.iter().enumerate() {
        grad[i] += pg.opacity_logit;
        grad[g + i] += pg.delay_residual;
        grad[2 * g + i] += pg.gain_raw;
        for c in 0..3 {
            grad[pos + 3 * i + c] += pg.mu[c];
        }
    }
    Ok((spectrum, value, grad))
}
