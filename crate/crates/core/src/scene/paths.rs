// std inherents shadow these when a dependency links std
#[allow(unused_imports)]
use num_traits::Float;
use alloc::{format, vec::Vec};
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{cis, CMat};
use crate::radio::{ArrayGeometry, CfrSnapshot, OfdmGrid, PilotPattern};
use crate::{Error, Result, Vec3, SPEED_OF_LIGHT};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathKind {
    Los,
    Nlos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathComponent {
    /// Absolute propagation delay (s).
    pub delay: f64,
    /// BS-side beam coordinate in `[-1, 1)`.
    pub beam_coord: f64,
    pub complex_gain: Complex64,
    /// Doppler shift (Hz).
    pub doppler: f64,
    pub kind: PathKind,
}

/// A point scatterer with a visibility interval along the track.
#[derive(Debug, Clone, PartialEq)]
pub struct Scatterer {
    pub position: Vec3,
    pub reflectivity: Complex64,
    /// Effective scattering aperture (m); scales the bistatic amplitude.
    pub aperture: f64,
    /// Track coordinates (m) between which the scatterer is visible.
    pub active_range: (f64, f64),
}

impl Scatterer {
    pub fn new(position: Vec3, reflectivity: Complex64, aperture: f64, active_range: (f64, f64)) -> Result<Self> {
        if reflectivity.norm() > 1.0 {
            return Err(Error::invalid("scatterer reflectivity magnitude exceeds 1"));
        }
        if !(active_range.0 <= active_range.1) {
            return Err(Error::invalid("scatterer active range is not ordered"));
        }
        if !(aperture > 0.0) {
            return Err(Error::invalid("scatterer aperture must be positive"));
        }
        Ok(Self {
            position,
            reflectivity,
            aperture,
            active_range,
        })
    }

    pub fn is_visible(&self, track_coord: f64) -> bool {
        self.active_range.0 <= track_coord && track_coord <= self.active_range.1
    }
}

/// UE state for path enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkState {
    pub position: Vec3,
    pub velocity: Vec3,
    /// Distance travelled along the track (m), used for visibility gating.
    pub track_coord: f64,
}

pub fn enumerate_paths(
    link: &LinkState,
    scatterers: &[Scatterer],
    array: &ArrayGeometry,
    grid: &OfdmGrid,
) -> Result<Vec<PathComponent>> {
    let bs = array.bs_position;
    let lambda = grid.wavelength();
    let to_bs = bs - link.position;
    let d = to_bs.norm();
    if !(d > 1e-9) {
        return Err(Error::invalid("UE coincides with the base station"));
    }
    let mut out = Vec::with_capacity(1 + scatterers.len());
    out.push(PathComponent {
        delay: d / SPEED_OF_LIGHT,
        beam_coord: array.beam_coord(&(link.position - bs))?,
        complex_gain: cis(-2.0 * PI * d / lambda) * (lambda / (4.0 * PI * d)),
        doppler: link.velocity.dot(&to_bs) / d / lambda,
        kind: PathKind::Los,
    });
    for (i, s) in scatterers.iter().enumerate() {
        if !s.is_visible(link.track_coord) {
            continue;
        }
        let d1 = (s.position - bs).norm();
        let to_s = s.position - link.position;
        let d2 = to_s.norm();
        if !(d1 > 1e-9 && d2 > 1e-9) {
            return Err(Error::invalid(format!("scatterer {i} coincides with an endpoint")));
        }
        let amp = lambda * s.aperture / (4.0 * PI * d1 * d2);
        out.push(PathComponent {
            delay: (d1 + d2) / SPEED_OF_LIGHT,
            beam_coord: array.beam_coord(&(s.position - bs))?,
            complex_gain: s.reflectivity * cis(-2.0 * PI * (d1 + d2) / lambda) * amp,
            doppler: link.velocity.dot(&to_s) / d2 / lambda,
            kind: PathKind::Nlos,
        });
    }
    Ok(out)
}

/// `H[n, m] = Σ_p g_p exp(j2π f_D,p t) exp(-j2π n Δf τ_p) a_m(ν_p)`.
pub fn synthesize_cfr(paths: &[PathComponent], grid: &OfdmGrid, array: &ArrayGeometry, time: f64) -> Result<CMat> {
    if paths.is_empty() {
        return Err(Error::invalid("cannot synthesize a CFR from an empty path list"));
    }
    let (n, m) = (grid.subcarriers, array.antennas);
    let mut h = CMat::zeros(n, m);
    for p in paths {
        let g = p.complex_gain * cis(2.0 * PI * p.doppler * time);
        let step = cis(-2.0 * PI * grid.subcarrier_spacing * p.delay);
        let a = array.steering(p.beam_coord);
        let mut phasor = g;
        for row in 0..n {
            if row % 64 == 0 {
                // re-anchor the recurrence to bound drift
                phasor = g * cis(-2.0 * PI * row as f64 * grid.subcarrier_spacing * p.delay);
            }
            for col in 0..m {
                h[(row, col)] += phasor * a[col];
            }
            phasor *= step;
        }
    }
    Ok(h)
}

/// Circularly-symmetric complex Gaussian sample with total variance `var`.
pub fn complex_normal<R: Rng>(rng: &mut R, var: f64) -> Complex64 {
    // Box-Muller; u1 in (0, 1]
    let u1 = 1.0 - rng.random::<f64>();
    let u2 = rng.random::<f64>();
    let r = (-var * u1.ln()).sqrt();
    Complex64::new(r * (2.0 * PI * u2).cos(), r * (2.0 * PI * u2).sin())
}

/// Noisy pilot observation `Y = P_tr S_P(H) + W` (`N_p x M`).
pub fn observe_pilots(snapshot: &CfrSnapshot, pattern: &PilotPattern, seed: u64) -> Result<CMat> {
    if !pattern.is_pilot_symbol(snapshot.symbol_index) {
        return Err(Error::invalid(format!(
            "symbol {} carries no pilots",
            snapshot.symbol_index
        )));
    }
    if pattern.pilot_subcarriers.iter().any(|&n| n >= snapshot.h.nrows()) {
        return Err(Error::invalid("pilot subcarrier outside the CFR"));
    }
    let mut y = snapshot.h.select_rows(&pattern.pilot_subcarriers) * Complex64::new(pattern.tx_power, 0.0);
    if pattern.noise_var > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // column-major fill order, fixed for reproducibility
        for z in y.iter_mut() {
            *z += complex_normal(&mut rng, pattern.noise_var);
        }
    }
    Ok(y)
}
