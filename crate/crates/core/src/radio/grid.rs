// std inherents shadow these when a dependency links std
#[allow(unused_imports)]
use num_traits::Float;
use alloc::{format, vec::Vec};

use num_complex::Complex64;

use crate::linalg::{cis, CMat, CVec, RMat};
use crate::{Error, Result, Vec3, SPEED_OF_LIGHT};

/// OFDM resource grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmGrid {
    pub subcarriers: usize,
    /// Subcarrier spacing (Hz).
    pub subcarrier_spacing: f64,
    pub symbols_per_slot: usize,
    /// OFDM symbol duration (s).
    pub symbol_duration: f64,
    /// Carrier frequency (Hz).
    pub carrier_freq: f64,
}

impl OfdmGrid {
    pub fn new(
        subcarriers: usize,
        subcarrier_spacing: f64,
        symbols_per_slot: usize,
        symbol_duration: f64,
        carrier_freq: f64,
    ) -> Result<Self> {
        if subcarriers < 2 {
            return Err(Error::invalid("OFDM grid needs at least 2 subcarriers"));
        }
        if !(subcarrier_spacing > 0.0) || !(symbol_duration > 0.0) || !(carrier_freq > 0.0) {
            return Err(Error::invalid(
                "subcarrier spacing, symbol duration and carrier frequency must be positive",
            ));
        }
        if symbols_per_slot < 1 {
            return Err(Error::invalid("a slot holds at least one OFDM symbol"));
        }
        Ok(Self {
            subcarriers,
            subcarrier_spacing,
            symbols_per_slot,
            symbol_duration,
            carrier_freq,
        })
    }

    /// Delay resolution of one tap, `1 / (N Δf)`.
    pub fn tap_spacing(&self) -> f64 {
        1.0 / (self.subcarriers as f64 * self.subcarrier_spacing)
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq
    }

    pub fn slot_duration(&self) -> f64 {
        self.symbol_duration * self.symbols_per_slot as f64
    }
}

/// Maps a beam coordinate onto the fundamental interval `[-1, 1)`.
pub fn wrap_beam(nu: f64) -> f64 {
    let w = nu + 1.0 - 2.0 * ((nu + 1.0) / 2.0).floor() - 1.0;
    if w >= 1.0 {
        -1.0
    } else {
        w
    }
}

/// Uniform linear array at the base station.
///
/// The array axis lies in the horizontal plane, perpendicular to `broadside`.
/// Beam coordinates are sines of the azimuth measured from broadside.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    pub antennas: usize,
    pub spacing_wavelengths: f64,
    pub bs_position: Vec3,
    pub broadside: Vec3,
}

impl ArrayGeometry {
    pub fn new(antennas: usize, spacing_wavelengths: f64, bs_position: Vec3, broadside: Vec3) -> Result<Self> {
        if antennas < 1 {
            return Err(Error::invalid("array needs at least one antenna"));
        }
        if !(spacing_wavelengths > 0.0) {
            return Err(Error::invalid("element spacing must be positive"));
        }
        if (broadside.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "broadside must be a unit vector (norm {})",
                broadside.norm()
            )));
        }
        if broadside.x.hypot(broadside.y) < 1e-9 {
            return Err(Error::invalid("broadside must not be vertical"));
        }
        if !bs_position.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("BS position must be finite"));
        }
        Ok(Self {
            antennas,
            spacing_wavelengths,
            bs_position,
            broadside,
        })
    }

    /// Spacing relative to half a wavelength.
    pub fn spacing_ratio(&self) -> f64 {
        self.spacing_wavelengths / 0.5
    }

    /// Horizontal broadside direction (unit).
    pub fn broadside_horizontal(&self) -> Vec3 {
        let h = self.broadside.x.hypot(self.broadside.y);
        Vec3::new(self.broadside.x / h, self.broadside.y / h, 0.0)
    }

    /// Horizontal unit vector along the array elements.
    pub fn axis(&self) -> Vec3 {
        let b = self.broadside_horizontal();
        Vec3::new(-b.y, b.x, 0.0)
    }

    /// Beam coordinate of a direction (elevation collapsed), in `[-1, 1)`.
    pub fn beam_coord(&self, direction: &Vec3) -> Result<f64> {
        let h = direction.x.hypot(direction.y);
        if !(h > 0.0) {
            return Err(Error::invalid("direction has no horizontal component"));
        }
        let axis = self.axis();
        Ok(wrap_beam((direction.x * axis.x + direction.y * axis.y) / h))
    }

    /// Steering vector `a(ν)_m = exp(-jπ m κ ν)` with `κ` the spacing ratio.
    pub fn steering(&self, nu: f64) -> CVec {
        let k = core::f64::consts::PI * self.spacing_ratio() * nu;
        CVec::from_fn(self.antennas, |m, _| cis(-k * m as f64))
    }
}

/// Comb pilot placement plus transmit power and noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotPattern {
    pub pilot_symbols: Vec<usize>,
    pub pilot_subcarriers: Vec<usize>,
    /// Linear amplitude factor applied to the CFR.
    pub tx_power: f64,
    /// Per-entry complex noise variance.
    pub noise_var: f64,
}

fn check_index_set(name: &str, set: &[usize], bound: usize) -> Result<()> {
    if set.is_empty() {
        return Err(Error::invalid(format!("{name} must be nonempty")));
    }
    if set.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid(format!("{name} must be strictly increasing")));
    }
    if set[set.len() - 1] >= bound {
        return Err(Error::invalid(format!("{name} exceeds range 0..{bound}")));
    }
    Ok(())
}

impl PilotPattern {
    pub fn new(
        grid: &OfdmGrid,
        pilot_symbols: Vec<usize>,
        pilot_subcarriers: Vec<usize>,
        tx_power: f64,
        noise_var: f64,
    ) -> Result<Self> {
        check_index_set("pilot symbols", &pilot_symbols, grid.symbols_per_slot)?;
        check_index_set("pilot subcarriers", &pilot_subcarriers, grid.subcarriers)?;
        if !(tx_power > 0.0) {
            return Err(Error::invalid("transmit power must be positive"));
        }
        if !(noise_var >= 0.0) || !noise_var.is_finite() {
            return Err(Error::invalid("noise variance must be finite and nonnegative"));
        }
        Ok(Self {
            pilot_symbols,
            pilot_subcarriers,
            tx_power,
            noise_var,
        })
    }

    /// `count` equally spaced pilot subcarriers starting at `offset`.
    pub fn comb_subcarriers(subcarriers: usize, count: usize, offset: usize) -> Result<Vec<usize>> {
        if count == 0 || count > subcarriers {
            return Err(Error::invalid("comb pilot count out of range"));
        }
        let step = subcarriers / count;
        if offset >= step {
            return Err(Error::invalid("comb offset must be below the comb spacing"));
        }
        Ok((0..count).map(|k| offset + k * step).collect())
    }

    pub fn is_pilot_symbol(&self, symbol: usize) -> bool {
        self.pilot_symbols.binary_search(&symbol).is_ok()
    }

    pub fn with_noise_var(mut self, noise_var: f64) -> Self {
        self.noise_var = noise_var;
        self
    }
}

/// The retained delay taps: `guard` wrap-around taps below zero delay followed
/// by `taps - guard` nonnegative taps.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayWindow {
    pub subcarriers: usize,
    pub taps: usize,
    pub guard: usize,
    pub tap_indices: Vec<usize>,
    pub tap_delays: Vec<f64>,
}

impl DelayWindow {
    pub fn new(grid: &OfdmGrid, taps: usize, guard: usize) -> Result<Self> {
        let n = grid.subcarriers;
        if !(guard < taps && taps <= n) {
            return Err(Error::invalid(format!(
                "delay window needs 0 <= guard < taps <= N (guard {guard}, taps {taps}, N {n})"
            )));
        }
        let tap_indices: Vec<usize> = (n - guard..n).chain(0..taps - guard).collect();
        let spacing = grid.tap_spacing();
        let tap_delays = tap_indices
            .iter()
            .map(|&l| {
                if l < n / 2 {
                    l as f64 * spacing
                } else {
                    (l as f64 - n as f64) * spacing
                }
            })
            .collect();
        Ok(Self {
            subcarriers: n,
            taps,
            guard,
            tap_indices,
            tap_delays,
        })
    }

    /// Window row whose tap delay is closest to `tau`, if the nearest tap of the
    /// full circular grid lies inside the window.
    pub fn nearest_row(&self, tau: f64, grid: &OfdmGrid) -> Option<usize> {
        let n = self.subcarriers as i64;
        let idx = (tau / grid.tap_spacing()).round() as i64;
        let idx = idx.rem_euclid(n) as usize;
        self.tap_indices.iter().position(|&l| l == idx)
    }
}

/// Full-band, full-array CFR at one OFDM symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct CfrSnapshot {
    /// `N x M`, subcarrier rows and antenna columns.
    pub h: CMat,
    pub ue_position: Vec3,
    pub symbol_index: usize,
    pub slot_index: usize,
}

impl CfrSnapshot {
    pub fn new(h: CMat, ue_position: Vec3, symbol_index: usize, slot_index: usize) -> Result<Self> {
        if !h.iter().all(|z: &Complex64| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::invalid("CFR has non-finite entries"));
        }
        Ok(Self {
            h,
            ue_position,
            symbol_index,
            slot_index,
        })
    }
}

/// Nonnegative `L x M` power grid (delay rows, beam columns).
#[derive(Debug, Clone, PartialEq)]
pub struct DelayBeamSpectrum {
    pub q: RMat,
}

impl DelayBeamSpectrum {
    pub fn new(q: RMat) -> Result<Self> {
        if !q.iter().all(|v| v.is_finite() && *v >= 0.0) {
            return Err(Error::invalid("spectrum entries must be finite and nonnegative"));
        }
        Ok(Self { q })
    }

    pub fn zeros(taps: usize, beams: usize) -> Self {
        Self {
            q: RMat::zeros(taps, beams),
        }
    }

    pub fn total(&self) -> f64 {
        self.q.sum()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.q.shape()
    }
}
