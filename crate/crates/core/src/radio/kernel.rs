//! Finite-aperture leakage kernels.
//!
//! Both kernels are the normalized squared Dirichlet kernel
//! `P_n(x) = |sin(π n x) / (n sin(π x))|^2 = |(1/n) Σ_k exp(-j2π k x)|^2`.

// std inherents shadow these when a dependency links std
#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;
use core::f64::consts::PI;


use super::grid::{wrap_beam, ArrayGeometry, OfdmGrid};

const SERIES_THRESHOLD: f64 = 1e-9;

/// `(P_n(x), dP_n/dx)`.
pub fn dirichlet_power(n: usize, x: f64) -> (f64, f64) {
    let nf = n as f64;
    if n == 1 {
        return (1.0, 0.0);
    }
    let s = (PI * x).sin();
    if s.abs() < SERIES_THRESHOLD {
        // second-order expansion around the nearest integer
        let e = x - x.round();
        let c = (nf * nf - 1.0) * PI * PI / 3.0;
        return (1.0 - c * e * e, -2.0 * c * e);
    }
    let (sn, cn) = (PI * nf * x).sin_cos();
    let d = sn / (nf * s);
    let dd = PI * (nf * cn * s - sn * (PI * x).cos()) / (nf * s * s);
    (d * d, 2.0 * d * dd)
}

/// OFDM delay kernel `|(1/N) Σ_n exp(-j2π n Δf τ)|^2` evaluated at `tau_diff`.
pub fn delay_kernel(tau_diff: f64, grid: &OfdmGrid) -> f64 {
    dirichlet_power(grid.subcarriers, grid.subcarrier_spacing * tau_diff).0
}

/// Derivative of [`delay_kernel`] with respect to `tau_diff`.
pub fn delay_kernel_deriv(tau_diff: f64, grid: &OfdmGrid) -> f64 {
    grid.subcarrier_spacing * dirichlet_power(grid.subcarriers, grid.subcarrier_spacing * tau_diff).1
}

/// Normalized ULA correlation `|a(ν_b)ᴴ a(ν)|² / (‖a(ν_b)‖² ‖a(ν)‖²)`.
pub fn beam_kernel(nu_b: f64, nu: f64, array: &ArrayGeometry) -> f64 {
    dirichlet_power(array.antennas, 0.5 * array.spacing_ratio() * (nu_b - nu)).0
}

/// Derivative of [`beam_kernel`] with respect to the difference `nu_b - nu`.
pub fn beam_kernel_deriv(nu_b: f64, nu: f64, array: &ArrayGeometry) -> f64 {
    let k = 0.5 * array.spacing_ratio();
    k * dirichlet_power(array.antennas, k * (nu_b - nu)).1
}

/// Beam coordinate of each DFT beam column: `ν_u = wrap(-2u / (M κ))`.
///
/// With half-wavelength spacing (`κ = 1`) a single path at `ν_u` maps to a peak
/// exactly at column `u` of the delay-beam transform.
pub fn beam_grid(array: &ArrayGeometry) -> Vec<f64> {
    let m = array.antennas as f64;
    let k = array.spacing_ratio();
    (0..array.antennas)
        .map(|u| wrap_beam(-2.0 * u as f64 / (m * k)))
        .collect()
}
