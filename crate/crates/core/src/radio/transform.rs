// std inherents shadow these when a dependency links std
#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use core::f64::consts::PI;

use num_complex::Complex64;

use super::grid::{DelayBeamSpectrum, DelayWindow};
use crate::linalg::{cis, frobenius_sq, CMat};
use crate::{Error, Result};

/// Reported NMSE for an exact reconstruction.
pub const NMSE_FLOOR_DB: f64 = -300.0;

/// Unitary DFT matrix, entry `(n, k) = exp(-j2π nk / size) / sqrt(size)`.
pub fn dft_matrix(size: usize) -> Result<CMat> {
    if size == 0 {
        return Err(Error::invalid("DFT size must be at least 1"));
    }
    let scale = 1.0 / (size as f64).sqrt();
    Ok(CMat::from_fn(size, size, |n, k| {
        // reduce nk modulo size before forming the phase
        let nk = (n * k) % size;
        cis(-2.0 * PI * nk as f64 / size as f64) * scale
    }))
}

/// Precomputed delay-beam transform pair for a fixed window and array size.
#[derive(Debug, Clone)]
pub struct DelayBeamTransform {
    /// `P_D F_Nᴴ`, `L x N`.
    forward_delay: CMat,
    /// `F_N P_Dᵀ`, `N x L`.
    inverse_delay: CMat,
    f_m: CMat,
}

impl DelayBeamTransform {
    pub fn new(window: &DelayWindow, antennas: usize) -> Result<Self> {
        let f_n = dft_matrix(window.subcarriers)?;
        let f_m = dft_matrix(antennas)?;
        let inverse_delay = f_n.select_columns(&window.tap_indices);
        let forward_delay = inverse_delay.adjoint();
        Ok(Self {
            forward_delay,
            inverse_delay,
            f_m,
        })
    }

    pub fn subcarriers(&self) -> usize {
        self.inverse_delay.nrows()
    }

    pub fn taps(&self) -> usize {
        self.forward_delay.nrows()
    }

    pub fn antennas(&self) -> usize {
        self.f_m.nrows()
    }

    /// `X = P_D F_Nᴴ H F_M`.
    pub fn forward(&self, h: &CMat) -> Result<CMat> {
        if h.shape() != (self.subcarriers(), self.antennas()) {
            return Err(Error::invalid(format!(
                "CFR is {:?}, transform expects {}x{}",
                h.shape(),
                self.subcarriers(),
                self.antennas()
            )));
        }
        Ok(&self.forward_delay * h * &self.f_m)
    }

    /// `H = F_N P_Dᵀ X F_Mᴴ`.
    pub fn inverse(&self, x: &CMat) -> Result<CMat> {
        if x.shape() != (self.taps(), self.antennas()) {
            return Err(Error::invalid(format!(
                "delay-beam matrix is {:?}, transform expects {}x{}",
                x.shape(),
                self.taps(),
                self.antennas()
            )));
        }
        Ok(&self.inverse_delay * x * self.f_m.adjoint())
    }
}

/// Untruncated `F_Nᴴ H F_M`.
pub fn to_delay_beam_full(h: &CMat) -> Result<CMat> {
    let f_n = dft_matrix(h.nrows())?;
    let f_m = dft_matrix(h.ncols())?;
    Ok(f_n.adjoint() * h * f_m)
}

/// Truncated delay-beam representation `X = P_D F_Nᴴ H F_M` (`L x M`).
pub fn to_delay_beam(h: &CMat, window: &DelayWindow) -> Result<CMat> {
    if h.nrows() != window.subcarriers {
        return Err(Error::invalid(format!(
            "CFR has {} subcarriers, window expects {}",
            h.nrows(),
            window.subcarriers
        )));
    }
    DelayBeamTransform::new(window, h.ncols())?.forward(h)
}

/// CFR payload `H = F_N P_Dᵀ X F_Mᴴ` from a truncated delay-beam matrix.
pub fn from_delay_beam(x: &CMat, window: &DelayWindow) -> Result<CMat> {
    if x.nrows() != window.taps {
        return Err(Error::invalid(format!(
            "delay-beam matrix has {} taps, window expects {}",
            x.nrows(),
            window.taps
        )));
    }
    DelayBeamTransform::new(window, x.ncols())?.inverse(x)
}

/// Element-wise `|x|^2`.
pub fn ground_truth_spectrum(x: &CMat) -> DelayBeamSpectrum {
    DelayBeamSpectrum {
        q: x.map(|z: Complex64| z.norm_sqr()),
    }
}

/// `10 log10(‖Ĥ - H‖² / ‖H‖²)`, floored at [`NMSE_FLOOR_DB`].
pub fn nmse_db(h_hat: &CMat, h: &CMat) -> Result<f64> {
    if h_hat.shape() != h.shape() {
        return Err(Error::invalid("NMSE operands differ in shape"));
    }
    let den = frobenius_sq(h);
    if !(den > 0.0) {
        return Err(Error::invalid("reference channel has zero energy"));
    }
    let num = frobenius_sq(&(h_hat - h));
    if num == 0.0 {
        return Ok(NMSE_FLOOR_DB);
    }
    Ok((10.0 * (num / den).log10()).max(NMSE_FLOOR_DB))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radio::{beam_grid, ArrayGeometry, OfdmGrid};
    use crate::Vec3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cmat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMat {
        CMat::from_fn(r, c, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    #[test]
    fn small_dfts() {
        assert_eq!(dft_matrix(1).unwrap()[(0, 0)], Complex64::new(1.0, 0.0));
        let f2 = dft_matrix(2).unwrap();
        let s = core::f64::consts::FRAC_1_SQRT_2;
        assert!((f2[(1, 1)] - Complex64::new(-s, 0.0)).norm() < 1e-15);
        assert!((f2[(0, 1)] - Complex64::new(s, 0.0)).norm() < 1e-15);
        assert!(dft_matrix(0).is_err());
    }

    #[test]
    fn dft_is_unitary() {
        for n in [1usize, 2, 4, 8, 64, 128] {
            let f = dft_matrix(n).unwrap();
            let err = (f.adjoint() * &f - CMat::identity(n, n)).map(|z| z.norm()).max();
            assert!(err < 1e-12, "n={n} err={err}");
        }
    }

    #[test]
    fn full_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = random_cmat(&mut rng, 32, 8);
        let x = to_delay_beam_full(&h).unwrap();
        let back = dft_matrix(32).unwrap() * x * dft_matrix(8).unwrap().adjoint();
        assert!((back - &h).norm() / h.norm() < 1e-12);
    }

    #[test]
    fn on_grid_path_is_one_hot() {
        let grid = OfdmGrid::new(32, 30e3, 14, 35.7e-6, 3.5e9).unwrap();
        let array = ArrayGeometry::new(8, 0.5, Vec3::zeros(), Vec3::new(0.0, 1.0, 0.0)).unwrap();
        let window = DelayWindow::new(&grid, 12, 2).unwrap();
        let (tap, beam) = (5usize, 3usize);
        let nu = beam_grid(&array)[beam];
        let tau = tap as f64 * grid.tap_spacing();
        let a = array.steering(nu);
        // unit-energy path: |X| = 1 at the bin
        let h = CMat::from_fn(32, 8, |n, m| {
            cis(-2.0 * PI * n as f64 * grid.subcarrier_spacing * tau) * a[m] / (32.0f64 * 8.0).sqrt()
        });
        let x = to_delay_beam(&h, &window).unwrap();
        let row = window.tap_indices.iter().position(|&l| l == tap).unwrap();
        for i in 0..x.nrows() {
            for j in 0..x.ncols() {
                let expect = if (i, j) == (row, beam) { 1.0 } else { 0.0 };
                assert!((x[(i, j)].norm() - expect).abs() < 1e-12, "({i},{j})");
            }
        }
        assert_eq!(to_delay_beam(&CMat::zeros(32, 8), &window).unwrap(), CMat::zeros(12, 8));
    }

    #[test]
    fn truncated_round_trip_and_one_hot_inverse() {
        let grid = OfdmGrid::new(16, 30e3, 14, 35.7e-6, 3.5e9).unwrap();
        let window = DelayWindow::new(&grid, 6, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random_cmat(&mut rng, 6, 4);
        let h = from_delay_beam(&x, &window).unwrap();
        let back = to_delay_beam(&h, &window).unwrap();
        assert!((back - &x).norm() < 1e-10);

        let mut one = CMat::zeros(6, 4);
        one[(3, 2)] = Complex64::new(1.0, 0.0);
        let h1 = from_delay_beam(&one, &window).unwrap();
        let tap = window.tap_indices[3] as f64;
        for n in 0..16 {
            for m in 0..4 {
                let expect = cis(2.0 * PI * (-(n as f64) * tap / 16.0 + m as f64 * 2.0 / 4.0))
                    / (16.0f64 * 4.0).sqrt();
                assert!((h1[(n, m)] - expect).norm() < 1e-14);
            }
        }
        assert_eq!(from_delay_beam(&CMat::zeros(6, 4), &window).unwrap(), CMat::zeros(16, 4));
        assert!(from_delay_beam(&CMat::zeros(5, 4), &window).is_err());
        assert!(to_delay_beam(&CMat::zeros(15, 4), &window).is_err());
    }

    #[test]
    fn spectrum_and_nmse() {
        let mut x = CMat::zeros(2, 2);
        x[(0, 1)] = Complex64::new(3.0, 4.0);
        assert_eq!(ground_truth_spectrum(&x).q[(0, 1)], 25.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = random_cmat(&mut rng, 5, 3);
        let q = ground_truth_spectrum(&r);
        assert!((q.total() - r.norm_squared()).abs() < 1e-12);

        let h = random_cmat(&mut rng, 8, 4);
        assert_eq!(nmse_db(&h, &h).unwrap(), NMSE_FLOOR_DB);
        assert!(nmse_db(&CMat::zeros(8, 4), &h).unwrap().abs() < 1e-12);
        assert!(nmse_db(&(&h * Complex64::new(2.0, 0.0)), &h).unwrap().abs() < 1e-12);
        assert!(nmse_db(&h, &CMat::zeros(8, 4)).is_err());
    }
}
