use alloc::format;

use super::grid::{ArrayGeometry, DelayWindow, OfdmGrid, PilotPattern};
use super::transform::dft_matrix;
use crate::linalg::{kron, CMat};
use crate::{Error, Result};

/// Pilot sensing operator `A_P = conj(F_M) ⊗ (S_P F_N P_Dᵀ)`.
///
/// Acts on the column-major vectorization of the `L x M` delay-beam matrix and
/// yields the column-major vectorization of the `N_p x M` pilot observation
/// (before the transmit amplitude and noise).
#[derive(Debug, Clone)]
pub struct SensingModel {
    pub a_p: CMat,
    /// `S_P F_N P_Dᵀ`, `N_p x L`.
    pub freq_block: CMat,
    /// `F_M`, kept for the per-beam decoupled solvers.
    pub f_m: CMat,
    pub pattern: PilotPattern,
    pub window: DelayWindow,
}

impl SensingModel {
    pub fn pilots(&self) -> usize {
        self.freq_block.nrows()
    }

    pub fn taps(&self) -> usize {
        self.freq_block.ncols()
    }

    pub fn antennas(&self) -> usize {
        self.f_m.nrows()
    }

    /// Noise-free pilot matrix `S_P(F_N P_Dᵀ X F_Mᴴ)` via the factored form.
    pub fn apply(&self, x: &CMat) -> Result<CMat> {
        if x.shape() != (self.taps(), self.antennas()) {
            return Err(Error::invalid(format!(
                "delay-beam matrix is {:?}, sensing model expects {}x{}",
                x.shape(),
                self.taps(),
                self.antennas()
            )));
        }
        Ok(&self.freq_block * x * self.f_m.adjoint())
    }
}

pub fn build_sensing_model(
    grid: &OfdmGrid,
    array: &ArrayGeometry,
    pattern: &PilotPattern,
    window: &DelayWindow,
) -> Result<SensingModel> {
    if window.subcarriers != grid.subcarriers {
        return Err(Error::invalid("delay window built for a different subcarrier count"));
    }
    if pattern.pilot_subcarriers.iter().any(|&n| n >= grid.subcarriers) {
        return Err(Error::invalid("pilot subcarrier outside the grid"));
    }
    let f_n = dft_matrix(grid.subcarriers)?;
    let f_m = dft_matrix(array.antennas)?;
    let freq_block = f_n
        .select_rows(&pattern.pilot_subcarriers)
        .select_columns(&window.tap_indices);
    let a_p = kron(&f_m.conjugate(), &freq_block);
    Ok(SensingModel {
        a_p,
        freq_block,
        f_m,
        pattern: pattern.clone(),
        window: window.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::vec_col_major;
    use crate::radio::from_delay_beam;
    use crate::Vec3;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_antenna_sensing_is_dft_rows() {
        let grid = OfdmGrid::new(4, 30e3, 14, 35.7e-6, 3.5e9).unwrap();
        let array = ArrayGeometry::new(1, 0.5, Vec3::zeros(), Vec3::new(0.0, 1.0, 0.0)).unwrap();
        let pattern = PilotPattern::new(&grid, alloc::vec![0], alloc::vec![0, 2], 1.0, 0.0).unwrap();
        let window = DelayWindow::new(&grid, 4, 0).unwrap();
        let s = build_sensing_model(&grid, &array, &pattern, &window).unwrap();
        let f4 = dft_matrix(4).unwrap();
        assert_eq!(s.a_p.shape(), (2, 4));
        assert!((s.a_p.row(0) - f4.row(0)).norm() < 1e-15);
        assert!((s.a_p.row(1) - f4.row(2)).norm() < 1e-15);
    }

    #[test]
    fn kronecker_form_matches_explicit_path() {
        let grid = OfdmGrid::new(32, 30e3, 14, 35.7e-6, 3.5e9).unwrap();
        let array = ArrayGeometry::new(4, 0.5, Vec3::zeros(), Vec3::new(0.0, 1.0, 0.0)).unwrap();
        let pattern = PilotPattern::new(&grid, alloc::vec![0], alloc::vec![1, 5, 9, 17, 30], 1.0, 0.0).unwrap();
        let window = DelayWindow::new(&grid, 8, 2).unwrap();
        let s = build_sensing_model(&grid, &array, &pattern, &window).unwrap();
        assert_eq!(s.a_p.shape(), (5 * 4, 8 * 4));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let x = CMat::from_fn(8, 4, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>()));
            let h = from_delay_beam(&x, &window).unwrap();
            let expect = vec_col_major(&h.select_rows(&pattern.pilot_subcarriers));
            let got = &s.a_p * vec_col_major(&x);
            assert!((&got - &expect).norm() / expect.norm() < 1e-10);
            assert!((vec_col_major(&s.apply(&x).unwrap()) - expect).norm() < 1e-10);
        }
        let zero = &s.a_p * vec_col_major(&CMat::zeros(8, 4));
        assert_eq!(zero.norm(), 0.0);
    }
}
