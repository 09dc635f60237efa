use alloc::vec::Vec;

use num_complex::Complex64;

use crate::linalg::{least_squares, unvec_col_major, vec_col_major, CMat, CVec};
use crate::radio::SensingModel;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct OmpResult {
    /// `L x M` delay-beam estimate.
    pub x_hat: CMat,
    /// Column-major indices in selection order, LoS seed first.
    pub support: Vec<usize>,
    /// Residual norm after the seed fit and after every added atom.
    pub residual_norms: Vec<f64>,
}

/// Orthogonal matching pursuit whose support starts at the LoS bin.
///
/// Stops at `max_atoms` atoms, when `‖r‖ ≤ residual_tol ‖y‖`, or when no
/// column correlates with the residual. Ties go to the lowest index.
pub fn omp_los_seeded(
    y: &CMat,
    sensing: &SensingModel,
    los_bin: (usize, usize),
    max_atoms: usize,
    residual_tol: f64,
) -> Result<OmpResult> {
    if max_atoms < 1 {
        return Err(Error::invalid("OMP needs at least one atom"));
    }
    let (l, m) = (sensing.taps(), sensing.antennas());
    if los_bin.0 >= l || los_bin.1 >= m {
        return Err(Error::invalid("LoS bin outside the delay-beam window"));
    }
    if y.shape() != (sensing.pilots(), m) {
        return Err(Error::invalid("pilot matrix does not match the sensing model"));
    }
    let a = &sensing.a_p * Complex64::new(sensing.pattern.tx_power, 0.0);
    let yv = vec_col_major(y);
    let ynorm = yv.norm();
    let norms: Vec<f64> = (0..a.ncols()).map(|j| a.column(j).norm()).collect();

    let mut support = alloc::vec![los_bin.1 * l + los_bin.0];
    let mut residual_norms = Vec::new();
    let mut coef;
    loop {
        let sub = a.select_columns(&support);
        coef = least_squares(&sub, &yv)?;
        let r = &yv - &sub * &coef;
        let rn = r.norm();
        residual_norms.push(rn);
        if support.len() >= max_atoms || rn <= residual_tol * ynorm {
            break;
        }
        let corr = a.adjoint() * &r;
        let mut best: Option<(usize, f64)> = None;
        for j in 0..a.ncols() {
            if support.contains(&j) || norms[j] == 0.0 {
                continue;
            }
            let c = corr[j].norm() / norms[j];
            if best.is_none_or(|(_, bc)| c > bc) {
                best = Some((j, c));
            }
        }
        match best {
            Some((j, c)) if c > 1e-12 * rn.max(f64::MIN_POSITIVE) => support.push(j),
            _ => break,
        }
    }
    let mut xv = CVec::zeros(l * m);
    for (k, &j) in support.iter().enumerate() {
        xv[j] = coef[k];
    }
    Ok(OmpResult {
        x_hat: unvec_col_major(&xv, l, m)?,
        support,
        residual_norms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radio::{build_sensing_model, ArrayGeometry, DelayWindow, OfdmGrid, PilotPattern};
    use crate::Vec3;
    use rand::seq::index::sample;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sensing(pilots: Vec<usize>) -> SensingModel {
        let grid = OfdmGrid::new(128, 30e3, 14, 35.7e-6, 3.5e9).unwrap();
        let array = ArrayGeometry::new(16, 0.5, Vec3::zeros(), Vec3::new(0.0, 1.0, 0.0)).unwrap();
        let pattern = PilotPattern::new(&grid, alloc::vec![0], pilots, 1.0, 0.0).unwrap();
        let window = DelayWindow::new(&grid, 32, 4).unwrap();
        build_sensing_model(&grid, &array, &pattern, &window).unwrap()
    }

    fn comb() -> SensingModel {
        sensing(crate::radio::PilotPattern::comb_subcarriers(128, 16, 0).unwrap())
    }

    #[test]
    fn seed_alone_recovers_a_los_only_channel() {
        let s = comb();
        let mut x = CMat::zeros(32, 16);
        x[(5, 3)] = Complex64::new(0.3, -1.2);
        let y = s.apply(&x).unwrap();
        let r = omp_los_seeded(&y, &s, (5, 3), 8, 1e-10).unwrap();
        assert_eq!(r.support, alloc::vec![3 * 32 + 5]);
        assert!((&r.x_hat - &x).norm() < 1e-12);

        let zero = omp_los_seeded(&CMat::zeros(16, 16), &s, (5, 3), 8, 1e-6).unwrap();
        assert_eq!(zero.x_hat, CMat::zeros(32, 16));
        assert!(omp_los_seeded(&y, &s, (5, 3), 0, 1e-6).is_err());
        assert!(omp_los_seeded(&y, &s, (40, 3), 3, 1e-6).is_err());
    }

    #[test]
    fn recovers_sparse_support_with_random_pilots() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let mut sc = sample(&mut rng, 128, 16).into_vec();
            sc.sort_unstable();
            let s = sensing(sc);
            // three bins at least 4 taps and 4 beams apart
            let mut bins: Vec<(usize, usize)> = Vec::new();
            while bins.len() < 3 {
                let b = (rng.random_range(0..32), rng.random_range(0..16));
                if bins.iter().all(|o| o.0.abs_diff(b.0) >= 4 && o.1.abs_diff(b.1) >= 4) {
                    bins.push(b);
                }
            }
            let mut x = CMat::zeros(32, 16);
            for &(l, b) in &bins {
                x[(l, b)] = crate::linalg::cis(rng.random_range(0.0..6.28)) * rng.random_range(0.5..2.0);
            }
            let y = s.apply(&x).unwrap();
            let r = omp_los_seeded(&y, &s, bins[0], 3, 1e-12).unwrap();
            let mut got = r.support.clone();
            got.sort_unstable();
            let mut want: Vec<usize> = bins.iter().map(|&(l, b)| b * 32 + l).collect();
            want.sort_unstable();
            assert_eq!(got, want);
            assert!(*r.residual_norms.last().unwrap() < 1e-8);
            for w in r.residual_norms.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12));
            }
        }
    }
}
