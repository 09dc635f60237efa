//! Online stage: covariance priors, prior-aided LMMSE, temporal prediction
//! and the comparison baselines.

mod lmmse;
mod omp;
mod temporal;

pub use lmmse::{lmmse_dense, lmmse_estimate, lmmse_estimate_dense, min_norm_solution};
pub use omp::{omp_los_seeded, OmpResult};
pub use temporal::{estimate_alpha, predict};

use alloc::vec::Vec;

use crate::linalg::{CMat, RMat};
use crate::radio::{DelayBeamSpectrum, SensingModel};
use crate::{Error, Result};

/// Default relative power floor.
pub const DEFAULT_REL_EPS: f64 = 1e-6;
/// Floor applied to the calibrated power scale.
pub const RHO_FLOOR: f64 = 1e-12;

/// Diagonal prior `C = ρ diag(vec(Q + ε))` over the column-major vectorized
/// `L x M` delay-beam channel.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariancePrior {
    pub diag: Vec<f64>,
    pub rho: f64,
    pub eps: f64,
    pub taps: usize,
    pub beams: usize,
}

impl CovariancePrior {
    /// Prior variance of delay-beam entry `(l, b)`.
    pub fn at(&self, l: usize, b: usize) -> f64 {
        self.diag[b * self.taps + l]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateSource {
    Measured,
    Predicted,
}

/// Delay-beam channel estimate `X̂` (`L x M`) at one symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorState {
    pub x_hat: CMat,
    pub symbol: usize,
    pub source: StateSource,
}

/// `ρ diag(vec(q + ε))`.
pub fn build_prior(q: &DelayBeamSpectrum, rho: f64, eps: f64) -> Result<CovariancePrior> {
    if !(rho > 0.0) || !(eps > 0.0) {
        return Err(Error::invalid(alloc::format!("prior needs rho > 0 and eps > 0 (got {rho}, {eps})")));
    }
    let (taps, beams) = q.shape();
    let diag = q.q.as_slice().iter().map(|v| rho * (v + eps)).collect();
    Ok(CovariancePrior {
        diag,
        rho,
        eps,
        taps,
        beams,
    })
}

/// `rel` times the spectrum peak, or `rel` itself for an empty spectrum.
pub fn relative_floor(q: &DelayBeamSpectrum, rel: f64) -> f64 {
    let peak = q.q.max();
    if peak > 0.0 {
        rel * peak
    } else {
        rel
    }
}

/// Moment-matching power scale: the `ρ` for which the expected pilot energy
/// under `ρ diag(vec(q + ε))` equals the observed one.
pub fn calibrate_rho(y: &CMat, sensing: &SensingModel, q: &DelayBeamSpectrum, eps: f64, noise_var: f64) -> Result<f64> {
    if y.shape() != (sensing.pilots(), sensing.antennas()) || q.shape() != (sensing.taps(), sensing.antennas()) {
        return Err(Error::invalid("calibrate_rho: dimension mismatch"));
    }
    let p = sensing.pattern.tx_power;
    // column norms of A_P factor into frequency and beam parts
    let fcol: Vec<f64> = (0..sensing.taps()).map(|l| sensing.freq_block.column(l).norm_squared()).collect();
    let bcol: Vec<f64> = (0..sensing.antennas()).map(|b| sensing.f_m.column(b).norm_squared()).collect();
    let mut trace = 0.0;
    for b in 0..sensing.antennas() {
        for l in 0..sensing.taps() {
            trace += (q.q[(l, b)] + eps) * fcol[l] * bcol[b];
        }
    }
    trace *= p * p;
    if !(trace > 0.0) {
        return Err(Error::invalid("prior carries no energy through the sensing operator"));
    }
    let energy = y.norm_squared() - noise_var * (y.nrows() * y.ncols()) as f64;
    Ok((energy / trace).max(RHO_FLOOR))
}

/// Uniform prior spreading `power` over the `taps x beams` bins.
pub fn zero_prior(taps: usize, beams: usize, power: f64) -> Result<CovariancePrior> {
    let n = taps * beams;
    if n == 0 || !(power > 0.0) {
        return Err(Error::invalid("zero prior needs nonempty dimensions and positive power"));
    }
    let v = power / n as f64;
    Ok(CovariancePrior {
        diag: alloc::vec![v; n],
        rho: 1.0,
        eps: v,
        taps,
        beams,
    })
}

/// Oracle prior from the true delay-beam channel, floored at `rel_eps` of
/// its peak power.
pub fn genie_prior(x_true: &CMat, rel_eps: f64) -> Result<CovariancePrior> {
    let q = DelayBeamSpectrum {
        q: RMat::from_fn(x_true.nrows(), x_true.ncols(), |l, b| x_true[(l, b)].norm_sqr()),
    };
    build_prior(&q, 1.0, relative_floor(&q, rel_eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cis, unvec_col_major, vec_col_major, CVec};
    use crate::radio::{
        build_sensing_model, dft_matrix, ArrayGeometry, DelayWindow, OfdmGrid, PilotPattern,
    };
    use crate::scene::complex_normal;
    use crate::Vec3;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn small_sensing(pilots: &[usize], noise_var: f64) -> SensingModel {
        let grid = OfdmGrid::new(16, 30e3, 14, 35.7e-6, 3.5e9).unwrap();
        let array = ArrayGeometry::new(4, 0.5, Vec3::zeros(), Vec3::new(0.0, 1.0, 0.0)).unwrap();
        let pattern = PilotPattern::new(&grid, alloc::vec![0], pilots.to_vec(), 2.0, noise_var).unwrap();
        let window = DelayWindow::new(&grid, 8, 2).unwrap();
        build_sensing_model(&grid, &array, &pattern, &window).unwrap()
    }

    fn random_spectrum(rng: &mut ChaCha8Rng, l: usize, m: usize) -> DelayBeamSpectrum {
        DelayBeamSpectrum {
            q: RMat::from_fn(l, m, |_, _| 10f64.powf(rng.random_range(-4.0..0.0))),
        }
    }

    fn draw(rng: &mut ChaCha8Rng, prior: &CovariancePrior) -> CMat {
        let v = CVec::from_iterator(prior.diag.len(), prior.diag.iter().map(|&c| complex_normal(rng, c)));
        unvec_col_major(&v, prior.taps, prior.beams).unwrap()
    }

    fn observe(rng: &mut ChaCha8Rng, s: &SensingModel, x: &CMat) -> CMat {
        let clean = s.apply(x).unwrap() * Complex64::new(s.pattern.tx_power, 0.0);
        clean.map(|v| v + complex_normal(rng, s.pattern.noise_var))
    }

    #[test]
    fn build_prior_examples() {
        let z = DelayBeamSpectrum::zeros(3, 2);
        let p = build_prior(&z, 2.0, 1e-3).unwrap();
        assert!(p.diag.iter().all(|&v| v == 2e-3));
        let mut q = DelayBeamSpectrum::zeros(3, 2);
        q.q[(2, 1)] = 1.0;
        let p = build_prior(&q, 1.0, 1e-6).unwrap();
        assert_eq!(p.diag.iter().filter(|&&v| v == 1.0 + 1e-6).count(), 1);
        assert_eq!(p.diag[3 + 2], 1.0 + 1e-6);
        assert_eq!(p.at(2, 1), p.diag[5]);
        assert!(build_prior(&q, 0.0, 1e-6).is_err());
        assert!(build_prior(&q, 1.0, 0.0).is_err());
    }

    #[test]
    fn zero_and_genie_priors() {
        let p = zero_prior(2, 2, 1.0).unwrap();
        assert_eq!(p.diag, alloc::vec![0.25; 4]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = CMat::from_fn(8, 4, |_, _| complex_normal(&mut rng, 1.0));
        let q = crate::radio::ground_truth_spectrum(&x);
        let g = genie_prior(&x, 1e-6).unwrap();
        assert_eq!(g, build_prior(&q, 1.0, 1e-6 * q.q.max()).unwrap());
        let g0 = genie_prior(&CMat::zeros(8, 4), 1e-6).unwrap();
        assert!(g0.diag.iter().all(|&v| v == 1e-6));
    }

    #[test]
    fn rho_calibration() {
        let s = small_sensing(&[0, 3, 5, 8, 11, 14], 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = random_spectrum(&mut rng, 8, 4);
        let zero = CMat::zeros(6, 4);
        assert_eq!(calibrate_rho(&zero, &s, &q, 1e-6, 0.0).unwrap(), RHO_FLOOR);
        let x = draw(&mut rng, &build_prior(&q, 1.0, 1e-6).unwrap());
        let y = observe(&mut rng, &s, &x);
        let r1 = calibrate_rho(&y, &s, &q, 1e-6, 0.0).unwrap();
        let r2 = calibrate_rho(&(&y * Complex64::new(2.0, 0.0)), &s, &q, 1e-6, 0.0).unwrap();
        assert!((r2 / r1 - 4.0).abs() < 1e-12);

        let s = small_sensing(&[0, 3, 5, 8, 11, 14], 0.01);
        let true_rho = 3.7;
        let prior = build_prior(&q, true_rho, 1e-6).unwrap();
        let mut ratios: alloc::vec::Vec<f64> = (0..100)
            .map(|_| {
                let x = draw(&mut rng, &prior);
                let y = observe(&mut rng, &s, &x);
                calibrate_rho(&y, &s, &q, 1e-6, 0.01).unwrap() / true_rho
            })
            .collect();
        ratios.sort_by(f64::total_cmp);
        let median = ratios[50];
        assert!((0.5..=2.0).contains(&median), "{median}");
    }

    #[test]
    fn scalar_wiener_and_unitary_inversion() {
        let a = CMat::from_element(1, 1, Complex64::new(1.0, 0.0));
        let y = CVec::from_element(1, Complex64::new(1.0, 0.0));
        let x = lmmse_dense(&a, &[1.0], 1.0, &y).unwrap();
        assert!((x[0] - Complex64::new(0.5, 0.0)).norm() < 1e-12);

        let f = dft_matrix(4).unwrap();
        let y = CVec::from_fn(4, |i, _| cis(0.3 * i as f64) * (1.0 + i as f64));
        let x = lmmse_dense(&f, &[1.0; 4], 1e-14, &y).unwrap();
        assert!((x - f.adjoint() * &y).norm() < 1e-10);
    }

    #[test]
    fn floor_bins_are_annihilated() {
        let s = small_sensing(&[0, 3, 5, 8, 11, 14], 0.01);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut q = DelayBeamSpectrum {
            q: RMat::from_element(8, 4, 1.0),
        };
        q.q[(3, 2)] = 0.0;
        let prior = build_prior(&q, 1.0, 1e-12).unwrap();
        let x = CMat::from_element(8, 4, Complex64::new(1.0, 0.0));
        let y = observe(&mut rng, &s, &x);
        let est = lmmse_estimate(&y, &s, &prior, 0).unwrap();
        assert!(est.x_hat[(3, 2)].norm() < 1e-9);
        assert!(est.x_hat[(3, 1)].norm() > 1e-3);
    }

    #[test]
    fn structured_solve_matches_dense_and_inverse_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for trial in 0..20 {
            let mut sc: alloc::vec::Vec<usize> = rand::seq::index::sample(&mut rng, 16, 6).into_vec();
            sc.sort_unstable();
            let s = small_sensing(&sc, 0.05 + 0.01 * trial as f64);
            let q = random_spectrum(&mut rng, 8, 4);
            let prior = build_prior(&q, 1.0, 1e-3).unwrap();
            let x = draw(&mut rng, &prior);
            let y = observe(&mut rng, &s, &x);
            let fast = lmmse_estimate(&y, &s, &prior, 3).unwrap();
            let dense = lmmse_estimate_dense(&y, &s, &prior, 3).unwrap();
            assert!((&fast.x_hat - &dense.x_hat).norm() <= 1e-8 * dense.x_hat.norm().max(1e-12));

            let a = &s.a_p * Complex64::new(s.pattern.tx_power, 0.0);
            let c = CMat::from_diagonal(&CVec::from_iterator(32, prior.diag.iter().map(|&v| Complex64::new(v, 0.0))));
            let mut g = &a * &c * a.adjoint();
            for i in 0..g.nrows() {
                g[(i, i)] += Complex64::new(s.pattern.noise_var, 0.0);
            }
            let oracle = &c * a.adjoint() * g.try_inverse().unwrap() * vec_col_major(&y);
            assert!((vec_col_major(&fast.x_hat) - &oracle).norm() <= 1e-8 * oracle.norm());
            assert_eq!(fast.source, StateSource::Measured);
        }
    }

    #[test]
    fn zero_prior_is_ridge_regression() {
        let s = small_sensing(&[1, 2, 6, 9, 13], 0.02);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = CMat::from_fn(8, 4, |_, _| complex_normal(&mut rng, 1.0));
        let y = observe(&mut rng, &s, &x);
        let power = 0.7;
        let prior = zero_prior(8, 4, power).unwrap();
        let est = lmmse_estimate(&y, &s, &prior, 0).unwrap();
        let a = &s.a_p * Complex64::new(s.pattern.tx_power, 0.0);
        let c = power / 32.0;
        let mut normal = a.adjoint() * &a;
        for i in 0..32 {
            normal[(i, i)] += Complex64::new(s.pattern.noise_var / c, 0.0);
        }
        let ridge = normal.try_inverse().unwrap() * a.adjoint() * vec_col_major(&y);
        assert!((vec_col_major(&est.x_hat) - ridge).norm() < 1e-10);
    }

    #[test]
    fn lmmse_beats_min_norm_and_uniform_prior() {
        let s = small_sensing(&[0, 2, 5, 7, 10, 13], 0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let q = random_spectrum(&mut rng, 8, 4);
        let prior = build_prior(&q, 1.0, 1e-6).unwrap();
        let total: f64 = prior.diag.iter().sum();
        let flat = zero_prior(8, 4, total).unwrap();
        let a = &s.a_p * Complex64::new(s.pattern.tx_power, 0.0);
        let (mut e_l, mut e_mn, mut e_z) = (0.0, 0.0, 0.0);
        for _ in 0..200 {
            let x = draw(&mut rng, &prior);
            let y = observe(&mut rng, &s, &x);
            e_l += (lmmse_estimate(&y, &s, &prior, 0).unwrap().x_hat - &x).norm_squared();
            e_z += (lmmse_estimate(&y, &s, &flat, 0).unwrap().x_hat - &x).norm_squared();
            let mn = min_norm_solution(&a, &vec_col_major(&y)).unwrap();
            e_mn += (mn - vec_col_major(&x)).norm_squared();
        }
        assert!(e_l < e_z && e_l < e_mn, "{e_l} {e_z} {e_mn}");
    }

    #[test]
    fn alpha_and_prediction() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = CMat::from_fn(8, 4, |_, _| complex_normal(&mut rng, 1.0));
        let st = |x: CMat, symbol| PosteriorState {
            x_hat: x,
            symbol,
            source: StateSource::Measured,
        };
        let phi = 0.37;
        let h = [st(x.clone(), 0), st(x.map(|v| v * cis(phi)), 1)];
        assert!((estimate_alpha(&h).unwrap() - cis(phi)).norm() < 1e-12);
        // mixed gaps with an exact per-symbol rotation
        let h = [
            st(x.clone(), 0),
            st(x.map(|v| v * cis(4.0 * phi)), 4),
            st(x.map(|v| v * cis(7.0 * phi)), 7),
        ];
        assert!((estimate_alpha(&h).unwrap() - cis(phi)).norm() < 1e-12);
        assert!(matches!(estimate_alpha(&h[..1]), Err(Error::InsufficientHistory(_))));
        assert!(estimate_alpha(&[st(CMat::zeros(8, 4), 0), st(x.clone(), 1)]).is_err());
        // growth is clipped
        let g = estimate_alpha(&[st(x.clone(), 0), st(&x * Complex64::new(2.0, 0.0), 1)]).unwrap();
        assert!((g.norm() - 1.0).abs() < 1e-15);

        let r = st(x.clone(), 5);
        assert_eq!(predict(&r, cis(0.2), 5).unwrap(), r);
        assert!(predict(&r, cis(0.2), 4).is_err());
        let p = predict(&r, cis(0.2), 8).unwrap();
        assert_eq!(p.source, StateSource::Predicted);
        assert!((&p.x_hat - x.map(|v| v * cis(0.6))).norm() < 1e-12);
        assert_eq!(predict(&r, Complex64::new(1.0, 0.0), 9).unwrap().x_hat, x);
        let d = predict(&r, Complex64::new(0.5, 0.0), 7).unwrap();
        assert!((d.x_hat.norm() - 0.25 * x.norm()).abs() < 1e-12);
        // estimate then predict at zero gap is the identity
        assert_eq!(predict(&r, estimate_alpha(&h).unwrap(), r.symbol).unwrap(), r);
    }

    #[test]
    fn doppler_recovered_from_single_path_states() {
        use crate::radio::to_delay_beam;
        use crate::scene::{generate_dataset, small_scenario};
        let ds = generate_dataset(&small_scenario(2, 1, alloc::vec![])).unwrap();
        let fd = ds.paths[0][0].doppler;
        let history: alloc::vec::Vec<PosteriorState> = ds
            .snapshots
            .iter()
            .take(14)
            .filter(|s| ds.pattern.is_pilot_symbol(s.symbol_index))
            .map(|s| PosteriorState {
                x_hat: to_delay_beam(&s.h, &ds.window).unwrap(),
                symbol: s.symbol_index,
                source: StateSource::Measured,
            })
            .collect();
        let a = estimate_alpha(&history).unwrap();
        let want = 2.0 * core::f64::consts::PI * fd * ds.grid.symbol_duration;
        assert!((a.arg() - want).abs() < 0.05, "{} vs {want}", a.arg());
    }

    #[test]
    fn genie_prior_beats_zero_prior_at_20_db() {
        use crate::radio::{nmse_db, to_delay_beam, from_delay_beam};
        use crate::scene::{generate_dataset, observe_pilots, small_scenario, Scatterer};
        let sc = alloc::vec![
            Scatterer::new(Vec3::new(15.0, 45.0, 0.0), Complex64::new(0.9, 0.0), 300.0, (-1e9, 1e9)).unwrap(),
            Scatterer::new(Vec3::new(-40.0, 30.0, 0.0), Complex64::new(0.0, 0.7), 200.0, (-1e9, 1e9)).unwrap(),
        ];
        let ds = generate_dataset(&small_scenario(3, 1, sc)).unwrap();
        let s = ds.sensing_model().unwrap();
        let noise = s.pattern.noise_var;
        for (k, snap) in ds.snapshots.iter().enumerate().filter(|(_, s)| ds.pattern.is_pilot_symbol(s.symbol_index)) {
            let y = observe_pilots(snap, &ds.pattern, 77 + k as u64).unwrap();
            let x = to_delay_beam(&snap.h, &ds.window).unwrap();
            let genie = genie_prior(&x, DEFAULT_REL_EPS).unwrap();
            let uniform = DelayBeamSpectrum {
                q: RMat::from_element(32, 16, 1.0),
            };
            let rho = calibrate_rho(&y, &s, &uniform, 1e-6, noise).unwrap();
            let zero = build_prior(&uniform, rho, 1e-6).unwrap();
            let e = |p: &CovariancePrior| {
                let xh = lmmse_estimate(&y, &s, p, 0).unwrap().x_hat;
                nmse_db(&from_delay_beam(&xh, &ds.window).unwrap(), &snap.h).unwrap()
            };
            let (g, z) = (e(&genie), e(&zero));
            assert!(g <= z, "snapshot {k}: genie {g} dB vs zero {z} dB");
        }
    }
}
