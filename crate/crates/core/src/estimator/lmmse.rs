use alloc::vec::Vec;

use num_complex::Complex64;

use super::{CovariancePrior, PosteriorState, StateSource};
use crate::linalg::{solve_hermitian, unvec_col_major, vec_col_major, CMat, CVec};
use crate::radio::SensingModel;
use crate::{Error, Result};

/// `x̂ = C Aᴴ (A C Aᴴ + σ² I)⁻¹ y` for a dense operator and diagonal `C`.
pub fn lmmse_dense(a: &CMat, c: &[f64], noise_var: f64, y: &CVec) -> Result<CVec> {
    if a.ncols() != c.len() || a.nrows() != y.len() {
        return Err(Error::invalid("lmmse_dense: dimension mismatch"));
    }
    if !(noise_var >= 0.0) {
        return Err(Error::invalid("noise variance must be nonnegative"));
    }
    let ac = CMat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * c[j]);
    let mut g = &ac * a.adjoint();
    for i in 0..g.nrows() {
        g[(i, i)] += Complex64::new(noise_var, 0.0);
    }
    let t = solve_hermitian(&g, &CMat::from_column_slice(y.len(), 1, y.as_slice()))?;
    Ok(ac.adjoint() * t.column(0))
}

/// Minimum-norm solution `Aᴴ (A Aᴴ)⁻¹ y`.
pub fn min_norm_solution(a: &CMat, y: &CVec) -> Result<CVec> {
    let g = a * a.adjoint();
    let t = solve_hermitian(&g, &CMat::from_column_slice(y.len(), 1, y.as_slice()))?;
    Ok(a.adjoint() * t.column(0))
}

fn check(y: &CMat, sensing: &SensingModel, prior: &CovariancePrior) -> Result<()> {
    if y.shape() != (sensing.pilots(), sensing.antennas()) {
        return Err(Error::invalid("pilot matrix does not match the sensing model"));
    }
    if (prior.taps, prior.beams) != (sensing.taps(), sensing.antennas()) {
        return Err(Error::invalid("prior does not match the sensing model"));
    }
    Ok(())
}

/// Prior-aided LMMSE estimate of the `L x M` delay-beam channel.
///
/// Right-multiplying `Y` by the unitary `F_M` turns the Kronecker operator
/// into `M` independent `N_p x L` problems, one per beam, each solved with a
/// Hermitian solve.
pub fn lmmse_estimate(y: &CMat, sensing: &SensingModel, prior: &CovariancePrior, symbol: usize) -> Result<PosteriorState> {
    check(y, sensing, prior)?;
    let p = sensing.pattern.tx_power;
    let noise = sensing.pattern.noise_var;
    let (np, l, m) = (sensing.pilots(), sensing.taps(), sensing.antennas());
    let z = y * &sensing.f_m;
    let bp = &sensing.freq_block * Complex64::new(p, 0.0);
    let mut x = CMat::zeros(l, m);
    for b in 0..m {
        let c: Vec<f64> = (0..l).map(|t| prior.at(t, b)).collect();
        let bc = CMat::from_fn(np, l, |i, j| bp[(i, j)] * c[j]);
        let mut g = &bc * bp.adjoint();
        for i in 0..np {
            g[(i, i)] += Complex64::new(noise, 0.0);
        }
        let t = solve_hermitian(&g, &z.columns(b, 1).into_owned())?;
        x.set_column(b, &(bc.adjoint() * t.column(0)));
    }
    Ok(PosteriorState {
        x_hat: x,
        symbol,
        source: StateSource::Measured,
    })
}

/// Same estimate through the explicit `(N_p M) x (L M)` operator.
pub fn lmmse_estimate_dense(
    y: &CMat,
    sensing: &SensingModel,
    prior: &CovariancePrior,
    symbol: usize,
) -> Result<PosteriorState> {
    check(y, sensing, prior)?;
    let a = &sensing.a_p * Complex64::new(sensing.pattern.tx_power, 0.0);
    let xv = lmmse_dense(&a, &prior.diag, sensing.pattern.noise_var, &vec_col_major(y))?;
    Ok(PosteriorState {
        x_hat: unvec_col_major(&xv, sensing.taps(), sensing.antennas())?,
        symbol,
        source: StateSource::Measured,
    })
}
