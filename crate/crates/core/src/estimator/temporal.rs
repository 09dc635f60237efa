// std inherents shadow these when a dependency links std
#[allow(unused_imports)]
use num_traits::Float;

use num_complex::Complex64;

use super::{PosteriorState, StateSource};
use crate::{Error, Result};

/// One-step AR coefficient from consecutive measured states.
///
/// Each consecutive pair `(t₁, t₂)` gives the least-squares ratio
/// `⟨x̂_{t₂}, x̂_{t₁}⟩ / ‖x̂_{t₁}‖²`, reduced to one symbol by its principal
/// `(t₂ - t₁)`-th root. Pairs with a common gap are pooled before the root;
/// the per-gap roots are then averaged with weights `Σ‖x̂_{t₁}‖²`. The
/// magnitude is clipped to 1.
pub fn estimate_alpha(history: &[PosteriorState]) -> Result<Complex64> {
    let measured: alloc::vec::Vec<&PosteriorState> =
        history.iter().filter(|s| s.source == StateSource::Measured).collect();
    if measured.len() < 2 {
        return Err(Error::InsufficientHistory(alloc::format!(
            "{} measured states, need 2",
            measured.len()
        )));
    }
    // (gap, Σ⟨x2, x1⟩, Σ‖x1‖²)
    let mut pools: alloc::vec::Vec<(usize, Complex64, f64)> = alloc::vec::Vec::new();
    for w in measured.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b.symbol <= a.symbol {
            return Err(Error::invalid("measured states must have increasing symbols"));
        }
        if a.x_hat.shape() != b.x_hat.shape() {
            return Err(Error::invalid("posterior states differ in shape"));
        }
        let gap = b.symbol - a.symbol;
        let num: Complex64 = a.x_hat.iter().zip(b.x_hat.iter()).map(|(x1, x2)| x1.conj() * x2).sum();
        let den = a.x_hat.norm_squared();
        match pools.iter_mut().find(|p| p.0 == gap) {
            Some(p) => {
                p.1 += num;
                p.2 += den;
            }
            None => pools.push((gap, num, den)),
        }
    }
    let total_den: f64 = pools.iter().map(|p| p.2).sum();
    if !(total_den > 0.0) {
        return Err(Error::NoSolution("reference states are zero".into()));
    }
    let mut alpha = Complex64::new(0.0, 0.0);
    for &(gap, num, den) in &pools {
        if den > 0.0 {
            alpha += principal_root(num / den, gap) * (den / total_den);
        }
    }
    let mag = alpha.norm();
    if mag > 1.0 {
        alpha /= mag;
    }
    Ok(alpha)
}

fn principal_root(z: Complex64, n: usize) -> Complex64 {
    if n == 1 {
        return z;
    }
    let (r, theta) = z.to_polar();
    Complex64::from_polar(r.powf(1.0 / n as f64), theta / n as f64)
}

/// `x̂_t = α^{t - t_ref} x̂_{t_ref}`.
pub fn predict(reference: &PosteriorState, alpha: Complex64, symbol: usize) -> Result<PosteriorState> {
    if symbol < reference.symbol {
        return Err(Error::invalid(alloc::format!(
            "cannot predict symbol {symbol} from later symbol {}",
            reference.symbol
        )));
    }
    if symbol == reference.symbol {
        return Ok(reference.clone());
    }
    let k = alpha.powi((symbol - reference.symbol) as i32);
    Ok(PosteriorState {
        x_hat: reference.x_hat.map(|v| v * k),
        symbol,
        source: StateSource::Predicted,
    })
}
