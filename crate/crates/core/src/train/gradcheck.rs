//! Central finite-difference verification of analytic gradients.

// std inherents shadow these when a dependency links std
#[allow(unused_imports)]
use num_traits::Float;

use alloc::vec;
use alloc::vec::Vec;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{sample_loss, sample_loss_grad, LossWeights};
use crate::model::{ParamGroup, PriorModel, TrainingSample};
use crate::render::{RenderConfig, RenderGeometry};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    /// Coordinates checked per group (all of them if the group is smaller).
    pub per_group: usize,
    pub seed: u64,
    pub tolerance: f64,
    /// Largest initial step relative to `max(|θ|, unit)`; the unit is one
    /// tap for delay residuals and 1 otherwise.
    pub rel_step: f64,
    /// Central differences per tableau, each step `1/1.4` of the last,
    /// combined by Richardson extrapolation (Ridders). 1 gives a plain
    /// central difference.
    pub levels: usize,
    /// Tableaux per coordinate, each starting 100 times smaller than the
    /// last; the estimate with the smallest internal error wins.
    pub starts: usize,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            per_group: 12,
            seed: 0,
            tolerance: 1e-4,
            rel_step: 1e-2,
            levels: 10,
            starts: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupCheck {
    pub group: ParamGroup,
    pub checked: usize,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub groups: Vec<GroupCheck>,
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares `analytic` against extrapolated central differences of `loss`.
///
/// The relative error of a coordinate is `|a - f| / max(|a|, |f|, 1e-6 g)`
/// with `g` the largest analytic magnitude in its group, so coordinates that
/// are negligible for their group do not dominate the report.
pub fn gradient_check_with(
    model: &PriorModel,
    tap_spacing: f64,
    loss: &dyn Fn(&PriorModel) -> Result<f64>,
    analytic: &[f64],
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport> {
    let layout = model.layout();
    if analytic.len() != layout.len() {
        return Err(crate::Error::invalid("analytic gradient has the wrong length"));
    }
    let base = model.to_flat();
    let noise = 4.0 * f64::EPSILON * loss(model)?.abs();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut probe = model.clone();
    let mut groups = Vec::new();
    for group in ParamGroup::ALL {
        let range = layout.range(group);
        let coords: Vec<usize> = if range.len() <= cfg.per_group {
            range.clone().collect()
        } else {
            let mut c: Vec<usize> = sample(&mut rng, range.len(), cfg.per_group)
                .into_iter()
                .map(|k| range.start + k)
                .collect();
            c.sort_unstable();
            c
        };
        let gmax = analytic[range.clone()].iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let unit = if group == ParamGroup::DelayResidual { tap_spacing } else { 1.0 };
        let mut worst = 0.0f64;
        for &k in &coords {
            let h = cfg.rel_step * base[k].abs().max(unit);
            let mut central = |step: f64| -> Result<f64> {
                let mut flat = base.clone();
                flat[k] = base[k] + step;
                probe.set_flat(&flat)?;
                let fp = loss(&probe)?;
                flat[k] = base[k] - step;
                probe.set_flat(&flat)?;
                let fm = loss(&probe)?;
                Ok((fp - fm) / (2.0 * step))
            };
            let mut fd = 0.0;
            let mut fd_err = f64::INFINITY;
            for s in 0..cfg.starts.max(1) {
                let (v, e, h_min) = ridders(&mut central, h * 0.01f64.powi(s as i32), cfg.levels)?;
                // the tableau cannot resolve below the roundoff of its smallest step
                let e = e + noise / h_min;
                if s == 0 || e < fd_err {
                    (fd, fd_err) = (v, e);
                }
            }
            let a = analytic[k];
            let denom = a.abs().max(fd.abs()).max(1e-6 * gmax);
            let err = if denom > 0.0 { (a - fd).abs() / denom } else { 0.0 };
            // NaN counts as failure
            worst = if err.is_nan() { f64::INFINITY } else { worst.max(err) };
        }
        groups.push(GroupCheck {
            group,
            checked: coords.len(),
            max_rel_err: worst,
        });
    }
    let max_rel_err = groups.iter().fold(0.0f64, |a, g| a.max(g.max_rel_err));
    Ok(GradCheckReport {
        groups,
        max_rel_err,
        tolerance: cfg.tolerance,
        passed: max_rel_err < cfg.tolerance,
    })
}

/// Richardson extrapolation of central differences towards zero step; returns
/// the tableau entry with the smallest error estimate, that estimate and the
/// smallest step taken.
fn ridders(central: &mut dyn FnMut(f64) -> Result<f64>, h0: f64, levels: usize) -> Result<(f64, f64, f64)> {
    const CON: f64 = 1.4;
    const SAFE: f64 = 2.0;
    let mut h = h0;
    let mut prev = vec![central(h)?];
    let mut best = prev[0];
    let mut err = f64::INFINITY;
    for _ in 1..levels {
        h /= CON;
        let mut row = vec![central(h)?];
        let mut fac = CON * CON;
        for j in 1..=prev.len() {
            let v = (row[j - 1] * fac - prev[j - 1]) / (fac - 1.0);
            fac *= CON * CON;
            let e = (v - row[j - 1]).abs().max((v - prev[j - 1]).abs());
            if e <= err {
                err = e;
                best = v;
            }
            row.push(v);
        }
        let stop = (row[prev.len()] - prev[prev.len() - 1]).abs() >= SAFE * err;
        prev = row;
        if stop {
            break;
        }
    }
    Ok((best, err, h))
}

/// Checks the gradient of the total loss on one sample over every group.
pub fn gradient_check(
    model: &PriorModel,
    sample_in: &TrainingSample,
    geom: &RenderGeometry,
    render: &RenderConfig,
    weights: &LossWeights,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport> {
    let (_, grad) = sample_loss_grad(model, sample_in, geom, render, weights, 1.0)?;
    let loss = |m: &PriorModel| sample_loss(m, sample_in, geom, render, weights).map(|b| b.total);
    gradient_check_with(model, geom.grid.tap_spacing(), &loss, &grad, cfg)
}
