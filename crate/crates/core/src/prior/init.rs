//! Measurement-guided placement of Gaussians by single-bounce back-projection.

// std inherents shadow these when a dependency links std
#[allow(unused_imports)]
use num_traits::Float;

use alloc::format;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{logit, softplus_inv, GaussianPrimitive, SceneMap};
use crate::model::TrainingSample;
use crate::radio::{beam_grid, delay_kernel, beam_kernel, wrap_beam, ArrayGeometry, DelayWindow, OfdmGrid};
use crate::{Error, Result, Vec3, SPEED_OF_LIGHT};

#[derive(Debug, Clone, PartialEq)]
pub struct InitConfig {
    /// Strongest non-LoS peaks taken per sample.
    pub peaks: usize,
    /// Candidates closer than this are merged (m).
    pub merge_radius: f64,
    /// Gaussians seeded when no peak survives.
    pub floor_count: usize,
    /// Horizontal spread of seeded Gaussians around the track (m).
    pub jitter: f64,
    pub seed: u64,
    pub opacity: f64,
    pub scale: f64,
    /// Half-width of the LoS exclusion window (bins).
    pub los_radius: usize,
    /// Peaks weaker than this fraction of the sample maximum are ignored.
    pub min_rel_power: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            peaks: 8,
            merge_radius: 5.0,
            floor_count: 16,
            jitter: 40.0,
            seed: 0,
            opacity: 0.8,
            scale: 1.0,
            los_radius: 2,
            min_rel_power: 1e-3,
        }
    }
}

impl InitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.opacity > 0.0 && self.opacity < 1.0) {
            return Err(Error::invalid("initial opacity must lie in (0, 1)"));
        }
        if !(self.scale > 0.0) || !(self.merge_radius >= 0.0) || !(self.jitter >= 0.0) {
            return Err(Error::invalid("scale, merge radius and jitter must be nonnegative (scale positive)"));
        }
        if self.floor_count == 0 {
            return Err(Error::invalid("floor count must be at least one"));
        }
        Ok(())
    }
}

/// Point `p = bs + r d(ν)` on the single-bounce ellipse
/// `‖p - bs‖ + ‖p - ue‖ = c τ`, with `d(ν)` the horizontal BS-side direction
/// whose projection on the array axis is `ν`.
pub fn backproject_scatterer(array: &ArrayGeometry, ue: &Vec3, tau: f64, nu: f64) -> Result<Vec3> {
    if !(nu.abs() <= 1.0) || !tau.is_finite() {
        return Err(Error::invalid(format!("beam coordinate {nu} has no departure direction")));
    }
    let bs = array.bs_position;
    let d = array.broadside_horizontal() * (1.0 - nu * nu).max(0.0).sqrt() + array.axis() * nu;
    let total = SPEED_OF_LIGHT * tau;
    let w = ue - bs;
    let wn = w.norm();
    if total - wn <= 1e-9 {
        return Err(Error::NoSolution(format!(
            "path length {total} m does not exceed the direct distance {wn} m"
        )));
    }
    let r = (total * total - wn * wn) / (2.0 * (total - d.dot(&w)));
    Ok(bs + d * r)
}

struct Candidate {
    position: Vec3,
    power: f64,
    delay_residual: f64,
}

struct Cluster {
    weighted_pos: Vec3,
    weighted_delay: f64,
    weight: f64,
    hits: usize,
}

impl Cluster {
    fn center(&self) -> Vec3 {
        self.weighted_pos / self.weight
    }
}

fn los_geometry(array: &ArrayGeometry, ue: &Vec3) -> Result<(f64, f64)> {
    let v = ue - array.bs_position;
    let dist = v.norm();
    if !(dist > 0.0) {
        return Err(Error::invalid("UE coincides with the base station"));
    }
    Ok((dist / SPEED_OF_LIGHT, array.beam_coord(&v)?))
}

fn nearest_column(beams: &[f64], nu: f64) -> usize {
    let mut best = (0, f64::INFINITY);
    for (u, &b) in beams.iter().enumerate() {
        let d = wrap_beam(b - nu).abs();
        if d < best.1 {
            best = (u, d);
        }
    }
    best.0
}

/// Sub-bin offset from the two neighbours of a peak, exact for a single
/// path with a sinc-squared profile.
fn sub_bin_offset(left: f64, right: f64) -> f64 {
    let (l, r) = (left.max(0.0).sqrt(), right.max(0.0).sqrt());
    if l + r <= 0.0 {
        return 0.0;
    }
    ((r - l) / (l + r)).clamp(-0.5, 0.5)
}

/// Path power consistent with the 3×3 neighbourhood of `(row, col)` for a
/// single path at `(tau, nu)`.
fn neighbourhood_power(
    q: &crate::linalg::RMat,
    row: usize,
    col: usize,
    tau: f64,
    nu: f64,
    grid: &OfdmGrid,
    array: &ArrayGeometry,
    window: &DelayWindow,
    beams: &[f64],
) -> f64 {
    let (l, m) = q.shape();
    let (mut mass, mut kernel) = (0.0, 0.0);
    for dr in -1i64..=1 {
        let r = row as i64 + dr;
        if r < 0 || r >= l as i64 {
            continue;
        }
        let r = r as usize;
        let kt = delay_kernel(window.tap_delays[r] - tau, grid);
        for dc in -1i64..=1 {
            let c = (col as i64 + dc).rem_euclid(m as i64) as usize;
            mass += q[(r, c)];
            kernel += kt * beam_kernel(beams[c], nu, array);
        }
    }
    if kernel > 1e-12 {
        mass / kernel
    } else {
        0.0
    }
}

fn in_los_window(row: usize, col: usize, los: (usize, usize), radius: usize, beams: usize) -> bool {
    let dr = row.abs_diff(los.0);
    let dc = col.abs_diff(los.1);
    dr <= radius && dc.min(beams - dc) <= radius
}

fn is_local_max(q: &crate::linalg::RMat, row: usize, col: usize) -> bool {
    let (l, m) = q.shape();
    let v = q[(row, col)];
    for dr in -1i64..=1 {
        for dc in -1i64..=1 {
            if dr == 0 && dc == 0 {
                continue;
            }
            let r = row as i64 + dr;
            if r < 0 || r >= l as i64 {
                continue;
            }
            let c = (col as i64 + dc).rem_euclid(m as i64) as usize;
            if q[(r as usize, c)] > v {
                return false;
            }
        }
    }
    true
}

fn check_samples(samples: &[TrainingSample], array: &ArrayGeometry, window: &DelayWindow) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::invalid("initialization needs at least one training sample"));
    }
    for s in samples {
        if s.target.shape() != (window.taps, array.antennas) {
            return Err(Error::invalid("training target does not match the delay window and array"));
        }
    }
    Ok(())
}

/// LoS power per sample, kernel-corrected from the bins around the geometric
/// LoS location, combined as a geometric mean.
fn los_gain_raw(
    samples: &[TrainingSample],
    grid: &OfdmGrid,
    array: &ArrayGeometry,
    window: &DelayWindow,
) -> Result<f64> {
    let beams = beam_grid(array);
    let mut log_sum = 0.0;
    let mut count = 0usize;
    for s in samples {
        let (tau, nu) = los_geometry(array, &s.ue_position)?;
        let Some(row) = window.nearest_row(tau, grid) else {
            continue;
        };
        let col = nearest_column(&beams, nu);
        let p = neighbourhood_power(&s.target.q, row, col, tau, nu, grid, array, window, &beams);
        if p > 0.0 {
            log_sum += p.ln();
            count += 1;
        }
    }
    let power = if count > 0 {
        (log_sum / count as f64).exp()
    } else {
        // nothing visible: start from the mean bin power
        let mean = samples.iter().map(|s| s.target.total()).sum::<f64>() / samples.len() as f64;
        mean.max(f64::MIN_POSITIVE)
    };
    Ok(softplus_inv(power))
}

/// Gaussians scattered around the training positions; used when no NLoS
/// peak is found and by the random-initialization ablation.
pub fn random_init(
    samples: &[TrainingSample],
    grid: &OfdmGrid,
    array: &ArrayGeometry,
    window: &DelayWindow,
    cfg: &InitConfig,
) -> Result<SceneMap> {
    cfg.validate()?;
    check_samples(samples, array, window)?;
    let los = los_gain_raw(samples, grid, array, window)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let power = 1e-2 * super::softplus(los);
    let prims = (0..cfg.floor_count)
        .map(|_| {
            let anchor = samples[rng.random_range(0..samples.len())].ue_position;
            let offset = if cfg.jitter > 0.0 {
                Vec3::new(
                    rng.random_range(-cfg.jitter..=cfg.jitter),
                    rng.random_range(-cfg.jitter..=cfg.jitter),
                    0.0,
                )
            } else {
                Vec3::zeros()
            };
            let mu = anchor + offset;
            GaussianPrimitive {
                mu,
                scale: cfg.scale,
                opacity_logit: logit(cfg.opacity),
                delay_residual: (mu - anchor).norm() / SPEED_OF_LIGHT,
                gain_raw: softplus_inv(power / cfg.opacity),
            }
        })
        .collect();
    SceneMap::new(prims, los, array.bs_position)
}

/// Back-projects the strongest non-LoS peaks of every target spectrum and
/// merges nearby candidates into Gaussians.
///
/// Each Gaussian starts with opacity `cfg.opacity` and a gain chosen so that
/// opacity times gain equals the mean kernel-corrected peak power. Its delay
/// residual is the scatterer-to-UE leg of the observed path, which the
/// BS-to-Gaussian delay term does not cover.
pub fn init_from_measurements(
    samples: &[TrainingSample],
    grid: &OfdmGrid,
    array: &ArrayGeometry,
    window: &DelayWindow,
    cfg: &InitConfig,
) -> Result<SceneMap> {
    cfg.validate()?;
    check_samples(samples, array, window)?;
    let beams = beam_grid(array);
    let (taps, m) = (window.taps, array.antennas);
    let col_step = 2.0 / (m as f64 * array.spacing_ratio());
    let tap = grid.tap_spacing();

    let mut candidates = Vec::new();
    for s in samples {
        let q = &s.target.q;
        let peak = q.max();
        if !(peak > 0.0) {
            continue;
        }
        let (los_tau, los_nu) = los_geometry(array, &s.ue_position)?;
        let los_bin = window
            .nearest_row(los_tau, grid)
            .map(|r| (r, nearest_column(&beams, los_nu)));

        let mut peaks = Vec::new();
        for col in 0..m {
            for row in 0..taps {
                let v = q[(row, col)];
                if v < cfg.min_rel_power * peak || !is_local_max(q, row, col) {
                    continue;
                }
                if los_bin.is_some_and(|lb| in_los_window(row, col, lb, cfg.los_radius, m)) {
                    continue;
                }
                peaks.push((row, col, v));
            }
        }
        // strongest first, ties in scan order
        peaks.sort_by(|a, b| b.2.total_cmp(&a.2));
        peaks.truncate(cfg.peaks);

        for (row, col, _) in peaks {
            let left = if row > 0 { q[(row - 1, col)] } else { 0.0 };
            let right = if row + 1 < taps { q[(row + 1, col)] } else { 0.0 };
            let tau = window.tap_delays[row] + sub_bin_offset(left, right) * tap;
            let prev = q[(row, (col + m - 1) % m)];
            let next = q[(row, (col + 1) % m)];
            let nu = wrap_beam(beams[col] - sub_bin_offset(prev, next) * col_step);
            let Ok(position) = backproject_scatterer(array, &s.ue_position, tau, nu) else {
                continue;
            };
            let power = neighbourhood_power(q, row, col, tau, nu, grid, array, window, &beams);
            if !(power > 0.0) {
                continue;
            }
            let bs_leg = (position - array.bs_position).norm() / SPEED_OF_LIGHT;
            candidates.push(Candidate {
                position,
                power,
                delay_residual: tau - bs_leg,
            });
        }
    }

    let los = los_gain_raw(samples, grid, array, window)?;
    if candidates.is_empty() {
        return random_init(samples, grid, array, window, cfg);
    }

    // strongest candidates seed clusters
    candidates.sort_by(|a, b| b.power.total_cmp(&a.power));
    let mut clusters: Vec<Cluster> = Vec::new();
    for c in &candidates {
        let hit = clusters
            .iter_mut()
            .find(|k| (k.center() - c.position).norm() <= cfg.merge_radius);
        match hit {
            Some(k) => {
                k.weighted_pos += c.position * c.power;
                k.weighted_delay += c.delay_residual * c.power;
                k.weight += c.power;
                k.hits += 1;
            }
            None => clusters.push(Cluster {
                weighted_pos: c.position * c.power,
                weighted_delay: c.delay_residual * c.power,
                weight: c.power,
                hits: 1,
            }),
        }
    }

    let prims = clusters
        .iter()
        .map(|k| GaussianPrimitive {
            mu: k.center(),
            scale: cfg.scale,
            opacity_logit: logit(cfg.opacity),
            delay_residual: k.weighted_delay / k.weight,
            gain_raw: softplus_inv(k.weight / k.hits as f64 / cfg.opacity),
        })
        .collect();
    SceneMap::new(prims, los, array.bs_position)
}
