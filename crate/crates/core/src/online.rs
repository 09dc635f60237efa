//! Symbol-by-symbol estimation over held-out bursts.
//!
//! At pilot symbols each method produces an LMMSE (or OMP) estimate from
//! noisy pilots; between pilots the latest measured state is propagated
//! with the scalar AR predictor, or held while fewer than two measured
//! states exist. Every method sees the same noise realization.

// std inherents shadow these when a dependency links std
#[allow(unused_imports)]
use num_traits::Float;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::estimator::{
    build_prior, calibrate_rho, estimate_alpha, genie_prior, lmmse_estimate, omp_los_seeded, predict, relative_floor,
    PosteriorState, StateSource, DEFAULT_REL_EPS,
};
use crate::exec::SampleMap;
use crate::linalg::RMat;
use crate::radio::{from_delay_beam, nmse_db, to_delay_beam, DelayBeamSpectrum};
use crate::render::{los_bin, RenderGeometry};
use crate::scene::{observe_pilots, ChannelDataset};
use crate::{Error, Result, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Rendered Gaussian-map prior.
    GeoGs,
    /// Uniform prior.
    Zero,
    /// True spectrum as prior.
    Genie,
    /// LoS-seeded orthogonal matching pursuit.
    Omp,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::GeoGs, Method::Zero, Method::Genie, Method::Omp];

    pub fn name(self) -> &'static str {
        match self {
            Method::GeoGs => "geogs",
            Method::Zero => "zero",
            Method::Genie => "genie",
            Method::Omp => "omp",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::invalid(format!("unknown method '{s}' (valid: geogs, zero, genie, omp)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnlineConfig {
    /// Power floor relative to the prior peak.
    pub rel_eps: f64,
    /// Most recent measured states used for the AR coefficient.
    pub alpha_window: usize,
    pub omp_atoms: usize,
    pub noise_seed: u64,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        Self {
            rel_eps: DEFAULT_REL_EPS,
            alpha_window: 3,
            omp_atoms: 16,
            noise_seed: 0,
        }
    }
}

/// One evaluated symbol. NMSE is taken against the CFR of the retained
/// delay window, the quantity every estimator targets.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolRecord {
    pub snapshot: usize,
    /// Symbol offset from the start of its burst.
    pub symbol: usize,
    pub method: Method,
    pub nmse_db: f64,
    pub measured: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    pub mean_db: f64,
    pub median_db: f64,
    pub count: usize,
}

/// Noise seed of snapshot `index`, shared by all methods.
pub fn snapshot_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (index as u64).wrapping_add(0x632b_e59b_d9b4_e019)
}

/// Source of prior spectra at a UE position.
pub type PriorFn<'a> = dyn Fn(&Vec3) -> Result<DelayBeamSpectrum> + Sync + 'a;

fn estimate_at_pilot(
    method: Method,
    y: &crate::linalg::CMat,
    x_true: &crate::linalg::CMat,
    ue: &Vec3,
    ds: &ChannelDataset,
    sensing: &crate::radio::SensingModel,
    geom: &RenderGeometry,
    prior_fn: Option<&PriorFn<'_>>,
    cfg: &OnlineConfig,
    symbol: usize,
) -> Result<PosteriorState> {
    let noise = ds.pattern.noise_var;
    let calibrated = |q: &DelayBeamSpectrum| -> Result<PosteriorState> {
        let eps = relative_floor(q, cfg.rel_eps);
        let rho = calibrate_rho(y, sensing, q, eps, noise)?;
        lmmse_estimate(y, sensing, &build_prior(q, rho, eps)?, symbol)
    };
    match method {
        Method::GeoGs => {
            let f = prior_fn.ok_or_else(|| Error::invalid("the geogs method needs a trained prior"))?;
            calibrated(&f(ue)?)
        }
        Method::Zero => calibrated(&DelayBeamSpectrum {
            q: RMat::from_element(sensing.taps(), sensing.antennas(), 1.0),
        }),
        Method::Genie => lmmse_estimate(y, sensing, &genie_prior(x_true, cfg.rel_eps)?, symbol),
        Method::Omp => {
            let bin = los_bin(geom, ue).unwrap_or((ds.window.guard, 0));
            let dim = (y.nrows() * y.ncols()) as f64;
            let yn = y.norm();
            let tol = if yn > 0.0 { ((noise * dim).sqrt() / yn).min(1.0) } else { 0.0 };
            let r = omp_los_seeded(y, sensing, bin, cfg.omp_atoms, tol)?;
            Ok(PosteriorState {
                x_hat: r.x_hat,
                symbol,
                source: StateSource::Measured,
            })
        }
    }
}

fn run_burst(
    ds: &ChannelDataset,
    burst: usize,
    method: Method,
    geom: &RenderGeometry,
    prior_fn: Option<&PriorFn<'_>>,
    cfg: &OnlineConfig,
) -> Result<Vec<SymbolRecord>> {
    let ranges = ds.burst_ranges();
    let range = ranges
        .get(burst)
        .cloned()
        .ok_or_else(|| Error::invalid(format!("burst {burst} out of range ({} bursts)", ranges.len())))?;
    let sensing = ds.sensing_model()?;
    let t_slot = ds.grid.symbols_per_slot;
    let first_slot = ds.snapshots[range.start].slot_index;
    let mut measured: Vec<PosteriorState> = Vec::new();
    let mut out = Vec::with_capacity(range.len());
    for k in range {
        let snap = &ds.snapshots[k];
        let symbol = (snap.slot_index - first_slot) * t_slot + snap.symbol_index;
        let is_pilot = ds.pattern.is_pilot_symbol(snap.symbol_index);
        let x_true = to_delay_beam(&snap.h, &ds.window)?;
        let state = if is_pilot {
            let y = observe_pilots(snap, &ds.pattern, snapshot_seed(cfg.noise_seed, k))?;
            let st = estimate_at_pilot(
                method,
                &y,
                &x_true,
                &snap.ue_position,
                ds,
                &sensing,
                geom,
                prior_fn,
                cfg,
                symbol,
            )?;
            measured.push(st.clone());
            st
        } else {
            let last = measured
                .last()
                .ok_or_else(|| Error::InsufficientHistory("burst does not start with a pilot symbol".into()))?;
            if measured.len() >= 2 {
                let from = measured.len().saturating_sub(cfg.alpha_window.max(2));
                let alpha = estimate_alpha(&measured[from..])?;
                predict(last, alpha, symbol)?
            } else {
                PosteriorState {
                    x_hat: last.x_hat.clone(),
                    symbol,
                    source: StateSource::Predicted,
                }
            }
        };
        let h_hat = from_delay_beam(&state.x_hat, &ds.window)?;
        let h_ref = from_delay_beam(&x_true, &ds.window)?;
        out.push(SymbolRecord {
            snapshot: k,
            symbol,
            method,
            nmse_db: nmse_db(&h_hat, &h_ref)?,
            measured: is_pilot,
        });
    }
    Ok(out)
}

/// Runs every method over `bursts`; records are ordered by method, burst
/// and symbol.
pub fn run_online<E: SampleMap>(
    ds: &ChannelDataset,
    bursts: &[usize],
    methods: &[Method],
    geom: &RenderGeometry,
    prior_fn: Option<&PriorFn<'_>>,
    cfg: &OnlineConfig,
    exec: &E,
) -> Result<Vec<SymbolRecord>> {
    if methods.is_empty() {
        return Err(Error::invalid("no estimation methods selected"));
    }
    let jobs: Vec<(Method, usize)> = methods
        .iter()
        .flat_map(|&m| bursts.iter().map(move |&b| (m, b)))
        .collect();
    let results = exec.map(jobs.len(), &|j| run_burst(ds, jobs[j].1, jobs[j].0, geom, prior_fn, cfg));
    let mut out = Vec::new();
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

/// Mean and median NMSE (dB) per method, in first-appearance order.
pub fn summarize(records: &[SymbolRecord]) -> Vec<MethodSummary> {
    let mut methods: Vec<Method> = Vec::new();
    for r in records {
        if !methods.contains(&r.method) {
            methods.push(r.method);
        }
    }
    methods
        .into_iter()
        .map(|m| {
            let mut v: Vec<f64> = records.iter().filter(|r| r.method == m).map(|r| r.nmse_db).collect();
            v.sort_by(f64::total_cmp);
            let n = v.len();
            let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
            MethodSummary {
                method: m,
                mean_db: v.iter().sum::<f64>() / n as f64,
                median_db: median,
                count: n,
            }
        })
        .collect()
}

/// Comma-separated method list.
pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    let methods: Vec<Method> = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    if methods.is_empty() {
        return Err(Error::invalid("method list is empty"));
    }
    Ok(methods)
}

pub fn method_names(methods: &[Method]) -> String {
    methods.iter().map(|m| m.name()).collect::<Vec<_>>().join(",")
}
