use alloc::{format, string::String, vec::Vec};
use core::ops::Range;

// std inherents shadow these when a dependency links std
#[allow(unused_imports)]
use num_traits::Float;

use super::paths::{enumerate_paths, synthesize_cfr, LinkState, PathComponent, Scatterer};
use crate::radio::{build_sensing_model, ArrayGeometry, CfrSnapshot, DelayBeamTransform, DelayWindow, OfdmGrid, PilotPattern, SensingModel};
use crate::{Error, Result, Vec3};

/// Straight, constant-speed UE trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub start: Vec3,
    pub direction: Vec3,
    /// m/s
    pub speed: f64,
    /// Track length (m) over which recording bursts are spread.
    pub length: f64,
}

impl Trajectory {
    pub fn new(start: Vec3, direction: Vec3, speed: f64, length: f64) -> Result<Self> {
        if (direction.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("trajectory direction must be a unit vector"));
        }
        if !(speed >= 0.0) || !(length >= 0.0) {
            return Err(Error::invalid("speed and length must be nonnegative"));
        }
        Ok(Self {
            start,
            direction,
            speed,
            length,
        })
    }

    pub fn position_at(&self, track_coord: f64) -> Vec3 {
        self.start + self.direction * track_coord
    }

    pub fn velocity(&self) -> Vec3 {
        self.direction * self.speed
    }
}

/// Everything needed to synthesize a dataset.
///
/// Recording happens in `bursts` groups of `slots_per_burst` consecutive slots.
/// Burst `b` starts at track coordinate `b * length / bursts`; inside a burst the
/// UE moves continuously at the trajectory speed.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub grid: OfdmGrid,
    pub array: ArrayGeometry,
    pub pilot_symbols: Vec<usize>,
    pub pilot_subcarriers: Vec<usize>,
    pub tx_power: f64,
    /// Average pilot SNR (dB) over the dataset; `None` means noiseless.
    pub snr_db: Option<f64>,
    pub taps: usize,
    pub guard: usize,
    pub trajectory: Trajectory,
    pub bursts: usize,
    pub slots_per_burst: usize,
    pub scatterers: Vec<Scatterer>,
}

impl ScenarioConfig {
    pub fn burst_spacing(&self) -> f64 {
        if self.bursts == 0 {
            0.0
        } else {
            self.trajectory.length / self.bursts as f64
        }
    }

    pub fn validate(&self) -> Result<()> {
        PilotPattern::new(&self.grid, self.pilot_symbols.clone(), self.pilot_subcarriers.clone(), self.tx_power, 0.0)?;
        DelayWindow::new(&self.grid, self.taps, self.guard)?;
        if self.bursts == 0 || self.slots_per_burst == 0 {
            return Err(Error::invalid("bursts and slots_per_burst must be positive"));
        }
        let burst_travel = self.trajectory.speed * self.grid.slot_duration() * self.slots_per_burst as f64;
        if self.bursts > 1 && burst_travel >= self.burst_spacing() {
            return Err(Error::invalid(format!(
                "bursts overlap: {burst_travel} m travelled per burst, spacing {} m",
                self.burst_spacing()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDataset {
    pub grid: OfdmGrid,
    pub array: ArrayGeometry,
    pub pattern: PilotPattern,
    pub window: DelayWindow,
    pub slots_per_burst: usize,
    pub snapshots: Vec<CfrSnapshot>,
    pub paths: Vec<Vec<PathComponent>>,
    /// Opaque configuration text carried along by file formats.
    pub config_echo: String,
}

impl ChannelDataset {
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn burst_of(&self, snapshot: usize) -> usize {
        self.snapshots[snapshot].slot_index / self.slots_per_burst
    }

    /// Snapshot index ranges of the recording bursts, in order.
    pub fn burst_ranges(&self) -> Vec<Range<usize>> {
        let mut out: Vec<Range<usize>> = Vec::new();
        for i in 0..self.snapshots.len() {
            match out.last_mut() {
                Some(r) if self.burst_of(r.start) == self.burst_of(i) => r.end = i + 1,
                _ => out.push(i..i + 1),
            }
        }
        out
    }

    pub fn sensing_model(&self) -> Result<SensingModel> {
        build_sensing_model(&self.grid, &self.array, &self.pattern, &self.window)
    }

    pub fn transform(&self) -> Result<DelayBeamTransform> {
        DelayBeamTransform::new(&self.window, self.array.antennas)
    }
}

pub fn generate_dataset(cfg: &ScenarioConfig) -> Result<ChannelDataset> {
    cfg.validate()?;
    let grid = &cfg.grid;
    let per_burst = cfg.slots_per_burst * grid.symbols_per_slot;
    let mut snapshots = Vec::with_capacity(cfg.bursts * per_burst);
    let mut paths = Vec::with_capacity(cfg.bursts * per_burst);
    let velocity = cfg.trajectory.velocity();
    for b in 0..cfg.bursts {
        let track = b as f64 * cfg.burst_spacing();
        let origin = cfg.trajectory.position_at(track);
        let link = LinkState {
            position: origin,
            velocity,
            track_coord: track,
        };
        let burst_paths = enumerate_paths(&link, &cfg.scatterers, &cfg.array, grid)?;
        for k in 0..per_burst {
            let t = k as f64 * grid.symbol_duration;
            let h = synthesize_cfr(&burst_paths, grid, &cfg.array, t)?;
            let slot = b * cfg.slots_per_burst + k / grid.symbols_per_slot;
            let symbol = k % grid.symbols_per_slot;
            snapshots.push(CfrSnapshot::new(h, origin + velocity * t, symbol, slot)?);
            paths.push(burst_paths.clone());
        }
    }
    let noise_var = match cfg.snr_db {
        None => 0.0,
        Some(snr) => {
            let cells = (grid.subcarriers * cfg.array.antennas) as f64;
            let mean_power = snapshots.iter().map(|s| s.h.norm_squared() / cells).sum::<f64>()
                / snapshots.len() as f64;
            cfg.tx_power * cfg.tx_power * mean_power / 10f64.powf(snr / 10.0)
        }
    };
    let pattern = PilotPattern::new(
        grid,
        cfg.pilot_symbols.clone(),
        cfg.pilot_subcarriers.clone(),
        cfg.tx_power,
        noise_var,
    )?;
    Ok(ChannelDataset {
        grid: grid.clone(),
        array: cfg.array.clone(),
        pattern,
        window: DelayWindow::new(grid, cfg.taps, cfg.guard)?,
        slots_per_burst: cfg.slots_per_burst,
        snapshots,
        paths,
        config_echo: String::new(),
    })
}
