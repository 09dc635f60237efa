//! In-memory experiment steps shared by the commands and the tests.

use dbprior_core::exec::SampleMap;
use dbprior_core::model::{PriorModel, TrainingSample};
use dbprior_core::online::{run_online, summarize, Method, MethodSummary, SymbolRecord};
use dbprior_core::prior::{init_from_measurements, random_init, DeformerParams, InputNormalization, ResidualBounds};
use dbprior_core::radio::{ground_truth_spectrum, to_delay_beam, DelayBeamSpectrum};
use dbprior_core::render::{render, KernelMode, RenderConfig, RenderGeometry};
use dbprior_core::scene::{generate_dataset, ChannelDataset};
use dbprior_core::train::{train_prior, TrainOutcome};
use dbprior_core::Vec3;

use crate::config::{ExperimentConfig, InitMode};
use crate::error::{CliError, Result};

/// Generates the dataset and stamps it with the config echo.
pub fn simulate(cfg: &ExperimentConfig) -> Result<ChannelDataset> {
    let mut ds = generate_dataset(&cfg.scenario).map_err(CliError::config_from)?;
    ds.config_echo = cfg.to_ini();
    Ok(ds)
}

pub fn geometry(ds: &ChannelDataset) -> Result<RenderGeometry> {
    Ok(RenderGeometry::new(ds.grid.clone(), ds.array.clone(), ds.window.clone())?)
}

/// Snapshot indices of the configured training positions.
pub fn training_indices(cfg: &ExperimentConfig, ds: &ChannelDataset) -> Vec<usize> {
    let ranges = ds.burst_ranges();
    let mut out = Vec::new();
    for b in cfg.split.train_bursts.resolve(ranges.len()) {
        for k in ranges[b].clone() {
            if cfg.split.train_symbols.contains(&ds.snapshots[k].symbol_index) {
                out.push(k);
            }
        }
    }
    out
}

/// Clean delay-beam power targets at the training positions.
pub fn training_samples(cfg: &ExperimentConfig, ds: &ChannelDataset) -> Result<Vec<TrainingSample>> {
    let idx = training_indices(cfg, ds);
    if idx.is_empty() {
        return Err(CliError::Config("the training split selects no snapshots".into()));
    }
    idx.into_iter()
        .map(|k| {
            let s = &ds.snapshots[k];
            Ok(TrainingSample {
                ue_position: s.ue_position,
                target: ground_truth_spectrum(&to_delay_beam(&s.h, &ds.window)?),
            })
        })
        .collect()
}

pub fn initial_model(cfg: &ExperimentConfig, ds: &ChannelDataset, samples: &[TrainingSample]) -> Result<PriorModel> {
    let map = match cfg.init_mode {
        InitMode::Measured => init_from_measurements(samples, &ds.grid, &ds.array, &ds.window, &cfg.init)?,
        InitMode::Random => random_init(samples, &ds.grid, &ds.array, &ds.window, &cfg.init)?,
    };
    let positions: Vec<Vec3> = samples.iter().map(|s| s.ue_position).collect();
    let deformer = DeformerParams::new(
        ResidualBounds::with_tap_spacing(ds.grid.tap_spacing())?,
        InputNormalization::fit(&positions)?,
        cfg.seed,
    );
    Ok(PriorModel { map, deformer })
}

/// Trains from `start` for the configured epochs; `done` epochs are
/// already in the history being continued.
pub fn train<E: SampleMap>(
    cfg: &ExperimentConfig,
    ds: &ChannelDataset,
    samples: &[TrainingSample],
    start: &PriorModel,
    done: usize,
    exec: &E,
) -> Result<TrainOutcome> {
    let mut tc = cfg.train.clone();
    tc.start_epoch = done;
    Ok(train_prior(start, samples, &geometry(ds)?, &tc, exec)?)
}

/// Runs the online loop over the evaluation bursts. `prior` is needed only
/// for the `geogs` method.
pub fn evaluate<E: SampleMap>(
    cfg: &ExperimentConfig,
    ds: &ChannelDataset,
    methods: &[Method],
    prior: Option<(&PriorModel, &RenderConfig)>,
    exec: &E,
) -> Result<Vec<SymbolRecord>> {
    let geom = geometry(ds)?;
    let bursts = cfg.split.eval_bursts.resolve(ds.burst_ranges().len());
    if bursts.is_empty() {
        return Err(CliError::Config("the evaluation split selects no bursts".into()));
    }
    let f = prior.map(|(model, rc)| {
        let geom = geom.clone();
        let rc = *rc;
        move |ue: &Vec3| -> dbprior_core::Result<DelayBeamSpectrum> { Ok(render(model, ue, &geom, &rc)?.total) }
    });
    let pf: Option<&dbprior_core::online::PriorFn<'_>> = f.as_ref().map(|f| f as _);
    if methods.contains(&Method::GeoGs) && pf.is_none() {
        return Err(CliError::Config("method geogs needs a trained checkpoint".into()));
    }
    Ok(run_online(ds, &bursts, methods, &geom, pf, &cfg.online, exec)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ablation {
    Full,
    NoVirtualLos,
    NoInitNoLos,
    NoLeakageKernel,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [
        Ablation::Full,
        Ablation::NoVirtualLos,
        Ablation::NoInitNoLos,
        Ablation::NoLeakageKernel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::NoVirtualLos => "no_virtual_los",
            Ablation::NoInitNoLos => "no_init_no_los",
            Ablation::NoLeakageKernel => "no_leakage_kernel",
        }
    }

    pub fn apply(self, cfg: &ExperimentConfig) -> ExperimentConfig {
        let mut c = cfg.clone();
        match self {
            Ablation::Full => {}
            Ablation::NoVirtualLos => c.train.render.virtual_los = false,
            Ablation::NoInitNoLos => {
                c.train.render.virtual_los = false;
                c.init_mode = InitMode::Random;
            }
            Ablation::NoLeakageKernel => c.train.render.kernel = KernelMode::NearestBin,
        }
        c
    }
}

/// Trains and evaluates one ablation variant with the trained prior.
pub fn run_ablation<E: SampleMap>(
    cfg: &ExperimentConfig,
    ds: &ChannelDataset,
    variant: Ablation,
    exec: &E,
) -> Result<MethodSummary> {
    let c = variant.apply(cfg);
    let samples = training_samples(&c, ds)?;
    let init = initial_model(&c, ds, &samples)?;
    let out = train(&c, ds, &samples, &init, 0, exec)?;
    let recs = evaluate(&c, ds, &[Method::GeoGs], Some((&out.model, &c.train.render)), exec)?;
    summarize(&recs)
        .into_iter()
        .next()
        .ok_or_else(|| CliError::Data("ablation produced no records".into()))
}
