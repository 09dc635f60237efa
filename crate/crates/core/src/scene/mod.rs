//! Parametric railway-corridor channel simulator.
//!
//! A straight track, a base station offset from it and a handful of
//! billboard scatterers. Every snapshot is a sum of a LoS path and visible
//! single-bounce paths with free-space amplitude laws and per-path Doppler.

mod dataset;
mod paths;

pub use dataset::{generate_dataset, ChannelDataset, ScenarioConfig, Trajectory};
pub use paths::{
    complex_normal, enumerate_paths, observe_pilots, synthesize_cfr, LinkState, PathComponent, PathKind,
    Scatterer,
};

#[cfg(test)]
pub(crate) use dataset::tests::small_scenario;
