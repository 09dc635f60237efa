//! Subcommand bodies. Each reads its inputs, does the work in memory and
//! writes its outputs atomically under the output directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use dbprior_core::online::{parse_methods, summarize, Method};
use dbprior_core::radio::{ground_truth_spectrum, to_delay_beam, DelayWindow};
use dbprior_core::render::{render, RenderGeometry};
use dbprior_core::scene::{ChannelDataset, PathKind};
use dbprior_core::train::{gradient_check, GradCheckConfig, GradCheckReport};
use dbprior_core::Vec3;

use crate::config::ExperimentConfig;
use crate::container::{read_checkpoint, read_dataset, write_checkpoint, write_dataset, Checkpoint};
use crate::error::{CliError, Result};
use crate::parallel::RayonMap;
use crate::pipeline::{self, Ablation};
use crate::report::{loss_csv, metrics_csv, spectrum_dump, summary_csv, write_atomic};

/// Flags shared by every subcommand; each command uses the ones it needs.
#[derive(Debug, Clone, Default)]
pub struct Inputs {
    pub config: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub methods: Option<String>,
    pub seed: Option<u64>,
    pub position: Option<String>,
}

pub const DATASET_FILE: &str = "dataset.ggce";
pub const CHECKPOINT_FILE: &str = "checkpoint.ggce";

impl Inputs {
    /// The `--config` file, or else the config echoed in the dataset, with
    /// the `--seed` override applied.
    fn config(&self, ds: Option<&ChannelDataset>) -> Result<ExperimentConfig> {
        let cfg = match (&self.config, ds) {
            (Some(p), _) => ExperimentConfig::from_file(p)?,
            (None, Some(ds)) => ExperimentConfig::parse(&ds.config_echo)?,
            (None, None) => return Err(CliError::Config("--config is required".into())),
        };
        Ok(match self.seed {
            Some(s) => cfg.with_seed(s),
            None => cfg,
        })
    }

    fn out_dir(&self, cfg: &ExperimentConfig) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output_dir))
    }

    /// `--dataset`, or a fresh simulation of the config when absent.
    fn dataset_or_simulate(&self) -> Result<(ExperimentConfig, ChannelDataset)> {
        match &self.dataset {
            Some(p) => {
                let ds = read_dataset(p)?;
                let cfg = self.config(Some(&ds))?;
                Ok((cfg, ds))
            }
            None => {
                let cfg = self.config(None)?;
                let ds = pipeline::simulate(&cfg)?;
                Ok((cfg, ds))
            }
        }
    }

    fn require_dataset(&self) -> Result<(ExperimentConfig, ChannelDataset)> {
        let p = self.dataset.as_ref().ok_or_else(|| CliError::Config("--dataset is required".into()))?;
        let ds = read_dataset(p)?;
        let cfg = self.config(Some(&ds))?;
        Ok((cfg, ds))
    }

    fn require_checkpoint(&self) -> Result<Checkpoint> {
        let p = self
            .checkpoint
            .as_ref()
            .ok_or_else(|| CliError::Config("--checkpoint is required".into()))?;
        read_checkpoint(p)
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())
}

fn write_config(dir: &Path, cfg: &ExperimentConfig) -> Result<()> {
    write_text(&dir.join("config.ini"), &cfg.to_ini())
}

/// Snapshot count and path statistics of a dataset.
pub fn dataset_summary(ds: &ChannelDataset) -> String {
    let n = ds.len();
    let counts: Vec<usize> = ds.paths.iter().map(Vec::len).collect();
    let total: usize = counts.iter().sum();
    let los = ds
        .paths
        .iter()
        .filter(|p| p.iter().any(|c| c.kind == PathKind::Los))
        .count();
    let mut s = String::new();
    let _ = writeln!(s, "snapshots: {n}");
    let _ = writeln!(s, "bursts: {}", ds.burst_ranges().len());
    let _ = writeln!(
        s,
        "paths per snapshot: min {} mean {:.2} max {}",
        counts.iter().min().copied().unwrap_or(0),
        if n == 0 { 0.0 } else { total as f64 / n as f64 },
        counts.iter().max().copied().unwrap_or(0)
    );
    let _ = writeln!(s, "snapshots with LoS: {los}");
    let _ = writeln!(s, "noise variance: {:e}", ds.pattern.noise_var);
    s
}

pub fn simulate(inp: &Inputs) -> Result<String> {
    let cfg = inp.config(None)?;
    let ds = pipeline::simulate(&cfg)?;
    let dir = inp.out_dir(&cfg);
    write_dataset(&dir.join(DATASET_FILE), &ds)?;
    write_config(&dir, &cfg)?;
    Ok(dataset_summary(&ds))
}

pub fn train(inp: &Inputs) -> Result<String> {
    let exec = RayonMap::from_env()?;
    let (cfg, ds) = inp.require_dataset()?;
    let samples = pipeline::training_samples(&cfg, &ds)?;
    let (start, mut history) = match &inp.checkpoint {
        Some(p) => {
            let c = read_checkpoint(p)?;
            (c.model, c.history)
        }
        None => (pipeline::initial_model(&cfg, &ds, &samples)?, Vec::new()),
    };
    let out = pipeline::train(&cfg, &ds, &samples, &start, history.len(), &exec)?;
    history.extend(out.history);
    let dir = inp.out_dir(&cfg);
    let ckpt = Checkpoint {
        config_echo: cfg.to_ini(),
        model: out.model,
        history,
    };
    write_checkpoint(&dir.join(CHECKPOINT_FILE), &ckpt)?;
    write_text(&dir.join("loss.csv"), &loss_csv(&ckpt.history))?;
    write_config(&dir, &cfg)?;
    let mut s = format!("training samples: {}\nGaussians: {}\n", samples.len(), ckpt.model.map.len());
    match (ckpt.history.first(), ckpt.history.last()) {
        (Some(a), Some(b)) => {
            let _ = writeln!(
                s,
                "epochs: {}\nloss: first {:e} last {:e} ratio {:.4}",
                ckpt.history.len(),
                a.loss.total,
                b.loss.total,
                b.loss.total / a.loss.total
            );
        }
        _ => s.push_str("epochs: 0\n"),
    }
    Ok(s)
}

pub fn evaluate(inp: &Inputs) -> Result<String> {
    let exec = RayonMap::from_env()?;
    let (cfg, ds) = inp.require_dataset()?;
    let methods = match &inp.methods {
        Some(list) => parse_methods(list).map_err(|e| CliError::Config(e.to_string()))?,
        None => cfg.methods.clone(),
    };
    let ckpt = match &inp.checkpoint {
        Some(_) => Some(inp.require_checkpoint()?),
        None => None,
    };
    // the prior renders with the settings it was trained under
    let trained = match &ckpt {
        Some(c) => Some(ExperimentConfig::parse(&c.config_echo)?),
        None => None,
    };
    let prior = ckpt.as_ref().zip(trained.as_ref()).map(|(c, t)| (&c.model, &t.train.render));
    let records = pipeline::evaluate(&cfg, &ds, &methods, prior, &exec)?;
    let rows: Vec<(String, _)> = summarize(&records).into_iter().map(|m| (m.method.to_string(), m)).collect();
    let table = summary_csv("method", &rows);
    let dir = inp.out_dir(&cfg);
    write_text(&dir.join("metrics.csv"), &metrics_csv(&records))?;
    write_text(&dir.join("summary.csv"), &table)?;
    write_config(&dir, &cfg)?;
    Ok(table)
}

pub fn parse_position(text: &str) -> Result<Vec3> {
    let v: Vec<f64> = text
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| CliError::Config(format!("--position '{text}' is not three numbers")))?;
    match v.as_slice() {
        [x, y, z] if v.iter().all(|c| c.is_finite()) => Ok(Vec3::new(*x, *y, *z)),
        _ => Err(CliError::Config(format!("--position '{text}' is not three finite numbers"))),
    }
}

/// Renders the prior at `--position`; with `--dataset` the ground truth of
/// the nearest snapshot is dumped next to it. Warnings go in the returned
/// report's first lines.
pub fn render_cmd(inp: &Inputs) -> Result<String> {
    let ckpt = inp.require_checkpoint()?;
    let pos = parse_position(
        inp.position
            .as_deref()
            .ok_or_else(|| CliError::Config("--position is required".into()))?,
    )?;
    let trained = ExperimentConfig::parse(&ckpt.config_echo)?;
    let cfg = match &inp.config {
        Some(_) => inp.config(None)?,
        None => trained.clone(),
    };
    let sc = &trained.scenario;
    let window = DelayWindow::new(&sc.grid, sc.taps, sc.guard)?;
    let geom = RenderGeometry::new(sc.grid.clone(), sc.array.clone(), window)?;
    let mut report = String::new();
    let norm = ckpt.model.deformer.normalization;
    if (pos - norm.center).norm() > norm.extent {
        let _ = writeln!(
            report,
            "warning: position lies outside the training extent ({:.1} m from its center, extent {:.1} m)",
            (pos - norm.center).norm(),
            norm.extent
        );
    }
    let q = render(&ckpt.model, &pos, &geom, &trained.train.render)?.total;
    let dir = inp.out_dir(&cfg);
    write_text(&dir.join("spectrum.txt"), &spectrum_dump(&q.q))?;
    let _ = writeln!(report, "spectrum: {} taps x {} beams", q.q.nrows(), q.q.ncols());
    if let Some(p) = &inp.dataset {
        let ds = read_dataset(p)?;
        let k = nearest_snapshot(&ds, &pos).ok_or_else(|| CliError::Data("dataset has no snapshots".into()))?;
        let gt = ground_truth_spectrum(&to_delay_beam(&ds.snapshots[k].h, &ds.window)?);
        if gt.q.shape() != q.q.shape() {
            return Err(CliError::Data("dataset and checkpoint disagree on the spectrum shape".into()));
        }
        write_text(&dir.join("spectrum_gt.txt"), &spectrum_dump(&gt.q))?;
        let _ = writeln!(
            report,
            "ground truth: snapshot {k}, {:.2} m away",
            (ds.snapshots[k].ue_position - pos).norm()
        );
    }
    Ok(report)
}

/// Lowest index among the snapshots closest to `pos`.
pub fn nearest_snapshot(ds: &ChannelDataset, pos: &Vec3) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, s) in ds.snapshots.iter().enumerate() {
        let d = (s.ue_position - pos).norm();
        if best.is_none_or(|(_, b)| d < b) {
            best = Some((k, d));
        }
    }
    best.map(|(k, _)| k)
}

pub fn ablate(inp: &Inputs) -> Result<String> {
    let exec = RayonMap::from_env()?;
    let (cfg, ds) = inp.dataset_or_simulate()?;
    let mut rows = Vec::new();
    for v in Ablation::ALL {
        rows.push((v.name().to_string(), pipeline::run_ablation(&cfg, &ds, v, &exec)?));
    }
    let table = summary_csv("variant", &rows);
    let dir = inp.out_dir(&cfg);
    write_text(&dir.join("ablation.csv"), &table)?;
    write_config(&dir, &cfg)?;
    Ok(table)
}

pub fn format_gradcheck(r: &GradCheckReport) -> String {
    let mut s = String::new();
    for g in &r.groups {
        let _ = writeln!(s, "{:?}: {} coords, max rel err {:.3e}", g.group, g.checked, g.max_rel_err);
    }
    let _ = writeln!(
        s,
        "max rel err {:.3e} (tolerance {:e}): {}",
        r.max_rel_err,
        r.tolerance,
        if r.passed { "pass" } else { "FAIL" }
    );
    s
}

/// Checks the loss gradient of the checkpoint (or the initial model) on
/// every training sample; fails with a numeric error above tolerance.
pub fn gradcheck(inp: &Inputs) -> Result<String> {
    let (cfg, ds) = inp.dataset_or_simulate()?;
    let samples = pipeline::training_samples(&cfg, &ds)?;
    let model = match &inp.checkpoint {
        Some(_) => inp.require_checkpoint()?.model,
        None => pipeline::initial_model(&cfg, &ds, &samples)?,
    };
    let geom = pipeline::geometry(&ds)?;
    let mut report = String::new();
    let mut worst = 0.0f64;
    for (i, s) in samples.iter().enumerate() {
        let gc = GradCheckConfig {
            seed: cfg.seed.wrapping_add(i as u64),
            ..GradCheckConfig::default()
        };
        let r = gradient_check(&model, s, &geom, &cfg.train.render, &cfg.train.weights, &gc)?;
        worst = worst.max(r.max_rel_err);
        let _ = writeln!(report, "sample {i}: max rel err {:.3e}", r.max_rel_err);
        if !r.passed {
            let detail = format_gradcheck(&r).trim_end().replace('\n', "; ");
            return Err(CliError::Numeric(format!("gradient check failed on sample {i}: {detail}")));
        }
    }
    let _ = writeln!(report, "all {} samples pass, worst {:.3e}", samples.len(), worst);
    Ok(report)
}

/// Method list for `--methods` help text.
pub fn valid_methods() -> String {
    Method::ALL.iter().map(|m| m.name()).collect::<Vec<_>>().join(", ")
}
