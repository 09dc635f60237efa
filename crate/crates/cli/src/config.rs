//! Sectioned `key = value` experiment configuration.
//!
//! Keys before the first `[section]` header are global. `[scatterer]` may
//! repeat, one section per scatterer. Lists are comma separated, `#` and `;`
//! start comments. Unknown keys are rejected so typos do not silently fall
//! back to defaults.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use dbprior_core::online::{method_names, parse_methods, Method, OnlineConfig};
use dbprior_core::prior::InitConfig;
use dbprior_core::radio::{ArrayGeometry, OfdmGrid, PilotPattern};
use dbprior_core::render::{KernelMode, RenderConfig};
use dbprior_core::scene::{ScenarioConfig, Scatterer, Trajectory};
use dbprior_core::train::{LearningRates, LossWeights, TrainConfig};
use dbprior_core::Vec3;
use num_complex::Complex64;

use crate::error::{CliError, Result};

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Debug, Clone)]
struct Section {
    name: String,
    line: usize,
    entries: BTreeMap<String, Entry>,
}

fn parse_ini(text: &str) -> Result<Vec<Section>> {
    let mut sections = vec![Section {
        name: String::new(),
        line: 0,
        entries: BTreeMap::new(),
    }];
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split(['#', ';']).next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| CliError::ConfigKey {
                line,
                key: content.to_string(),
                msg: "unterminated section header".into(),
            })?;
            sections.push(Section {
                name: name.trim().to_ascii_lowercase(),
                line,
                entries: BTreeMap::new(),
            });
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| CliError::ConfigKey {
            line,
            key: content.to_string(),
            msg: "expected 'key = value'".into(),
        })?;
        let key = key.trim().to_ascii_lowercase();
        let section = sections.last_mut().expect("global section exists");
        let entry = Entry {
            value: value.trim().to_string(),
            line,
        };
        if let Some(prev) = section.entries.insert(key.clone(), entry) {
            return Err(CliError::ConfigKey {
                line,
                key,
                msg: format!("duplicate key (first set on line {})", prev.line),
            });
        }
    }
    Ok(sections)
}

/// Typed, consuming access to one section.
struct Reader {
    name: String,
    line: usize,
    entries: BTreeMap<String, Entry>,
}

impl Reader {
    fn new(section: Option<Section>, name: &str) -> Self {
        match section {
            Some(s) => Reader {
                name: s.name,
                line: s.line,
                entries: s.entries,
            },
            None => Reader {
                name: name.to_string(),
                line: 0,
                entries: BTreeMap::new(),
            },
        }
    }

    fn qualified(&self, key: &str) -> String {
        if self.name.is_empty() {
            key.to_string()
        } else {
            format!("{}.{}", self.name, key)
        }
    }

    fn err(&self, key: &str, line: usize, msg: impl Into<String>) -> CliError {
        CliError::ConfigKey {
            line,
            key: self.qualified(key),
            msg: msg.into(),
        }
    }

    fn take_raw(&mut self, key: &str) -> Option<Entry> {
        self.entries.remove(key)
    }

    fn parse_with<T>(&mut self, key: &str, f: impl Fn(&str) -> std::result::Result<T, String>) -> Result<Option<T>> {
        match self.take_raw(key) {
            None => Ok(None),
            Some(e) => f(&e.value).map(Some).map_err(|m| self.err(key, e.line, m)),
        }
    }

    fn required<T>(&mut self, key: &str, f: impl Fn(&str) -> std::result::Result<T, String>) -> Result<T> {
        let line = self.line;
        self.parse_with(key, f)?
            .ok_or_else(|| self.err(key, line, "missing required key"))
    }

    fn or<T>(&mut self, key: &str, default: T, f: impl Fn(&str) -> std::result::Result<T, String>) -> Result<T> {
        Ok(self.parse_with(key, f)?.unwrap_or(default))
    }

    fn finish(self) -> Result<()> {
        match self.entries.iter().next() {
            None => Ok(()),
            Some((k, e)) => Err(self.err(k, e.line, "unknown key")),
        }
    }
}

fn p_f64(s: &str) -> std::result::Result<f64, String> {
    s.parse::<f64>().map_err(|_| format!("'{s}' is not a number"))
}

fn p_usize(s: &str) -> std::result::Result<usize, String> {
    s.parse::<usize>().map_err(|_| format!("'{s}' is not a nonnegative integer"))
}

fn p_u64(s: &str) -> std::result::Result<u64, String> {
    s.parse::<u64>().map_err(|_| format!("'{s}' is not an unsigned 64-bit integer"))
}

fn p_bool(s: &str) -> std::result::Result<bool, String> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(format!("'{s}' is not a boolean")),
    }
}

fn p_list<T>(s: &str, f: impl Fn(&str) -> std::result::Result<T, String>) -> std::result::Result<Vec<T>, String> {
    s.split(',').map(|p| f(p.trim())).collect()
}

fn p_fixed(s: &str, n: usize) -> std::result::Result<Vec<f64>, String> {
    let v = p_list(s, p_f64)?;
    if v.len() != n {
        return Err(format!("expected {n} comma-separated numbers, got {}", v.len()));
    }
    Ok(v)
}

fn p_vec3(s: &str) -> std::result::Result<Vec3, String> {
    let v = p_fixed(s, 3)?;
    Ok(Vec3::new(v[0], v[1], v[2]))
}

fn p_complex(s: &str) -> std::result::Result<Complex64, String> {
    let v = p_fixed(s, 2)?;
    Ok(Complex64::new(v[0], v[1]))
}

fn p_snr(s: &str) -> std::result::Result<Option<f64>, String> {
    if s.eq_ignore_ascii_case("none") {
        Ok(None)
    } else {
        p_f64(s).map(Some)
    }
}

fn p_kernel(s: &str) -> std::result::Result<KernelMode, String> {
    match s.to_ascii_lowercase().as_str() {
        "leakage" => Ok(KernelMode::Leakage),
        "nearest" => Ok(KernelMode::NearestBin),
        _ => Err(format!("'{s}' is not a kernel mode (leakage, nearest)")),
    }
}

fn p_methods(s: &str) -> std::result::Result<Vec<Method>, String> {
    parse_methods(s).map_err(|e| e.to_string())
}

fn v3(v: &Vec3) -> String {
    format!("{:?}, {:?}, {:?}", v.x, v.y, v.z)
}

fn join<T: std::fmt::Debug>(v: &[T]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
}

/// Which bursts of a dataset a stage uses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BurstSelection {
    All,
    Even,
    Odd,
    List(Vec<usize>),
}

impl BurstSelection {
    pub fn resolve(&self, bursts: usize) -> Vec<usize> {
        match self {
            BurstSelection::All => (0..bursts).collect(),
            BurstSelection::Even => (0..bursts).step_by(2).collect(),
            BurstSelection::Odd => (1..bursts).step_by(2).collect(),
            BurstSelection::List(v) => v.iter().copied().filter(|&b| b < bursts).collect(),
        }
    }

    fn parse(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "all" => Ok(BurstSelection::All),
            "even" => Ok(BurstSelection::Even),
            "odd" => Ok(BurstSelection::Odd),
            _ => p_list(s, p_usize)
                .map(BurstSelection::List)
                .map_err(|_| format!("'{s}' is not all, even, odd or a burst list")),
        }
    }

    fn render(&self) -> String {
        match self {
            BurstSelection::All => "all".into(),
            BurstSelection::Even => "even".into(),
            BurstSelection::Odd => "odd".into(),
            BurstSelection::List(v) => join(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// Back-projected measurement peaks.
    Measured,
    /// Gaussians scattered around the training positions.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitConfig {
    pub train_bursts: BurstSelection,
    pub eval_bursts: BurstSelection,
    /// Symbols of each slot used as training positions.
    pub train_symbols: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: String,
    pub scenario: ScenarioConfig,
    pub split: SplitConfig,
    pub init_mode: InitMode,
    pub init: InitConfig,
    pub train: TrainConfig,
    pub online: OnlineConfig,
    pub methods: Vec<Method>,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut global: Option<Section> = None;
        let mut named: BTreeMap<String, Section> = BTreeMap::new();
        let mut scatterer_sections = Vec::new();
        for s in parse_ini(text)? {
            if s.name.is_empty() {
                global = Some(s);
            } else if s.name == "scatterer" {
                scatterer_sections.push(s);
            } else if matches!(
                s.name.as_str(),
                "grid" | "array" | "pilots" | "window" | "trajectory" | "split" | "init" | "train" | "estimator"
            ) {
                if named.contains_key(&s.name) {
                    return Err(CliError::ConfigKey {
                        line: s.line,
                        key: format!("[{}]", s.name),
                        msg: "duplicate section".into(),
                    });
                }
                named.insert(s.name.clone(), s);
            } else {
                return Err(CliError::ConfigKey {
                    line: s.line,
                    key: format!("[{}]", s.name),
                    msg: "unknown section".into(),
                });
            }
        }
        let mut sec = |name: &str| Reader::new(named.remove(name), name);

        let mut g = Reader::new(global, "");
        let seed = g.required("seed", p_u64)?;
        let output_dir = g.or("output_dir", "out".to_string(), |s| Ok(s.to_string()))?;
        g.finish()?;

        let mut r = sec("grid");
        let subcarriers = r.required("subcarriers", p_usize)?;
        let spacing = r.required("subcarrier_spacing", p_f64)?;
        let symbols_per_slot = r.required("symbols_per_slot", p_usize)?;
        // useful symbol plus normal cyclic prefix
        let default_tsym = (1.0 + 1.0 / 14.0) / spacing;
        let symbol_duration = r.or("symbol_duration", default_tsym, p_f64)?;
        let carrier = r.or("carrier_freq", 3.5e9, p_f64)?;
        let line = r.line;
        r.finish()?;
        let grid = OfdmGrid::new(subcarriers, spacing, symbols_per_slot, symbol_duration, carrier)
            .map_err(|e| section_err("grid", line, e))?;

        let mut r = sec("array");
        let antennas = r.required("antennas", p_usize)?;
        let el_spacing = r.or("spacing_wavelengths", 0.5, p_f64)?;
        let bs = r.required("bs_position", p_vec3)?;
        let broadside = r.required("broadside", p_vec3)?;
        let line = r.line;
        r.finish()?;
        let array = ArrayGeometry::new(antennas, el_spacing, bs, broadside).map_err(|e| section_err("array", line, e))?;

        let mut r = sec("pilots");
        let pilot_symbols = r.required("symbols", |s| p_list(s, p_usize))?;
        let explicit = r.parse_with("subcarriers", |s| p_list(s, p_usize))?;
        let comb = r.parse_with("comb", p_usize)?;
        let comb_offset = r.or("comb_offset", 0, p_usize)?;
        let tx_power = r.or("tx_power", 1.0, p_f64)?;
        let snr_db = r.or("snr_db", Some(20.0), p_snr)?;
        let line = r.line;
        r.finish()?;
        let pilot_subcarriers = match (explicit, comb) {
            (Some(v), None) => v,
            (None, Some(count)) => PilotPattern::comb_subcarriers(subcarriers, count, comb_offset)
                .map_err(|e| section_err("pilots", line, e))?,
            (Some(_), Some(_)) => {
                return Err(CliError::ConfigKey {
                    line,
                    key: "pilots.comb".into(),
                    msg: "give either 'subcarriers' or 'comb', not both".into(),
                })
            }
            (None, None) => {
                return Err(CliError::ConfigKey {
                    line,
                    key: "pilots.subcarriers".into(),
                    msg: "missing required key (or 'comb')".into(),
                })
            }
        };

        let mut r = sec("window");
        let taps = r.required("taps", p_usize)?;
        let guard = r.or("guard", 0, p_usize)?;
        r.finish()?;

        let mut r = sec("trajectory");
        let start = r.required("start", p_vec3)?;
        let direction = r.required("direction", p_vec3)?;
        let speed_ms = r.parse_with("speed", p_f64)?;
        let speed_kmh = r.parse_with("speed_kmh", p_f64)?;
        let length = r.required("length", p_f64)?;
        let bursts = r.required("bursts", p_usize)?;
        let slots_per_burst = r.or("slots_per_burst", 1, p_usize)?;
        let line = r.line;
        r.finish()?;
        let speed = match (speed_ms, speed_kmh) {
            (Some(v), None) => v,
            (None, Some(v)) => v / 3.6,
            _ => {
                return Err(CliError::ConfigKey {
                    line,
                    key: "trajectory.speed".into(),
                    msg: "give exactly one of 'speed' (m/s) or 'speed_kmh'".into(),
                })
            }
        };
        let trajectory =
            Trajectory::new(start, direction, speed, length).map_err(|e| section_err("trajectory", line, e))?;

        let mut scatterers = Vec::new();
        for s in scatterer_sections {
            let mut r = Reader::new(Some(s), "scatterer");
            let position = r.required("position", p_vec3)?;
            let reflectivity = r.required("reflectivity", p_complex)?;
            let aperture = r.or("aperture", 1.0, p_f64)?;
            let range = r.or("active_range", vec![f64::NEG_INFINITY, f64::INFINITY], |s| p_fixed(s, 2))?;
            let line = r.line;
            r.finish()?;
            scatterers.push(
                Scatterer::new(position, reflectivity, aperture, (range[0], range[1]))
                    .map_err(|e| section_err("scatterer", line, e))?,
            );
        }

        let scenario = ScenarioConfig {
            grid,
            array,
            pilot_symbols,
            pilot_subcarriers,
            tx_power,
            snr_db,
            taps,
            guard,
            trajectory,
            bursts,
            slots_per_burst,
            scatterers,
        };
        scenario.validate().map_err(CliError::config_from)?;

        let mut r = sec("split");
        let split = SplitConfig {
            train_bursts: r.or("train_bursts", BurstSelection::Even, BurstSelection::parse)?,
            eval_bursts: r.or("eval_bursts", BurstSelection::Odd, BurstSelection::parse)?,
            train_symbols: r.or("train_symbols", vec![0], |s| p_list(s, p_usize))?,
        };
        r.finish()?;

        let mut r = sec("init");
        let d = InitConfig::default();
        let init_mode = r.or("mode", InitMode::Measured, |s| match s.to_ascii_lowercase().as_str() {
            "measured" => Ok(InitMode::Measured),
            "random" => Ok(InitMode::Random),
            _ => Err(format!("'{s}' is not an init mode (measured, random)")),
        })?;
        let init = InitConfig {
            peaks: r.or("peaks", d.peaks, p_usize)?,
            merge_radius: r.or("merge_radius", d.merge_radius, p_f64)?,
            floor_count: r.or("floor_count", d.floor_count, p_usize)?,
            jitter: r.or("jitter", d.jitter, p_f64)?,
            seed: 0,
            opacity: r.or("opacity", d.opacity, p_f64)?,
            scale: r.or("scale", d.scale, p_f64)?,
            los_radius: r.or("los_radius", d.los_radius, p_usize)?,
            min_rel_power: r.or("min_rel_power", d.min_rel_power, p_f64)?,
        };
        r.finish()?;
        init.validate().map_err(CliError::config_from)?;

        let mut r = sec("train");
        let d = TrainConfig::default();
        let (dl, dw, dr) = (d.lr, d.weights, d.render);
        let train = TrainConfig {
            epochs: r.or("epochs", d.epochs, p_usize)?,
            batch_size: r.or("batch_size", d.batch_size, p_usize)?,
            seed: 0,
            warmup_epochs: r.or("warmup_epochs", d.warmup_epochs, p_usize)?,
            start_epoch: 0,
            lr: LearningRates {
                opacity: r.or("lr_opacity", dl.opacity, p_f64)?,
                delay_residual: r.or("lr_delay", dl.delay_residual, p_f64)?,
                gain: r.or("lr_gain", dl.gain, p_f64)?,
                position: r.or("lr_position", dl.position, p_f64)?,
                scale: r.or("lr_scale", dl.scale, p_f64)?,
                los_gain: r.or("lr_los", dl.los_gain, p_f64)?,
                deformer: r.or("lr_deformer", dl.deformer, p_f64)?,
            },
            lr_decay: r.or("lr_decay", d.lr_decay, p_f64)?,
            weights: LossWeights {
                spec: r.or("w_spec", dw.spec, p_f64)?,
                marg: r.or("w_marg", dw.marg, p_f64)?,
                delay_marg: r.or("w_delay_marg", dw.delay_marg, p_f64)?,
                beam_marg: r.or("w_beam_marg", dw.beam_marg, p_f64)?,
                false_alarm: r.or("w_false", dw.false_alarm, p_f64)?,
                recall: r.or("w_recall", dw.recall, p_f64)?,
                los: r.or("w_los", dw.los, p_f64)?,
                support_threshold: r.or("support_threshold", dw.support_threshold, p_f64)?,
                los_radius: r.or("los_radius", dw.los_radius, p_usize)?,
            },
            render: RenderConfig {
                threshold: r.or("threshold", dr.threshold, p_f64)?,
                max_paths: r.or("max_paths", dr.max_paths, p_usize)?,
                kernel: r.or("kernel", dr.kernel, p_kernel)?,
                virtual_los: r.or("virtual_los", dr.virtual_los, p_bool)?,
            },
        };
        r.finish()?;
        train.validate().map_err(CliError::config_from)?;

        let mut r = sec("estimator");
        let d = OnlineConfig::default();
        let online = OnlineConfig {
            rel_eps: r.or("rel_eps", d.rel_eps, p_f64)?,
            alpha_window: r.or("alpha_window", d.alpha_window, p_usize)?,
            omp_atoms: r.or("omp_atoms", d.omp_atoms, p_usize)?,
            noise_seed: 0,
        };
        let methods = r.or("methods", Method::ALL.to_vec(), p_methods)?;
        r.finish()?;
        if !(online.rel_eps > 0.0) || online.omp_atoms == 0 || online.alpha_window < 2 {
            return Err(CliError::Config(
                "estimator: rel_eps must be positive, omp_atoms at least 1 and alpha_window at least 2".into(),
            ));
        }

        Ok(ExperimentConfig {
            seed,
            output_dir,
            scenario,
            split,
            init_mode,
            init,
            train,
            online,
            methods,
        }
        .with_seed(seed))
    }

    /// Sets the master seed and every seed derived from it.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.train.seed = seed;
        self.init.seed = seed ^ 0x1b87_3593;
        self.online.noise_seed = seed ^ 0x5bd1_e995;
        self
    }

    /// Canonical text form; parses back to an equal value.
    pub fn to_ini(&self) -> String {
        let s = &self.scenario;
        let mut o = String::new();
        let _ = writeln!(o, "seed = {}", self.seed);
        let _ = writeln!(o, "output_dir = {}", self.output_dir);
        let _ = writeln!(o, "\n[grid]");
        let _ = writeln!(o, "subcarriers = {}", s.grid.subcarriers);
        let _ = writeln!(o, "subcarrier_spacing = {:?}", s.grid.subcarrier_spacing);
        let _ = writeln!(o, "symbols_per_slot = {}", s.grid.symbols_per_slot);
        let _ = writeln!(o, "symbol_duration = {:?}", s.grid.symbol_duration);
        let _ = writeln!(o, "carrier_freq = {:?}", s.grid.carrier_freq);
        let _ = writeln!(o, "\n[array]");
        let _ = writeln!(o, "antennas = {}", s.array.antennas);
        let _ = writeln!(o, "spacing_wavelengths = {:?}", s.array.spacing_wavelengths);
        let _ = writeln!(o, "bs_position = {}", v3(&s.array.bs_position));
        let _ = writeln!(o, "broadside = {}", v3(&s.array.broadside));
        let _ = writeln!(o, "\n[pilots]");
        let _ = writeln!(o, "symbols = {}", join(&s.pilot_symbols));
        let _ = writeln!(o, "subcarriers = {}", join(&s.pilot_subcarriers));
        let _ = writeln!(o, "tx_power = {:?}", s.tx_power);
        match s.snr_db {
            Some(v) => writeln!(o, "snr_db = {v:?}"),
            None => writeln!(o, "snr_db = none"),
        }
        .ok();
        let _ = writeln!(o, "\n[window]");
        let _ = writeln!(o, "taps = {}", s.taps);
        let _ = writeln!(o, "guard = {}", s.guard);
        let t = &s.trajectory;
        let _ = writeln!(o, "\n[trajectory]");
        let _ = writeln!(o, "start = {}", v3(&t.start));
        let _ = writeln!(o, "direction = {}", v3(&t.direction));
        let _ = writeln!(o, "speed = {:?}", t.speed);
        let _ = writeln!(o, "length = {:?}", t.length);
        let _ = writeln!(o, "bursts = {}", s.bursts);
        let _ = writeln!(o, "slots_per_burst = {}", s.slots_per_burst);
        for sc in &s.scatterers {
            let _ = writeln!(o, "\n[scatterer]");
            let _ = writeln!(o, "position = {}", v3(&sc.position));
            let _ = writeln!(o, "reflectivity = {:?}, {:?}", sc.reflectivity.re, sc.reflectivity.im);
            let _ = writeln!(o, "aperture = {:?}", sc.aperture);
            let _ = writeln!(o, "active_range = {:?}, {:?}", sc.active_range.0, sc.active_range.1);
        }
        let _ = writeln!(o, "\n[split]");
        let _ = writeln!(o, "train_bursts = {}", self.split.train_bursts.render());
        let _ = writeln!(o, "eval_bursts = {}", self.split.eval_bursts.render());
        let _ = writeln!(o, "train_symbols = {}", join(&self.split.train_symbols));
        let i = &self.init;
        let _ = writeln!(o, "\n[init]");
        let mode = match self.init_mode {
            InitMode::Measured => "measured",
            InitMode::Random => "random",
        };
        let _ = writeln!(o, "mode = {mode}");
        let _ = writeln!(o, "peaks = {}", i.peaks);
        let _ = writeln!(o, "merge_radius = {:?}", i.merge_radius);
        let _ = writeln!(o, "floor_count = {}", i.floor_count);
        let _ = writeln!(o, "jitter = {:?}", i.jitter);
        let _ = writeln!(o, "opacity = {:?}", i.opacity);
        let _ = writeln!(o, "scale = {:?}", i.scale);
        let _ = writeln!(o, "los_radius = {}", i.los_radius);
        let _ = writeln!(o, "min_rel_power = {:?}", i.min_rel_power);
        let tr = &self.train;
        let _ = writeln!(o, "\n[train]");
        let _ = writeln!(o, "epochs = {}", tr.epochs);
        let _ = writeln!(o, "batch_size = {}", tr.batch_size);
        let _ = writeln!(o, "warmup_epochs = {}", tr.warmup_epochs);
        let _ = writeln!(o, "lr_decay = {:?}", tr.lr_decay);
        let _ = writeln!(o, "lr_opacity = {:?}", tr.lr.opacity);
        let _ = writeln!(o, "lr_delay = {:?}", tr.lr.delay_residual);
        let _ = writeln!(o, "lr_gain = {:?}", tr.lr.gain);
        let _ = writeln!(o, "lr_position = {:?}", tr.lr.position);
        let _ = writeln!(o, "lr_scale = {:?}", tr.lr.scale);
        let _ = writeln!(o, "lr_los = {:?}", tr.lr.los_gain);
        let _ = writeln!(o, "lr_deformer = {:?}", tr.lr.deformer);
        let w = &tr.weights;
        let _ = writeln!(o, "w_spec = {:?}", w.spec);
        let _ = writeln!(o, "w_marg = {:?}", w.marg);
        let _ = writeln!(o, "w_delay_marg = {:?}", w.delay_marg);
        let _ = writeln!(o, "w_beam_marg = {:?}", w.beam_marg);
        let _ = writeln!(o, "w_false = {:?}", w.false_alarm);
        let _ = writeln!(o, "w_recall = {:?}", w.recall);
        let _ = writeln!(o, "w_los = {:?}", w.los);
        let _ = writeln!(o, "support_threshold = {:?}", w.support_threshold);
        let _ = writeln!(o, "los_radius = {}", w.los_radius);
        let _ = writeln!(o, "threshold = {:?}", tr.render.threshold);
        let _ = writeln!(o, "max_paths = {}", tr.render.max_paths);
        let kernel = match tr.render.kernel {
            KernelMode::Leakage => "leakage",
            KernelMode::NearestBin => "nearest",
        };
        let _ = writeln!(o, "kernel = {kernel}");
        let _ = writeln!(o, "virtual_los = {}", tr.render.virtual_los);
        let _ = writeln!(o, "\n[estimator]");
        let _ = writeln!(o, "methods = {}", method_names(&self.methods));
        let _ = writeln!(o, "rel_eps = {:?}", self.online.rel_eps);
        let _ = writeln!(o, "alpha_window = {}", self.online.alpha_window);
        let _ = writeln!(o, "omp_atoms = {}", self.online.omp_atoms);
        o
    }
}

fn section_err(section: &str, line: usize, e: dbprior_core::Error) -> CliError {
    CliError::ConfigKey {
        line,
        key: format!("[{section}]"),
        msg: e.to_string(),
    }
}
