use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dbprior::config::ExperimentConfig;
use dbprior::container::{read_checkpoint, read_dataset};
use dbprior::pipeline;
use dbprior::report::parse_spectrum_dump;
use dbprior_core::radio::{ground_truth_spectrum, to_delay_beam};
use tempfile::TempDir;

const SMALL: &str = "\
seed = 11

[grid]
subcarriers = 64
subcarrier_spacing = 30e3
symbols_per_slot = 14

[array]
antennas = 8
bs_position = 0, -40, 0
broadside = 0, 1, 0

[pilots]
symbols = 0, 4, 7, 11
comb = 8

[window]
taps = 16
guard = 2

[trajectory]
start = -30, 0, 0
direction = 1, 0, 0
speed_kmh = 350
length = 60
bursts = 4

[scatterer]
position = 10, 30, 0
reflectivity = 0.7, 0.2
aperture = 20

[train]
epochs = 8

[estimator]
methods = geogs, zero, genie, omp
";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dbprior"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env_remove("GGCE_THREADS").output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(o: &Output) {
    assert!(o.status.success(), "exit {:?}: {}", o.status.code(), stderr(o));
}

/// Exits with `code` and prints exactly one line starting with `prefix`.
fn fails_with(o: &Output, code: i32, prefix: &str) -> String {
    assert_eq!(o.status.code(), Some(code), "stderr: {}", stderr(o));
    let e = stderr(o);
    assert_eq!(e.lines().count(), 1, "{e}");
    assert!(e.starts_with(prefix), "{e}");
    e
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new(config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("exp.ini"), config).unwrap();
        Self { dir }
    }

    fn p(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn s(&self, name: &str) -> String {
        self.p(name).to_string_lossy().into_owned()
    }

    fn simulate(&self, out: &str) -> Output {
        run(&["simulate", "--config", &self.s("exp.ini"), "--out", &self.s(out)])
    }

    fn train(&self, out: &str, extra: &[&str]) -> Output {
        let ds = self.s("o/dataset.ggce");
        let out = self.s(out);
        let mut args = vec!["train", "--dataset", &ds, "--out", &out];
        args.extend_from_slice(extra);
        run(&args)
    }
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

#[test]
fn minimal_simulation_has_one_slot_of_snapshots() {
    let cfg = SMALL.replace("bursts = 4", "bursts = 1");
    let f = Fixture::new(&cfg);
    let o = f.simulate("o");
    ok(&o);
    assert!(stdout(&o).contains("snapshots: 14"), "{}", stdout(&o));
    assert!(stdout(&o).contains("paths per snapshot"));
    assert_eq!(read_dataset(&f.p("o/dataset.ggce")).unwrap().len(), 14);
}

#[test]
fn config_errors_name_the_key_and_exit_2() {
    let f = Fixture::new(&SMALL.replace("antennas = 8\n", ""));
    let e = fails_with(&f.simulate("o"), 2, "E_CONFIG:");
    assert!(e.contains("array.antennas"), "{e}");

    let f = Fixture::new(&SMALL.replace("taps = 16", "taps = x"));
    let e = fails_with(&f.simulate("o"), 2, "E_CONFIG:");
    assert!(e.contains("line 18") && e.contains("window.taps"), "{e}");

    let e = fails_with(&run(&["simulate"]), 2, "E_CONFIG:");
    assert!(e.contains("--config"), "{e}");
    fails_with(&run(&["frobnicate"]), 2, "E_CONFIG:");
}

#[test]
fn data_errors_exit_3_with_offsets() {
    let f = Fixture::new(SMALL);
    let e = fails_with(&run(&["train", "--dataset", &f.s("missing.ggce")]), 3, "E_DATA:");
    assert!(e.contains("missing.ggce"), "{e}");

    ok(&f.simulate("o"));
    let mut bytes = read(&f.p("o/dataset.ggce"));
    bytes.truncate(bytes.len() - 7);
    std::fs::write(f.p("cut.ggce"), &bytes).unwrap();
    let e = fails_with(&run(&["train", "--dataset", &f.s("cut.ggce")]), 3, "E_DATA:");
    assert!(e.contains("at byte"), "{e}");

    // a checkpoint is not a dataset
    ok(&f.train("o", &[]));
    let e = fails_with(&run(&["train", "--dataset", &f.s("o/checkpoint.ggce")]), 3, "E_DATA:");
    assert!(e.contains("at byte 8"), "{e}");
}

#[test]
fn thread_variable_is_validated() {
    let f = Fixture::new(SMALL);
    ok(&f.simulate("o"));
    let o = bin()
        .args(["train", "--dataset", &f.s("o/dataset.ggce"), "--out", &f.s("o")])
        .env("GGCE_THREADS", "many")
        .output()
        .unwrap();
    fails_with(&o, 2, "E_CONFIG:");
    let o = bin()
        .args(["train", "--dataset", &f.s("o/dataset.ggce"), "--out", &f.s("t1")])
        .env("GGCE_THREADS", "1")
        .output()
        .unwrap();
    ok(&o);
    ok(&f.train("t4", &[]));
    assert_eq!(read(&f.p("t1/checkpoint.ggce")), read(&f.p("t4/checkpoint.ggce")));
}

#[test]
fn zero_epochs_store_the_initialization() {
    let f = Fixture::new(&SMALL.replace("epochs = 8", "epochs = 0"));
    ok(&f.simulate("o"));
    ok(&f.train("o", &[]));
    let ckpt = read_checkpoint(&f.p("o/checkpoint.ggce")).unwrap();
    assert!(ckpt.history.is_empty());
    let cfg = ExperimentConfig::from_file(&f.p("exp.ini")).unwrap();
    let ds = read_dataset(&f.p("o/dataset.ggce")).unwrap();
    let samples = pipeline::training_samples(&cfg, &ds).unwrap();
    assert_eq!(ckpt.model, pipeline::initial_model(&cfg, &ds, &samples).unwrap());
    let csv = std::fs::read_to_string(f.p("o/loss.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
}

#[test]
fn resumed_training_continues_the_history() {
    let f = Fixture::new(SMALL);
    ok(&f.simulate("o"));
    ok(&f.train("a", &[]));
    let first = f.s("a/checkpoint.ggce");
    ok(&f.train("b", &["--checkpoint", &first]));
    let csv = std::fs::read_to_string(f.p("b/loss.csv")).unwrap();
    let epochs: Vec<usize> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(epochs, (1..=16).collect::<Vec<_>>());
    let a = std::fs::read_to_string(f.p("a/loss.csv")).unwrap();
    assert!(csv.starts_with(&a), "resumed history rewrote earlier epochs");
}

#[test]
fn evaluate_writes_one_row_per_method_and_symbol() {
    let f = Fixture::new(SMALL);
    ok(&f.simulate("o"));
    ok(&f.train("o", &[]));
    let (ds, ck) = (f.s("o/dataset.ggce"), f.s("o/checkpoint.ggce"));
    let o = run(&["evaluate", "--dataset", &ds, "--checkpoint", &ck, "--out", &f.s("e")]);
    ok(&o);
    let metrics = std::fs::read_to_string(f.p("e/metrics.csv")).unwrap();
    // odd bursts 1 and 3, one slot each
    assert_eq!(metrics.lines().count(), 1 + 4 * 2 * 14);
    assert_eq!(metrics.lines().next().unwrap(), "snapshot,symbol,method,nmse_db,measured");
    let summary = std::fs::read_to_string(f.p("e/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);
    assert_eq!(stdout(&o), summary);

    let o = run(&["evaluate", "--dataset", &ds, "--methods", "zero,omp", "--out", &f.s("e2")]);
    ok(&o);
    let metrics = std::fs::read_to_string(f.p("e2/metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1 + 2 * 2 * 14);

    let e = fails_with(&run(&["evaluate", "--dataset", &ds, "--methods", "zero,best"]), 2, "E_CONFIG:");
    assert!(e.contains("geogs, zero, genie, omp"), "{e}");
    fails_with(&run(&["evaluate", "--dataset", &ds, "--methods", ""]), 2, "E_CONFIG:");
    let e = fails_with(&run(&["evaluate", "--dataset", &ds, "--methods", "geogs"]), 2, "E_CONFIG:");
    assert!(e.contains("checkpoint"), "{e}");
}

/// A single LoS path one tap away at broadside sits on both grids, so a
/// noiseless genie estimate is exact up to roundoff.
#[test]
fn noiseless_genie_is_near_exact() {
    // c / (64 * 30 kHz)
    let tap_m = 299_792_458.0 / (64.0 * 30e3);
    let cfg = SMALL
        .replace("comb = 8", "comb = 8\nsnr_db = none")
        .replace("bs_position = 0, -40, 0", &format!("bs_position = 0, {}, 0", -tap_m))
        .replace("start = -30, 0, 0", "start = 0, 0, 0")
        .replace("length = 60", "length = 1")
        .replace("bursts = 4", "bursts = 1\n\n[split]\ntrain_bursts = all\neval_bursts = all")
        .replace("[scatterer]\nposition = 10, 30, 0\nreflectivity = 0.7, 0.2\naperture = 20\n", "");
    let f = Fixture::new(&cfg);
    ok(&f.simulate("o"));
    let o = run(&["evaluate", "--dataset", &f.s("o/dataset.ggce"), "--methods", "genie", "--out", &f.s("e")]);
    ok(&o);
    let line = stdout(&o).lines().nth(1).unwrap().to_string();
    let median: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
    assert!(median <= -60.0, "{line}");
}

#[test]
fn render_dumps_prior_and_ground_truth() {
    let f = Fixture::new(SMALL);
    ok(&f.simulate("o"));
    ok(&f.train("o", &[]));
    let (ds_path, ck) = (f.s("o/dataset.ggce"), f.s("o/checkpoint.ggce"));
    let ds = read_dataset(&f.p("o/dataset.ggce")).unwrap();
    // burst 1 lies between the two training bursts
    let s = &ds.snapshots[16];
    let pos = format!("{},{},{}", s.ue_position.x, s.ue_position.y, s.ue_position.z);
    let o = run(&["render", "--checkpoint", &ck, "--dataset", &ds_path, "--position", &pos, "--out", &f.s("r")]);
    ok(&o);
    assert!(stderr(&o).is_empty(), "{}", stderr(&o));
    let q = parse_spectrum_dump(&std::fs::read_to_string(f.p("r/spectrum.txt")).unwrap()).unwrap();
    assert_eq!(q.shape(), (16, 8));
    let gt = parse_spectrum_dump(&std::fs::read_to_string(f.p("r/spectrum_gt.txt")).unwrap()).unwrap();
    let expect = ground_truth_spectrum(&to_delay_beam(&s.h, &ds.window).unwrap()).q;
    assert!((gt - &expect).abs().max() <= 1e-12 * expect.max());

    let o = run(&["render", "--checkpoint", &ck, "--position", "400,0,0", "--out", &f.s("r2")]);
    ok(&o);
    assert!(stderr(&o).starts_with("warning:"), "{}", stderr(&o));
    assert!(f.p("r2/spectrum.txt").exists());
    fails_with(&run(&["render", "--checkpoint", &ck, "--position", "1,2"]), 2, "E_CONFIG:");
}

#[test]
fn los_only_prior_renders_a_single_dominant_bin() {
    let cfg = SMALL
        .replace("[scatterer]\nposition = 10, 30, 0\nreflectivity = 0.7, 0.2\naperture = 20\n", "")
        .replace("epochs = 8", "epochs = 0\nthreshold = 1");
    let f = Fixture::new(&cfg);
    ok(&f.simulate("o"));
    ok(&f.train("o", &[]));
    // threshold 1 deactivates every Gaussian; at broadside the LoS is on the
    // beam grid and a quarter tap off the delay grid
    let o =run(&["render", "--checkpoint", &f.s("o/checkpoint.ggce"), "--position", "0,0,0", "--out", &f.s("r")]);
    ok(&o);
    let q = parse_spectrum_dump(&std::fs::read_to_string(f.p("r/spectrum.txt")).unwrap()).unwrap();
    let mut v: Vec<f64> = q.iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    assert!(v[0] > 2.0 * v[1], "top bins {:?}", &v[..3]);
}

#[test]
fn ablation_has_four_rows() {
    let f = Fixture::new(&SMALL.replace("epochs = 8", "epochs = 4"));
    let o = run(&["ablate", "--config", &f.s("exp.ini"), "--out", &f.s("a")]);
    ok(&o);
    let csv = std::fs::read_to_string(f.p("a/ablation.csv")).unwrap();
    let names: Vec<&str> = csv.lines().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(names, ["variant", "full", "no_virtual_los", "no_init_no_los", "no_leakage_kernel"]);
}

#[test]
fn gradcheck_passes() {
    let f = Fixture::new(SMALL);
    let o = run(&["gradcheck", "--config", &f.s("exp.ini")]);
    ok(&o);
    assert!(stdout(&o).contains("samples pass"), "{}", stdout(&o));
}

#[test]
fn echoed_config_reparses_and_seed_overrides() {
    let f = Fixture::new(SMALL);
    ok(&f.simulate("o"));
    let original = ExperimentConfig::from_file(&f.p("exp.ini")).unwrap();
    assert_eq!(ExperimentConfig::from_file(&f.p("o/config.ini")).unwrap(), original);
    let ds = read_dataset(&f.p("o/dataset.ggce")).unwrap();
    assert_eq!(ExperimentConfig::parse(&ds.config_echo).unwrap(), original);

    ok(&run(&["simulate", "--config", &f.s("exp.ini"), "--seed", "99", "--out", &f.s("s")]));
    let reseeded = ExperimentConfig::from_file(&f.p("s/config.ini")).unwrap();
    assert_eq!(reseeded, original.clone().with_seed(99));
    assert_ne!(read(&f.p("s/dataset.ggce")), read(&f.p("o/dataset.ggce")));
}

#[test]
fn identical_runs_are_byte_identical() {
    let f = Fixture::new(SMALL);
    for out in ["x", "y"] {
        ok(&f.simulate(out));
        let ds = f.s(&format!("{out}/dataset.ggce"));
        ok(&run(&["train", "--dataset", &ds, "--out", &f.s(out)]));
        let ck = f.s(&format!("{out}/checkpoint.ggce"));
        ok(&run(&["evaluate", "--dataset", &ds, "--checkpoint", &ck, "--out", &f.s(out)]));
    }
    for name in ["dataset.ggce", "checkpoint.ggce", "loss.csv", "metrics.csv", "summary.csv", "config.ini"] {
        assert_eq!(read(&f.p(&format!("x/{name}"))), read(&f.p(&format!("y/{name}"))), "{name}");
    }
}
