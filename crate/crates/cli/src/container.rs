//! GGCE little-endian binary container for datasets and checkpoints.
//!
//! Layout: magic `GGCE`, `u32` version, `u32` kind (1 dataset, 2 checkpoint),
//! `u32` record count, then records of `[u8; 4]` tag, `u64` payload length
//! and payload. Complex matrices are stored column-major as interleaved
//! `(re, im)` f64 pairs; text is a `u64` length followed by UTF-8 bytes.
//! Every value round-trips bit for bit.

use std::path::Path;

use dbprior_core::linalg::CMat;
use dbprior_core::model::PriorModel;
use dbprior_core::prior::{DeformerParams, GaussianPrimitive, InputNormalization, ResidualBounds, SceneMap};
use dbprior_core::radio::{ArrayGeometry, CfrSnapshot, DelayWindow, OfdmGrid, PilotPattern};
use dbprior_core::scene::{ChannelDataset, PathComponent, PathKind};
use dbprior_core::train::{EpochRecord, LossBreakdown};
use dbprior_core::Vec3;
use num_complex::Complex64;

use crate::error::{CliError, Result};
use crate::report::write_atomic;

pub const MAGIC: &[u8; 4] = b"GGCE";
pub const VERSION: u32 = 1;
const KIND_DATASET: u32 = 1;
const KIND_CHECKPOINT: u32 = 2;

#[derive(Default)]
struct Enc(Vec<u8>);

impl Enc {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn vec3(&mut self, v: &Vec3) {
        self.f64(v.x);
        self.f64(v.y);
        self.f64(v.z);
    }
    fn str(&mut self, s: &str) {
        self.usize(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }
    fn usizes(&mut self, v: &[usize]) {
        self.usize(v.len());
        v.iter().for_each(|&x| self.usize(x));
    }
    fn cmat(&mut self, m: &CMat) {
        self.usize(m.nrows());
        self.usize(m.ncols());
        for z in m.iter() {
            self.f64(z.re);
            self.f64(z.im);
        }
    }
}

struct Dec<'a> {
    buf: &'a [u8],
    pos: usize,
    base: u64,
    path: &'a Path,
}

impl<'a> Dec<'a> {
    fn fail(&self, msg: impl Into<String>) -> CliError {
        CliError::Format {
            path: self.path.to_path_buf(),
            offset: self.base + self.pos as u64,
            msg: msg.into(),
        }
    }

    fn bytes(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(self.fail(format!("truncated {what}")));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes(1, "byte")?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(4, "u32")?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(8, "u64")?.try_into().expect("8 bytes")))
    }
    fn usize(&mut self) -> Result<usize> {
        let at = self.pos;
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| {
            self.pos = at;
            self.fail("length does not fit in memory")
        })
    }
    /// A count of items each at least `item_bytes` long.
    fn count(&mut self, item_bytes: usize) -> Result<usize> {
        let at = self.pos;
        let n = self.usize()?;
        if n.saturating_mul(item_bytes.max(1)) > self.buf.len() - self.pos {
            self.pos = at;
            return Err(self.fail(format!("count {n} exceeds the remaining payload")));
        }
        Ok(n)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes(8, "f64")?.try_into().expect("8 bytes")))
    }
    fn vec3(&mut self) -> Result<Vec3> {
        Ok(Vec3::new(self.f64()?, self.f64()?, self.f64()?))
    }
    fn str(&mut self) -> Result<String> {
        let n = self.count(1)?;
        let at = self.pos;
        let b = self.bytes(n, "text")?;
        String::from_utf8(b.to_vec()).map_err(|_| {
            self.pos = at;
            self.fail("text block is not UTF-8")
        })
    }
    fn usizes(&mut self) -> Result<Vec<usize>> {
        let n = self.count(8)?;
        (0..n).map(|_| self.usize()).collect()
    }
    fn cmat(&mut self) -> Result<CMat> {
        let rows = self.usize()?;
        let at = self.pos;
        let cols = self.usize()?;
        let cells = rows.checked_mul(cols).filter(|c| c.saturating_mul(16) <= self.buf.len() - self.pos);
        let Some(cells) = cells else {
            self.pos = at;
            return Err(self.fail(format!("matrix {rows}x{cols} exceeds the remaining payload")));
        };
        let mut data = Vec::with_capacity(cells);
        for _ in 0..cells {
            data.push(Complex64::new(self.f64()?, self.f64()?));
        }
        Ok(CMat::from_vec(rows, cols, data))
    }
    fn done(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(self.fail(format!("{} unexpected trailing bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

fn encode(kind: u32, records: &[(&[u8; 4], Enc)]) -> Vec<u8> {
    let mut out = Enc::default();
    out.0.extend_from_slice(MAGIC);
    out.u32(VERSION);
    out.u32(kind);
    out.u32(records.len() as u32);
    for (tag, payload) in records {
        out.0.extend_from_slice(*tag);
        out.usize(payload.0.len());
        out.0.extend_from_slice(&payload.0);
    }
    out.0
}

/// Splits a container into `(tag, payload decoder)` pairs.
fn decode<'a>(buf: &'a [u8], path: &'a Path, kind: u32) -> Result<Vec<([u8; 4], Dec<'a>)>> {
    let mut d = Dec {
        buf,
        pos: 0,
        base: 0,
        path,
    };
    if d.bytes(4, "magic")? != MAGIC {
        d.pos = 0;
        return Err(d.fail("bad magic (expected GGCE)"));
    }
    let at = d.pos;
    let version = d.u32()?;
    if version != VERSION {
        d.pos = at;
        return Err(d.fail(format!("unsupported version {version}")));
    }
    let at = d.pos;
    let k = d.u32()?;
    if k != kind {
        d.pos = at;
        let name = |k| match k {
            KIND_DATASET => "dataset",
            KIND_CHECKPOINT => "checkpoint",
            _ => "unknown",
        };
        return Err(d.fail(format!("file holds a {} container, expected a {}", name(k), name(kind))));
    }
    let n = d.u32()?;
    let mut out = Vec::new();
    for _ in 0..n {
        let tag: [u8; 4] = d.bytes(4, "record tag")?.try_into().expect("4 bytes");
        let len = d.count(1)?;
        let start = d.pos;
        d.bytes(len, "record payload")?;
        out.push((
            tag,
            Dec {
                buf: &buf[start..start + len],
                pos: 0,
                base: start as u64,
                path,
            },
        ));
    }
    d.done()?;
    Ok(out)
}

fn take<'a>(records: &mut Vec<([u8; 4], Dec<'a>)>, tag: &[u8; 4], path: &Path, end: u64) -> Result<Dec<'a>> {
    match records.iter().position(|(t, _)| t == tag) {
        Some(i) => Ok(records.remove(i).1),
        None => Err(CliError::Format {
            path: path.to_path_buf(),
            offset: end,
            msg: format!("missing record {}", String::from_utf8_lossy(tag)),
        }),
    }
}

fn reject_unknown(records: &[([u8; 4], Dec<'_>)]) -> Result<()> {
    match records.first() {
        None => Ok(()),
        Some((tag, d)) => Err(CliError::Format {
            path: d.path.to_path_buf(),
            offset: d.base - 12,
            msg: format!("unexpected record {}", String::from_utf8_lossy(tag)),
        }),
    }
}

fn invalid(d: &Dec<'_>, e: dbprior_core::Error) -> CliError {
    d.fail(e.to_string())
}

pub fn encode_dataset(ds: &ChannelDataset) -> Vec<u8> {
    let mut conf = Enc::default();
    conf.str(&ds.config_echo);

    let mut geom = Enc::default();
    let g = &ds.grid;
    geom.usize(g.subcarriers);
    geom.f64(g.subcarrier_spacing);
    geom.usize(g.symbols_per_slot);
    geom.f64(g.symbol_duration);
    geom.f64(g.carrier_freq);
    let a = &ds.array;
    geom.usize(a.antennas);
    geom.f64(a.spacing_wavelengths);
    geom.vec3(&a.bs_position);
    geom.vec3(&a.broadside);
    let p = &ds.pattern;
    geom.usizes(&p.pilot_symbols);
    geom.usizes(&p.pilot_subcarriers);
    geom.f64(p.tx_power);
    geom.f64(p.noise_var);
    geom.usize(ds.window.taps);
    geom.usize(ds.window.guard);
    geom.usize(ds.slots_per_burst);

    let mut snap = Enc::default();
    snap.usize(ds.snapshots.len());
    for (s, paths) in ds.snapshots.iter().zip(&ds.paths) {
        snap.usize(s.slot_index);
        snap.usize(s.symbol_index);
        snap.vec3(&s.ue_position);
        snap.cmat(&s.h);
        snap.usize(paths.len());
        for pc in paths {
            snap.f64(pc.delay);
            snap.f64(pc.beam_coord);
            snap.f64(pc.complex_gain.re);
            snap.f64(pc.complex_gain.im);
            snap.f64(pc.doppler);
            snap.u8(match pc.kind {
                PathKind::Los => 0,
                PathKind::Nlos => 1,
            });
        }
    }
    encode(KIND_DATASET, &[(b"CONF", conf), (b"GEOM", geom), (b"SNAP", snap)])
}

pub fn decode_dataset(buf: &[u8], path: &Path) -> Result<ChannelDataset> {
    let mut recs = decode(buf, path, KIND_DATASET)?;
    let end = buf.len() as u64;
    let mut conf = take(&mut recs, b"CONF", path, end)?;
    let mut geom = take(&mut recs, b"GEOM", path, end)?;
    let mut snap = take(&mut recs, b"SNAP", path, end)?;
    reject_unknown(&recs)?;

    let config_echo = conf.str()?;
    conf.done()?;

    let d = &mut geom;
    let grid = OfdmGrid::new(d.usize()?, d.f64()?, d.usize()?, d.f64()?, d.f64()?).map_err(|e| invalid(d, e))?;
    let array = ArrayGeometry::new(d.usize()?, d.f64()?, d.vec3()?, d.vec3()?).map_err(|e| invalid(d, e))?;
    let pattern =
        PilotPattern::new(&grid, d.usizes()?, d.usizes()?, d.f64()?, d.f64()?).map_err(|e| invalid(d, e))?;
    let window = DelayWindow::new(&grid, d.usize()?, d.usize()?).map_err(|e| invalid(d, e))?;
    let slots_per_burst = d.usize()?;
    d.done()?;

    let d = &mut snap;
    let n = d.count(1)?;
    let mut snapshots = Vec::with_capacity(n);
    let mut paths = Vec::with_capacity(n);
    for _ in 0..n {
        let slot = d.usize()?;
        let symbol = d.usize()?;
        let pos = d.vec3()?;
        let at = d.pos;
        let h = d.cmat()?;
        if h.shape() != (grid.subcarriers, array.antennas) {
            d.pos = at;
            return Err(d.fail(format!("snapshot has shape {:?}, expected {}x{}", h.shape(), grid.subcarriers, array.antennas)));
        }
        snapshots.push(CfrSnapshot::new(h, pos, symbol, slot).map_err(|e| invalid(d, e))?);
        let np = d.count(41)?;
        let mut list = Vec::with_capacity(np);
        for _ in 0..np {
            let (delay, beam_coord, re, im, doppler) = (d.f64()?, d.f64()?, d.f64()?, d.f64()?, d.f64()?);
            let kind = match d.u8()? {
                0 => PathKind::Los,
                1 => PathKind::Nlos,
                k => {
                    d.pos -= 1;
                    return Err(d.fail(format!("unknown path kind {k}")));
                }
            };
            list.push(PathComponent {
                delay,
                beam_coord,
                complex_gain: Complex64::new(re, im),
                doppler,
                kind,
            });
        }
        paths.push(list);
    }
    d.done()?;
    Ok(ChannelDataset {
        grid,
        array,
        pattern,
        window,
        slots_per_burst,
        snapshots,
        paths,
        config_echo,
    })
}

/// Trained model plus its loss history and the config that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config_echo: String,
    pub model: PriorModel,
    pub history: Vec<EpochRecord>,
}

pub fn encode_checkpoint(c: &Checkpoint) -> Vec<u8> {
    let mut conf = Enc::default();
    conf.str(&c.config_echo);

    let map = &c.model.map;
    let mut smap = Enc::default();
    smap.usize(map.primitives.len());
    smap.f64(map.los_gain_raw);
    smap.vec3(&map.bs_position);
    for g in &map.primitives {
        smap.vec3(&g.mu);
        smap.f64(g.scale);
        smap.f64(g.opacity_logit);
        smap.f64(g.delay_residual);
        smap.f64(g.gain_raw);
    }

    let def = &c.model.deformer;
    let mut defm = Enc::default();
    defm.f64(def.bounds.opacity);
    defm.f64(def.bounds.delay);
    defm.f64(def.bounds.gain);
    defm.vec3(&def.normalization.center);
    defm.f64(def.normalization.extent);
    defm.usize(def.weights.len());
    def.weights.iter().for_each(|&w| defm.f64(w));

    let mut hist = Enc::default();
    hist.usize(c.history.len());
    for r in &c.history {
        hist.usize(r.epoch);
        let l = &r.loss;
        for v in [l.spec, l.marginal, l.false_alarm, l.recall, l.los, l.total] {
            hist.f64(v);
        }
    }
    encode(
        KIND_CHECKPOINT,
        &[(b"CONF", conf), (b"SMAP", smap), (b"DEFM", defm), (b"HIST", hist)],
    )
}

pub fn decode_checkpoint(buf: &[u8], path: &Path) -> Result<Checkpoint> {
    let mut recs = decode(buf, path, KIND_CHECKPOINT)?;
    let end = buf.len() as u64;
    let mut conf = take(&mut recs, b"CONF", path, end)?;
    let mut smap = take(&mut recs, b"SMAP", path, end)?;
    let mut defm = take(&mut recs, b"DEFM", path, end)?;
    let mut hist = take(&mut recs, b"HIST", path, end)?;
    reject_unknown(&recs)?;

    let config_echo = conf.str()?;
    conf.done()?;

    let d = &mut smap;
    let n = d.count(56)?;
    let los = d.f64()?;
    let bs = d.vec3()?;
    let mut prims = Vec::with_capacity(n);
    for _ in 0..n {
        let at = d.pos;
        let g = GaussianPrimitive {
            mu: d.vec3()?,
            scale: d.f64()?,
            opacity_logit: d.f64()?,
            delay_residual: d.f64()?,
            gain_raw: d.f64()?,
        };
        if let Err(e) = g.validate() {
            d.pos = at;
            return Err(invalid(d, e));
        }
        prims.push(g);
    }
    let map = SceneMap::new(prims, los, bs).map_err(|e| invalid(d, e))?;
    d.done()?;

    let d = &mut defm;
    let bounds = ResidualBounds::new(d.f64()?, d.f64()?, d.f64()?).map_err(|e| invalid(d, e))?;
    let norm = InputNormalization::new(d.vec3()?, d.f64()?).map_err(|e| invalid(d, e))?;
    let nw = d.count(8)?;
    let weights = (0..nw).map(|_| d.f64()).collect::<Result<Vec<_>>>()?;
    let deformer = DeformerParams::from_weights(weights, bounds, norm).map_err(|e| invalid(d, e))?;
    d.done()?;

    let d = &mut hist;
    let n = d.count(56)?;
    let mut history = Vec::with_capacity(n);
    for _ in 0..n {
        let epoch = d.usize()?;
        let loss = LossBreakdown {
            spec: d.f64()?,
            marginal: d.f64()?,
            false_alarm: d.f64()?,
            recall: d.f64()?,
            los: d.f64()?,
            total: d.f64()?,
        };
        history.push(EpochRecord { epoch, loss });
    }
    d.done()?;
    Ok(Checkpoint {
        config_echo,
        model: PriorModel { map, deformer },
        history,
    })
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn write_dataset(path: &Path, ds: &ChannelDataset) -> Result<()> {
    write_atomic(path, &encode_dataset(ds))
}

pub fn read_dataset(path: &Path) -> Result<ChannelDataset> {
    decode_dataset(&read_file(path)?, path)
}

pub fn write_checkpoint(path: &Path, c: &Checkpoint) -> Result<()> {
    write_atomic(path, &encode_checkpoint(c))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode_checkpoint(&read_file(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{tests::MINIMAL, ExperimentConfig};
    use dbprior_core::prior::DeformerParams;
    use dbprior_core::scene::generate_dataset;

    fn dataset() -> ChannelDataset {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        let mut ds = generate_dataset(&cfg.scenario).unwrap();
        ds.config_echo = cfg.to_ini();
        ds
    }

    fn checkpoint() -> Checkpoint {
        let prims = vec![
            GaussianPrimitive {
                mu: Vec3::new(1.0, 2.5, -0.125),
                scale: 0.7,
                opacity_logit: -0.3,
                delay_residual: 1.1e-7,
                gain_raw: 0.1 + 0.2,
            };
            3
        ];
        let map = SceneMap::new(prims, 1.0 / 3.0, Vec3::new(0.0, -50.0, 0.0)).unwrap();
        let mut deformer = DeformerParams::new(
            ResidualBounds::new(2.0, 6.5e-8, 1.0).unwrap(),
            InputNormalization::new(Vec3::new(3.0, 0.0, 0.0), 60.0).unwrap(),
            5,
        );
        deformer.randomize_output(0.1, 9);
        let history = (1..=3)
            .map(|e| EpochRecord {
                epoch: e,
                loss: LossBreakdown {
                    spec: 0.1 * e as f64,
                    marginal: f64::MIN_POSITIVE,
                    false_alarm: 1e-300,
                    recall: 0.0,
                    los: 2.0,
                    total: std::f64::consts::PI,
                },
            })
            .collect();
        Checkpoint {
            config_echo: "seed = 1\n".into(),
            model: PriorModel { map, deformer },
            history,
        }
    }

    #[test]
    fn dataset_round_trip_is_bit_exact() {
        let ds = dataset();
        let bytes = encode_dataset(&ds);
        assert_eq!(&bytes[..4], b"GGCE");
        let back = decode_dataset(&bytes, Path::new("mem")).unwrap();
        assert_eq!(back, ds);
        assert_eq!(encode_dataset(&back), bytes);
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let c = checkpoint();
        let bytes = encode_checkpoint(&c);
        let back = decode_checkpoint(&bytes, Path::new("mem")).unwrap();
        assert_eq!(back, c);
        assert_eq!(encode_checkpoint(&back), bytes);
    }

    fn offset_of(r: Result<impl std::fmt::Debug>) -> u64 {
        match r.unwrap_err() {
            CliError::Format { offset, .. } => offset,
            e => panic!("expected a format error, got {e}"),
        }
    }

    #[test]
    fn malformed_inputs_report_offsets() {
        let bytes = encode_dataset(&dataset());
        let p = Path::new("mem");
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert_eq!(offset_of(decode_dataset(&bad, p)), 0);
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert_eq!(offset_of(decode_dataset(&bad, p)), 4);
        assert_eq!(offset_of(decode_checkpoint(&bytes, p)), 8);
        // truncation inside the snapshot record
        let cut = bytes.len() - 100;
        let off = offset_of(decode_dataset(&bytes[..cut], p));
        assert!(off > 16 && off <= cut as u64, "{off}");
        let mut extra = bytes.clone();
        extra.push(0);
        assert_eq!(offset_of(decode_dataset(&extra, p)), bytes.len() as u64);
        let e = decode_dataset(&bad, p).unwrap_err();
        assert_eq!(e.exit_code(), 3);
        assert!(e.to_string().contains("byte 4"));
    }

    #[test]
    fn corrupt_counts_do_not_allocate() {
        let c = checkpoint();
        let mut bytes = encode_checkpoint(&c);
        // first SMAP field is the primitive count
        let conf_len = u64::from_le_bytes(bytes[20..28].try_into().unwrap()) as usize;
        let smap_payload = 16 + 12 + conf_len + 12;
        bytes[smap_payload..smap_payload + 8].copy_from_slice(&u64::MAX.to_le_bytes());
        assert_eq!(offset_of(decode_checkpoint(&bytes, Path::new("mem"))), smap_payload as u64);
    }
}
