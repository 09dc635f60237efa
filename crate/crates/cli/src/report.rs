//! CSV and text outputs, all written through a temp file and a rename.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use dbprior_core::linalg::RMat;
use dbprior_core::online::{MethodSummary, SymbolRecord};
use dbprior_core::train::EpochRecord;

use crate::error::{CliError, Result};

/// Writes `bytes` to a sibling temp file, syncs it and renames it over
/// `path`, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        CliError::io(path, e)
    })
}

pub fn loss_csv(history: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,spec,marginal,false_alarm,recall,los,total\n");
    for r in history {
        let l = &r.loss;
        let _ = writeln!(
            s,
            "{},{:e},{:e},{:e},{:e},{:e},{:e}",
            r.epoch, l.spec, l.marginal, l.false_alarm, l.recall, l.los, l.total
        );
    }
    s
}

pub fn metrics_csv(records: &[SymbolRecord]) -> String {
    let mut s = String::from("snapshot,symbol,method,nmse_db,measured\n");
    for r in records {
        let _ = writeln!(s, "{},{},{},{:.6},{}", r.snapshot, r.symbol, r.method, r.nmse_db, u8::from(r.measured));
    }
    s
}

pub fn summary_csv(label: &str, rows: &[(String, MethodSummary)]) -> String {
    let mut s = format!("{label},mean_nmse_db,median_nmse_db,count\n");
    for (name, m) in rows {
        let _ = writeln!(s, "{name},{:.6},{:.6},{}", m.mean_db, m.median_db, m.count);
    }
    s
}

/// One row per delay tap, space-separated, exponent notation.
pub fn spectrum_dump(q: &RMat) -> String {
    let mut s = String::new();
    for r in 0..q.nrows() {
        let row: Vec<String> = (0..q.ncols()).map(|c| format!("{:e}", q[(r, c)])).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

pub fn parse_spectrum_dump(text: &str) -> std::result::Result<RMat, String> {
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split_whitespace().map(|v| v.parse::<f64>().map_err(|_| format!("bad value '{v}'"))).collect())
        .collect::<std::result::Result<_, _>>()?;
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err("ragged spectrum dump".into());
    }
    Ok(RMat::from_fn(rows.len(), cols, |r, c| rows[r][c]))
}
