//! CSV serialization, seed averaging and atomic file writes.

use std::fmt::Write as _;
use std::path::Path;

use asvrg_core::solvers::TraceRecord;
use sha2::{Digest, Sha256};

pub const CSV_HEADER: &str = "solver,seed,passes,objective,violation,seconds";

/// 17 significant digits, enough to round-trip every `f64`.
fn real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn trace_csv(records: &[TraceRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.solver,
            r.seed,
            real(r.passes),
            real(r.objective),
            real(r.violation),
            real(r.seconds)
        );
    }
    out
}

/// One row of the aggregate file.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanPoint {
    pub passes: f64,
    pub objective: f64,
    pub violation: f64,
    pub seconds: f64,
}

/// Mean over runs on the union of their pass values, each run contributing
/// its last record at or before the grid point. Grid points before a run's
/// first record use that first record.
pub fn mean_curve(runs: &[&[TraceRecord]]) -> Vec<MeanPoint> {
    let mut grid: Vec<f64> = runs.iter().flat_map(|r| r.iter().map(|x| x.passes)).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut cursors = vec![0usize; runs.len()];
    let k = runs.len() as f64;
    grid.into_iter()
        .map(|g| {
            let (mut o, mut v, mut s) = (0.0, 0.0, 0.0);
            for (run, cur) in runs.iter().zip(cursors.iter_mut()) {
                while *cur + 1 < run.len() && run[*cur + 1].passes <= g {
                    *cur += 1;
                }
                let r = &run[*cur];
                o += r.objective;
                v += r.violation;
                s += r.seconds;
            }
            MeanPoint { passes: g, objective: o / k, violation: v / k, seconds: s / k }
        })
        .collect()
}

pub fn aggregate_csv(curves: &[(String, Vec<MeanPoint>)]) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for (solver, curve) in curves {
        for p in curve {
            let _ = writeln!(
                out,
                "{solver},mean,{},{},{},{}",
                real(p.passes),
                real(p.objective),
                real(p.violation),
                real(p.seconds)
            );
        }
    }
    out
}

/// Hash of the CSV with the `seconds` column removed.
pub fn untimed_sha256(csv: &str) -> String {
    let mut h = Sha256::new();
    for line in csv.lines() {
        let cut = line.rfind(',').unwrap_or(line.len());
        h.update(&line.as_bytes()[..cut]);
        h.update(b"\n");
    }
    hex(&h.finalize())
}

pub fn sha256(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Writes to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(passes: f64, objective: f64) -> TraceRecord {
        TraceRecord { solver: "s".into(), seed: 0, passes, objective, violation: 0.0, seconds: 0.0 }
    }

    #[test]
    fn csv_round_trips_floats() {
        let v = [0.1 + 0.2, 1.0 / 3.0, 6.02214076e23, 5e-324];
        let recs: Vec<TraceRecord> = v.iter().map(|&x| rec(x, x)).collect();
        let text = trace_csv(&recs);
        assert!(text.starts_with("solver,seed,passes,objective,violation,seconds\n"));
        for (line, x) in text.lines().skip(1).zip(v) {
            let parsed: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
            assert_eq!(parsed.to_bits(), x.to_bits());
        }
    }

    #[test]
    fn locf_mean_on_union_grid() {
        let a = vec![rec(0.0, 4.0), rec(1.0, 2.0), rec(2.0, 1.0)];
        let b = vec![rec(0.0, 6.0), rec(1.5, 2.0)];
        let m = mean_curve(&[&a, &b]);
        let got: Vec<(f64, f64)> = m.iter().map(|p| (p.passes, p.objective)).collect();
        assert_eq!(got, vec![(0.0, 5.0), (1.0, 4.0), (1.5, 2.0), (2.0, 1.5)]);
    }

    #[test]
    fn untimed_hash_ignores_seconds() {
        let mut r = rec(1.0, 1.0);
        let a = trace_csv(std::slice::from_ref(&r));
        r.seconds = 3.5;
        let b = trace_csv(&[r]);
        assert_ne!(sha256(a.as_bytes()), sha256(b.as_bytes()));
        assert_eq!(untimed_sha256(&a), untimed_sha256(&b));
    }
}
