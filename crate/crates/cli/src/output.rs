//! CSV rendering and atomic file writes.

use crate::error::CliError;
use spinchain::model::Trajectory;
use spinchain::observables::{fidelity, populations};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

/// 17 significant digits, enough to round-trip any double.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Columns: `t`, `Re_c{i}`/`Im_c{i}` per site, `P_{i}` per site,
/// `P_channel`, `P_total`, `fidelity`.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let n = traj.n_sites();
    let pops = populations(traj);
    let fid = fidelity(traj);
    let mut out = String::from("t");
    for i in 1..=n {
        write!(out, ",Re_c{i},Im_c{i}").unwrap();
    }
    for s in &pops.sites {
        write!(out, ",{}", s.label).unwrap();
    }
    writeln!(out, ",{},{},{}", pops.channel.label, pops.total.label, fid.label).unwrap();
    for (p, t) in traj.grid.values().iter().enumerate() {
        out.push_str(&num(*t));
        for c in &traj.amplitudes[p] {
            write!(out, ",{},{}", num(c.re), num(c.im)).unwrap();
        }
        for s in &pops.sites {
            write!(out, ",{}", num(s.values[p])).unwrap();
        }
        writeln!(out, ",{},{},{}", num(pops.channel.values[p]), num(pops.total.values[p]), num(fid.values[p])).unwrap();
    }
    out
}

/// Write through a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(contents).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as C64;
    use spinchain::model::{Provenance, TimeGrid};

    #[test]
    fn header_and_row() {
        let grid = TimeGrid::uniform(1.0, 2).unwrap();
        let row = vec![C64::new(0.6, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.8)];
        let traj = Trajectory {
            grid,
            amplitudes: vec![row.clone(), row],
            provenance: Provenance::LaplaceInversion,
            error_estimates: None,
        };
        let csv = trajectory_csv(&traj);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,Re_c1,Im_c1,Re_c2,Im_c2,Re_c3,Im_c3,P_1,P_2,P_3,P_channel,P_total,fidelity");
        assert_eq!(lines.len(), 3);
        let fields: Vec<f64> = lines[2].split(',').map(|f| f.parse().unwrap()).collect();
        assert_eq!(fields[0], 1.0);
        assert_eq!(fields[6], 0.8);
        assert!((fields[11] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub").join("a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
