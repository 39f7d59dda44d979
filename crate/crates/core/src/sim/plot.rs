//! Plain columnar `.dat` files for external plotting tools.
//!
//! Each file starts with a `#` header naming the columns; the first column is
//! the abscissa and every further column is one detector's BER, `nan` where
//! a point is missing.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::results::{is_iteration_table, read_iterations, read_results};
use super::DetectorKind;
use crate::error::{Error, Result};

fn key(x: f64) -> u64 {
    // Grid values are finite; ordering by bit pattern is wrong for negatives,
    // so shift to an order-preserving encoding.
    let b = x.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

struct Series {
    detectors: Vec<DetectorKind>,
    /// abscissa key -> (abscissa, detector -> ber)
    rows: BTreeMap<u64, (f64, BTreeMap<DetectorKind, f64>)>,
}

impl Series {
    fn new() -> Self {
        Self {
            detectors: Vec::new(),
            rows: BTreeMap::new(),
        }
    }

    fn push(&mut self, x: f64, detector: DetectorKind, ber: f64) {
        if !self.detectors.contains(&detector) {
            self.detectors.push(detector);
            self.detectors.sort();
        }
        self.rows.entry(key(x)).or_insert_with(|| (x, BTreeMap::new())).1.insert(detector, ber);
    }

    fn render(&self, abscissa: &str) -> String {
        let mut out = format!("# {abscissa}");
        for d in &self.detectors {
            write!(out, " {d}").unwrap();
        }
        out.push('\n');
        for (x, bers) in self.rows.values() {
            write!(out, "{x}").unwrap();
            for d in &self.detectors {
                match bers.get(d) {
                    Some(b) => write!(out, " {b:.6e}").unwrap(),
                    None => out.push_str(" nan"),
                }
            }
            out.push('\n');
        }
        out
    }
}

fn write_file(dir: &Path, name: String, body: String, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, body).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })?;
    written.push(path);
    Ok(())
}

fn snr_tag(snr: f64) -> String {
    format!("snr{snr}dB")
}

fn velocity_tag(v: f64) -> String {
    format!("v{:.0}kmh", v * 3.6)
}

/// Converts a results CSV (BER table or iteration table) into `.dat` files
/// under `out_dir` and returns their paths.
///
/// An iteration table yields one BER-vs-iteration file per (SNR, velocity).
/// A BER table yields BER-vs-SNR files per velocity and, when it spans more
/// than one velocity, BER-vs-velocity files per SNR.
pub fn emit_plot_data(results: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();

    if is_iteration_table(results)? {
        let mut groups: BTreeMap<(u64, u64), (f64, f64, Series)> = BTreeMap::new();
        for r in read_iterations(results)? {
            groups
                .entry((key(r.snr_db), key(r.velocity_mps)))
                .or_insert_with(|| (r.snr_db, r.velocity_mps, Series::new()))
                .2
                .push(r.iteration as f64, r.detector, r.ber);
        }
        for (snr, v, series) in groups.into_values() {
            let name = format!("ber_vs_iteration_{}_{}.dat", snr_tag(snr), velocity_tag(v));
            write_file(out_dir, name, series.render("iteration"), &mut written)?;
        }
        return Ok(written);
    }

    let records = read_results(results)?;
    let mut by_velocity: BTreeMap<u64, (f64, Series)> = BTreeMap::new();
    let mut by_snr: BTreeMap<u64, (f64, Series)> = BTreeMap::new();
    for r in &records {
        by_velocity
            .entry(key(r.velocity_mps))
            .or_insert_with(|| (r.velocity_mps, Series::new()))
            .1
            .push(r.snr_db, r.detector, r.ber);
        by_snr
            .entry(key(r.snr_db))
            .or_insert_with(|| (r.snr_db, Series::new()))
            .1
            .push(r.velocity_mps * 3.6, r.detector, r.ber);
    }
    for (v, series) in by_velocity.values() {
        let name = format!("ber_vs_snr_{}.dat", velocity_tag(*v));
        write_file(out_dir, name, series.render("snr_db"), &mut written)?;
    }
    if by_velocity.len() > 1 {
        for (snr, series) in by_snr.values() {
            let name = format!("ber_vs_velocity_{}.dat", snr_tag(*snr));
            write_file(out_dir, name, series.render("velocity_kmh"), &mut written)?;
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{write_iterations, write_results, BerRecord, IterationRecord, SimConfig};

    fn rec(d: DetectorKind, snr: f64, v: f64, ber: f64) -> BerRecord {
        BerRecord {
            detector: d,
            snr_db: snr,
            velocity_mps: v,
            frames: 1,
            bits: 100,
            bit_errors: (ber * 100.0) as u64,
            frame_errors: 1,
            ber,
            mean_iters: 1.0,
            theta_trace: Vec::new(),
            failures: 0,
            censored: false,
        }
    }

    #[test]
    fn key_preserves_order() {
        let xs = [-3.5, -0.0, 0.0, 1.0, 12.0];
        for w in xs.windows(2) {
            assert!(key(w[0]) <= key(w[1]));
        }
    }

    #[test]
    fn ber_tables() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("r.csv");
        let v1 = 100.0 / 3.6;
        let v2 = 500.0 / 3.6;
        let records = vec![
            rec(DetectorKind::Amp, 8.0, v1, 0.1),
            rec(DetectorKind::Amp, 8.0, v2, 0.08),
            rec(DetectorKind::Iw, 8.0, v1, 0.01),
            rec(DetectorKind::Iw, 12.0, v1, 0.001),
        ];
        write_results(&records, &SimConfig::default(), &csv).unwrap();
        let files = emit_plot_data(&csv, &dir.path().join("plots")).unwrap();
        let names: Vec<_> = files.iter().map(|p| p.file_name().unwrap().to_str().unwrap().to_string()).collect();
        assert_eq!(
            names,
            [
                "ber_vs_snr_v100kmh.dat",
                "ber_vs_snr_v500kmh.dat",
                "ber_vs_velocity_snr8dB.dat",
                "ber_vs_velocity_snr12dB.dat"
            ]
        );
        let text = std::fs::read_to_string(&files[0]).unwrap();
        assert_eq!(text, "# snr_db amp iw\n8 1.000000e-1 1.000000e-2\n12 nan 1.000000e-3\n");
    }

    #[test]
    fn iteration_tables() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("it.csv");
        let rows: Vec<_> = (1..=2)
            .map(|i| IterationRecord {
                detector: DetectorKind::UampMfic,
                snr_db: 12.0,
                velocity_mps: 0.0,
                iteration: i,
                frames: 1,
                bits: 10,
                bit_errors: 3 - i as u64,
                ber: (3 - i) as f64 / 10.0,
            })
            .collect();
        write_iterations(&rows, &csv).unwrap();
        let files = emit_plot_data(&csv, dir.path()).unwrap();
        assert_eq!(files.len(), 1);
        let text = std::fs::read_to_string(&files[0]).unwrap();
        assert_eq!(text, "# iteration uamp-mfic\n1 2.000000e-1\n2 1.000000e-1\n");
    }
}
