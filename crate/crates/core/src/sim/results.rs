//! CSV result files and their metadata sidecar.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::sweep::{BerRecord, IterationRecord};
use super::{DetectorKind, SimConfig};
use crate::error::{Error, Result};

pub const RESULTS_HEADER: [&str; 9] = [
    "detector",
    "snr_db",
    "velocity_mps",
    "frames",
    "bits",
    "bit_errors",
    "frame_errors",
    "ber",
    "mean_iters",
];

pub const ITERATIONS_HEADER: [&str; 8] = [
    "detector",
    "snr_db",
    "velocity_mps",
    "iteration",
    "frames",
    "bits",
    "bit_errors",
    "ber",
];

/// Per-record details that do not fit the CSV schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordMetadata {
    pub detector: DetectorKind,
    pub snr_db: f64,
    pub velocity_mps: f64,
    pub censored: bool,
    pub failures: u64,
    pub theta_trace: Vec<f64>,
}

/// Contents of the `.meta.toml` sidecar written next to every results file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub generator: String,
    pub master_seed: u64,
    pub censored_points: usize,
    pub config: SimConfig,
    pub records: Vec<RecordMetadata>,
}

pub fn metadata_path(results: &Path) -> PathBuf {
    let mut name = results.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.toml");
    results.with_file_name(name)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn write_csv<const N: usize>(path: &Path, header: [&str; N], rows: impl Iterator<Item = [String; N]>) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.into_inner()
        .map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e.into_error(),
        })?
        .flush()
        .map_err(io_err(path))
}

/// Writes the records as CSV and the configuration plus per-record metadata
/// to the sidecar at [`metadata_path`]. Rows are written in the given order.
pub fn write_results(records: &[BerRecord], cfg: &SimConfig, path: &Path) -> Result<()> {
    write_csv(
        path,
        RESULTS_HEADER,
        records.iter().map(|r| {
            [
                r.detector.to_string(),
                r.snr_db.to_string(),
                r.velocity_mps.to_string(),
                r.frames.to_string(),
                r.bits.to_string(),
                r.bit_errors.to_string(),
                r.frame_errors.to_string(),
                format!("{:.16e}", r.ber),
                r.mean_iters.to_string(),
            ]
        }),
    )?;
    write_metadata(records, cfg, path)
}

/// Writes the sidecar for the results file at `path`.
pub fn write_metadata(records: &[BerRecord], cfg: &SimConfig, path: &Path) -> Result<()> {
    let meta = RunMetadata {
        generator: concat!("otfs-sim ", env!("CARGO_PKG_VERSION")).to_string(),
        master_seed: cfg.master_seed,
        censored_points: records.iter().filter(|r| r.censored).count(),
        config: cfg.clone(),
        records: records
            .iter()
            .map(|r| RecordMetadata {
                detector: r.detector,
                snr_db: r.snr_db,
                velocity_mps: r.velocity_mps,
                censored: r.censored,
                failures: r.failures,
                theta_trace: r.theta_trace.clone(),
            })
            .collect(),
    };
    let text = toml::to_string(&meta).map_err(|e| Error::Config(format!("cannot serialize metadata: {e}")))?;
    let meta_path = metadata_path(path);
    std::fs::write(&meta_path, text).map_err(io_err(&meta_path))
}

pub fn read_metadata(results: &Path) -> Result<RunMetadata> {
    let path = metadata_path(results);
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

#[derive(Deserialize)]
struct ResultRow {
    detector: DetectorKind,
    snr_db: f64,
    velocity_mps: f64,
    frames: u64,
    bits: u64,
    bit_errors: u64,
    frame_errors: u64,
    ber: f64,
    mean_iters: f64,
}

/// Parses a results CSV. Metadata from the sidecar is attached when it exists;
/// otherwise `theta_trace` and `failures` are empty and `censored` is unset.
pub fn read_results(path: &Path) -> Result<Vec<BerRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let headers = reader.headers().map_err(csv_err(path))?;
    if headers.iter().ne(RESULTS_HEADER) {
        return Err(Error::Config(format!(
            "{}: unexpected header, expected `{}`",
            path.display(),
            RESULTS_HEADER.join(",")
        )));
    }
    let meta = metadata_path(path).exists().then(|| read_metadata(path)).transpose()?;
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<ResultRow>().enumerate() {
        let row = row.map_err(csv_err(path))?;
        let extra = meta.as_ref().and_then(|m| {
            m.records
                .get(i)
                .filter(|e| e.detector == row.detector && e.snr_db == row.snr_db && e.velocity_mps == row.velocity_mps)
        });
        out.push(BerRecord {
            detector: row.detector,
            snr_db: row.snr_db,
            velocity_mps: row.velocity_mps,
            frames: row.frames,
            bits: row.bits,
            bit_errors: row.bit_errors,
            frame_errors: row.frame_errors,
            ber: row.ber,
            mean_iters: row.mean_iters,
            theta_trace: extra.map(|e| e.theta_trace.clone()).unwrap_or_default(),
            failures: extra.map_or(0, |e| e.failures),
            censored: extra.is_some_and(|e| e.censored),
        });
    }
    Ok(out)
}

/// Writes an iteration table. Callers wanting a sidecar pair this with
/// [`write_metadata`] for the final-iteration records.
pub fn write_iterations(records: &[IterationRecord], path: &Path) -> Result<()> {
    write_csv(
        path,
        ITERATIONS_HEADER,
        records.iter().map(|r| {
            [
                r.detector.to_string(),
                r.snr_db.to_string(),
                r.velocity_mps.to_string(),
                r.iteration.to_string(),
                r.frames.to_string(),
                r.bits.to_string(),
                r.bit_errors.to_string(),
                format!("{:.16e}", r.ber),
            ]
        }),
    )
}

#[derive(Deserialize)]
struct IterationRow {
    detector: DetectorKind,
    snr_db: f64,
    velocity_mps: f64,
    iteration: usize,
    frames: u64,
    bits: u64,
    bit_errors: u64,
    ber: f64,
}

pub fn read_iterations(path: &Path) -> Result<Vec<IterationRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err(path))?;
    reader
        .deserialize::<IterationRow>()
        .map(|row| {
            let r = row.map_err(csv_err(path))?;
            Ok(IterationRecord {
                detector: r.detector,
                snr_db: r.snr_db,
                velocity_mps: r.velocity_mps,
                iteration: r.iteration,
                frames: r.frames,
                bits: r.bits,
                bit_errors: r.bit_errors,
                ber: r.ber,
            })
        })
        .collect()
}

/// Whether a CSV file is an iteration table rather than a BER table.
pub fn is_iteration_table(path: &Path) -> Result<bool> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err(path))?;
    Ok(reader.headers().map_err(csv_err(path))?.iter().any(|h| h == "iteration"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(detector: DetectorKind, snr_db: f64, errors: u64) -> BerRecord {
        BerRecord {
            detector,
            snr_db,
            velocity_mps: 300.0 / 3.6,
            frames: 12,
            bits: 12 * 2048,
            bit_errors: errors,
            frame_errors: errors.min(12),
            ber: errors as f64 / (12.0 * 2048.0),
            mean_iters: 7.25,
            theta_trace: vec![0.1, 0.7, 1.0],
            failures: 1,
            censored: errors < 100,
        }
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let records = vec![record(DetectorKind::Amp, 8.0, 1234), record(DetectorKind::Iw, 12.5, 7)];
        let cfg = SimConfig::default();
        write_results(&records, &cfg, &path).unwrap();
        assert_eq!(read_results(&path).unwrap(), records);
        let meta = read_metadata(&path).unwrap();
        assert_eq!(meta.config, cfg);
        assert_eq!(meta.censored_points, 1);

        std::fs::remove_file(metadata_path(&path)).unwrap();
        let bare = read_results(&path).unwrap();
        assert_eq!(bare[0].bit_errors, 1234);
        assert!(bare[0].theta_trace.is_empty());
    }

    #[test]
    fn empty_file_has_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        write_results(&[], &SimConfig::default(), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, format!("{}\n", RESULTS_HEADER.join(",")));
        assert!(read_results(&path).unwrap().is_empty());
    }

    #[test]
    fn ber_keeps_full_precision() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let r = record(DetectorKind::Lmmse, 10.0, 3);
        write_results(std::slice::from_ref(&r), &SimConfig::default(), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let ber = text.lines().nth(1).unwrap().split(',').nth(7).unwrap();
        assert_eq!(ber, "1.2207031250000000e-4");
    }

    #[test]
    fn iteration_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("it.csv");
        let rows: Vec<_> = (1..=3)
            .map(|i| IterationRecord {
                detector: DetectorKind::Turbo,
                snr_db: 12.0,
                velocity_mps: 0.0,
                iteration: i,
                frames: 5,
                bits: 500,
                bit_errors: 10 - i as u64,
                ber: (10 - i) as f64 / 500.0,
            })
            .collect();
        write_iterations(&rows, &path).unwrap();
        assert!(is_iteration_table(&path).unwrap());
        assert_eq!(read_iterations(&path).unwrap(), rows);
    }

    #[test]
    fn missing_file_names_path() {
        let err = read_results(Path::new("/nonexistent/dir/r.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dir/r.csv"));
    }
}
