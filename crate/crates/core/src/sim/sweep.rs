use rayon::prelude::*;

use super::trial::{run_trial_with, DetectorTrial, TrialResult};
use super::{DetectorKind, SimConfig};
use crate::error::{Error, Result};

/// Aggregated BER of one detector at one (SNR, velocity) point.
#[derive(Clone, Debug, PartialEq)]
pub struct BerRecord {
    pub detector: DetectorKind,
    pub snr_db: f64,
    pub velocity_mps: f64,
    pub frames: u64,
    pub bits: u64,
    pub bit_errors: u64,
    pub frame_errors: u64,
    pub ber: f64,
    pub mean_iters: f64,
    /// Mean θ after each iteration; a trace that stopped early contributes
    /// its final value to the remaining iterations.
    pub theta_trace: Vec<f64>,
    /// Frames the detector failed on; these are not counted in `frames`.
    pub failures: u64,
    /// The point stopped at the frame cap before reaching the error target.
    pub censored: bool,
}

/// BER after a given number of iterations.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub detector: DetectorKind,
    pub snr_db: f64,
    pub velocity_mps: f64,
    pub iteration: usize,
    pub frames: u64,
    pub bits: u64,
    pub bit_errors: u64,
    pub ber: f64,
}

pub(crate) fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Clone, Debug, Default)]
struct Tally {
    frames: u64,
    bits: u64,
    bit_errors: u64,
    frame_errors: u64,
    iterations: u64,
    failures: u64,
    theta_sum: Vec<f64>,
    iteration_errors: Vec<u64>,
}

impl Tally {
    fn add(&mut self, t: &DetectorTrial, n_iter: usize) {
        if t.failure.is_some() {
            self.failures += 1;
            return;
        }
        self.frames += 1;
        self.bits += t.bits;
        self.bit_errors += t.bit_errors;
        self.frame_errors += (t.bit_errors > 0) as u64;
        self.iterations += t.iterations as u64;
        if let Some(&last) = t.theta_trace.last() {
            self.theta_sum.resize(n_iter, 0.0);
            for (i, s) in self.theta_sum.iter_mut().enumerate() {
                *s += t.theta_trace.get(i).copied().unwrap_or(last);
            }
        }
        if !t.iteration_errors.is_empty() {
            self.iteration_errors.resize(t.iteration_errors.len(), 0);
            for (s, e) in self.iteration_errors.iter_mut().zip(&t.iteration_errors) {
                *s += e;
            }
        }
    }

    fn satisfied(&self, cfg: &SimConfig) -> bool {
        self.frames >= cfg.min_frames && self.bit_errors >= cfg.min_bit_errors
    }
}

/// Result of running one sweep point to its stopping rule.
#[derive(Clone, Debug, PartialEq)]
pub struct PointOutcome {
    pub records: Vec<BerRecord>,
    pub iterations: Vec<IterationRecord>,
    pub trials: u64,
}

type ProgressFn<'a> = Box<dyn Fn(&BerRecord) + Sync + 'a>;

/// Runs sweeps on a dedicated worker pool.
///
/// Trials are independent and dispatched in rounds of `batch_frames`; the
/// per-round results are folded in trial order, so the output does not depend
/// on the number of workers.
pub struct Runner<'a> {
    cfg: &'a SimConfig,
    pool: rayon::ThreadPool,
    progress: Option<ProgressFn<'a>>,
}

impl<'a> Runner<'a> {
    /// `threads = None` uses the machine's available parallelism.
    pub fn new(cfg: &'a SimConfig, threads: Option<usize>) -> Result<Self> {
        cfg.validate()?;
        let threads = match threads {
            Some(0) => return Err(Error::InvalidArgument("thread count must be at least 1".into())),
            Some(t) => t,
            None => std::thread::available_parallelism().map_or(1, |n| n.get()),
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot start {threads} worker threads: {e}")))?;
        Ok(Self {
            cfg,
            pool,
            progress: None,
        })
    }

    /// Called with every finished record.
    pub fn on_record(mut self, f: impl Fn(&BerRecord) + Sync + 'a) -> Self {
        self.progress = Some(Box::new(f));
        self
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }

    /// Runs all `detectors` on shared trials at one point until each of them
    /// has `min_frames` frames and `min_bit_errors` errors, or the frame cap
    /// is hit.
    pub fn run_point(
        &self,
        detectors: &[DetectorKind],
        snr_db: f64,
        velocity: f64,
        record_snapshots: bool,
    ) -> Result<PointOutcome> {
        let cfg = self.cfg;
        let mut tallies = vec![Tally::default(); detectors.len()];
        let mut trials = 0u64;
        while trials < cfg.max_frames && !tallies.iter().all(|t| t.satisfied(cfg)) {
            let end = (trials + cfg.batch_frames).min(cfg.max_frames);
            let batch: Vec<Result<TrialResult>> = self.pool.install(|| {
                (trials..end)
                    .into_par_iter()
                    .map(|i| run_trial_with(cfg, detectors, snr_db, velocity, i, record_snapshots))
                    .collect()
            });
            for trial in batch {
                for (tally, d) in tallies.iter_mut().zip(&trial?.detectors) {
                    tally.add(d, cfg.n_iter);
                }
            }
            trials = end;
        }

        let mut records = Vec::with_capacity(detectors.len());
        let mut iterations = Vec::new();
        for (&detector, t) in detectors.iter().zip(&tallies) {
            let record = BerRecord {
                detector,
                snr_db,
                velocity_mps: velocity,
                frames: t.frames,
                bits: t.bits,
                bit_errors: t.bit_errors,
                frame_errors: t.frame_errors,
                ber: ratio(t.bit_errors, t.bits),
                mean_iters: ratio(t.iterations, t.frames),
                theta_trace: t.theta_sum.iter().map(|s| s / t.frames.max(1) as f64).collect(),
                failures: t.failures,
                censored: t.bit_errors < cfg.min_bit_errors,
            };
            if let Some(f) = &self.progress {
                f(&record);
            }
            records.push(record);
            iterations.extend(t.iteration_errors.iter().enumerate().map(|(i, &e)| IterationRecord {
                detector,
                snr_db,
                velocity_mps: velocity,
                iteration: i + 1,
                frames: t.frames,
                bits: t.bits,
                bit_errors: e,
                ber: ratio(e, t.bits),
            }));
        }
        Ok(PointOutcome {
            records,
            iterations,
            trials,
        })
    }

    /// BER over `snr_grid_db` at velocity `channel.v_max`.
    pub fn sweep_snr(&self) -> Result<Vec<BerRecord>> {
        let mut out = Vec::new();
        for &snr in &self.cfg.snr_grid_db {
            out.extend(self.run_point(&self.cfg.detectors, snr, self.cfg.channel.v_max, false)?.records);
        }
        sort_records(&mut out);
        Ok(out)
    }

    /// BER over `velocity_grid × snr_grid_db`.
    pub fn sweep_velocity(&self) -> Result<Vec<BerRecord>> {
        let mut out = Vec::new();
        for &snr in &self.cfg.snr_grid_db {
            for &v in &self.cfg.velocity_grid {
                out.extend(self.run_point(&self.cfg.detectors, snr, v, false)?.records);
            }
        }
        sort_records(&mut out);
        Ok(out)
    }

    /// Iteration-resolved BER of the iterative detectors over `snr_grid_db`
    /// at velocity `channel.v_max`. The stopping rule applies to the errors
    /// after the last iteration.
    pub fn sweep_iterations(&self) -> Result<(Vec<BerRecord>, Vec<IterationRecord>)> {
        let detectors: Vec<DetectorKind> =
            self.cfg.detectors.iter().copied().filter(|d| d.is_iterative()).collect();
        if detectors.is_empty() {
            return Err(Error::Config("the iteration sweep needs at least one iterative detector".into()));
        }
        let mut records = Vec::new();
        let mut iterations = Vec::new();
        for &snr in &self.cfg.snr_grid_db {
            let point = self.run_point(&detectors, snr, self.cfg.channel.v_max, true)?;
            records.extend(point.records);
            iterations.extend(point.iterations);
        }
        sort_records(&mut records);
        iterations.sort_by(|a, b| {
            (a.detector, a.snr_db, a.velocity_mps, a.iteration)
                .partial_cmp(&(b.detector, b.snr_db, b.velocity_mps, b.iteration))
                .expect("grid values are finite")
        });
        Ok((records, iterations))
    }
}

/// Orders records by detector, then SNR, then velocity.
pub fn sort_records(records: &mut [BerRecord]) {
    records.sort_by(|a, b| {
        (a.detector, a.snr_db, a.velocity_mps)
            .partial_cmp(&(b.detector, b.snr_db, b.velocity_mps))
            .expect("grid values are finite")
    });
}

pub fn sweep_snr(cfg: &SimConfig) -> Result<Vec<BerRecord>> {
    Runner::new(cfg, None)?.sweep_snr()
}

pub fn sweep_velocity(cfg: &SimConfig) -> Result<Vec<BerRecord>> {
    Runner::new(cfg, None)?.sweep_velocity()
}

pub fn sweep_iterations(cfg: &SimConfig) -> Result<(Vec<BerRecord>, Vec<IterationRecord>)> {
    Runner::new(cfg, None)?.sweep_iterations()
}
