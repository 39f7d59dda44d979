use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DetectorKind, SimConfig};
use crate::bidirectional::{detect_iw, detect_turbo};
use crate::channel::{
    add_awgn, build_dd_channel, build_time_channel, draw_channel, snr_to_gamma, ChannelGenParams,
};
use crate::detect::{
    detect_amp, detect_lmmse, detect_uamp, detect_uamp_mfic, DetectorReport, PriorTable,
    SvdFactors, SweepOrder, UnitaryModel,
};
use crate::error::{check_len, Result};
use crate::frame::{demodulate, modulate, ConstellationSpec};
use crate::matrix::CMatrix;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one trial, a pure function of its coordinates.
pub fn trial_seed(master_seed: u64, snr_db: f64, velocity: f64, trial_index: u64) -> u64 {
    [snr_db.to_bits(), velocity.to_bits(), trial_index]
        .into_iter()
        .fold(splitmix64(master_seed), |acc, word| splitmix64(acc ^ splitmix64(word)))
}

/// `(errors, total)` between two bit sequences.
pub fn ber_count(decided: &[u8], truth: &[u8]) -> Result<(u64, u64)> {
    check_len("bit sequence", truth.len(), decided.len())?;
    let errors = decided.iter().zip(truth).filter(|(a, b)| a != b).count();
    Ok((errors as u64, truth.len() as u64))
}

/// Outcome of one detector on one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectorTrial {
    pub detector: DetectorKind,
    pub bit_errors: u64,
    pub bits: u64,
    pub iterations: usize,
    pub theta_trace: Vec<f64>,
    /// Bit errors of the decision available after each iteration; empty
    /// unless snapshots were requested.
    pub iteration_errors: Vec<u64>,
    /// Set when the detector could not produce decisions for this frame.
    pub failure: Option<String>,
}

impl DetectorTrial {
    fn failed(detector: DetectorKind, reason: String) -> Self {
        Self {
            detector,
            bit_errors: 0,
            bits: 0,
            iterations: 0,
            theta_trace: Vec::new(),
            iteration_errors: Vec::new(),
            failure: Some(reason),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialResult {
    pub seed: u64,
    pub detectors: Vec<DetectorTrial>,
}

/// One frame pushed through the link: the shared realization every
/// detector of a trial consumes.
#[derive(Clone, Debug)]
pub struct LinkRealization {
    pub bits: Vec<u8>,
    pub symbols: Vec<Complex64>,
    pub h_dd: CMatrix,
    /// Delay-Doppler observation `y = H_DD x + ω`.
    pub y: Vec<Complex64>,
    pub gamma: f64,
}

/// Draws bits, channel and noise for one trial, in that order, from `seed`.
pub fn draw_link(cfg: &SimConfig, snr_db: f64, velocity: f64, seed: u64) -> Result<LinkRealization> {
    let frame = &cfg.frame;
    let spec = frame.constellation_spec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bits: Vec<u8> = (0..frame.bits_per_frame()).map(|_| rng.random::<bool>() as u8).collect();
    let symbols = spec.map_bits(&bits, frame.len())?;

    let mut profile = cfg.channel.clone();
    profile.v_max = velocity;
    let channel = draw_channel(&ChannelGenParams::for_frame(frame, &profile), &mut rng)?;
    let h_t = build_time_channel(&channel, frame.len())?;
    let h_dd = build_dd_channel(&h_t, frame.m, frame.n)?.matrix;

    let gamma = snr_to_gamma(snr_db, spec.mean_energy());
    let mut y_t = h_t.mul_vec(&modulate(&symbols, frame)?)?;
    add_awgn(&mut y_t, gamma, &mut rng);
    let y = demodulate(&y_t, frame)?;
    Ok(LinkRealization {
        bits,
        symbols,
        h_dd,
        y,
        gamma,
    })
}

/// Runs `detector` on a realization. `svd` must hold the factors of
/// `link.h_dd` for detectors that work on the rotated model.
pub fn run_detector(
    cfg: &SimConfig,
    detector: DetectorKind,
    link: &LinkRealization,
    svd: Option<&SvdFactors>,
    record_snapshots: bool,
) -> Result<DetectorReport> {
    let spec = cfg.frame.constellation_spec();
    let prior = PriorTable::uniform(link.y.len(), spec.size());
    let mut opts = cfg.detector_options();
    opts.record_snapshots = record_snapshots;
    let rotated = || -> Result<UnitaryModel> {
        match svd {
            Some(svd) => UnitaryModel::from_svd(svd, &link.y, link.gamma),
            None => UnitaryModel::from_svd(&SvdFactors::compute(&link.h_dd)?, &link.y, link.gamma),
        }
    };
    match detector {
        DetectorKind::Lmmse => detect_lmmse(&link.h_dd, &link.y, link.gamma, &spec),
        DetectorKind::Amp => detect_amp(&link.h_dd, &link.y, link.gamma, &spec, &prior, &opts),
        DetectorKind::Uamp => detect_uamp(&rotated()?, &spec, &prior, &opts),
        DetectorKind::UampMfic => detect_uamp_mfic(&rotated()?, &spec, &prior, &opts, &SweepOrder::Forward),
        DetectorKind::Turbo => detect_turbo(&rotated()?, &spec, &prior, &opts, &cfg.turbo),
        DetectorKind::Iw => detect_iw(&rotated()?, &spec, &prior, &opts),
    }
}

fn score(spec: &ConstellationSpec, truth: &[u8], decided: &[usize]) -> Result<u64> {
    ber_count(&spec.indices_to_bits(decided), truth).map(|(e, _)| e)
}

/// Runs every detector in `detectors` on the realization of one trial.
///
/// A detector that fails is reported through [`DetectorTrial::failure`]; the
/// remaining detectors still run. Errors are only returned when the
/// realization itself cannot be drawn.
pub fn run_trial_with(
    cfg: &SimConfig,
    detectors: &[DetectorKind],
    snr_db: f64,
    velocity: f64,
    trial_index: u64,
    record_snapshots: bool,
) -> Result<TrialResult> {
    let seed = trial_seed(cfg.master_seed, snr_db, velocity, trial_index);
    let link = draw_link(cfg, snr_db, velocity, seed)?;
    let spec = cfg.frame.constellation_spec();
    let svd = if detectors.iter().any(|d| d.needs_svd()) {
        Some(SvdFactors::compute(&link.h_dd))
    } else {
        None
    };

    let mut out = Vec::with_capacity(detectors.len());
    for &detector in detectors {
        let report = match (&svd, detector.needs_svd()) {
            (Some(Err(e)), true) => Err(e.to_string()),
            (Some(Ok(f)), true) => run_detector(cfg, detector, &link, Some(f), record_snapshots).map_err(|e| e.to_string()),
            _ => run_detector(cfg, detector, &link, None, record_snapshots).map_err(|e| e.to_string()),
        };
        let trial = match report {
            Ok(r) => {
                let iteration_errors = r
                    .snapshots
                    .iter()
                    .map(|s| score(&spec, &link.bits, s))
                    .collect::<Result<Vec<_>>>()?;
                DetectorTrial {
                    detector,
                    bit_errors: score(&spec, &link.bits, &r.decided_indices)?,
                    bits: link.bits.len() as u64,
                    iterations: r.iterations,
                    theta_trace: r.theta_trace,
                    iteration_errors,
                    failure: None,
                }
            }
            Err(reason) => DetectorTrial::failed(detector, reason),
        };
        out.push(trial);
    }
    Ok(TrialResult { seed, detectors: out })
}

/// Runs the configured detectors on one trial.
pub fn run_trial(cfg: &SimConfig, snr_db: f64, velocity: f64, trial_index: u64) -> Result<TrialResult> {
    run_trial_with(cfg, &cfg.detectors, snr_db, velocity, trial_index, false)
}
