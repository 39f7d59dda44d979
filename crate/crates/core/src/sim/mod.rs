//! Monte-Carlo link simulation.
//!
//! A trial draws one frame of bits, one channel and one noise vector from a
//! seed derived from `(master_seed, snr, velocity, trial_index)` and runs every
//! selected detector on that same realization. Sweeps accumulate trials per
//! point until the error and frame targets are met.

mod config;
pub mod plot;
pub mod results;
mod sweep;
mod trial;

pub use config::{DetectorKind, SimConfig};
pub use results::{read_iterations, read_results, write_iterations, write_metadata, write_results};
pub use sweep::{
    sort_records, sweep_iterations, sweep_snr, sweep_velocity, BerRecord, IterationRecord, PointOutcome,
    Runner,
};
pub use trial::{
    ber_count, draw_link, run_detector, run_trial, run_trial_with, trial_seed, DetectorTrial, LinkRealization,
    TrialResult,
};
