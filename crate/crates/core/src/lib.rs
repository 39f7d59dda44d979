//! Link-level simulation of OTFS (orthogonal time frequency space) systems.
//!
//! The crate covers the whole link: Gray-mapped QAM on a delay-Doppler grid,
//! OTFS modulation, doubly-dispersive multipath channels with fractional
//! Doppler, and a family of iterative detectors built around a serial
//! ("message feedback") interference-cancellation schedule on the unitarily
//! transformed observation model. A Monte-Carlo harness compares detectors on
//! paired realizations and writes BER tables.
//!
//! ```
//! use otfs_core::frame::{modulate, demodulate, OtfsFrameConfig, Modulation};
//!
//! let cfg = OtfsFrameConfig::new(4, 4, Modulation::Qpsk);
//! let spec = cfg.constellation_spec();
//! let bits = vec![0u8; cfg.bits_per_frame()];
//! let x = spec.map_bits(&bits, cfg.len()).unwrap();
//! let x_t = modulate(&x, &cfg).unwrap();
//! let back = demodulate(&x_t, &cfg).unwrap();
//! assert!((back[0] - x[0]).norm() < 1e-12);
//! ```

// Parameter checks are written `!(x >= 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bidirectional;
pub mod channel;
pub mod cli;
pub mod detect;
pub mod error;
pub mod frame;
pub mod matrix;
pub mod selftest;
pub mod sim;

pub use error::{Error, Result};
