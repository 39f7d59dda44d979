//! OTFS frame geometry and the delay-Doppler <-> time-domain transforms.
//!
//! A frame is an `M x N` delay-Doppler grid vectorized column-major: grid entry
//! `(m, n)` lives at index `n * M + m`. With a rectangular pulse the
//! ISFFT+Heisenberg chain collapses to `(F_N^H ⊗ I_M)`, i.e. a unitary inverse
//! DFT along the Doppler axis of every delay row, and demodulation is the
//! matching forward DFT.

pub mod constellation;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

pub use constellation::{ConstellationSpec, Modulation};

use crate::error::{check_len, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OtfsFrameConfig {
    /// Sub-carriers (delay bins).
    pub m: usize,
    /// Time slots (Doppler bins).
    pub n: usize,
    /// Sub-carrier spacing in Hz.
    pub delta_f: f64,
    /// Carrier frequency in Hz.
    pub f_c: f64,
    pub constellation: Modulation,
}

impl Default for OtfsFrameConfig {
    fn default() -> Self {
        Self {
            m: 32,
            n: 16,
            delta_f: 15e3,
            f_c: 4e9,
            constellation: Modulation::Qam16,
        }
    }
}

impl OtfsFrameConfig {
    pub fn new(m: usize, n: usize, constellation: Modulation) -> Self {
        Self {
            m,
            n,
            constellation,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::InvalidParameter(format!(
                "frame dimensions must be positive (M = {}, N = {})",
                self.m, self.n
            )));
        }
        if !(self.delta_f > 0.0) || !(self.f_c > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sub-carrier spacing and carrier frequency must be positive (delta_f = {}, f_c = {})",
                self.delta_f, self.f_c
            )));
        }
        Ok(())
    }

    /// Total number of symbols / samples per frame.
    pub fn len(&self) -> usize {
        self.m * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn constellation_spec(&self) -> ConstellationSpec {
        ConstellationSpec::new(self.constellation)
    }

    pub fn bits_per_frame(&self) -> usize {
        self.len() * self.constellation_spec().bits_per_symbol()
    }

    /// Time-domain sample period in seconds.
    pub fn sample_period(&self) -> f64 {
        1.0 / (self.m as f64 * self.delta_f)
    }
}

/// Applies a unitary length-`n` DFT along the Doppler axis of every delay row
/// of a column-major `m x n` grid, in place.
pub(crate) struct DopplerTransform {
    m: usize,
    n: usize,
    fft: std::sync::Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    rows: Vec<Complex64>,
}

impl DopplerTransform {
    pub(crate) fn new(m: usize, n: usize, direction: FftDirection) -> Self {
        let fft = FftPlanner::new().plan_fft(n, direction);
        let scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        Self {
            m,
            n,
            fft,
            scratch,
            rows: vec![Complex64::new(0.0, 0.0); m * n],
        }
    }

    pub(crate) fn apply(&mut self, grid: &mut [Complex64]) {
        let (m, n) = (self.m, self.n);
        debug_assert_eq!(grid.len(), m * n);
        if n == 1 {
            return;
        }
        // Transpose so every delay row is contiguous, batch-FFT, transpose back.
        for col in 0..n {
            for row in 0..m {
                self.rows[row * n + col] = grid[col * m + row];
            }
        }
        self.fft.process_with_scratch(&mut self.rows, &mut self.scratch);
        let scale = 1.0 / (n as f64).sqrt();
        for col in 0..n {
            for row in 0..m {
                grid[col * m + row] = self.rows[row * n + col] * scale;
            }
        }
    }
}

/// `x_T = (F_N^H ⊗ I_M) x`.
pub fn modulate(x: &[Complex64], cfg: &OtfsFrameConfig) -> Result<Vec<Complex64>> {
    check_len("modulate input", cfg.len(), x.len())?;
    let mut out = x.to_vec();
    DopplerTransform::new(cfg.m, cfg.n, FftDirection::Inverse).apply(&mut out);
    Ok(out)
}

/// `y = (F_N ⊗ I_M) y_T`; exact inverse of [`modulate`].
pub fn demodulate(y_t: &[Complex64], cfg: &OtfsFrameConfig) -> Result<Vec<Complex64>> {
    check_len("demodulate input", cfg.len(), y_t.len())?;
    let mut out = y_t.to_vec();
    DopplerTransform::new(cfg.m, cfg.n, FftDirection::Forward).apply(&mut out);
    Ok(out)
}
