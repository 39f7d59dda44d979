//! Symbol detectors for the delay-Doppler observation model.
//!
//! The message-passing detectors share one engine ([`engine`]) and differ only
//! in schedule: the serial message-feedback schedule lets each symbol see the
//! extrinsic messages already produced in the current sweep, while the
//! parallel schedule (UAMP on the unitary model, AMP on the raw model) only
//! consumes the previous sweep's messages. Linear MMSE and an exhaustive MAP
//! oracle round out the set.

pub mod engine;
pub mod lmmse;
pub mod model;
pub mod oracle;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::frame::ConstellationSpec;

pub use engine::{
    detect_amp, detect_uamp, detect_uamp_mfic, factor_to_variable, variable_update, BeliefState,
    FactorMessages, FactorState, MessagePassing, Schedule,
};
pub use lmmse::detect_lmmse;
pub use model::{unitary_transform, SvdFactors, UnitaryModel};
pub use oracle::map_oracle_marginals;

/// Floor applied to every variance-like quantity (η̂, τ, 𝓝 + γ).
pub const VARIANCE_FLOOR: f64 = 1e-12;
/// Channel entries with `|H_dc|^2` below this carry no message.
pub const ABS2_FLOOR: f64 = 1e-14;
pub const DEFAULT_CONFIDENCE: f64 = 0.01;

/// Per-symbol probability tables, one row of `q` entries per symbol.
#[derive(Clone, Debug, PartialEq)]
pub struct PriorTable {
    q: usize,
    probs: Vec<f64>,
}

impl PriorTable {
    pub fn uniform(n_symbols: usize, q: usize) -> Self {
        Self {
            q,
            probs: vec![1.0 / q as f64; n_symbols * q],
        }
    }

    /// Builds a table from rows, normalizing each one.
    pub fn from_probs(q: usize, mut probs: Vec<f64>) -> Result<Self> {
        if q == 0 || !probs.len().is_multiple_of(q) {
            return Err(Error::Dimension {
                context: "prior table",
                expected: q,
                got: probs.len(),
            });
        }
        for row in probs.chunks_mut(q) {
            if row.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
                return Err(Error::InvalidArgument("prior probabilities must be finite and non-negative".into()));
            }
            let sum: f64 = row.iter().sum();
            if sum <= 0.0 {
                return Err(Error::InvalidArgument("prior row sums to zero".into()));
            }
            row.iter_mut().for_each(|p| *p /= sum);
        }
        Ok(Self { q, probs })
    }

    pub fn alphabet_size(&self) -> usize {
        self.q
    }

    pub fn n_symbols(&self) -> usize {
        self.probs.len() / self.q
    }

    pub fn row(&self, c: usize) -> &[f64] {
        &self.probs[c * self.q..(c + 1) * self.q]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }
}

/// Order in which the serial schedule visits symbols.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SweepOrder {
    Forward,
    Backward,
    Custom(Vec<usize>),
}

impl SweepOrder {
    pub fn indices(&self, n: usize) -> Result<Vec<usize>> {
        match self {
            SweepOrder::Forward => Ok((0..n).collect()),
            SweepOrder::Backward => Ok((0..n).rev().collect()),
            SweepOrder::Custom(order) => {
                check_len("sweep order", n, order.len())?;
                let mut seen = vec![false; n];
                for &c in order {
                    if c >= n || std::mem::replace(&mut seen[c], true) {
                        return Err(Error::InvalidArgument(format!(
                            "sweep order is not a permutation of 0..{n} (offending entry {c})"
                        )));
                    }
                }
                Ok(order.clone())
            }
        }
    }
}

/// When the frozen posterior behind the final decisions is refreshed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FreezeRule {
    /// Whenever θ does not drop below the previous iteration's value.
    #[default]
    NonDecreasing,
    /// Only when θ strictly exceeds the previous iteration's value. While θ
    /// stays flat (e.g. at 0 in low SNR) the decisions keep using the first
    /// iteration's posterior.
    Strict,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectorOptions {
    pub n_iter: usize,
    /// Confidence threshold of the convergence indicator.
    pub rho_th: f64,
    pub freeze: FreezeRule,
    /// Weight of the previous extrinsic mean when damping; 0 disables damping.
    pub damping: f64,
    /// Keep the decisions available after every iteration.
    pub record_snapshots: bool,
}

impl Default for DetectorOptions {
    fn default() -> Self {
        Self {
            n_iter: 20,
            rho_th: DEFAULT_CONFIDENCE,
            freeze: FreezeRule::default(),
            damping: 0.0,
            record_snapshots: false,
        }
    }
}

impl DetectorOptions {
    pub fn with_iterations(n_iter: usize) -> Self {
        Self {
            n_iter,
            ..Self::default()
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.n_iter == 0 {
            return Err(Error::InvalidArgument("at least one iteration is required".into()));
        }
        if !(0.0..1.0).contains(&self.rho_th) {
            return Err(Error::InvalidArgument(format!("confidence threshold {} outside [0, 1)", self.rho_th)));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::InvalidArgument(format!("damping {} outside [0, 1)", self.damping)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectorReport {
    pub decided_indices: Vec<usize>,
    pub decided: Vec<Complex64>,
    /// Posterior tables behind the decisions, row per symbol.
    pub posteriors: Vec<f64>,
    pub theta_trace: Vec<f64>,
    pub iterations: usize,
    pub means: Vec<Complex64>,
    pub variances: Vec<f64>,
    /// Decisions after iterations `1..=n_iter`; the last state is repeated
    /// after an early stop. Empty unless requested.
    pub snapshots: Vec<Vec<usize>>,
}

impl DetectorReport {
    pub(crate) fn from_indices(spec: &ConstellationSpec, decided_indices: Vec<usize>) -> Self {
        let decided = decided_indices.iter().map(|&i| spec.point(i)).collect();
        Self {
            decided_indices,
            decided,
            posteriors: Vec::new(),
            theta_trace: Vec::new(),
            iterations: 0,
            means: Vec::new(),
            variances: Vec::new(),
            snapshots: Vec::new(),
        }
    }
}

/// Fraction of symbols whose largest posterior probability is at least `1 - rho_th`.
pub fn convergence_indicator(posteriors: &[f64], q: usize, rho_th: f64) -> f64 {
    let n = posteriors.len() / q;
    if n == 0 {
        return 1.0;
    }
    let confident = posteriors
        .chunks(q)
        .filter(|row| row.iter().cloned().fold(f64::NEG_INFINITY, f64::max) >= 1.0 - rho_th)
        .count();
    confident as f64 / n as f64
}

/// Row-wise argmax; ties go to the lowest alphabet index.
pub fn decide(posteriors: &[f64], q: usize) -> Vec<usize> {
    posteriors
        .chunks(q)
        .map(|row| {
            let mut best = 0;
            for (i, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

/// Freeze-and-stop bookkeeping shared by every detector that follows the
/// convergence-indicator rule: the frozen posterior is refreshed according to
/// a [`FreezeRule`] comparing θ with the previous iteration's θ.
#[derive(Clone, Debug)]
pub(crate) struct FreezeTracker {
    q: usize,
    rho_th: f64,
    rule: FreezeRule,
    prev_theta: f64,
    pub(crate) frozen: Vec<f64>,
    pub(crate) theta_trace: Vec<f64>,
    pub(crate) snapshots: Vec<Vec<usize>>,
    record: bool,
}

impl FreezeTracker {
    pub(crate) fn new(q: usize, opts: &DetectorOptions) -> Self {
        Self {
            q,
            rho_th: opts.rho_th,
            rule: opts.freeze,
            // Nothing is frozen yet, so the first iteration always freezes.
            prev_theta: f64::NEG_INFINITY,
            frozen: Vec::new(),
            theta_trace: Vec::new(),
            snapshots: Vec::new(),
            record: opts.record_snapshots,
        }
    }

    /// Records one iteration; returns `true` once every symbol is confident.
    pub(crate) fn observe(&mut self, posterior: &[f64]) -> bool {
        let theta = convergence_indicator(posterior, self.q, self.rho_th);
        let refresh = match self.rule {
            FreezeRule::NonDecreasing => theta >= self.prev_theta,
            FreezeRule::Strict => theta > self.prev_theta,
        };
        if refresh {
            self.frozen.clear();
            self.frozen.extend_from_slice(posterior);
        }
        self.prev_theta = theta;
        self.theta_trace.push(theta);
        if self.record {
            self.snapshots.push(decide(&self.frozen, self.q));
        }
        theta >= 1.0
    }

    pub(crate) fn pad_snapshots(&mut self, n_iter: usize) {
        if let Some(last) = self.snapshots.last().cloned() {
            self.snapshots.resize(n_iter, last);
        }
    }
}
