//! Fusing a forward-order and a backward-order serial detector.
//!
//! The turbo scheme alternates the two directions and hands each one the
//! other's *extrinsic* probability table as its prior. The iterative-weight
//! scheme runs both directions side by side and merges their Gaussian
//! posterior estimates per symbol with an MMSE weighting factor.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::detect::{
    decide, DetectorOptions, DetectorReport, FreezeTracker, MessagePassing, PriorTable, Schedule,
    SweepOrder, UnitaryModel, VARIANCE_FLOOR,
};
use crate::error::{check_len, Result};
use crate::frame::ConstellationSpec;

/// Prior entries are floored here before being divided out of a posterior.
pub const PRIOR_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TurboOptions {
    /// Sweeps of each directional detector per half-exchange.
    pub n_inner: usize,
    /// Keep each detector's messages between outer iterations instead of
    /// restarting it from the Gaussian projection of its new prior.
    pub warm_start: bool,
}

impl Default for TurboOptions {
    fn default() -> Self {
        Self {
            n_inner: 1,
            warm_start: false,
        }
    }
}

/// `P_E ∝ P / P_D`, row by row.
pub fn extrinsic_split(posterior: &[f64], prior: &[f64], q: usize) -> Vec<f64> {
    let mut out: Vec<f64> = posterior
        .iter()
        .zip(prior)
        .map(|(&p, &d)| p / d.max(PRIOR_FLOOR))
        .collect();
    for row in out.chunks_mut(q) {
        let s: f64 = row.iter().sum();
        if s > 0.0 && s.is_finite() {
            row.iter_mut().for_each(|p| *p /= s);
        } else {
            row.iter_mut().for_each(|p| *p = 1.0 / q as f64);
        }
    }
    out
}

/// `E[η̂^f η̂^b] / sqrt(E[η̂^f] E[η̂^b])` over symbols, clamped to `[0, 1]`.
pub fn correlation_coefficient(eta_f: &[f64], eta_b: &[f64]) -> f64 {
    let n = eta_f.len().min(eta_b.len());
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    let cross = eta_f.iter().zip(eta_b).map(|(a, b)| a * b).sum::<f64>() / nf;
    let mf = eta_f.iter().sum::<f64>() / nf;
    let mb = eta_b.iter().sum::<f64>() / nf;
    let denom = (mf * mb).sqrt();
    if !(denom > 0.0) {
        return 0.0;
    }
    (cross / denom).clamp(0.0, 1.0)
}

/// MMSE weight on the forward estimate.
pub fn weighting_factor(eta_f: f64, eta_b: f64, rho: f64) -> f64 {
    let cross = rho * (eta_f * eta_b).sqrt();
    let denom = eta_f + eta_b - 2.0 * cross;
    if denom <= VARIANCE_FLOOR {
        return 0.5;
    }
    (eta_b - cross) / denom
}

/// `μ^w = λ μ^f + (1 - λ) μ^b` with the shared-disturbance variance
/// `η^w = (λ sqrt(η^f) + (1 - λ) sqrt(η^b))²`.
pub fn combine(
    mu_f: &[Complex64],
    mu_b: &[Complex64],
    lambda: &[f64],
    eta_f: &[f64],
    eta_b: &[f64],
) -> Result<(Vec<Complex64>, Vec<f64>)> {
    let n = mu_f.len();
    check_len("backward means", n, mu_b.len())?;
    check_len("weighting factors", n, lambda.len())?;
    check_len("forward variances", n, eta_f.len())?;
    check_len("backward variances", n, eta_b.len())?;
    let mut mean = Vec::with_capacity(n);
    let mut var = Vec::with_capacity(n);
    for c in 0..n {
        let l = lambda[c];
        mean.push(mu_f[c] * l + mu_b[c] * (1.0 - l));
        let sd = l * eta_f[c].sqrt() + (1.0 - l) * eta_b[c].sqrt();
        var.push((sd * sd).max(VARIANCE_FLOOR));
    }
    Ok((mean, var))
}

/// Gaussian likelihood tables `P(α) ∝ exp(-|α - μ|² / η)` over the alphabet.
pub fn gaussian_tables(spec: &ConstellationSpec, mean: &[Complex64], var: &[f64]) -> Vec<f64> {
    let q = spec.size();
    let mut out = vec![0.0; mean.len() * q];
    for ((row, &m), &v) in out.chunks_mut(q).zip(mean).zip(var) {
        let mut max = f64::NEG_INFINITY;
        for (k, p) in row.iter_mut().enumerate() {
            *p = -(spec.point(k) - m).norm_sqr() / v;
            max = max.max(*p);
        }
        let mut s = 0.0;
        for p in row.iter_mut() {
            *p = (*p - max).exp();
            s += *p;
        }
        row.iter_mut().for_each(|p| *p /= s);
    }
    out
}

/// Forward and backward serial detectors exchanging extrinsic tables.
/// `opts.n_iter` counts outer iterations (one forward and one backward pass each).
pub fn detect_turbo(
    model: &UnitaryModel,
    spec: &ConstellationSpec,
    prior: &PriorTable,
    opts: &DetectorOptions,
    turbo: &TurboOptions,
) -> Result<DetectorReport> {
    opts.validate()?;
    let q = spec.size();
    let n_inner = turbo.n_inner.max(1);
    let mut prior_f = prior.clone();
    let mut fwd = MessagePassing::new(model, spec, &prior_f, Schedule::Serial, &SweepOrder::Forward, opts.damping)?;
    let mut bwd: Option<MessagePassing<'_>> = None;
    let mut theta_trace = Vec::new();
    let mut snapshots = Vec::new();
    let mut iterations = opts.n_iter;

    for t in 1..=opts.n_iter {
        if t > 1 {
            if turbo.warm_start {
                fwd.set_prior(&prior_f)?;
            } else {
                fwd.reset(&prior_f)?;
            }
        }
        for _ in 0..n_inner {
            fwd.sweep();
        }
        let prior_b = PriorTable::from_probs(q, extrinsic_split(fwd.posterior(), prior_f.as_slice(), q))?;

        let b = match bwd.as_mut() {
            None => bwd.insert(MessagePassing::new(
                model,
                spec,
                &prior_b,
                Schedule::Serial,
                &SweepOrder::Backward,
                opts.damping,
            )?),
            Some(b) => {
                if turbo.warm_start {
                    b.set_prior(&prior_b)?;
                } else {
                    b.reset(&prior_b)?;
                }
                b
            }
        };
        for _ in 0..n_inner {
            b.sweep();
        }
        prior_f = PriorTable::from_probs(q, extrinsic_split(b.posterior(), prior_b.as_slice(), q))?;

        let theta = crate::detect::convergence_indicator(b.posterior(), q, opts.rho_th);
        theta_trace.push(theta);
        if opts.record_snapshots {
            snapshots.push(decide(b.posterior(), q));
        }
        if theta >= 1.0 {
            iterations = t;
            break;
        }
    }
    if let Some(last) = snapshots.last().cloned() {
        snapshots.resize(opts.n_iter, last);
    }

    let last = bwd.as_ref().expect("at least one outer iteration");
    let posterior = last.posterior().to_vec();
    let mut report = DetectorReport::from_indices(spec, decide(&posterior, q));
    report.posteriors = posterior;
    report.theta_trace = theta_trace;
    report.iterations = iterations;
    report.means = last.belief().mean.clone();
    report.variances = last.belief().var.clone();
    report.snapshots = snapshots;
    Ok(report)
}

/// Forward and backward serial detectors advanced in lockstep, with their
/// posterior means merged by the MMSE weighting factor after every iteration.
pub fn detect_iw(
    model: &UnitaryModel,
    spec: &ConstellationSpec,
    prior: &PriorTable,
    opts: &DetectorOptions,
) -> Result<DetectorReport> {
    opts.validate()?;
    let q = spec.size();
    let mut fwd = MessagePassing::new(model, spec, prior, Schedule::Serial, &SweepOrder::Forward, opts.damping)?;
    let mut bwd = MessagePassing::new(model, spec, prior, Schedule::Serial, &SweepOrder::Backward, opts.damping)?;
    let mut tracker = FreezeTracker::new(q, opts);
    let mut iterations = opts.n_iter;
    let mut fused = (Vec::new(), Vec::new());

    for t in 1..=opts.n_iter {
        fwd.sweep();
        bwd.sweep();
        let (f, b) = (fwd.belief(), bwd.belief());
        let rho = correlation_coefficient(&f.var, &b.var);
        let lambda: Vec<f64> = f
            .var
            .iter()
            .zip(&b.var)
            .map(|(&ef, &eb)| weighting_factor(ef, eb, rho))
            .collect();
        fused = combine(&f.mean, &b.mean, &lambda, &f.var, &b.var)?;
        let tables = gaussian_tables(spec, &fused.0, &fused.1);
        if tracker.observe(&tables) {
            iterations = t;
            break;
        }
    }
    tracker.pad_snapshots(opts.n_iter);
    let mut report = DetectorReport::from_indices(spec, decide(&tracker.frozen, q));
    report.posteriors = tracker.frozen;
    report.theta_trace = tracker.theta_trace;
    report.iterations = iterations;
    report.means = fused.0;
    report.variances = fused.1;
    report.snapshots = tracker.snapshots;
    Ok(report)
}
