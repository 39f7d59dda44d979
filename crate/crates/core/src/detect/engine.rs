//! Gaussian message passing on the factor graph of `ȳ = H x + ω`.
//!
//! Every factor node `ȳ_d` keeps a running interference estimate
//! `(𝓜_d, 𝓝_d) = (Σ_c H_dc μ_dc, Σ_c |H_dc|² η_dc)` over the extrinsic
//! messages currently held by the variable nodes. Under the serial schedule
//! the state is pushed forward after every symbol update, so the next symbol
//! cancels interference with messages from the current sweep. Under the
//! parallel schedule the state is rebuilt once per sweep from the previous
//! sweep's messages.
//!
//! Extrinsic variances are approximated by the posterior variance, so one
//! variance is stored per symbol rather than per edge; this keeps a sweep at
//! `O(n²)` for `n` symbols.

use num_complex::Complex64;

use super::{
    decide, DetectorOptions, DetectorReport, FreezeTracker, PriorTable, SweepOrder, UnitaryModel,
    ABS2_FLOOR, VARIANCE_FLOOR,
};
use crate::error::{check_len, Result};
use crate::frame::ConstellationSpec;
use crate::matrix::CMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Schedule {
    /// Message-feedback interference cancellation: symbols updated earlier in
    /// the sweep feed their new messages to later ones.
    Serial,
    /// Every symbol consumes only the previous sweep's messages.
    Parallel,
}

/// Per-factor interference mean `𝓜_d` and variance `𝓝_d`.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorState {
    pub mean: Vec<Complex64>,
    pub var: Vec<f64>,
}

impl FactorState {
    /// Direct sums over the messages currently held in `belief`.
    pub fn direct(model: &UnitaryModel, belief: &BeliefState) -> Self {
        let n = model.len();
        let mut mean = vec![Complex64::new(0.0, 0.0); n];
        let mut var = vec![0.0; n];
        for c in 0..n {
            let h = model.h.col(c);
            let a2 = model.abs2_col(c);
            let mu = belief.edge_col(c);
            let eta = belief.edge_var[c];
            for d in 0..n {
                mean[d] += h[d] * mu[d];
                var[d] += a2[d] * eta;
            }
        }
        Self { mean, var }
    }
}

/// Variable-side state: posterior tables, their Gaussian projection and the
/// extrinsic messages fed back to the factors.
#[derive(Clone, Debug, PartialEq)]
pub struct BeliefState {
    pub q: usize,
    /// Row `c` holds `P(x_c = α)` for every alphabet index.
    pub posterior: Vec<f64>,
    pub mean: Vec<Complex64>,
    pub var: Vec<f64>,
    /// `μ_{d,c}` stored column-major (`c * n + d`).
    pub edge_mean: Vec<Complex64>,
    /// `η_{d,c}`, shared by all factors `d` of symbol `c`.
    pub edge_var: Vec<f64>,
}

impl BeliefState {
    /// Gaussian projection of the prior, replicated on every edge.
    pub fn from_prior(prior: &PriorTable, spec: &ConstellationSpec) -> Self {
        let n = prior.n_symbols();
        let q = spec.size();
        let mut mean = Vec::with_capacity(n);
        let mut var = Vec::with_capacity(n);
        for c in 0..n {
            let (m, v) = spec.moments(prior.row(c));
            mean.push(m);
            var.push(v.max(VARIANCE_FLOOR));
        }
        let mut edge_mean = Vec::with_capacity(n * n);
        for &m in &mean {
            edge_mean.extend(std::iter::repeat_n(m, n));
        }
        Self {
            q,
            posterior: prior.as_slice().to_vec(),
            edge_var: var.clone(),
            mean,
            var,
            edge_mean,
        }
    }

    pub fn n_symbols(&self) -> usize {
        self.mean.len()
    }

    pub fn edge_col(&self, c: usize) -> &[Complex64] {
        let n = self.n_symbols();
        &self.edge_mean[c * n..(c + 1) * n]
    }

    pub fn posterior_row(&self, c: usize) -> &[f64] {
        &self.posterior[c * self.q..(c + 1) * self.q]
    }
}

/// Messages from every factor `d` to one variable `c`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FactorMessages {
    /// Scaled residual `s_{d,c}`.
    pub s: Vec<Complex64>,
    /// `ν^s_{d,c} = 1 / (𝓝 + γ)`.
    pub nu: Vec<f64>,
    pub chi: Vec<Complex64>,
    /// Infinite where the factor carries no message (`|H_dc|²` below floor).
    pub tau: Vec<f64>,
}

impl FactorMessages {
    pub fn with_len(n: usize) -> Self {
        Self {
            s: vec![Complex64::new(0.0, 0.0); n],
            nu: vec![0.0; n],
            chi: vec![Complex64::new(0.0, 0.0); n],
            tau: vec![0.0; n],
        }
    }
}

/// Factor-to-variable messages for symbol `c` given the current interference state.
pub fn factor_to_variable(
    model: &UnitaryModel,
    factors: &FactorState,
    belief: &BeliefState,
    c: usize,
    out: &mut FactorMessages,
) {
    let n = model.len();
    if out.s.len() != n {
        *out = FactorMessages::with_len(n);
    }
    let h = model.h.col(c);
    let a2 = model.abs2_col(c);
    let prior_mean = belief.mean[c];
    for d in 0..n {
        let nu = 1.0 / (factors.var[d] + model.gamma).max(VARIANCE_FLOOR);
        let s = (model.y_bar[d] - factors.mean[d]) * nu;
        out.s[d] = s;
        out.nu[d] = nu;
        if a2[d] < ABS2_FLOOR {
            out.chi[d] = prior_mean;
            out.tau[d] = f64::INFINITY;
        } else {
            let precision = a2[d] * nu;
            out.chi[d] = prior_mean + h[d].conj() * s / precision;
            out.tau[d] = (1.0 / precision).max(VARIANCE_FLOOR);
        }
    }
}

/// Combines the factor messages with the prior into the posterior of symbol
/// `c`, projects it to a Gaussian, refreshes the extrinsic messages and, when
/// `factors` is given, pushes the change into the interference recursion.
#[allow(clippy::too_many_arguments)]
pub fn variable_update(
    model: &UnitaryModel,
    spec: &ConstellationSpec,
    c: usize,
    msgs: &FactorMessages,
    log_prior: &[f64],
    belief: &mut BeliefState,
    factors: Option<&mut FactorState>,
    damping: f64,
) {
    let n = model.len();
    let q = spec.size();

    // Product of Gaussians in α collapses to one Gaussian with this precision and center.
    let mut precision = 0.0;
    let mut weighted = Complex64::new(0.0, 0.0);
    for (chi, &tau) in msgs.chi.iter().zip(&msgs.tau) {
        if tau.is_finite() {
            precision += 1.0 / tau;
            weighted += chi / tau;
        }
    }
    let center = if precision > 0.0 {
        weighted / precision
    } else {
        Complex64::new(0.0, 0.0)
    };

    let row = &mut belief.posterior[c * q..(c + 1) * q];
    let mut max_log = f64::NEG_INFINITY;
    for (k, p) in row.iter_mut().enumerate() {
        let l = log_prior[k] - precision * (spec.point(k) - center).norm_sqr();
        *p = l;
        max_log = max_log.max(l);
    }
    let mut total = 0.0;
    for p in row.iter_mut() {
        *p = (*p - max_log).exp();
        total += *p;
    }
    row.iter_mut().for_each(|p| *p /= total);
    let (mean, var) = spec.moments(row);
    let var = var.max(VARIANCE_FLOOR);
    belief.mean[c] = mean;
    belief.var[c] = var;

    let old_var = belief.edge_var[c];
    let new_var = if damping > 0.0 {
        damping * old_var + (1.0 - damping) * var
    } else {
        var
    };
    belief.edge_var[c] = new_var;

    let h = model.h.col(c);
    let a2 = model.abs2_col(c);
    let edges = &mut belief.edge_mean[c * n..(c + 1) * n];
    match factors {
        Some(f) => {
            for d in 0..n {
                let mut mu = mean - var * h[d].conj() * msgs.s[d];
                if damping > 0.0 {
                    mu = damping * edges[d] + (1.0 - damping) * mu;
                }
                f.mean[d] += h[d] * (mu - edges[d]);
                f.var[d] = (f.var[d] + a2[d] * (new_var - old_var)).max(0.0);
                edges[d] = mu;
            }
        }
        None => {
            for d in 0..n {
                let mut mu = mean - var * h[d].conj() * msgs.s[d];
                if damping > 0.0 {
                    mu = damping * edges[d] + (1.0 - damping) * mu;
                }
                edges[d] = mu;
            }
        }
    }
}

fn log_table(prior: &PriorTable) -> Vec<f64> {
    prior.as_slice().iter().map(|&p| p.max(1e-300).ln()).collect()
}

/// Stateful detector that can be advanced one sweep at a time.
pub struct MessagePassing<'a> {
    model: &'a UnitaryModel,
    spec: &'a ConstellationSpec,
    schedule: Schedule,
    order: Vec<usize>,
    damping: f64,
    log_prior: Vec<f64>,
    belief: BeliefState,
    factors: FactorState,
    msgs: FactorMessages,
    sweeps: usize,
}

impl<'a> MessagePassing<'a> {
    pub fn new(
        model: &'a UnitaryModel,
        spec: &'a ConstellationSpec,
        prior: &PriorTable,
        schedule: Schedule,
        order: &SweepOrder,
        damping: f64,
    ) -> Result<Self> {
        let n = model.len();
        check_len("prior table rows", n, prior.n_symbols())?;
        check_len("prior table alphabet", spec.size(), prior.alphabet_size())?;
        let order = order.indices(n)?;
        let belief = BeliefState::from_prior(prior, spec);
        let factors = FactorState::direct(model, &belief);
        Ok(Self {
            model,
            spec,
            schedule,
            order,
            damping,
            log_prior: log_table(prior),
            belief,
            factors,
            msgs: FactorMessages::with_len(n),
            sweeps: 0,
        })
    }

    /// Replaces the prior and restarts from its Gaussian projection.
    pub fn reset(&mut self, prior: &PriorTable) -> Result<()> {
        check_len("prior table rows", self.model.len(), prior.n_symbols())?;
        self.log_prior = log_table(prior);
        self.belief = BeliefState::from_prior(prior, self.spec);
        self.factors = FactorState::direct(self.model, &self.belief);
        self.sweeps = 0;
        Ok(())
    }

    /// Replaces the prior but keeps the current messages.
    pub fn set_prior(&mut self, prior: &PriorTable) -> Result<()> {
        check_len("prior table rows", self.model.len(), prior.n_symbols())?;
        self.log_prior = log_table(prior);
        Ok(())
    }

    pub fn sweep(&mut self) {
        self.sweep_observed(|_, _, _| {});
    }

    /// Runs one sweep, calling `observer(c, belief, factors)` after every symbol update.
    pub fn sweep_observed(&mut self, mut observer: impl FnMut(usize, &BeliefState, &FactorState)) {
        let q = self.spec.size();
        if self.schedule == Schedule::Parallel {
            self.factors = FactorState::direct(self.model, &self.belief);
        }
        for &c in &self.order {
            factor_to_variable(self.model, &self.factors, &self.belief, c, &mut self.msgs);
            let push = match self.schedule {
                Schedule::Serial => Some(&mut self.factors),
                Schedule::Parallel => None,
            };
            variable_update(
                self.model,
                self.spec,
                c,
                &self.msgs,
                &self.log_prior[c * q..(c + 1) * q],
                &mut self.belief,
                push,
                self.damping,
            );
            observer(c, &self.belief, &self.factors);
        }
        self.sweeps += 1;
    }

    pub fn belief(&self) -> &BeliefState {
        &self.belief
    }

    pub fn factors(&self) -> &FactorState {
        &self.factors
    }

    pub fn posterior(&self) -> &[f64] {
        &self.belief.posterior
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    /// Sweeps until every symbol is confident or `n_iter` is reached, then
    /// decides from the frozen posterior.
    pub fn run(&mut self, opts: &DetectorOptions) -> Result<DetectorReport> {
        opts.validate()?;
        let q = self.spec.size();
        let mut tracker = FreezeTracker::new(q, opts);
        let mut iterations = opts.n_iter;
        for t in 1..=opts.n_iter {
            self.sweep();
            if tracker.observe(&self.belief.posterior) {
                iterations = t;
                break;
            }
        }
        tracker.pad_snapshots(opts.n_iter);
        let decided_indices = decide(&tracker.frozen, q);
        let mut report = DetectorReport::from_indices(self.spec, decided_indices);
        report.posteriors = tracker.frozen;
        report.theta_trace = tracker.theta_trace;
        report.iterations = iterations;
        report.means = self.belief.mean.clone();
        report.variances = self.belief.var.clone();
        report.snapshots = tracker.snapshots;
        Ok(report)
    }
}

/// Serial-schedule detector on the unitary model, sweeping symbols in `order`.
pub fn detect_uamp_mfic(
    model: &UnitaryModel,
    spec: &ConstellationSpec,
    prior: &PriorTable,
    opts: &DetectorOptions,
    order: &SweepOrder,
) -> Result<DetectorReport> {
    MessagePassing::new(model, spec, prior, Schedule::Serial, order, opts.damping)?.run(opts)
}

/// Parallel-schedule detector on the unitary model.
pub fn detect_uamp(
    model: &UnitaryModel,
    spec: &ConstellationSpec,
    prior: &PriorTable,
    opts: &DetectorOptions,
) -> Result<DetectorReport> {
    MessagePassing::new(model, spec, prior, Schedule::Parallel, &SweepOrder::Forward, opts.damping)?
        .run(opts)
}

/// Parallel-schedule detector on the untransformed delay-Doppler model.
pub fn detect_amp(
    h_dd: &CMatrix,
    y: &[Complex64],
    gamma: f64,
    spec: &ConstellationSpec,
    prior: &PriorTable,
    opts: &DetectorOptions,
) -> Result<DetectorReport> {
    let model = UnitaryModel::direct(h_dd.clone(), y.to_vec(), gamma)?;
    detect_uamp(&model, spec, prior, opts)
}
