//! Exhaustive symbol-wise MAP marginals for tiny instances. A verification
//! aid for the iterative detectors, not meant for production frame sizes.

use num_complex::Complex64;

use super::PriorTable;
use crate::error::{check_len, Error, Result};
use crate::frame::ConstellationSpec;
use crate::matrix::CMatrix;

pub const MAX_HYPOTHESES: u64 = 1 << 20;

/// Exact `Pr(x_c = α | ȳ, H)` for every symbol by enumerating `|𝔸|^n` hypotheses.
pub fn map_oracle_marginals(
    h: &CMatrix,
    y_bar: &[Complex64],
    gamma: f64,
    spec: &ConstellationSpec,
    prior: &PriorTable,
) -> Result<Vec<f64>> {
    let n = h.cols();
    let q = spec.size();
    check_len("observation", h.rows(), y_bar.len())?;
    check_len("prior table rows", n, prior.n_symbols())?;
    let hypotheses = (q as f64).powi(n as i32);
    if hypotheses > MAX_HYPOTHESES as f64 {
        return Err(Error::TooLarge {
            hypotheses,
            limit: MAX_HYPOTHESES,
        });
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("oracle needs a positive noise variance, got {gamma}")));
    }
    let total = hypotheses as usize;
    let log_prior: Vec<f64> = prior.as_slice().iter().map(|p| p.max(1e-300).ln()).collect();
    let mut log_w = Vec::with_capacity(total);
    let mut digits = vec![0usize; n];
    let mut hx = vec![Complex64::new(0.0, 0.0); h.rows()];
    for _ in 0..total {
        hx.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        let mut lp = 0.0;
        for (c, &k) in digits.iter().enumerate() {
            let a = spec.point(k);
            for (v, &hv) in hx.iter_mut().zip(h.col(c)) {
                *v += hv * a;
            }
            lp += log_prior[c * q + k];
        }
        let dist: f64 = y_bar.iter().zip(&hx).map(|(y, v)| (y - v).norm_sqr()).sum();
        log_w.push(lp - dist / gamma);
        // Odometer increment, symbol 0 fastest.
        for d in digits.iter_mut() {
            *d += 1;
            if *d < q {
                break;
            }
            *d = 0;
        }
    }
    let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut marginals = vec![0.0; n * q];
    digits.iter_mut().for_each(|d| *d = 0);
    for lw in log_w {
        let w = (lw - max).exp();
        for (c, &k) in digits.iter().enumerate() {
            marginals[c * q + k] += w;
        }
        for d in digits.iter_mut() {
            *d += 1;
            if *d < q {
                break;
            }
            *d = 0;
        }
    }
    for row in marginals.chunks_mut(q) {
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|p| *p /= s);
    }
    Ok(marginals)
}
