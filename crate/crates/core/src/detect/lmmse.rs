use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use num_complex::Complex64;

use super::DetectorReport;
use crate::error::{check_len, Error, Result};
use crate::frame::ConstellationSpec;
use crate::matrix::{clear_upper_simd_state, CMatrix};

/// Linear MMSE estimate `(H^H H + γ I)^{-1} H^H y`, sliced to the alphabet.
pub fn detect_lmmse(
    h: &CMatrix,
    y: &[Complex64],
    gamma: f64,
    spec: &ConstellationSpec,
) -> Result<DetectorReport> {
    let estimate = lmmse_estimate(h, y, gamma)?;
    let decided = estimate.iter().map(|&z| spec.nearest_index(z)).collect();
    let mut report = DetectorReport::from_indices(spec, decided);
    report.means = estimate;
    Ok(report)
}

pub fn lmmse_estimate(h: &CMatrix, y: &[Complex64], gamma: f64) -> Result<Vec<Complex64>> {
    check_len("observation", h.rows(), y.len())?;
    if !(gamma >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise variance must be non-negative, got {gamma}")));
    }
    let hf = h.to_faer();
    let mut gram = hf.adjoint() * &hf;
    for i in 0..gram.nrows() {
        gram[(i, i)] += Complex64::new(gamma, 0.0);
    }
    let yv = Mat::from_fn(y.len(), 1, |r, _| y[r]);
    let rhs = hf.adjoint() * &yv;
    let x = match gram.llt(Side::Lower) {
        Ok(llt) => llt.solve(&rhs),
        Err(_) => gram.partial_piv_lu().solve(&rhs),
    };
    clear_upper_simd_state();
    let out: Vec<Complex64> = (0..x.nrows()).map(|r| x[(r, 0)]).collect();
    if out.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical(format!(
            "LMMSE solve produced non-finite values (γ = {gamma:e}, {}x{} channel)",
            h.rows(),
            h.cols()
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::Modulation;

    #[test]
    fn unitary_channel_noiseless() {
        let spec = ConstellationSpec::new(Modulation::Qpsk);
        // Normalized 4-point DFT is unitary.
        let h = CMatrix::from_fn(4, 4, |r, c| {
            Complex64::from_polar(0.5, -2.0 * std::f64::consts::PI * (r * c) as f64 / 4.0)
        });
        let idx = vec![0, 3, 1, 2];
        let x: Vec<_> = idx.iter().map(|&i| spec.point(i)).collect();
        let y = h.mul_vec(&x).unwrap();
        let r = detect_lmmse(&h, &y, 1e-12, &spec).unwrap();
        assert_eq!(r.decided_indices, idx);
        // Orthogonal channel: LMMSE equals the matched filter H^H y.
        let mf = h.adjoint().mul_vec(&y).unwrap();
        for (a, b) in r.means.iter().zip(&mf) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let h = CMatrix::identity(2);
        assert!(lmmse_estimate(&h, &[Complex64::new(1.0, 0.0)], 0.1).is_err());
        assert!(lmmse_estimate(&h, &[Complex64::new(1.0, 0.0); 2], -0.1).is_err());
    }
}
