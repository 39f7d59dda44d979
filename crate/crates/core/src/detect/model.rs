use num_complex::Complex64;

use crate::error::{check_len, Error, Result};
use crate::matrix::CMatrix;

/// `H_DD = U Λ V`, with `V` the conjugate-transposed right singular vectors.
#[derive(Clone, Debug)]
pub struct SvdFactors {
    pub u: CMatrix,
    pub singular_values: Vec<f64>,
    pub v: CMatrix,
}

impl SvdFactors {
    pub fn compute(h: &CMatrix) -> Result<Self> {
        if !h.is_square() {
            return Err(Error::Dimension {
                context: "SVD input (must be square)",
                expected: h.rows(),
                got: h.cols(),
            });
        }
        if h.as_slice().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical("SVD input contains non-finite entries".into()));
        }
        let svd = h.to_faer().svd().map_err(|e| {
            Error::Numerical(format!(
                "SVD did not converge ({e:?}); {}x{} matrix with Frobenius norm {:.3e}",
                h.rows(),
                h.cols(),
                h.frobenius_norm()
            ))
        })?;
        let s = svd.S().column_vector();
        let singular_values = (0..s.nrows()).map(|i| s[i].re).collect();
        Ok(Self {
            u: CMatrix::from_faer(svd.U()),
            singular_values,
            v: CMatrix::from_faer(svd.V().adjoint().to_owned().as_ref()),
        })
    }

    /// `cond(H)`; infinite for rank-deficient matrices.
    pub fn condition_number(&self) -> f64 {
        let max = self.singular_values.iter().cloned().fold(0.0, f64::max);
        let min = self.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    pub fn reconstruct(&self) -> CMatrix {
        let n = self.u.rows();
        let mut lv = self.v.clone();
        for c in 0..n {
            for (r, z) in lv.col_mut(c).iter_mut().enumerate() {
                *z *= self.singular_values[r];
            }
        }
        self.u.matmul(&lv).expect("square factors")
    }
}

/// The observation `ȳ = H x + ω` a message-passing detector works on.
///
/// After [`unitary_transform`] this is `ȳ = U^H y`, `H = Λ V`. The AMP
/// baseline uses [`UnitaryModel::direct`] instead, which keeps `(y, H_DD)`.
#[derive(Clone, Debug)]
pub struct UnitaryModel {
    pub y_bar: Vec<Complex64>,
    pub h: CMatrix,
    pub abs2_h: Vec<f64>,
    pub gamma: f64,
}

impl UnitaryModel {
    pub fn direct(h: CMatrix, y: Vec<Complex64>, gamma: f64) -> Result<Self> {
        if !h.is_square() {
            return Err(Error::Dimension {
                context: "channel matrix (must be square)",
                expected: h.rows(),
                got: h.cols(),
            });
        }
        check_len("observation", h.rows(), y.len())?;
        if !(gamma >= 0.0) {
            return Err(Error::InvalidParameter(format!("noise variance must be non-negative, got {gamma}")));
        }
        let abs2_h = h.abs2();
        Ok(Self {
            y_bar: y,
            h,
            abs2_h,
            gamma,
        })
    }

    /// Rotates a received vector with precomputed SVD factors.
    pub fn from_svd(svd: &SvdFactors, y: &[Complex64], gamma: f64) -> Result<Self> {
        let n = svd.u.rows();
        check_len("observation", n, y.len())?;
        let y_bar = svd.u.adjoint().mul_vec(y)?;
        let mut h = svd.v.clone();
        for c in 0..n {
            for (r, z) in h.col_mut(c).iter_mut().enumerate() {
                *z *= svd.singular_values[r];
            }
        }
        Self::direct(h, y_bar, gamma)
    }

    pub fn len(&self) -> usize {
        self.y_bar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_bar.is_empty()
    }

    /// `|H_dc|^2` for all rows `d` of column `c`.
    pub fn abs2_col(&self, c: usize) -> &[f64] {
        let n = self.len();
        &self.abs2_h[c * n..(c + 1) * n]
    }
}

pub fn unitary_transform(h_dd: &CMatrix, y: &[Complex64], gamma: f64) -> Result<UnitaryModel> {
    check_len("observation", h_dd.rows(), y.len())?;
    UnitaryModel::from_svd(&SvdFactors::compute(h_dd)?, y, gamma)
}
