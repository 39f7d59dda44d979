//! Dense complex matrices stored column-major.
//!
//! The detectors walk the channel matrix one column (symbol) at a time, so
//! column-major storage keeps the inner loops contiguous. Factorizations are
//! delegated to `faer` through the conversion helpers at the bottom.

use faer::Mat;
use num_complex::Complex64;

use crate::error::{check_len, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for c in 0..cols {
            for r in 0..rows {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Wraps column-major data.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        check_len("matrix data", rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn col(&self, c: usize) -> &[Complex64] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    pub fn col_mut(&mut self, c: usize) -> &mut [Complex64] {
        &mut self.data[c * self.rows..(c + 1) * self.rows]
    }

    pub fn row(&self, r: usize) -> Vec<Complex64> {
        (0..self.cols).map(|c| self[(r, c)]).collect()
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len("matrix-vector product", self.cols, x.len())?;
        let mut y = vec![Complex64::new(0.0, 0.0); self.rows];
        for (c, &xc) in x.iter().enumerate() {
            if xc == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (yr, &a) in y.iter_mut().zip(self.col(c)) {
                *yr += a * xc;
            }
        }
        Ok(y)
    }

    pub fn matmul(&self, other: &CMatrix) -> Result<CMatrix> {
        check_len("matrix product", self.cols, other.rows)?;
        let out = self.to_faer() * other.to_faer();
        Ok(Self::from_faer(out.as_ref()))
    }

    pub fn adjoint(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Entrywise squared magnitudes, column-major.
    pub fn abs2(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn sub(&self, other: &CMatrix) -> Result<CMatrix> {
        check_len("matrix difference (rows)", self.rows, other.rows)?;
        check_len("matrix difference (cols)", self.cols, other.cols)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(CMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn to_faer(&self) -> Mat<Complex64> {
        Mat::from_fn(self.rows, self.cols, |r, c| self[(r, c)])
    }

    /// Copies a `faer` result back; call only once the `faer` work is done.
    pub fn from_faer(m: faer::MatRef<'_, Complex64>) -> CMatrix {
        clear_upper_simd_state();
        CMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = Complex64;

    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[c * self.rows + r]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[c * self.rows + r]
    }
}

/// Marks the upper halves of the vector registers clean.
///
/// The wide `faer` kernels can return with that state dirty. Every later
/// switch between legacy-SSE code (ours) and VEX code (libm's `exp`) then pays
/// a transition penalty, which slowed the posterior updates down about 20x.
pub(crate) fn clear_upper_simd_state() {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx") {
        // SAFETY: AVX support was just checked.
        unsafe { zero_upper() }
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx")]
unsafe fn zero_upper() {
    std::arch::x86_64::_mm256_zeroupper();
}

pub fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn column_major_layout() {
        let m = CMatrix::from_fn(2, 3, |r, c| Complex64::new((10 * r + c) as f64, 0.0));
        assert_eq!(m.col(1), &[c(1.0, 0.0), c(11.0, 0.0)]);
        assert_eq!(m.row(1), vec![c(10.0, 0.0), c(11.0, 0.0), c(12.0, 0.0)]);
    }

    #[test]
    fn mul_vec_matches_faer() {
        let m = CMatrix::from_fn(3, 3, |r, c| Complex64::new(r as f64 - c as f64, (r * c) as f64));
        let x = vec![c(1.0, 1.0), c(0.0, -2.0), c(0.5, 0.0)];
        let y = m.mul_vec(&x).unwrap();
        let xm = CMatrix::from_col_major(3, 1, x).unwrap();
        let y2 = m.matmul(&xm).unwrap();
        for (a, b) in y.iter().zip(y2.as_slice()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn dimension_errors() {
        let m = CMatrix::identity(3);
        assert!(m.mul_vec(&[c(1.0, 0.0)]).is_err());
        assert!(CMatrix::from_col_major(2, 2, vec![c(0.0, 0.0); 3]).is_err());
    }
}
