//! Gray-labelled BPSK, QPSK and 16QAM alphabets.
//!
//! Points are stored in label order: the point at alphabet index `i` carries
//! the bit pattern of `i` written MSB first. Tie-breaking rules that refer to
//! the "lowest alphabet index" therefore refer to the lowest label.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Tolerance used when checking that a complex value is a constellation point.
const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modulation {
    Bpsk,
    Qpsk,
    #[serde(rename = "16qam")]
    Qam16,
}

impl Modulation {
    pub fn name(self) -> &'static str {
        match self {
            Modulation::Bpsk => "bpsk",
            Modulation::Qpsk => "qpsk",
            Modulation::Qam16 => "16qam",
        }
    }
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bpsk" => Ok(Modulation::Bpsk),
            "qpsk" | "4qam" => Ok(Modulation::Qpsk),
            "16qam" | "qam16" => Ok(Modulation::Qam16),
            other => Err(Error::InvalidParameter(format!("unknown constellation '{other}'"))),
        }
    }
}

/// A unit-energy alphabet together with its bit labelling.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstellationSpec {
    modulation: Modulation,
    points: Vec<Complex64>,
    bits_per_symbol: usize,
}

/// Gray map for one 16QAM axis: first bit is the sign, second the magnitude.
fn pam4_level(sign_bit: usize, mag_bit: usize) -> f64 {
    let mag = if mag_bit == 0 { 1.0 } else { 3.0 };
    if sign_bit == 0 {
        mag
    } else {
        -mag
    }
}

impl ConstellationSpec {
    pub fn new(modulation: Modulation) -> Self {
        let points: Vec<Complex64> = match modulation {
            Modulation::Bpsk => vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)],
            Modulation::Qpsk => {
                let a = std::f64::consts::FRAC_1_SQRT_2;
                (0..4)
                    .map(|label| {
                        let re = if label & 0b10 == 0 { a } else { -a };
                        let im = if label & 0b01 == 0 { a } else { -a };
                        Complex64::new(re, im)
                    })
                    .collect()
            }
            Modulation::Qam16 => {
                let scale = 1.0 / 10f64.sqrt();
                (0..16)
                    .map(|label: usize| {
                        let re = pam4_level((label >> 3) & 1, (label >> 2) & 1);
                        let im = pam4_level((label >> 1) & 1, label & 1);
                        Complex64::new(re * scale, im * scale)
                    })
                    .collect()
            }
        };
        let bits_per_symbol = points.len().trailing_zeros() as usize;
        Self {
            modulation,
            points,
            bits_per_symbol,
        }
    }

    pub fn modulation(&self) -> Modulation {
        self.modulation
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn size(&self) -> usize {
        self.points.len()
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn point(&self, index: usize) -> Complex64 {
        self.points[index]
    }

    pub fn mean_energy(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.points.len() as f64
    }

    /// Bit pattern of alphabet index `index`, MSB first.
    pub fn label_bits(&self, index: usize) -> impl Iterator<Item = u8> + '_ {
        (0..self.bits_per_symbol).rev().map(move |k| ((index >> k) & 1) as u8)
    }

    /// Maps a bit sequence to symbols, `bits_per_symbol` bits at a time.
    pub fn map_bits(&self, bits: &[u8], n_symbols: usize) -> Result<Vec<Complex64>> {
        Ok(self
            .bits_to_indices(bits, n_symbols)?
            .into_iter()
            .map(|i| self.points[i])
            .collect())
    }

    pub fn bits_to_indices(&self, bits: &[u8], n_symbols: usize) -> Result<Vec<usize>> {
        check_len("bit block", n_symbols * self.bits_per_symbol, bits.len())?;
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return Err(Error::InvalidArgument(format!(
                "bit {pos} has value {}, expected 0 or 1",
                bits[pos]
            )));
        }
        Ok(bits
            .chunks(self.bits_per_symbol.max(1))
            .map(|chunk| chunk.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize))
            .collect())
    }

    pub fn indices_to_bits(&self, indices: &[usize]) -> Vec<u8> {
        indices.iter().flat_map(|&i| self.label_bits(i)).collect()
    }

    /// Inverse of [`map_bits`](Self::map_bits); rejects anything that is not an alphabet point.
    pub fn symbols_to_bits(&self, symbols: &[Complex64]) -> Result<Vec<u8>> {
        let indices = symbols
            .iter()
            .enumerate()
            .map(|(k, &s)| {
                self.index_of(s).ok_or_else(|| Error::InvalidSymbol {
                    index: k,
                    value: format!("{s}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.indices_to_bits(&indices))
    }

    pub fn index_of(&self, s: Complex64) -> Option<usize> {
        self.points.iter().position(|p| (p - s).norm() < MEMBERSHIP_TOL)
    }

    /// Nearest alphabet index in Euclidean distance; ties go to the lowest index.
    pub fn nearest_index(&self, z: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (p - z).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    pub fn hard_decision(&self, estimates: &[Complex64]) -> Vec<Complex64> {
        estimates
            .iter()
            .map(|&z| self.points[self.nearest_index(z)])
            .collect()
    }

    /// Mean and variance of a probability table over the alphabet.
    pub fn moments(&self, probs: &[f64]) -> (Complex64, f64) {
        let mean: Complex64 = probs.iter().zip(&self.points).map(|(&p, &a)| a * p).sum();
        let var = probs
            .iter()
            .zip(&self.points)
            .map(|(&p, &a)| p * (a - mean).norm_sqr())
            .sum();
        (mean, var)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn all() -> [ConstellationSpec; 3] {
        [
            ConstellationSpec::new(Modulation::Bpsk),
            ConstellationSpec::new(Modulation::Qpsk),
            ConstellationSpec::new(Modulation::Qam16),
        ]
    }

    #[test]
    fn qpsk_first_label_is_first_quadrant() {
        let qpsk = ConstellationSpec::new(Modulation::Qpsk);
        let s = qpsk.map_bits(&[0, 0], 1).unwrap();
        let a = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s[0] - Complex64::new(a, a)).norm() < 1e-15);
    }

    #[test]
    fn bpsk_convention() {
        let bpsk = ConstellationSpec::new(Modulation::Bpsk);
        let s = bpsk.map_bits(&[0, 1], 2).unwrap();
        assert_eq!(s, vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)]);
        assert_eq!(bpsk.symbols_to_bits(&s).unwrap(), vec![0, 1]);
    }

    #[test]
    fn unit_energy_and_distinct_points() {
        for spec in all() {
            assert_eq!(spec.size(), 1 << spec.bits_per_symbol());
            assert!((spec.mean_energy() - 1.0).abs() < 1e-12, "{}", spec.modulation());
            for i in 0..spec.size() {
                for j in 0..i {
                    assert!((spec.point(i) - spec.point(j)).norm() > 1e-3);
                }
            }
        }
    }

    #[test]
    fn qam16_is_gray_labelled() {
        // Nearest neighbours differ in exactly one bit.
        let spec = ConstellationSpec::new(Modulation::Qam16);
        let dmin = 2.0 / 10f64.sqrt();
        for i in 0..16 {
            for j in 0..16 {
                let d = (spec.point(i) - spec.point(j)).norm();
                if (d - dmin).abs() < 1e-9 {
                    assert_eq!((i ^ j).count_ones(), 1, "labels {i:04b} and {j:04b}");
                }
            }
        }
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let qpsk = ConstellationSpec::new(Modulation::Qpsk);
        assert!(matches!(qpsk.map_bits(&[0, 1, 1], 2), Err(Error::Dimension { .. })));
    }

    #[test]
    fn invalid_symbol_is_rejected() {
        let bpsk = ConstellationSpec::new(Modulation::Bpsk);
        let err = bpsk.symbols_to_bits(&[Complex64::new(0.5, 0.0)]).unwrap_err();
        assert!(matches!(err, Error::InvalidSymbol { index: 0, .. }));
    }

    #[test]
    fn hard_decisions() {
        let bpsk = ConstellationSpec::new(Modulation::Bpsk);
        assert_eq!(bpsk.hard_decision(&[Complex64::new(0.3, 0.0)])[0], Complex64::new(1.0, 0.0));
        assert_eq!(bpsk.nearest_index(Complex64::new(0.0, 0.0)), 0);
        let qpsk = ConstellationSpec::new(Modulation::Qpsk);
        assert_eq!(qpsk.nearest_index(Complex64::new(2.0, 2.0)), 0);
    }

    proptest! {
        #[test]
        fn bits_round_trip(seed in proptest::collection::vec(0u8..2, 64)) {
            for spec in all() {
                let n = seed.len() / spec.bits_per_symbol();
                let bits = &seed[..n * spec.bits_per_symbol()];
                let symbols = spec.map_bits(bits, n).unwrap();
                prop_assert_eq!(spec.symbols_to_bits(&symbols).unwrap(), bits.to_vec());
            }
        }
    }
}
