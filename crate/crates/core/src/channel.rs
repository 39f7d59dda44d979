//! Doubly-dispersive multipath channel: random realizations, the cyclic
//! time-domain matrix, its delay-Doppler counterpart and the AWGN link.

use num_complex::Complex64;
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::frame::{DopplerTransform, OtfsFrameConfig};
use crate::matrix::CMatrix;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Entries at or below this magnitude are not counted as channel taps.
pub const TAP_MAGNITUDE_FLOOR: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathTap {
    pub gain: Complex64,
    /// Delay in samples.
    pub delay: usize,
    pub doppler_int: i64,
    /// Fractional Doppler in `[-0.5, 0.5)`.
    pub doppler_frac: f64,
}

impl PathTap {
    pub fn doppler(&self) -> f64 {
        self.doppler_int as f64 + self.doppler_frac
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    pub taps: Vec<PathTap>,
}

impl ChannelRealization {
    pub fn new(taps: Vec<PathTap>) -> Self {
        Self { taps }
    }

    pub fn paths(&self) -> usize {
        self.taps.len()
    }

    pub fn has_fractional_doppler(&self) -> bool {
        self.taps.iter().any(|t| t.doppler_frac != 0.0)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerProfile {
    #[default]
    Uniform,
}

/// Per-scenario channel statistics. Carrier, spacing and frame length come
/// from the frame configuration (see [`ChannelGenParams::for_frame`]).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelProfile {
    pub paths: usize,
    pub l_max: usize,
    /// Maximum mobile velocity in m/s.
    pub v_max: f64,
    #[serde(default)]
    pub power_profile: PowerProfile,
}

impl Default for ChannelProfile {
    fn default() -> Self {
        Self {
            paths: 6,
            l_max: 10,
            v_max: 300.0 / 3.6,
            power_profile: PowerProfile::Uniform,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelGenParams {
    pub paths: usize,
    pub l_max: usize,
    pub v_max: f64,
    pub f_c: f64,
    pub delta_f: f64,
    /// Doppler bins per frame.
    pub n: usize,
    pub power_profile: PowerProfile,
}

impl ChannelGenParams {
    pub fn for_frame(frame: &OtfsFrameConfig, profile: &ChannelProfile) -> Self {
        Self {
            paths: profile.paths,
            l_max: profile.l_max,
            v_max: profile.v_max,
            f_c: frame.f_c,
            delta_f: frame.delta_f,
            n: frame.n,
            power_profile: profile.power_profile,
        }
    }

    /// Largest normalized Doppler index a path can reach.
    pub fn max_doppler_index(&self) -> f64 {
        doppler_index(self.v_max, self.f_c, self.delta_f, self.n)
    }
}

/// Normalized Doppler index `(v f_c / c) * N / delta_f` of a radial velocity `v`.
pub fn doppler_index(v: f64, f_c: f64, delta_f: f64, n: usize) -> f64 {
    v * f_c / SPEED_OF_LIGHT * n as f64 / delta_f
}

/// Splits a normalized Doppler index into its nearest integer and a fraction in `[-0.5, 0.5)`.
pub fn split_doppler(nu: f64) -> (i64, f64) {
    let k = (nu + 0.5).floor();
    let frac = nu - k;
    // `nu + 0.5` may round up for values just below a half-integer.
    if frac < -0.5 {
        (k as i64 - 1, frac + 1.0)
    } else {
        (k as i64, frac)
    }
}

/// Draws a `P`-path realization: first delay at tap 0, remaining delays
/// distinct in `1..=l_max`, CN(0, 1/P) gains and Jakes-distributed Doppler.
pub fn draw_channel<R: Rng + ?Sized>(params: &ChannelGenParams, rng: &mut R) -> Result<ChannelRealization> {
    if params.paths == 0 {
        return Err(Error::InfeasibleConfig("at least one path is required".into()));
    }
    if params.paths > params.l_max + 1 {
        return Err(Error::InfeasibleConfig(format!(
            "{} distinct delays requested but only {} taps available (l_max = {})",
            params.paths,
            params.l_max + 1,
            params.l_max
        )));
    }
    if !(params.v_max >= 0.0) {
        return Err(Error::InvalidParameter(format!("v_max must be non-negative, got {}", params.v_max)));
    }
    let mut delays = vec![0usize];
    delays.extend(
        index::sample(rng, params.l_max, params.paths - 1)
            .into_iter()
            .map(|i| i + 1),
    );

    let sigma = (0.5 / params.paths as f64).sqrt();
    let taps = delays
        .into_iter()
        .map(|delay| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            let theta = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let v = params.v_max * theta.cos();
            let (doppler_int, doppler_frac) =
                split_doppler(doppler_index(v, params.f_c, params.delta_f, params.n));
            PathTap {
                gain: Complex64::new(re * sigma, im * sigma),
                delay,
                doppler_int,
                doppler_frac,
            }
        })
        .collect();
    Ok(ChannelRealization { taps })
}

/// `H_T = Σ h_i Π^{l_i} Δ^{k_i + κ_i}`, placed entry by entry.
pub fn build_time_channel(ch: &ChannelRealization, mn: usize) -> Result<CMatrix> {
    let mut h = CMatrix::zeros(mn, mn);
    for (i, tap) in ch.taps.iter().enumerate() {
        if tap.delay >= mn {
            return Err(Error::InvalidDelay {
                path: i,
                delay: tap.delay,
                frame_len: mn,
            });
        }
        let step = 2.0 * std::f64::consts::PI * tap.doppler() / mn as f64;
        for n in 0..mn {
            h[((n + tap.delay) % mn, n)] += tap.gain * Complex64::from_polar(1.0, step * n as f64);
        }
    }
    Ok(h)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DdChannelMatrix {
    pub matrix: CMatrix,
    /// Entries per row with magnitude above [`TAP_MAGNITUDE_FLOOR`].
    pub nonzeros_per_row: Vec<usize>,
}

/// `H_DD = (F_N ⊗ I_M) H_T (F_N^H ⊗ I_M)` via Doppler-axis FFTs.
pub fn build_dd_channel(h_t: &CMatrix, m: usize, n: usize) -> Result<DdChannelMatrix> {
    let mn = m * n;
    check_len("time channel rows", mn, h_t.rows())?;
    check_len("time channel cols", mn, h_t.cols())?;
    let mut fwd = DopplerTransform::new(m, n, FftDirection::Forward);

    // B = A H_T, column by column.
    let mut b = h_t.clone();
    for c in 0..mn {
        fwd.apply(b.col_mut(c));
    }
    // H_DD = B A^H = (A B^H)^H.
    let mut bh = b.adjoint();
    for c in 0..mn {
        fwd.apply(bh.col_mut(c));
    }
    let matrix = bh.adjoint();
    let nonzeros_per_row = (0..mn)
        .map(|r| {
            (0..mn)
                .filter(|&c| matrix[(r, c)].norm() > TAP_MAGNITUDE_FLOOR)
                .count()
        })
        .collect();
    Ok(DdChannelMatrix {
        matrix,
        nonzeros_per_row,
    })
}

/// `y_T = H_T x_T + ω_T` with circularly-symmetric noise of variance `gamma`.
pub fn apply_channel_awgn<R: Rng + ?Sized>(
    x_t: &[Complex64],
    h_t: &CMatrix,
    gamma: f64,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    if !(gamma >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise variance must be non-negative, got {gamma}")));
    }
    let mut y = h_t.mul_vec(x_t)?;
    add_awgn(&mut y, gamma, rng);
    Ok(y)
}

pub fn add_awgn<R: Rng + ?Sized>(y: &mut [Complex64], gamma: f64, rng: &mut R) {
    if gamma == 0.0 {
        return;
    }
    let sigma = (gamma / 2.0).sqrt();
    for v in y {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *v += Complex64::new(re * sigma, im * sigma);
    }
}

/// Noise variance for a given SNR in dB (unit-energy symbols, unit-power channel).
pub fn snr_to_gamma(snr_db: f64, symbol_energy: f64) -> f64 {
    symbol_energy / 10f64.powf(snr_db / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{demodulate, modulate, Modulation};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn tap(delay: usize, k: i64, frac: f64) -> PathTap {
        PathTap {
            gain: c(1.0, 0.0),
            delay,
            doppler_int: k,
            doppler_frac: frac,
        }
    }

    fn paper_params(v_max: f64) -> ChannelGenParams {
        ChannelGenParams {
            paths: 6,
            l_max: 10,
            v_max,
            f_c: 4e9,
            delta_f: 15e3,
            n: 32,
            power_profile: PowerProfile::Uniform,
        }
    }

    #[test]
    fn split_doppler_range() {
        for nu in [-2.5, -0.5, -0.49, 0.0, 0.3, 0.5, 1.5, 2.37, -1.2] {
            let (k, f) = split_doppler(nu);
            assert!((-0.5..0.5).contains(&f), "nu={nu} frac={f}");
            assert!((k as f64 + f - nu).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_velocity_has_no_doppler() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ch = draw_channel(&paper_params(0.0), &mut rng).unwrap();
        assert!(ch.taps.iter().all(|t| t.doppler_int == 0 && t.doppler_frac == 0.0));
    }

    #[test]
    fn high_speed_doppler_range() {
        // (300/3.6) * 4e9 / c * 32 / 15e3 ≈ 2.37
        let p = paper_params(300.0 / 3.6);
        assert!((p.max_doppler_index() - 2.37).abs() < 0.01);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let ch = draw_channel(&p, &mut rng).unwrap();
            for t in &ch.taps {
                assert!((-2..=2).contains(&t.doppler_int));
                assert!(t.doppler().abs() <= p.max_doppler_index() + 1e-12);
            }
        }
    }

    #[test]
    fn delays_are_anchored_and_distinct() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let ch = draw_channel(&paper_params(30.0), &mut rng).unwrap();
            assert_eq!(ch.taps[0].delay, 0);
            let mut d: Vec<_> = ch.taps.iter().map(|t| t.delay).collect();
            d.sort_unstable();
            d.dedup();
            assert_eq!(d.len(), 6);
            assert!(d.iter().all(|&l| l <= 10));
        }
    }

    #[test]
    fn infeasible_path_count() {
        let mut p = paper_params(10.0);
        p.paths = 12;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(draw_channel(&p, &mut rng), Err(Error::InfeasibleConfig(_))));
    }

    #[test]
    fn draws_are_reproducible() {
        let p = paper_params(100.0);
        let a = draw_channel(&p, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let b = draw_channel(&p, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn time_channel_identity_and_shift() {
        let id = build_time_channel(&ChannelRealization::new(vec![tap(0, 0, 0.0)]), 4).unwrap();
        assert_eq!(id, CMatrix::identity(4));

        // Forward cyclic shift: rows [0 0 1; 1 0 0; 0 1 0].
        let pi = build_time_channel(&ChannelRealization::new(vec![tap(1, 0, 0.0)]), 3).unwrap();
        let expect = [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        for r in 0..3 {
            for col in 0..3 {
                assert_eq!(pi[(r, col)], c(expect[r][col], 0.0));
            }
        }
    }

    #[test]
    fn time_channel_doppler_diagonal() {
        let d = build_time_channel(&ChannelRealization::new(vec![tap(0, 1, 0.0)]), 4).unwrap();
        let expect = [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)];
        for (i, e) in expect.iter().enumerate() {
            assert!((d[(i, i)] - e).norm() < 1e-15);
        }
    }

    #[test]
    fn delay_beyond_frame_is_rejected() {
        let ch = ChannelRealization::new(vec![tap(4, 0, 0.0)]);
        assert!(matches!(build_time_channel(&ch, 4), Err(Error::InvalidDelay { .. })));
    }

    #[test]
    fn dd_channel_of_identity() {
        let dd = build_dd_channel(&CMatrix::identity(16), 4, 4).unwrap();
        let diff = dd.matrix.sub(&CMatrix::identity(16)).unwrap();
        assert!(diff.frobenius_norm() < 1e-12);
    }

    #[test]
    fn domain_equivalence_and_norm() {
        let cfg = OtfsFrameConfig::new(8, 4, Modulation::Qpsk);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut p = ChannelGenParams::for_frame(&cfg, &ChannelProfile::default());
        p.l_max = 5;
        p.paths = 4;
        p.v_max = 500.0;
        let ch = draw_channel(&p, &mut rng).unwrap();
        let ht = build_time_channel(&ch, 32).unwrap();
        let dd = build_dd_channel(&ht, 8, 4).unwrap();
        assert!((dd.matrix.frobenius_norm() - ht.frobenius_norm()).abs() < 1e-9);
        let x: Vec<_> = (0..32).map(|i| c((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let lhs = demodulate(&ht.mul_vec(&modulate(&x, &cfg).unwrap()).unwrap(), &cfg).unwrap();
        let rhs = dd.matrix.mul_vec(&x).unwrap();
        for (a, b) in lhs.iter().zip(&rhs) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn noiseless_identity_link() {
        let x = vec![c(1.0, -1.0), c(0.5, 0.25), c(0.0, 2.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = apply_channel_awgn(&x, &CMatrix::identity(3), 0.0, &mut rng).unwrap();
        assert_eq!(y, x);
        assert!(apply_channel_awgn(&x, &CMatrix::identity(3), -1.0, &mut rng).is_err());
    }

    #[test]
    fn noise_variance() {
        let n = 100_000;
        let mut y = vec![c(0.0, 0.0); n];
        add_awgn(&mut y, 1.0, &mut ChaCha8Rng::seed_from_u64(2));
        let var = y.iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64;
        assert!((var - 1.0).abs() < 0.03, "{var}");
    }

    #[test]
    fn snr_conversion() {
        assert_eq!(snr_to_gamma(0.0, 1.0), 1.0);
        assert!((snr_to_gamma(10.0, 1.0) - 0.1).abs() < 1e-15);
        assert!((snr_to_gamma(20.0, 1.0) - 0.01).abs() < 1e-15);
    }
}
