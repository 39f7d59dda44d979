//! Fast invariant checks run by `otfs-sim selftest`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{
    add_awgn, build_dd_channel, build_time_channel, draw_channel, snr_to_gamma, ChannelGenParams,
    ChannelProfile,
};
use crate::detect::{
    decide, detect_uamp_mfic, map_oracle_marginals, unitary_transform, DetectorOptions, FactorState,
    MessagePassing, PriorTable, Schedule, SweepOrder, UnitaryModel,
};
use crate::error::Result;
use crate::frame::{demodulate, modulate, ConstellationSpec, Modulation, OtfsFrameConfig};
use crate::matrix::{norm_sqr, CMatrix};

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, result: Result<(bool, String)>) -> CheckOutcome {
    match result {
        Ok((passed, detail)) => CheckOutcome { name, passed, detail },
        Err(e) => CheckOutcome {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn random_symbols(frame: &OtfsFrameConfig, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    let spec = frame.constellation_spec();
    (0..frame.len()).map(|_| spec.point(rng.random_range(0..spec.size()))).collect()
}

fn bit_round_trip(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    for m in [Modulation::Bpsk, Modulation::Qpsk, Modulation::Qam16] {
        let frame = OtfsFrameConfig::new(4, 4, m);
        let spec = frame.constellation_spec();
        let bits: Vec<u8> = (0..frame.bits_per_frame()).map(|_| rng.random::<bool>() as u8).collect();
        let back = spec.symbols_to_bits(&spec.map_bits(&bits, frame.len())?)?;
        if back != bits {
            return Ok((false, format!("{m} labels do not round-trip")));
        }
    }
    Ok((true, "bpsk, qpsk, 16qam".into()))
}

fn modulation_round_trip(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for (m, n) in [(8, 4), (32, 16)] {
        let frame = OtfsFrameConfig::new(m, n, Modulation::Qam16);
        for _ in 0..20 {
            let x = random_symbols(&frame, rng);
            let t = modulate(&x, &frame)?;
            let back = demodulate(&t, &frame)?;
            let err = x.iter().zip(&back).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            worst = worst.max(err).max((norm_sqr(&t) - norm_sqr(&x)).abs());
        }
    }
    Ok((worst < 1e-10, format!("max deviation {worst:.2e}")))
}

fn domain_equivalence(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let frame = OtfsFrameConfig::new(8, 4, Modulation::Qpsk);
    let profile = ChannelProfile {
        paths: 4,
        l_max: 5,
        v_max: 500.0 / 3.6,
        ..Default::default()
    };
    let params = ChannelGenParams::for_frame(&frame, &profile);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let ch = draw_channel(&params, rng)?;
        let h_t = build_time_channel(&ch, frame.len())?;
        let h_dd = build_dd_channel(&h_t, frame.m, frame.n)?.matrix;
        let x = random_symbols(&frame, rng);
        let via_time = demodulate(&h_t.mul_vec(&modulate(&x, &frame)?)?, &frame)?;
        let direct = h_dd.mul_vec(&x)?;
        let diff: Vec<_> = via_time.iter().zip(&direct).map(|(a, b)| a - b).collect();
        worst = worst.max((norm_sqr(&diff) / norm_sqr(&direct).max(1e-300)).sqrt());
    }
    Ok((worst < 1e-9, format!("max relative deviation {worst:.2e}")))
}

fn random_model(n: usize, gamma: f64, rng: &mut ChaCha8Rng) -> Result<UnitaryModel> {
    let h = CMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let y: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
    unitary_transform(&h, &y, gamma)
}

fn recursion_oracle(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let spec = ConstellationSpec::new(Modulation::Qpsk);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let model = random_model(32, 0.1, rng)?;
        let prior = PriorTable::uniform(32, spec.size());
        let mut mp = MessagePassing::new(&model, &spec, &prior, Schedule::Serial, &SweepOrder::Forward, 0.0)?;
        for _ in 0..3 {
            mp.sweep_observed(|_, belief, factors| {
                let direct = FactorState::direct(&model, belief);
                for d in 0..model.len() {
                    worst = worst
                        .max((factors.mean[d] - direct.mean[d]).norm())
                        .max((factors.var[d] - direct.var[d]).abs());
                }
            });
        }
    }
    Ok((worst < 1e-9, format!("max deviation {worst:.2e}")))
}

fn tiny_map(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let frame = OtfsFrameConfig::new(4, 2, Modulation::Bpsk);
    let spec = frame.constellation_spec();
    let profile = ChannelProfile {
        paths: 3,
        l_max: 3,
        v_max: 500.0 / 3.6,
        ..Default::default()
    };
    let params = ChannelGenParams::for_frame(&frame, &profile);
    let gamma = snr_to_gamma(15.0, 1.0);
    let (mut agree, mut total) = (0usize, 0usize);
    for _ in 0..100 {
        let x = random_symbols(&frame, rng);
        let h_t = build_time_channel(&draw_channel(&params, rng)?, frame.len())?;
        let h_dd = build_dd_channel(&h_t, frame.m, frame.n)?.matrix;
        let mut y = h_dd.mul_vec(&x)?;
        add_awgn(&mut y, gamma, rng);
        let prior = PriorTable::uniform(frame.len(), spec.size());
        let map = decide(&map_oracle_marginals(&h_dd, &y, gamma, &spec, &prior)?, spec.size());
        let model = unitary_transform(&h_dd, &y, gamma)?;
        let mfic = detect_uamp_mfic(&model, &spec, &prior, &DetectorOptions::default(), &SweepOrder::Forward)?;
        agree += map.iter().zip(&mfic.decided_indices).filter(|(a, b)| a == b).count();
        total += map.len();
    }
    let rate = agree as f64 / total as f64;
    Ok((rate >= 0.95, format!("agreement {:.1}%", 100.0 * rate)))
}

/// Runs every check with a fixed seed.
pub fn run_all() -> Vec<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e1f_7e57);
    vec![
        outcome("bit labels round-trip", bit_round_trip(&mut rng)),
        outcome("modulation is unitary", modulation_round_trip(&mut rng)),
        outcome("time/delay-Doppler equivalence", domain_equivalence(&mut rng)),
        outcome("interference recursion", recursion_oracle(&mut rng)),
        outcome("agreement with exhaustive MAP", tiny_map(&mut rng)),
    ]
}
