use std::sync::Arc;

use atlas_core::codegen::{apply_channel, gen_code, quantize, synth_replica, ChannelSpec, ModulationParams, TagCode};
use atlas_core::detector::{find_peak, statistics, DetectionConfig, Engine};
use atlas_core::dsp::{
    demodulate_baseband, overlap_add_filter, ConvMode, Demodulator, FirFilter, FrontendConfig, PlanCache,
    RawSampleBlock,
};
use num_complex::{Complex32, Complex64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WINDOW: usize = 100_000;

fn engine(p: &ModulationParams) -> Engine {
    Engine::new(Demodulator::new(p, &FrontendConfig::default()).unwrap())
}

fn window_with(code: &TagCode, delay: f64, snr_db: f64, gain: f64, seed: u64) -> RawSampleBlock {
    let x = synth_replica(code, code.params.packet_samples()).unwrap();
    let chan = ChannelSpec {
        delay,
        snr_db,
        gain,
        sample_rate: code.params.sample_rate,
        ..ChannelSpec::default()
    };
    let y = apply_channel(&x, &chan, WINDOW, seed).unwrap();
    RawSampleBlock::new(quantize(&y, 2000.0), 0, code.params.sample_rate).unwrap()
}

#[test]
fn overlap_add_matches_direct_convolution() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut cache = PlanCache::new();
    for &(n, m) in &[(1, 1), (7, 3), (300, 32), (5000, 207), (20_000, 208)] {
        let x: Vec<Complex32> = (0..n)
            .map(|_| Complex32::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let h: Vec<Complex32> = (0..m)
            .map(|_| Complex32::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let mut want = vec![Complex64::new(0.0, 0.0); n + m - 1];
        for (i, a) in x.iter().enumerate() {
            for (j, b) in h.iter().enumerate() {
                want[i + j] += Complex64::new(a.re as f64, a.im as f64) * Complex64::new(b.re as f64, b.im as f64);
            }
        }
        let got = overlap_add_filter(&x, &FirFilter::new(h).unwrap(), ConvMode::Full, &mut cache);
        let scale = want.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (g, w) in got.iter().zip(&want) {
            let g = Complex64::new(g.re as f64, g.im as f64);
            assert!((g - w).norm() <= 1e-4 * scale, "n={n} m={m}");
        }
    }
}

#[test]
fn demodulation_recovers_bits() {
    let p = ModulationParams::default();
    let demod = Demodulator::new(&p, &FrontendConfig::default()).unwrap();
    let mut cache = PlanCache::new();
    let code = gen_code(21, &p).unwrap();
    let x = synth_replica(&code, p.packet_samples()).unwrap();
    let out = demodulate_baseband(&x, &demod, &mut cache).unwrap();
    let spb = p.samples_per_bit();
    // The matched filter's output for bit k is complete at its last sample;
    // "same" mode moves that to the bit's centre.
    let correct = code
        .bits
        .iter()
        .enumerate()
        .filter(|&(k, &bit)| {
            let t = k * spb + spb / 2;
            (out.d[t] > 0.0) == bit
        })
        .count();
    assert!(correct as f64 >= 0.999 * code.bits.len() as f64, "{correct} of {}", code.bits.len());
}

#[test]
fn noise_free_toa_recovers_fractional_delays() {
    let p = ModulationParams::default();
    let mut engine = engine(&p);
    let codes: Vec<Arc<TagCode>> = [5u64, 6, 7].iter().map(|&s| Arc::new(gen_code(s, &p).unwrap())).collect();
    for delay in [12.25, 1000.0, 10_000.5, 20_000.9] {
        let w = engine.demodulate_window(&window_with(&codes[0], delay, f64::INFINITY, 1.0, 0)).unwrap();
        let dets = engine.detect(&w, &codes, &DetectionConfig::default()).unwrap();
        assert!(dets[0].accepted, "{:?}", dets[0]);
        assert!(!dets[1].accepted && !dets[2].accepted);
        assert!((dets[0].toa_samples - delay).abs() <= 0.05, "delay {delay}: {}", dets[0].toa_samples);
    }
}

#[test]
fn integer_delay_peaks_at_that_lag() {
    let p = ModulationParams::default();
    let mut engine = engine(&p);
    let code = Arc::new(gen_code(8, &p).unwrap());
    let w = engine.demodulate_window(&window_with(&code, 1000.0, f64::INFINITY, 1.0, 0)).unwrap();
    let dets = engine.detect(&w, &[code], &DetectionConfig::default()).unwrap();
    assert_eq!(dets[0].peak_index, 1000);
}

#[test]
fn noisy_toa_within_half_a_sample() {
    let p = ModulationParams::default();
    let mut engine = engine(&p);
    let code = Arc::new(gen_code(9, &p).unwrap());
    for seed in 0..3 {
        let delay = 5000.0 + 0.3 * seed as f64;
        let w = engine.demodulate_window(&window_with(&code, delay, 10.0, 1.0, seed)).unwrap();
        let det = &engine.detect(&w, &[Arc::clone(&code)], &DetectionConfig::default()).unwrap()[0];
        assert!(det.accepted, "{det:?}");
        assert!((det.toa_samples - delay).abs() <= 0.5, "{}", det.toa_samples);
    }
}

#[test]
fn score_is_gain_invariant_on_the_float_path() {
    let p = ModulationParams {
        packet_bits: 512,
        ..ModulationParams::default()
    };
    let demod = Demodulator::new(&p, &FrontendConfig::default()).unwrap();
    let mut engine = Engine::new(demod.clone());
    let code = Arc::new(gen_code(10, &p).unwrap());
    let x = synth_replica(&code, p.packet_samples()).unwrap();
    let chan = ChannelSpec {
        delay: 333.4,
        snr_db: 5.0,
        ..ChannelSpec::default()
    };
    let base = apply_channel(&x, &chan, 10_000, 3).unwrap();
    let mut cache = PlanCache::new();
    let mut scores = Vec::new();
    for g in [1.0f32, 0.01, 37.0] {
        let scaled: Vec<Complex32> = base.iter().map(|v| v * g).collect();
        let w = demodulate_baseband(&scaled, &demod, &mut cache).unwrap();
        let det = engine.detect(&w, &[Arc::clone(&code)], &DetectionConfig::default()).unwrap().remove(0);
        scores.push((det.peak_index, det.score));
    }
    for s in &scores[1..] {
        assert_eq!(s.0, scores[0].0);
        assert!((s.1 - scores[0].1).abs() <= 1e-5, "{scores:?}");
    }
}

#[test]
fn noise_scores_stay_small() {
    let p = ModulationParams {
        packet_bits: 256,
        ..ModulationParams::default()
    };
    let mut engine = engine(&p);
    let code = gen_code(12, &p).unwrap();
    let replica = engine.replica(&code).unwrap();
    let n = replica.nonzero_len();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let trials = 100;
    let mut total = 0.0;
    for _ in 0..trials {
        let d: Vec<f32> = (0..n).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        let s = statistics(&d, &d, &replica.d, 0).unwrap();
        assert!(s.w_c * s.w_c <= s.q * replica.energy * (1.0 + 1e-9));
        total += (s.w_c / (s.q * replica.energy).sqrt()).abs();
    }
    assert!(total / trials as f64 <= 3.0 / (n as f64).sqrt());
}

#[test]
fn w_c_matches_the_correlation_peak() {
    let p = ModulationParams {
        packet_bits: 300,
        ..ModulationParams::default()
    };
    let mut engine = engine(&p);
    let code = gen_code(13, &p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let d: Vec<f32> = (0..8000).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    let tc = engine.prepare_code(&code, d.len()).unwrap();
    let xc = engine.xcorr(&d, &tc).unwrap();
    let (j, v) = find_peak(&xc).unwrap();
    let s = statistics(&d, &d, &tc.replica.d, j).unwrap();
    assert!((s.w_c - v as f64).abs() <= 1e-4 * s.w_c.abs().max(1e-3 * tc.energy()));
}
