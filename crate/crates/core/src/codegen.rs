//! Tag codes, noise-free FSK replicas and a simple radio channel.
//!
//! Codes come from SplitMix64 so that the same seed yields the same packet on
//! every platform. Replicas are continuous-phase FSK with unit amplitude. The
//! channel applies a (possibly fractional) delay, gain, carrier offset and
//! complex white Gaussian noise, which is enough to exercise the whole
//! receive chain without a radio.

use std::f64::consts::TAU;
use std::fmt;
use std::hash::{DefaultHasher, Hash, Hasher};

use num_complex::{Complex, Complex32, Complex64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dsp::pad_length;
use crate::error::{Error, Result};

/// FSK parameters shared by a tag and the receiver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModulationParams {
    pub sample_rate: f64,
    pub bit_rate: f64,
    /// Tone for a 1 bit, Hz relative to the baseband center.
    pub freq_one: f64,
    /// Tone for a 0 bit.
    pub freq_zero: f64,
    pub packet_bits: usize,
}

impl Default for ModulationParams {
    fn default() -> Self {
        Self {
            sample_rate: 8.0e6,
            bit_rate: 1.0e6,
            freq_one: 500.0e3,
            freq_zero: -500.0e3,
            packet_bits: 8192,
        }
    }
}

impl ModulationParams {
    /// The defaults scaled down by 8 in rate and packet length: 1 Ms/s,
    /// 125 kb/s, 1024-bit packets (still ~8.2 ms long). Handy for long
    /// scheduler simulations.
    pub fn scaled_down() -> Self {
        Self {
            sample_rate: 1.0e6,
            bit_rate: 125.0e3,
            freq_one: 62.5e3,
            freq_zero: -62.5e3,
            packet_bits: 1024,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidModulation(msg));
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return bad(format!("sample_rate must be positive, got {}", self.sample_rate));
        }
        if !(self.bit_rate > 0.0 && self.bit_rate.is_finite()) {
            return bad(format!("bit_rate must be positive, got {}", self.bit_rate));
        }
        let spb = self.sample_rate / self.bit_rate;
        if spb < 1.0 || (spb - spb.round()).abs() > 1e-9 * spb {
            return bad(format!(
                "sample_rate / bit_rate must be a positive integer, got {spb}"
            ));
        }
        if self.freq_one == self.freq_zero {
            return bad("freq_one and freq_zero must differ".into());
        }
        if !(self.freq_one.is_finite() && self.freq_zero.is_finite()) {
            return bad("tone frequencies must be finite".into());
        }
        if self.packet_bits == 0 {
            return bad("packet_bits must be at least 1".into());
        }
        Ok(())
    }

    pub fn samples_per_bit(&self) -> usize {
        (self.sample_rate / self.bit_rate).round() as usize
    }

    pub fn packet_samples(&self) -> usize {
        self.packet_bits * self.samples_per_bit()
    }

    /// Packet length in seconds.
    pub fn packet_duration(&self) -> f64 {
        self.packet_bits as f64 / self.bit_rate
    }

    fn hash_into<H: Hasher>(&self, state: &mut H) {
        self.sample_rate.to_bits().hash(state);
        self.bit_rate.to_bits().hash(state);
        self.freq_one.to_bits().hash(state);
        self.freq_zero.to_bits().hash(state);
        self.packet_bits.hash(state);
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TagId(pub String);

impl fmt::Display for TagId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TagId {
    fn from(s: &str) -> Self {
        TagId(s.to_owned())
    }
}

/// A tag's packet: its bit sequence and the modulation it is sent with.
///
/// Demodulated and transformed replicas are not stored here; they belong to
/// the engine context that prepares them (see [`crate::detector::Engine`]).
#[derive(Clone, Debug, PartialEq)]
pub struct TagCode {
    pub tag_id: TagId,
    pub seed: u64,
    pub bits: Vec<bool>,
    pub params: ModulationParams,
    fingerprint: u64,
}

impl TagCode {
    pub fn new(tag_id: TagId, seed: u64, bits: Vec<bool>, params: ModulationParams) -> Result<Self> {
        params.validate()?;
        if bits.len() != params.packet_bits {
            return Err(Error::InvalidModulation(format!(
                "code has {} bits but packet_bits is {}",
                bits.len(),
                params.packet_bits
            )));
        }
        let mut h = DefaultHasher::new();
        bits.hash(&mut h);
        params.hash_into(&mut h);
        Ok(Self {
            tag_id,
            seed,
            bits,
            params,
            fingerprint: h.finish(),
        })
    }

    /// Hash of bits and modulation; two codes with the same fingerprint
    /// produce the same replica.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn with_id(mut self, tag_id: TagId) -> Self {
        self.tag_id = tag_id;
        self
    }
}

/// SplitMix64 (Steele, Lea & Flood). A counter-based generator: the output
/// for step `k` depends only on `seed + k * GAMMA`.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(Self::GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

/// Generates the packet for `seed`. Bit `k` is bit `k % 64` (LSB first) of
/// the `k / 64`-th SplitMix64 output.
pub fn gen_code(seed: u64, params: &ModulationParams) -> Result<TagCode> {
    let mut rng = SplitMix64::new(seed);
    let mut bits = Vec::with_capacity(params.packet_bits);
    while bits.len() < params.packet_bits {
        let word = rng.next_u64();
        let take = (params.packet_bits - bits.len()).min(64);
        bits.extend((0..take).map(|i| (word >> i) & 1 == 1));
    }
    TagCode::new(TagId(format!("tag-{seed}")), seed, bits, params.clone())
}

/// Continuous-phase, unit-amplitude FSK for `code`, zero-padded to `padded_len`.
pub fn synth_replica(code: &TagCode, padded_len: usize) -> Result<Vec<Complex32>> {
    let params = &code.params;
    let spb = params.samples_per_bit();
    let required = code.bits.len() * spb;
    if padded_len < required {
        return Err(Error::PaddedTooShort {
            padded: padded_len,
            required,
        });
    }
    let step_one = TAU * params.freq_one / params.sample_rate;
    let step_zero = TAU * params.freq_zero / params.sample_rate;
    let mut out = Vec::with_capacity(padded_len);
    let mut phase = 0.0f64;
    for &bit in &code.bits {
        let step = if bit { step_one } else { step_zero };
        for _ in 0..spb {
            let (s, c) = phase.sin_cos();
            out.push(Complex32::new(c as f32, s as f32));
            phase = (phase + step).rem_euclid(TAU);
        }
    }
    out.resize(padded_len, Complex32::new(0.0, 0.0));
    Ok(out)
}

/// Static propagation model for synthetic recordings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    /// Delay in samples; fractional delays are applied in the frequency domain.
    pub delay: f64,
    /// Per-sample signal-to-noise ratio; `f64::INFINITY` disables noise.
    pub snr_db: f64,
    pub gain: f64,
    /// Carrier offset, Hz.
    pub freq_offset: f64,
    pub sample_rate: f64,
}

impl Default for ChannelSpec {
    fn default() -> Self {
        Self {
            delay: 0.0,
            snr_db: f64::INFINITY,
            gain: 1.0,
            freq_offset: 0.0,
            sample_rate: ModulationParams::default().sample_rate,
        }
    }
}

impl ChannelSpec {
    fn validate(&self) -> Result<()> {
        if !(self.delay >= 0.0 && self.delay.is_finite()) {
            return Err(Error::InvalidChannel(format!("delay must be >= 0, got {}", self.delay)));
        }
        if !(self.gain > 0.0 && self.gain.is_finite()) {
            return Err(Error::InvalidChannel(format!("gain must be > 0, got {}", self.gain)));
        }
        if self.snr_db.is_nan() {
            return Err(Error::InvalidChannel("snr_db is NaN".into()));
        }
        if !(self.sample_rate > 0.0) {
            return Err(Error::InvalidChannel("sample_rate must be > 0".into()));
        }
        Ok(())
    }
}

/// Passes `signal` through `chan`, producing `out_len` samples.
///
/// Noise power is `gain² · P / 10^(snr/10)` where `P` is the mean power of
/// the nonzero input samples.
pub fn apply_channel(
    signal: &[Complex32],
    chan: &ChannelSpec,
    out_len: usize,
    rng_seed: u64,
) -> Result<Vec<Complex32>> {
    chan.validate()?;
    let required = signal.len() + chan.delay.ceil() as usize;
    if out_len < required {
        return Err(Error::OutputTooShort { out_len, required });
    }
    let whole = chan.delay.floor() as usize;
    let frac = chan.delay - whole as f64;

    let mut out = vec![Complex32::new(0.0, 0.0); out_len];
    if frac == 0.0 {
        out[whole..whole + signal.len()].copy_from_slice(signal);
    } else {
        let shifted = fractional_shift(signal, whole, frac, out_len);
        for (o, s) in out.iter_mut().zip(shifted) {
            *o = Complex32::new(s.re as f32, s.im as f32);
        }
    }

    if chan.gain != 1.0 {
        let g = chan.gain as f32;
        out.iter_mut().for_each(|v| *v *= g);
    }

    if chan.freq_offset != 0.0 {
        let cycles_per_sample = chan.freq_offset / chan.sample_rate;
        for (n, v) in out.iter_mut().enumerate() {
            let phase = TAU * (cycles_per_sample * n as f64).fract();
            let (s, c) = phase.sin_cos();
            *v *= Complex32::new(c as f32, s as f32);
        }
    }

    if chan.snr_db.is_finite() {
        let (sum, count) = signal
            .iter()
            .filter(|s| s.norm_sqr() > 0.0)
            .fold((0.0f64, 0usize), |(acc, n), s| (acc + s.norm_sqr() as f64, n + 1));
        let power = if count == 0 { 0.0 } else { sum / count as f64 };
        let noise_power = chan.gain * chan.gain * power / 10f64.powf(chan.snr_db / 10.0);
        add_noise(&mut out, noise_power, rng_seed);
    }
    Ok(out)
}

/// Adds complex white Gaussian noise of total power `noise_power` per sample.
pub fn add_noise(signal: &mut [Complex32], noise_power: f64, rng_seed: u64) {
    if noise_power <= 0.0 {
        return;
    }
    let sigma = (noise_power / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    for v in signal.iter_mut() {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        *v += Complex32::new((sigma * re) as f32, (sigma * im) as f32);
    }
}

fn fractional_shift(signal: &[Complex32], whole: usize, frac: f64, out_len: usize) -> Vec<Complex64> {
    let len = pad_length(out_len.max(1));
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for (b, s) in buf[whole..].iter_mut().zip(signal) {
        *b = Complex::new(s.re as f64, s.im as f64);
    }
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(len).process(&mut buf);
    let half = len / 2;
    for (k, v) in buf.iter_mut().enumerate() {
        if len % 2 == 0 && k == half {
            // Nyquist bin: keep it real so the shift stays symmetric.
            *v *= (std::f64::consts::PI * frac).cos();
            continue;
        }
        let freq = if k <= half { k as f64 } else { k as f64 - len as f64 };
        let phase = -TAU * frac * freq / len as f64;
        *v *= Complex64::from_polar(1.0, phase);
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    let scale = 1.0 / len as f64;
    buf.truncate(out_len);
    buf.iter_mut().for_each(|v| *v *= scale);
    buf
}

/// Rounds `scale · x` to interleaved 16-bit I/Q, saturating at the int16 limits.
pub fn quantize(signal: &[Complex32], scale: f64) -> Vec<i16> {
    let q = |v: f32| -> i16 {
        let scaled = (v as f64 * scale).round();
        scaled.clamp(i16::MIN as f64, i16::MAX as f64) as i16
    };
    signal.iter().flat_map(|s| [q(s.re), q(s.im)]).collect()
}
