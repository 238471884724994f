use num_complex::Complex32;
use serde::{Deserialize, Serialize};

use super::fir::{compose, design_bandpass, matched_filters, FirFilter};
use super::ola::{overlap_add_bank, ConvMode};
use super::plan::{BufferRole, PlanCache};
use super::signal::{convert_into, mix_in_place, RawSampleBlock};
use crate::codegen::ModulationParams;
use crate::error::{Error, Result};

/// Receiver front-end settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrontendConfig {
    /// Local oscillator offset that brings the transmissions to 0 Hz.
    pub lo_freq: f64,
    /// Defaults to midway between the two tones.
    pub bandpass_center: Option<f64>,
    /// Defaults to Carson's rule, `|f1 - f0| + 2 · bit_rate`.
    pub bandpass_width: Option<f64>,
    pub bandpass_taps: usize,
    /// Floor on `|f1| + |f0|` when normalizing.
    pub eps: f64,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        Self {
            lo_freq: 0.0,
            bandpass_center: None,
            bandpass_width: None,
            bandpass_taps: 200,
            eps: 1e-12,
        }
    }
}

/// The prepared demodulation chain: bandpass composed with each matched filter.
#[derive(Clone, Debug)]
pub struct Demodulator {
    params: ModulationParams,
    frontend: FrontendConfig,
    bandpass: FirFilter,
    one: FirFilter,
    zero: FirFilter,
}

impl Demodulator {
    pub fn new(params: &ModulationParams, frontend: &FrontendConfig) -> Result<Self> {
        params.validate()?;
        if !(frontend.eps > 0.0) {
            return Err(Error::Config(format!("eps must be > 0, got {}", frontend.eps)));
        }
        let center = frontend
            .bandpass_center
            .unwrap_or((params.freq_one + params.freq_zero) / 2.0);
        let width = frontend
            .bandpass_width
            .unwrap_or((params.freq_one - params.freq_zero).abs() + 2.0 * params.bit_rate);
        let bandpass = design_bandpass(
            center,
            width,
            frontend.bandpass_taps,
            params.sample_rate,
        )?;
        let (h1, h0) = matched_filters(params);
        Ok(Self {
            params: params.clone(),
            frontend: frontend.clone(),
            one: compose(&bandpass, &h1),
            zero: compose(&bandpass, &h0),
            bandpass,
        })
    }

    pub fn params(&self) -> &ModulationParams {
        &self.params
    }

    pub fn frontend(&self) -> &FrontendConfig {
        &self.frontend
    }

    pub fn bandpass(&self) -> &FirFilter {
        &self.bandpass
    }

    /// `H_BP·H_1` and `H_BP·H_0`.
    pub fn composed(&self) -> (&FirFilter, &FirFilter) {
        (&self.one, &self.zero)
    }

    /// Group delay removed by the "same"-mode alignment of the composed filters.
    pub fn group_delay(&self) -> usize {
        self.one.group_delay()
    }

    pub fn filter_len(&self) -> usize {
        self.one.len()
    }
}

/// Demodulated signals for one window, index-aligned with its input samples.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Demodulated {
    pub d: Vec<f32>,
    pub u: Vec<f32>,
    pub start_time: u64,
}

impl Demodulated {
    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }
}

/// `u = |f1| - |f0|` and `d = u / max(|f1| + |f0|, eps)`.
pub fn demodulate(f1: &[Complex32], f0: &[Complex32], eps: f32) -> Result<(Vec<f32>, Vec<f32>)> {
    let (mut d, mut u) = (Vec::new(), Vec::new());
    demodulate_into(f1, f0, eps, &mut d, &mut u)?;
    Ok((d, u))
}

pub(crate) fn demodulate_into(
    f1: &[Complex32],
    f0: &[Complex32],
    eps: f32,
    d: &mut Vec<f32>,
    u: &mut Vec<f32>,
) -> Result<()> {
    if f1.len() != f0.len() {
        return Err(Error::LengthMismatch {
            left: f1.len(),
            right: f0.len(),
        });
    }
    d.clear();
    u.clear();
    d.reserve(f1.len());
    u.reserve(f1.len());
    for (a, b) in f1.iter().zip(f0) {
        let (a, b) = (a.norm(), b.norm());
        let diff = a - b;
        u.push(diff);
        d.push((diff / (a + b).max(eps)).clamp(-1.0, 1.0));
    }
    Ok(())
}

/// Runs conversion, mixing, the composed filters and demodulation on one
/// window of raw samples.
pub fn demodulate_window(
    block: &RawSampleBlock,
    demod: &Demodulator,
    cache: &mut PlanCache,
) -> Result<Demodulated> {
    let mut out = Demodulated::default();
    demodulate_window_into(block, demod, cache, &mut out)?;
    Ok(out)
}

/// As [`demodulate_window`], reusing the vectors in `out`.
pub fn demodulate_window_into(
    block: &RawSampleBlock,
    demod: &Demodulator,
    cache: &mut PlanCache,
    out: &mut Demodulated,
) -> Result<()> {
    let n = block.len();
    let mut x = cache.take_complex(BufferRole::Converted, n);
    convert_into(block.interleaved(), &mut x)?;
    mix_in_place(
        &mut x,
        demod.frontend.lo_freq,
        demod.params.sample_rate,
        block.start_time,
    );
    let result = filter_and_demodulate(&x, demod, cache, out);
    cache.put_complex(BufferRole::Converted, x);
    out.start_time = block.start_time;
    result
}

/// The chain without conversion and mixing, for signals already at baseband
/// (replicas).
pub fn demodulate_baseband(
    x: &[Complex32],
    demod: &Demodulator,
    cache: &mut PlanCache,
) -> Result<Demodulated> {
    let mut out = Demodulated::default();
    filter_and_demodulate(x, demod, cache, &mut out)?;
    Ok(out)
}

fn filter_and_demodulate(
    x: &[Complex32],
    demod: &Demodulator,
    cache: &mut PlanCache,
    out: &mut Demodulated,
) -> Result<()> {
    let n = x.len();
    let mut filtered = [
        cache.take_complex(BufferRole::Filtered(1), n),
        cache.take_complex(BufferRole::Filtered(0), n),
    ];
    overlap_add_bank(x, &[&demod.one, &demod.zero], ConvMode::Same, cache, &mut filtered);
    let result = demodulate_into(
        &filtered[0],
        &filtered[1],
        demod.frontend.eps as f32,
        &mut out.d,
        &mut out.u,
    );
    let [f1, f0] = filtered;
    cache.put_complex(BufferRole::Filtered(1), f1);
    cache.put_complex(BufferRole::Filtered(0), f0);
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn demodulate_examples() {
        let c = |v: f32| Complex32::new(v, 0.0);
        let (d, u) = demodulate(&[c(8.0), c(3.0), c(0.0)], &[c(0.0), c(3.0), c(0.0)], 1e-12).unwrap();
        assert_eq!(d, vec![1.0, 0.0, 0.0]);
        assert_eq!(u, vec![8.0, 0.0, 0.0]);
        assert!(matches!(
            demodulate(&[c(1.0)], &[], 1e-12),
            Err(Error::LengthMismatch { left: 1, right: 0 })
        ));
    }

    #[test]
    fn silence_demodulates_to_zero() {
        let demod = Demodulator::new(&ModulationParams::default(), &FrontendConfig::default()).unwrap();
        let block = RawSampleBlock::new(vec![0; 2 * 5000], 0, 8.0e6).unwrap();
        let mut cache = PlanCache::new();
        let out = demodulate_window(&block, &demod, &mut cache).unwrap();
        assert_eq!(out.len(), 5000);
        assert!(out.d.iter().chain(&out.u).all(|&v| v == 0.0));
    }

    #[test]
    fn composed_filter_lengths() {
        let demod = Demodulator::new(&ModulationParams::default(), &FrontendConfig::default()).unwrap();
        assert_eq!(demod.filter_len(), 207);
        assert_eq!(demod.group_delay(), 103);
    }

    #[test]
    fn second_window_of_same_shape_allocates_nothing() {
        let demod = Demodulator::new(&ModulationParams::default(), &FrontendConfig::default()).unwrap();
        let raw: Vec<i16> = (0..20_000).map(|k| ((k * 37) % 200) as i16 - 100).collect();
        let block = RawSampleBlock::new(raw, 0, 8.0e6).unwrap();
        let mut cache = PlanCache::new();
        let mut out = Demodulated::default();
        demodulate_window_into(&block, &demod, &mut cache, &mut out).unwrap();
        let first = cache.stats();
        assert!(first.allocations() > 0);
        let d_ptr = out.d.as_ptr();
        demodulate_window_into(&block, &demod, &mut cache, &mut out).unwrap();
        let second = cache.stats();
        assert_eq!(second.allocations(), first.allocations());
        assert_eq!(out.d.as_ptr(), d_ptr);
        assert!(second.ola_blocks > first.ola_blocks);
    }

    proptest! {
        #[test]
        fn d_is_bounded_and_finite(
            pairs in proptest::collection::vec(
                ((-1e6f32..1e6, -1e6f32..1e6), (-1e6f32..1e6, -1e6f32..1e6)), 1..200),
            tiny in proptest::bool::ANY,
        ) {
            let s = if tiny { 1e-30 } else { 1.0 };
            let f1: Vec<_> = pairs.iter().map(|((a, b), _)| Complex32::new(a * s, b * s)).collect();
            let f0: Vec<_> = pairs.iter().map(|(_, (a, b))| Complex32::new(a * s, b * s)).collect();
            let (d, u) = demodulate(&f1, &f0, 1e-12).unwrap();
            for (dv, uv) in d.iter().zip(&u) {
                prop_assert!(dv.is_finite() && uv.is_finite());
                prop_assert!((-1.0..=1.0).contains(dv));
            }
        }
    }
}
