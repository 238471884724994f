use std::f64::consts::{PI, TAU};
use std::hash::{DefaultHasher, Hash, Hasher};

use num_complex::{Complex32, Complex64};

use crate::codegen::ModulationParams;
use crate::error::{Error, Result};

/// Complex FIR coefficients. The fingerprint identifies the filter in the
/// plan cache so that its spectrum is computed once per transform size.
#[derive(Clone, Debug)]
pub struct FirFilter {
    coeffs: Vec<Complex32>,
    fingerprint: u64,
}

impl PartialEq for FirFilter {
    fn eq(&self, other: &Self) -> bool {
        self.coeffs == other.coeffs
    }
}

impl FirFilter {
    pub fn new(coeffs: Vec<Complex32>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidBand("a filter needs at least one tap".into()));
        }
        let mut h = DefaultHasher::new();
        for c in &coeffs {
            c.re.to_bits().hash(&mut h);
            c.im.to_bits().hash(&mut h);
        }
        Ok(Self {
            coeffs,
            fingerprint: h.finish(),
        })
    }

    pub fn impulse() -> Self {
        Self::new(vec![Complex32::new(1.0, 0.0)]).expect("one tap")
    }

    pub fn coeffs(&self) -> &[Complex32] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Delay removed by "same"-mode filtering, `(len - 1) / 2` samples.
    pub fn group_delay(&self) -> usize {
        (self.coeffs.len() - 1) / 2
    }

    /// Frequency response at `freq` (Hz).
    pub fn response(&self, freq: f64, sample_rate: f64) -> Complex64 {
        let w = -TAU * freq / sample_rate;
        self.coeffs
            .iter()
            .enumerate()
            .map(|(n, c)| Complex64::new(c.re as f64, c.im as f64) * Complex64::from_polar(1.0, w * n as f64))
            .sum()
    }
}

/// Hamming-windowed sinc lowpass with cutoff `width / 2`, shifted up to
/// `center` and normalized to unit gain there.
pub fn design_bandpass(center: f64, width: f64, taps: usize, sample_rate: f64) -> Result<FirFilter> {
    if taps == 0 {
        return Err(Error::InvalidBand("taps must be >= 1".into()));
    }
    if !(sample_rate > 0.0) {
        return Err(Error::InvalidBand("sample_rate must be > 0".into()));
    }
    if !(width > 0.0) {
        return Err(Error::InvalidBand(format!("width must be > 0, got {width}")));
    }
    let nyquist = sample_rate / 2.0;
    if center.abs() + width / 2.0 > nyquist * (1.0 + 1e-12) {
        return Err(Error::InvalidBand(format!(
            "band {center} ± {} Hz leaves the Nyquist range ±{nyquist} Hz",
            width / 2.0
        )));
    }

    let cutoff = width / 2.0 / sample_rate;
    let mid = (taps as f64 - 1.0) / 2.0;
    let lowpass: Vec<f64> = (0..taps)
        .map(|n| {
            let t = n as f64 - mid;
            let sinc = if t == 0.0 {
                2.0 * cutoff
            } else {
                (TAU * cutoff * t).sin() / (PI * t)
            };
            let window = if taps == 1 {
                1.0
            } else {
                0.54 - 0.46 * (TAU * n as f64 / (taps as f64 - 1.0)).cos()
            };
            sinc * window
        })
        .collect();
    let dc: f64 = lowpass.iter().sum();
    let shift = TAU * center / sample_rate;
    let coeffs = lowpass
        .iter()
        .enumerate()
        .map(|(n, &h)| {
            let v = Complex64::from_polar(h / dc, shift * (n as f64 - mid));
            Complex32::new(v.re as f32, v.im as f32)
        })
        .collect();
    FirFilter::new(coeffs)
}

/// The one-bit matched filters `(H_1, H_0)`: conjugated, time-reversed
/// unit tones, so a matched bit produces magnitude `samples_per_bit`.
pub fn matched_filters(params: &ModulationParams) -> (FirFilter, FirFilter) {
    let spb = params.samples_per_bit();
    let tone = |freq: f64| {
        let step = TAU * freq / params.sample_rate;
        let coeffs = (0..spb)
            .map(|k| {
                let phase = -step * (spb - 1 - k) as f64;
                Complex32::new(phase.cos() as f32, phase.sin() as f32)
            })
            .collect();
        FirFilter::new(coeffs).expect("samples_per_bit >= 1")
    };
    (tone(params.freq_one), tone(params.freq_zero))
}

/// Full linear convolution of the two coefficient vectors.
pub fn compose(a: &FirFilter, b: &FirFilter) -> FirFilter {
    let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, x) in a.coeffs.iter().enumerate() {
        let x = Complex64::new(x.re as f64, x.im as f64);
        for (j, y) in b.coeffs.iter().enumerate() {
            out[i + j] += x * Complex64::new(y.re as f64, y.im as f64);
        }
    }
    FirFilter::new(out.iter().map(|v| Complex32::new(v.re as f32, v.im as f32)).collect())
        .expect("nonempty")
}
