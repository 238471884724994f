use std::f64::consts::TAU;

use num_complex::Complex32;

use crate::error::{Error, Result};

/// Interleaved 16-bit I/Q as delivered by the receiver.
#[derive(Clone, Debug, PartialEq)]
pub struct RawSampleBlock {
    samples: Vec<i16>,
    /// Stream index of the first sample.
    pub start_time: u64,
    pub sample_rate: f64,
}

impl RawSampleBlock {
    pub fn new(samples: Vec<i16>, start_time: u64, sample_rate: f64) -> Result<Self> {
        if samples.len() % 2 != 0 {
            return Err(Error::OddRawLength(samples.len()));
        }
        Ok(Self {
            samples,
            start_time,
            sample_rate,
        })
    }

    pub fn interleaved(&self) -> &[i16] {
        &self.samples
    }

    pub fn into_interleaved(self) -> Vec<i16> {
        self.samples
    }

    /// Number of complex samples.
    pub fn len(&self) -> usize {
        self.samples.len() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn end_time(&self) -> u64 {
        self.start_time + self.len() as u64
    }
}

/// Interleaved int16 pairs to complex floats.
pub fn convert(raw: &[i16]) -> Result<Vec<Complex32>> {
    let mut out = Vec::new();
    convert_into(raw, &mut out)?;
    Ok(out)
}

pub(crate) fn convert_into(raw: &[i16], out: &mut Vec<Complex32>) -> Result<()> {
    if raw.len() % 2 != 0 {
        return Err(Error::OddRawLength(raw.len()));
    }
    out.clear();
    out.extend(
        raw.chunks_exact(2)
            .map(|p| Complex32::new(p[0] as f32, p[1] as f32)),
    );
    Ok(())
}

/// Multiplies by `exp(-2πi·lo·(start_index + i)/fs)`.
///
/// The oscillator phase follows the absolute stream index, so overlapping
/// windows mixed separately agree sample for sample.
pub fn mix(x: &[Complex32], lo_freq: f64, sample_rate: f64, start_index: u64) -> Vec<Complex32> {
    let mut out = x.to_vec();
    mix_in_place(&mut out, lo_freq, sample_rate, start_index);
    out
}

pub fn mix_in_place(x: &mut [Complex32], lo_freq: f64, sample_rate: f64, start_index: u64) {
    if lo_freq == 0.0 {
        return;
    }
    let cycles_per_sample = lo_freq / sample_rate;
    // Split the index so the phase product stays exact for long streams.
    let base = (cycles_per_sample * start_index as f64).fract();
    for (i, v) in x.iter_mut().enumerate() {
        let cycles = (base + (cycles_per_sample * i as f64).fract()).fract();
        let (s, c) = (-TAU * cycles).sin_cos();
        *v *= Complex32::new(c as f32, s as f32);
    }
}
