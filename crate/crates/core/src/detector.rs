//! Back half of the receive chain: replica preparation, FFT cross-correlation
//! (batched over codes), peak search with parabolic refinement, and the
//! per-code statistics behind the accept/reject decision.
//!
//! Correlation is `ifft(fft(d) ⊙ conj(fft(d_c)))`, so lag `t` holds
//! `Σ_i d_c[i]·d[i + t]`. Both the window and the replica go through the
//! same "same"-mode filters, which already removes the composed filter's
//! group delay; a replica starting at stream index `s` peaks at lag
//! `s - window_start`.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_complex::Complex32;
use serde::{Deserialize, Serialize};

use crate::codegen::{synth_replica, TagCode, TagId};
use crate::dsp::{
    demodulate_baseband, demodulate_window_into, pad_length, BufferRole, Demodulated, Demodulator,
    PlanCache, RawSampleBlock,
};
use crate::error::{Error, Result};

/// A replica after the demodulation chain, cut to its analytic support.
#[derive(Clone, Debug)]
pub struct DemodulatedReplica {
    pub d: Vec<f32>,
    pub energy: f64,
    pub abs_sum: f64,
}

impl DemodulatedReplica {
    pub fn nonzero_len(&self) -> usize {
        self.d.len()
    }
}

/// Frequency-domain replica, ready to be multiplied with a window spectrum.
#[derive(Clone, Debug)]
pub struct TransformedCode {
    pub tag_id: TagId,
    pub code_fingerprint: u64,
    /// `conj(fft(d_c)) / transform_len`, half spectrum.
    spectrum: Vec<Complex32>,
    pub transform_len: usize,
    pub window_len: usize,
    pub replica: Arc<DemodulatedReplica>,
}

impl TransformedCode {
    pub fn nonzero_len(&self) -> usize {
        self.replica.nonzero_len()
    }

    pub fn energy(&self) -> f64 {
        self.replica.energy
    }

    pub fn abs_sum(&self) -> f64 {
        self.replica.abs_sum
    }
}

/// Support of a demodulated replica: the packet plus the part of the
/// composed filter tail that survives "same"-mode trimming.
pub fn replica_support(demod: &Demodulator) -> usize {
    demod.params().packet_samples() + demod.filter_len() - 1 - demod.group_delay()
}

/// Transform size used to correlate a window of `window_len` samples with a
/// replica of `support` samples without wrap-around.
pub fn correlation_len(window_len: usize, support: usize) -> usize {
    pad_length((window_len + support).saturating_sub(1).max(1))
}

pub fn demodulate_replica(
    code: &TagCode,
    demod: &Demodulator,
    cache: &mut PlanCache,
) -> Result<DemodulatedReplica> {
    if code.params != *demod.params() {
        return Err(Error::InvalidModulation(format!(
            "code {} uses different modulation than the receiver",
            code.tag_id
        )));
    }
    let support = replica_support(demod);
    let x = synth_replica(code, support)?;
    let Demodulated { d, .. } = demodulate_baseband(&x, demod, cache)?;
    let energy = d.iter().map(|&v| v as f64 * v as f64).sum();
    let abs_sum = d.iter().map(|&v| v.abs() as f64).sum();
    Ok(DemodulatedReplica { d, energy, abs_sum })
}

pub fn transform_replica(
    code: &TagCode,
    replica: Arc<DemodulatedReplica>,
    window_len: usize,
    cache: &mut PlanCache,
) -> TransformedCode {
    let n = correlation_len(window_len, replica.nonzero_len());
    let plan = cache.real_forward(n);
    let mut input = vec![0.0f32; n];
    input[..replica.d.len()].copy_from_slice(&replica.d);
    let mut spectrum = plan.make_output_vec();
    let mut scratch = cache.take_complex(BufferRole::FftScratch, plan.get_scratch_len());
    plan.process_with_scratch(&mut input, &mut spectrum, &mut scratch)
        .expect("buffer sizes come from the plan");
    cache.put_complex(BufferRole::FftScratch, scratch);
    let scale = 1.0 / n as f32;
    spectrum.iter_mut().for_each(|v| *v = v.conj() * scale);
    TransformedCode {
        tag_id: code.tag_id.clone(),
        code_fingerprint: code.fingerprint(),
        spectrum,
        transform_len: n,
        window_len,
        replica,
    }
}

fn check_shape(d_len: usize, tc: &TransformedCode) -> Result<()> {
    if d_len + tc.nonzero_len() - 1 > tc.transform_len {
        return Err(Error::ShapeMismatch {
            signal: d_len,
            support: tc.nonzero_len(),
            transform: tc.transform_len,
        });
    }
    Ok(())
}

/// Half spectrum of `d` zero-padded to `n`, in a pinned cache buffer that the
/// caller hands back with [`release_data_spectrum`].
fn data_spectrum(d: &[f32], n: usize, cache: &mut PlanCache) -> Vec<Complex32> {
    let plan = cache.real_forward(n);
    let mut input = cache.take_real(BufferRole::CorrInput, n);
    input[..d.len()].copy_from_slice(d);
    input[d.len()..].fill(0.0);
    let mut spectrum = cache.take_complex(BufferRole::CorrInput, n / 2 + 1);
    let mut scratch = cache.take_complex(BufferRole::FftScratch, plan.get_scratch_len());
    plan.process_with_scratch(&mut input, &mut spectrum, &mut scratch)
        .expect("buffer sizes come from the plan");
    cache.put_complex(BufferRole::FftScratch, scratch);
    cache.put_real(BufferRole::CorrInput, input);
    cache.stats_mut().corr_forward += 1;
    spectrum
}

fn release_data_spectrum(spectrum: Vec<Complex32>, cache: &mut PlanCache) {
    cache.put_complex(BufferRole::CorrInput, spectrum);
}

/// One inverse transform: lags `0..d_len` of the correlation into `out`.
fn correlate_spectrum(
    data: &[Complex32],
    tc: &TransformedCode,
    d_len: usize,
    cache: &mut PlanCache,
    out: &mut Vec<f32>,
) {
    let n = tc.transform_len;
    let plan = cache.real_inverse(n);
    let mut prod = cache.take_complex(BufferRole::CorrProduct, n / 2 + 1);
    for ((p, a), b) in prod.iter_mut().zip(data).zip(&tc.spectrum) {
        *p = a * b;
    }
    // Real signals: DC (and Nyquist for even n) are real up to rounding.
    prod[0].im = 0.0;
    if n % 2 == 0 {
        prod[n / 2].im = 0.0;
    }
    let mut output = cache.take_real(BufferRole::CorrOutput, n);
    let mut scratch = cache.take_complex(BufferRole::FftScratch, plan.get_scratch_len());
    plan.process_with_scratch(&mut prod, &mut output, &mut scratch)
        .expect("imaginary parts were cleared");
    out.clear();
    out.extend_from_slice(&output[..d_len]);
    cache.put_complex(BufferRole::FftScratch, scratch);
    cache.put_real(BufferRole::CorrOutput, output);
    cache.put_complex(BufferRole::CorrProduct, prod);
    cache.stats_mut().corr_inverse += 1;
}

/// Lag-domain correlation of `d` with one prepared code; `result[t] = Σ_i d_c[i]·d[i+t]`.
pub fn xcorr(d: &[f32], tc: &TransformedCode, cache: &mut PlanCache) -> Result<Vec<f32>> {
    let mut out = batch_xcorr(d, &[tc], cache)?;
    Ok(out.pop().expect("one code in, one out"))
}

/// Correlates `d` with every code, transforming `d` once.
pub fn batch_xcorr(d: &[f32], codes: &[&TransformedCode], cache: &mut PlanCache) -> Result<Vec<Vec<f32>>> {
    let Some(first) = codes.first() else {
        return Ok(Vec::new());
    };
    for tc in codes {
        if tc.transform_len != first.transform_len {
            return Err(Error::MixedShapes {
                expected: first.transform_len,
                found: tc.transform_len,
            });
        }
        check_shape(d.len(), tc)?;
    }
    let spectrum = data_spectrum(d, first.transform_len, cache);
    let out = codes
        .iter()
        .map(|tc| {
            let mut xc = Vec::with_capacity(d.len());
            correlate_spectrum(&spectrum, tc, d.len(), cache, &mut xc);
            xc
        })
        .collect();
    release_data_spectrum(spectrum, cache);
    Ok(out)
}

/// Index and signed value of the largest `|xc_i|`; ties go to the smaller index.
pub fn find_peak(xc: &[f32]) -> Result<(usize, f32)> {
    let mut best = *xc.first().ok_or(Error::EmptyInput)?;
    let mut at = 0;
    for (i, &v) in xc.iter().enumerate().skip(1) {
        if v.abs() > best.abs() {
            best = v;
            at = i;
        }
    }
    Ok((at, best))
}

/// Three-point parabolic refinement of the peak of `|xc|` at `j`, in `[-0.5, 0.5]`.
///
/// Returns 0 at the array edges and where the neighbourhood is not concave.
pub fn interpolate_peak(xc: &[f32], j: usize) -> f64 {
    if j == 0 || j + 1 >= xc.len() {
        return 0.0;
    }
    let (a, b, c) = (
        xc[j - 1].abs() as f64,
        xc[j].abs() as f64,
        xc[j + 1].abs() as f64,
    );
    let denom = a - 2.0 * b + c;
    if !(denom < 0.0) {
        return 0.0;
    }
    (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Statistics {
    pub w_c: f64,
    pub q: f64,
    pub p_c: f64,
    /// The replica ran past the end of the window; sums are truncated.
    pub partial: bool,
}

/// `w_c = Σ d_c[i]·d[i+j]`, `q = Σ d[i+j]²`, `p_c = Σ d_c[i]·u[i+j]` over the
/// replica support (`i < n`), truncated at the window edge.
pub fn statistics(d: &[f32], u: &[f32], replica: &[f32], j: usize) -> Result<Statistics> {
    if d.len() != u.len() {
        return Err(Error::LengthMismatch {
            left: d.len(),
            right: u.len(),
        });
    }
    let avail = d.len().saturating_sub(j).min(replica.len());
    let (mut w_c, mut q, mut p_c) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..avail {
        let (c, x, y) = (replica[i] as f64, d[i + j] as f64, u[i + j] as f64);
        w_c += c * x;
        q += x * x;
        p_c += c * y;
    }
    Ok(Statistics {
        w_c,
        q,
        p_c,
        partial: avail < replica.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionConfig {
    /// Minimum normalized correlation `w_c / sqrt(q · energy)` to accept.
    pub threshold: f64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self { threshold: 0.25 }
    }
}

/// One correlation candidate. Serializes to the detection JSON-lines record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub tag_id: TagId,
    pub toa_seconds: f64,
    pub peak_index: usize,
    pub subsample_offset: f64,
    pub w_c: f64,
    pub q: f64,
    pub p_c: f64,
    pub score: f64,
    pub accepted: bool,
    pub partial: bool,
    /// Stream index of the arrival, `window_start + peak_index + subsample_offset`.
    #[serde(skip)]
    pub toa_samples: f64,
    #[serde(skip)]
    pub peak_value: f32,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DetectTimings {
    pub correlation: Duration,
    pub peak_stats: Duration,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EngineCounters {
    pub replicas_demodulated: u64,
    pub codes_transformed: u64,
}

/// A single-owner processing context: demodulator, plan cache and the
/// replica/transform store. One task at a time.
#[derive(Debug)]
pub struct Engine {
    demod: Demodulator,
    cache: PlanCache,
    replicas: HashMap<u64, Arc<DemodulatedReplica>>,
    transformed: HashMap<(u64, usize), Arc<TransformedCode>>,
    counters: EngineCounters,
    xc: Vec<f32>,
}

impl Engine {
    pub fn new(demod: Demodulator) -> Self {
        Self {
            demod,
            cache: PlanCache::new(),
            replicas: HashMap::new(),
            transformed: HashMap::new(),
            counters: EngineCounters::default(),
            xc: Vec::new(),
        }
    }

    pub fn demodulator(&self) -> &Demodulator {
        &self.demod
    }

    pub fn cache(&self) -> &PlanCache {
        &self.cache
    }

    pub fn cache_mut(&mut self) -> &mut PlanCache {
        &mut self.cache
    }

    pub fn counters(&self) -> EngineCounters {
        self.counters
    }

    pub fn demodulate_window(&mut self, block: &RawSampleBlock) -> Result<Demodulated> {
        let mut out = Demodulated::default();
        self.demodulate_window_into(block, &mut out)?;
        Ok(out)
    }

    pub fn demodulate_window_into(&mut self, block: &RawSampleBlock, out: &mut Demodulated) -> Result<()> {
        demodulate_window_into(block, &self.demod, &mut self.cache, out)
    }

    /// Demodulated replica for `code`, computed on first use and kept.
    pub fn replica(&mut self, code: &TagCode) -> Result<Arc<DemodulatedReplica>> {
        if let Some(r) = self.replicas.get(&code.fingerprint()) {
            return Ok(Arc::clone(r));
        }
        let r = Arc::new(demodulate_replica(code, &self.demod, &mut self.cache)?);
        self.counters.replicas_demodulated += 1;
        self.replicas.insert(code.fingerprint(), Arc::clone(&r));
        Ok(r)
    }

    /// Transformed replica for windows of `window_len` samples, kept indefinitely.
    pub fn prepare_code(&mut self, code: &TagCode, window_len: usize) -> Result<Arc<TransformedCode>> {
        let key = (code.fingerprint(), window_len);
        if let Some(tc) = self.transformed.get(&key) {
            return Ok(Arc::clone(tc));
        }
        let replica = self.replica(code)?;
        let tc = Arc::new(transform_replica(code, replica, window_len, &mut self.cache));
        self.counters.codes_transformed += 1;
        self.transformed.insert(key, Arc::clone(&tc));
        Ok(tc)
    }

    pub fn xcorr(&mut self, d: &[f32], tc: &TransformedCode) -> Result<Vec<f32>> {
        xcorr(d, tc, &mut self.cache)
    }

    pub fn batch_xcorr(&mut self, d: &[f32], codes: &[&TransformedCode]) -> Result<Vec<Vec<f32>>> {
        batch_xcorr(d, codes, &mut self.cache)
    }

    pub fn detect(
        &mut self,
        window: &Demodulated,
        codes: &[Arc<TagCode>],
        cfg: &DetectionConfig,
    ) -> Result<Vec<Detection>> {
        self.detect_profiled(window, codes, cfg).map(|(d, _)| d)
    }

    /// Correlates the window with every code and scores each peak. All
    /// candidates are returned; `accepted` marks those at or above the
    /// threshold that are fully contained in the window.
    pub fn detect_profiled(
        &mut self,
        window: &Demodulated,
        codes: &[Arc<TagCode>],
        cfg: &DetectionConfig,
    ) -> Result<(Vec<Detection>, DetectTimings)> {
        let mut timings = DetectTimings::default();
        if window.is_empty() || codes.is_empty() {
            return Ok((Vec::new(), timings));
        }
        if window.d.len() != window.u.len() {
            return Err(Error::LengthMismatch {
                left: window.d.len(),
                right: window.u.len(),
            });
        }
        let prepared = codes
            .iter()
            .map(|c| self.prepare_code(c, window.len()))
            .collect::<Result<Vec<_>>>()?;

        let sample_rate = self.demod.params().sample_rate;
        let mut xc = std::mem::take(&mut self.xc);
        let mut detections = Vec::with_capacity(codes.len());
        let mut spectra: HashMap<usize, Vec<Complex32>> = HashMap::new();

        for tc in &prepared {
            check_shape(window.len(), tc)?;
            let t0 = Instant::now();
            if !spectra.contains_key(&tc.transform_len) {
                let s = data_spectrum(&window.d, tc.transform_len, &mut self.cache);
                spectra.insert(tc.transform_len, s);
            }
            correlate_spectrum(&spectra[&tc.transform_len], tc, window.len(), &mut self.cache, &mut xc);
            let t1 = Instant::now();
            timings.correlation += t1 - t0;

            let (j, peak_value) = find_peak(&xc)?;
            let delta = interpolate_peak(&xc, j);
            let stats = statistics(&window.d, &window.u, &tc.replica.d, j)?;
            let denom = (stats.q * tc.energy()).sqrt();
            let score = if denom > 0.0 {
                (stats.w_c / denom).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            let toa_samples = window.start_time as f64 + j as f64 + delta;
            detections.push(Detection {
                tag_id: tc.tag_id.clone(),
                toa_seconds: toa_samples / sample_rate,
                peak_index: j,
                subsample_offset: delta,
                w_c: stats.w_c,
                q: stats.q,
                p_c: stats.p_c,
                score,
                accepted: score >= cfg.threshold && !stats.partial,
                partial: stats.partial,
                toa_samples,
                peak_value,
            });
            timings.peak_stats += t1.elapsed();
        }
        // Different shapes need their own buffer slot; there is only one per length.
        for (_, s) in spectra {
            release_data_spectrum(s, &mut self.cache);
        }
        self.xc = xc;
        Ok((detections, timings))
    }
}
