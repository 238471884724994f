use num_complex::Complex32;

use super::fir::FirFilter;
use super::pad_length;
use super::plan::{BufferRole, Direction, PlanCache};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ConvMode {
    /// All `|x| + |h| - 1` outputs.
    Full,
    /// `|x|` outputs with the group delay `(|h| - 1) / 2` removed, so output
    /// index `t` lines up with input index `t`.
    #[default]
    Same,
}

/// Transform size used for overlap-add blocks with a filter of `filter_len` taps.
pub fn block_transform_len(filter_len: usize) -> usize {
    pad_length(4 * filter_len.max(1))
}

/// Linear convolution of `x` with `h` by FFT overlap-add.
pub fn overlap_add_filter(
    x: &[Complex32],
    h: &FirFilter,
    mode: ConvMode,
    cache: &mut PlanCache,
) -> Vec<Complex32> {
    let mut out = [Vec::new()];
    overlap_add_bank(x, &[h], mode, cache, &mut out);
    let [out] = out;
    out
}

/// Applies several filters to the same input, sharing one forward transform
/// per block. `outs[k]` receives `x * filters[k]`.
pub fn overlap_add_bank(
    x: &[Complex32],
    filters: &[&FirFilter],
    mode: ConvMode,
    cache: &mut PlanCache,
    outs: &mut [Vec<Complex32>],
) {
    assert_eq!(filters.len(), outs.len(), "one output per filter");
    for (out, h) in outs.iter_mut().zip(filters) {
        let len = match (mode, x.is_empty()) {
            (_, true) => 0,
            (ConvMode::Full, false) => x.len() + h.len() - 1,
            (ConvMode::Same, false) => x.len(),
        };
        out.clear();
        out.resize(len, Complex32::new(0.0, 0.0));
    }
    if x.is_empty() || filters.is_empty() {
        return;
    }

    let longest = filters.iter().map(|h| h.len()).max().unwrap_or(1);
    let n = block_transform_len(longest);
    let step = n - longest + 1;

    let forward = cache.complex_plan(n, Direction::Forward);
    let inverse = cache.complex_plan(n, Direction::Inverse);
    let spectra: Vec<_> = filters.iter().map(|h| cache.filter_spectrum(h, n)).collect();
    let scratch_len = forward
        .get_inplace_scratch_len()
        .max(inverse.get_inplace_scratch_len());
    let mut spec = cache.take_complex(BufferRole::OlaSpectrum, n);
    let mut prod = cache.take_complex(BufferRole::OlaProduct, n);
    let mut scratch = cache.take_complex(BufferRole::FftScratch, scratch_len);

    let mut blocks = 0u64;
    for start in (0..x.len()).step_by(step) {
        let seg = &x[start..(start + step).min(x.len())];
        spec[..seg.len()].copy_from_slice(seg);
        spec[seg.len()..].fill(Complex32::new(0.0, 0.0));
        forward.process_with_scratch(&mut spec, &mut scratch);
        blocks += 1;

        for ((out, h), hs) in outs.iter_mut().zip(filters).zip(&spectra) {
            for ((p, s), f) in prod.iter_mut().zip(spec.iter()).zip(hs.iter()) {
                *p = s * f;
            }
            inverse.process_with_scratch(&mut prod, &mut scratch);

            let shift = match mode {
                ConvMode::Full => 0,
                ConvMode::Same => h.group_delay(),
            };
            // Full-convolution indices start..start+valid map to output
            // index (full - shift) when that lands inside the output.
            let valid = seg.len() + h.len() - 1;
            let first = shift.saturating_sub(start);
            let last = valid.min((out.len() + shift).saturating_sub(start));
            for i in first..last {
                out[start + i - shift] += prod[i];
            }
        }
    }

    cache.stats_mut().ola_blocks += blocks;
    cache.put_complex(BufferRole::OlaSpectrum, spec);
    cache.put_complex(BufferRole::OlaProduct, prod);
    cache.put_complex(BufferRole::FftScratch, scratch);
}
