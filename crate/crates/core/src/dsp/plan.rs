use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex32;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

use super::fir::FirFilter;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Inverse,
}

/// What a pinned work array is used for. Together with its length this
/// identifies the array, so a given task shape always reuses the same memory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BufferRole {
    Converted,
    Filtered(u8),
    OlaSpectrum,
    OlaProduct,
    FftScratch,
    CorrInput,
    CorrProduct,
    CorrOutput,
}

/// Counters exposed so callers (and tests) can observe memoization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CacheStats {
    pub plans_created: u64,
    pub buffers_allocated: u64,
    pub filter_spectra_computed: u64,
    /// Blocks pushed through overlap-add (one forward transform each).
    pub ola_blocks: u64,
    pub corr_forward: u64,
    pub corr_inverse: u64,
}

impl CacheStats {
    /// Allocations of any kind: plans, arrays, filter spectra.
    pub fn allocations(&self) -> u64 {
        self.plans_created + self.buffers_allocated + self.filter_spectra_computed
    }
}

/// Prepared FFT plans, pinned work arrays and filter spectra for one engine
/// context. Nothing is ever released; a shape seen once is served from the
/// cache afterwards.
///
/// Not `Sync` by intent of use: one task at a time per cache.
pub struct PlanCache {
    planner: FftPlanner<f32>,
    real_planner: RealFftPlanner<f32>,
    complex_plans: HashMap<(usize, Direction), Arc<dyn Fft<f32>>>,
    forward_real: HashMap<usize, Arc<dyn RealToComplex<f32>>>,
    inverse_real: HashMap<usize, Arc<dyn ComplexToReal<f32>>>,
    complex_bufs: HashMap<(BufferRole, usize), Vec<Complex32>>,
    real_bufs: HashMap<(BufferRole, usize), Vec<f32>>,
    filter_spectra: HashMap<(u64, usize), Arc<[Complex32]>>,
    stats: CacheStats,
}

impl Default for PlanCache {
    fn default() -> Self {
        Self::new()
    }
}

impl std::fmt::Debug for PlanCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PlanCache").field("stats", &self.stats).finish_non_exhaustive()
    }
}

impl PlanCache {
    pub fn new() -> Self {
        Self {
            planner: FftPlanner::new(),
            real_planner: RealFftPlanner::new(),
            complex_plans: HashMap::new(),
            forward_real: HashMap::new(),
            inverse_real: HashMap::new(),
            complex_bufs: HashMap::new(),
            real_bufs: HashMap::new(),
            filter_spectra: HashMap::new(),
            stats: CacheStats::default(),
        }
    }

    pub fn stats(&self) -> CacheStats {
        self.stats
    }

    pub(crate) fn stats_mut(&mut self) -> &mut CacheStats {
        &mut self.stats
    }

    pub(crate) fn complex_plan(&mut self, len: usize, dir: Direction) -> Arc<dyn Fft<f32>> {
        if let Some(p) = self.complex_plans.get(&(len, dir)) {
            return Arc::clone(p);
        }
        let plan = match dir {
            Direction::Forward => self.planner.plan_fft_forward(len),
            Direction::Inverse => self.planner.plan_fft_inverse(len),
        };
        self.stats.plans_created += 1;
        self.complex_plans.insert((len, dir), Arc::clone(&plan));
        plan
    }

    pub(crate) fn real_forward(&mut self, len: usize) -> Arc<dyn RealToComplex<f32>> {
        if let Some(p) = self.forward_real.get(&len) {
            return Arc::clone(p);
        }
        let plan = self.real_planner.plan_fft_forward(len);
        self.stats.plans_created += 1;
        self.forward_real.insert(len, Arc::clone(&plan));
        plan
    }

    pub(crate) fn real_inverse(&mut self, len: usize) -> Arc<dyn ComplexToReal<f32>> {
        if let Some(p) = self.inverse_real.get(&len) {
            return Arc::clone(p);
        }
        let plan = self.real_planner.plan_fft_inverse(len);
        self.stats.plans_created += 1;
        self.inverse_real.insert(len, Arc::clone(&plan));
        plan
    }

    /// Checks out the pinned complex array for `(role, len)`. Contents are
    /// whatever the previous user left; hand it back with [`Self::put_complex`].
    pub(crate) fn take_complex(&mut self, role: BufferRole, len: usize) -> Vec<Complex32> {
        match self.complex_bufs.remove(&(role, len)) {
            Some(buf) => buf,
            None => {
                self.stats.buffers_allocated += 1;
                vec![Complex32::new(0.0, 0.0); len]
            }
        }
    }

    pub(crate) fn put_complex(&mut self, role: BufferRole, buf: Vec<Complex32>) {
        self.complex_bufs.insert((role, buf.len()), buf);
    }

    pub(crate) fn take_real(&mut self, role: BufferRole, len: usize) -> Vec<f32> {
        match self.real_bufs.remove(&(role, len)) {
            Some(buf) => buf,
            None => {
                self.stats.buffers_allocated += 1;
                vec![0.0; len]
            }
        }
    }

    pub(crate) fn put_real(&mut self, role: BufferRole, buf: Vec<f32>) {
        self.real_bufs.insert((role, buf.len()), buf);
    }

    /// `fft(h) / len`, zero-padded to `len`. The `1/len` folds the inverse
    /// transform normalization into the filter.
    pub(crate) fn filter_spectrum(&mut self, h: &FirFilter, len: usize) -> Arc<[Complex32]> {
        let key = (h.fingerprint(), len);
        if let Some(s) = self.filter_spectra.get(&key) {
            return Arc::clone(s);
        }
        let mut buf = vec![Complex32::new(0.0, 0.0); len];
        let scale = 1.0 / len as f32;
        for (b, c) in buf.iter_mut().zip(h.coeffs()) {
            *b = *c * scale;
        }
        self.complex_plan(len, Direction::Forward).process(&mut buf);
        self.stats.filter_spectra_computed += 1;
        let spectrum: Arc<[Complex32]> = buf.into();
        self.filter_spectra.insert(key, Arc::clone(&spectrum));
        spectrum
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn buffers_are_reused_per_role_and_length() {
        let mut cache = PlanCache::new();
        let a = cache.take_complex(BufferRole::OlaProduct, 64);
        cache.put_complex(BufferRole::OlaProduct, a);
        let before = cache.stats();
        let b = cache.take_complex(BufferRole::OlaProduct, 64);
        assert_eq!(b.len(), 64);
        cache.put_complex(BufferRole::OlaProduct, b);
        assert_eq!(cache.stats().allocations(), before.allocations());
        let _ = cache.take_complex(BufferRole::OlaProduct, 65);
        assert_eq!(cache.stats().buffers_allocated, before.buffers_allocated + 1);
    }

    #[test]
    fn plans_are_created_once() {
        let mut cache = PlanCache::new();
        cache.complex_plan(840, Direction::Forward);
        cache.complex_plan(840, Direction::Forward);
        cache.complex_plan(840, Direction::Inverse);
        cache.real_forward(105);
        cache.real_forward(105);
        assert_eq!(cache.stats().plans_created, 3);
    }
}
