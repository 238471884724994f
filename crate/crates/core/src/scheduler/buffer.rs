use std::collections::VecDeque;
use std::ops::Range;
use std::sync::{Arc, Mutex, MutexGuard};

use crate::dsp::RawSampleBlock;
use crate::error::{Error, Result};

/// What a push did to the buffer.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PushOutcome {
    /// Stream indices discarded to make room (or by a resynchronization).
    pub evicted: Range<u64>,
    /// Missing stream indices between the previous tail and this block.
    pub gap: Option<Range<u64>>,
}

/// Fixed-capacity FIFO of raw I/Q samples indexed by absolute stream position.
///
/// Sample `t` is readable iff `head() <= t < tail()`.
#[derive(Clone, Debug)]
pub struct CircularBuffer {
    capacity: usize,
    data: VecDeque<[i16; 2]>,
    head: u64,
    origin: Option<u64>,
    sample_rate: f64,
    gaps: Vec<Range<u64>>,
}

impl CircularBuffer {
    pub fn new(capacity: usize, sample_rate: f64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("buffer capacity must be at least one sample".into()));
        }
        Ok(Self {
            capacity,
            data: VecDeque::new(),
            head: 0,
            origin: None,
            sample_rate,
            gaps: Vec::new(),
        })
    }

    pub fn with_duration(seconds: f64, sample_rate: f64) -> Result<Self> {
        if !(seconds > 0.0 && sample_rate > 0.0) {
            return Err(Error::Config(format!(
                "buffer duration and sample rate must be positive, got {seconds} s at {sample_rate} Hz"
            )));
        }
        Self::new((seconds * sample_rate).round() as usize, sample_rate)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn head(&self) -> u64 {
        self.head
    }

    pub fn tail(&self) -> u64 {
        self.head + self.data.len() as u64
    }

    /// Start of the first block ever pushed.
    pub fn origin(&self) -> Option<u64> {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Appends `block`. The first block fixes the stream origin; a later
    /// block that starts past the tail drops the buffer contents and restarts
    /// at the block (the gap is returned and remembered for [`take_gaps`]).
    ///
    /// [`take_gaps`]: Self::take_gaps
    pub fn push(&mut self, block: &RawSampleBlock) -> Result<PushOutcome> {
        let tail = self.tail();
        let mut outcome = PushOutcome {
            evicted: self.head..self.head,
            gap: None,
        };
        if self.origin.is_none() {
            self.head = block.start_time;
            self.origin = Some(block.start_time);
            outcome.evicted = self.head..self.head;
        } else if block.start_time < tail {
            return Err(Error::NonMonotonic {
                start: block.start_time,
                tail,
            });
        } else if block.start_time > tail {
            let gap = tail..block.start_time;
            log::warn!("gap of {} samples at stream index {tail}", gap.end - gap.start);
            outcome.evicted = self.head..tail;
            outcome.gap = Some(gap.clone());
            self.gaps.push(gap);
            self.data.clear();
            self.head = block.start_time;
        }

        let raw = block.interleaved();
        let n = block.len();
        // Only the newest `capacity` samples of an oversized block survive.
        let skip = n.saturating_sub(self.capacity);
        let overflow = (self.data.len() + n - skip).saturating_sub(self.capacity);
        let old_head = self.head;
        self.data.drain(..overflow);
        self.head += (overflow + skip) as u64;
        self.data
            .extend(raw[2 * skip..].chunks_exact(2).map(|p| [p[0], p[1]]));
        if self.head > old_head {
            outcome.evicted = outcome.evicted.start.min(old_head)..self.head;
        }
        Ok(outcome)
    }

    /// Copies stream indices `range` out of the buffer.
    pub fn read(&self, range: Range<u64>) -> Result<RawSampleBlock> {
        if range.start < self.head {
            return Err(Error::Evicted {
                range,
                head: self.head,
            });
        }
        if range.end > self.tail() || range.end < range.start {
            return Err(Error::NotYetBuffered {
                range,
                tail: self.tail(),
            });
        }
        let from = (range.start - self.head) as usize;
        let to = (range.end - self.head) as usize;
        let samples = self.data.range(from..to).flatten().copied().collect();
        RawSampleBlock::new(samples, range.start, self.sample_rate)
    }

    /// Gaps recorded since the last call.
    pub fn take_gaps(&mut self) -> Vec<Range<u64>> {
        std::mem::take(&mut self.gaps)
    }
}

/// A [`CircularBuffer`] shared between one ingesting context and the
/// scheduler. Each push holds the lock for the whole block, so a read never
/// sees half of one.
#[derive(Clone, Debug)]
pub struct SharedBuffer(Arc<Mutex<CircularBuffer>>);

impl SharedBuffer {
    pub fn new(buffer: CircularBuffer) -> Self {
        Self(Arc::new(Mutex::new(buffer)))
    }

    pub fn lock(&self) -> MutexGuard<'_, CircularBuffer> {
        // Nothing inside the lock panics halfway through a push.
        self.0.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn push(&self, block: &RawSampleBlock) -> Result<PushOutcome> {
        self.lock().push(block)
    }

    pub fn read(&self, range: Range<u64>) -> Result<RawSampleBlock> {
        self.lock().read(range)
    }

    /// `(head, tail)` at one instant.
    pub fn bounds(&self) -> (u64, u64) {
        let b = self.lock();
        (b.head(), b.tail())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(start: u64, n: usize) -> RawSampleBlock {
        let raw = (0..n).flat_map(|k| {
            let t = (start + k as u64) as i16;
            [t, t.wrapping_neg()]
        });
        RawSampleBlock::new(raw.collect(), start, 1.0e6).unwrap()
    }

    #[test]
    fn push_within_capacity_evicts_nothing() {
        let mut b = CircularBuffer::new(100, 1.0e6).unwrap();
        let out = b.push(&block(0, 60)).unwrap();
        assert!(out.evicted.is_empty());
        assert_eq!((b.head(), b.tail()), (0, 60));
    }

    #[test]
    fn overflow_evicts_exactly_the_excess() {
        let mut b = CircularBuffer::new(100, 1.0e6).unwrap();
        b.push(&block(0, 60)).unwrap();
        let out = b.push(&block(60, 55)).unwrap();
        assert_eq!(out.evicted, 0..15);
        assert_eq!((b.head(), b.tail()), (15, 115));
        let r = b.read(15..18).unwrap();
        assert_eq!(r.interleaved(), &[15, -15, 16, -16, 17, -17]);
        assert_eq!(r.start_time, 15);
    }

    #[test]
    fn oversized_block_keeps_its_newest_samples() {
        let mut b = CircularBuffer::new(10, 1.0e6).unwrap();
        b.push(&block(0, 4)).unwrap();
        let out = b.push(&block(4, 25)).unwrap();
        assert_eq!(out.evicted, 0..19);
        assert_eq!((b.head(), b.tail()), (19, 29));
        assert_eq!(b.read(19..20).unwrap().interleaved(), &[19, -19]);
    }

    #[test]
    fn reads_outside_the_buffer_fail() {
        let mut b = CircularBuffer::new(10, 1.0e6).unwrap();
        b.push(&block(0, 20)).unwrap();
        assert!(matches!(b.read(5..12), Err(Error::Evicted { head: 10, .. })));
        assert!(matches!(b.read(15..21), Err(Error::NotYetBuffered { tail: 20, .. })));
        assert_eq!(b.read(10..20).unwrap().len(), 10);
    }

    #[test]
    fn first_block_sets_origin_and_gaps_resync() {
        let mut b = CircularBuffer::new(100, 1.0e6).unwrap();
        b.push(&block(500, 10)).unwrap();
        assert_eq!((b.head(), b.tail()), (500, 510));
        let out = b.push(&block(600, 5)).unwrap();
        assert_eq!(out.gap, Some(510..600));
        assert_eq!(out.evicted, 500..510);
        assert_eq!((b.head(), b.tail()), (600, 605));
        assert_eq!(b.take_gaps(), vec![510..600]);
        assert!(b.take_gaps().is_empty());
        assert!(matches!(
            b.push(&block(604, 5)),
            Err(Error::NonMonotonic { start: 604, tail: 605 })
        ));
    }

    #[test]
    fn fifteen_seconds_into_twelve() {
        let rate = 8.0e6;
        let mut b = CircularBuffer::with_duration(12.0, rate).unwrap();
        let chunk = 800_000;
        let raw = vec![0i16; 2 * chunk];
        let mut t = 0;
        while t < 15 * 8_000_000 {
            b.push(&RawSampleBlock::new(raw.clone(), t, rate).unwrap()).unwrap();
            t += chunk as u64;
        }
        assert_eq!(b.tail(), 120_000_000);
        assert_eq!(b.head(), b.tail() - 96_000_000);
    }

    #[test]
    fn shared_buffer_from_another_thread() {
        let shared = SharedBuffer::new(CircularBuffer::new(1000, 1.0e6).unwrap());
        let writer = shared.clone();
        let h = std::thread::spawn(move || {
            for k in 0..50 {
                writer.push(&block(k * 10, 10)).unwrap();
            }
        });
        h.join().unwrap();
        assert_eq!(shared.bounds(), (0, 500));
        assert_eq!(shared.read(490..491).unwrap().interleaved(), &[490, -490]);
    }
}
