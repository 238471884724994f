//! The sequential scheduler: a circular sample buffer feeding a searching
//! queue (overlapping windows scanned for every undetected tag) and a
//! tracking queue (one short window per predicted transmission), with
//! processing time split between them by a signed debt accumulator.
//!
//! All positions are absolute stream sample indices; seconds are derived for
//! reporting only.

mod buffer;
mod events;
mod sim;

use std::collections::BTreeMap;
use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use buffer::{CircularBuffer, PushOutcome, SharedBuffer};
pub use events::Event;
pub use sim::{run_simulation, CostModel, SimConfig, SimOutput, SimSummary, TimedEvent, Timing};

use crate::codegen::{TagCode, TagId};
use crate::detector::Detection;
use crate::dsp::RawSampleBlock;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchedulerConfig {
    /// Searching window length, seconds.
    pub window: f64,
    /// Overlap between consecutive searching windows, seconds.
    pub overlap: f64,
    /// Tracking window starts this long before the predicted arrival.
    pub tracking_before: f64,
    /// ... and ends this long after it.
    pub tracking_after: f64,
    pub buffer: f64,
    /// A tracked tag that has gone this long without a detection returns to
    /// searching.
    pub demotion_timeout: f64,
    /// Share of contested processing time given to searching.
    pub search_share: f64,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            window: 0.1,
            overlap: 0.01,
            tracking_before: 0.002,
            tracking_after: 0.010,
            buffer: 12.0,
            demotion_timeout: 180.0,
            search_share: 0.5,
        }
    }
}

impl SchedulerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("window", self.window),
            ("overlap", self.overlap),
            ("tracking_after", self.tracking_after),
            ("buffer", self.buffer),
            ("demotion_timeout", self.demotion_timeout),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("scheduler.{name} must be positive, got {v}")));
            }
        }
        if !(self.tracking_before >= 0.0 && self.tracking_before.is_finite()) {
            return Err(Error::Config(format!(
                "scheduler.tracking_before must be >= 0, got {}",
                self.tracking_before
            )));
        }
        if self.overlap >= self.window {
            return Err(Error::Config(format!(
                "scheduler.overlap ({}) must be shorter than the window ({})",
                self.overlap, self.window
            )));
        }
        if !(self.search_share > 0.0 && self.search_share <= 1.0) {
            return Err(Error::Config(format!(
                "scheduler.search_share must be in (0, 1], got {}",
                self.search_share
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Searching,
    Tracking,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Searching,
    Tracking,
}

/// A tag known to the scheduler.
#[derive(Clone, Debug)]
pub struct TagState {
    pub code: Arc<TagCode>,
    /// Transmission period in samples.
    pub period: u64,
    pub mode: Mode,
    /// Stream index of the next expected arrival; set iff tracking.
    pub next_prediction: Option<u64>,
    pub last_detection: Option<u64>,
    pub miss_count: u32,
}

/// One unit of work handed to the processing context.
#[derive(Clone, Debug)]
pub struct Task {
    pub id: u64,
    pub kind: TaskKind,
    pub range: Range<u64>,
    /// Every searching tag, or the one tracked tag.
    pub codes: Vec<Arc<TagCode>>,
    /// The other queue also had work when this task was chosen.
    pub contested: bool,
    /// The prediction a tracking task verifies.
    pub prediction: Option<u64>,
}

/// Result of a tracking task.
#[derive(Clone, Debug)]
pub enum TrackOutcome {
    Detected(Detection),
    Missed,
    /// The range had already left the buffer; nothing was processed.
    Evicted,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SchedulerStats {
    pub search_tasks: u64,
    pub track_tasks: u64,
    /// Reported processing time per queue, seconds.
    pub search_time: f64,
    pub track_time: f64,
    pub contested_search_time: f64,
    pub contested_track_time: f64,
    pub searched_samples: u64,
    pub dropped_samples: u64,
    pub gap_samples: u64,
    pub detections: u64,
    pub misses: u64,
}

#[derive(Debug)]
pub struct Scheduler {
    cfg: SchedulerConfig,
    sample_rate: f64,
    window: u64,
    step: u64,
    before: u64,
    after: u64,
    demotion: u64,
    buffer: SharedBuffer,
    tags: BTreeMap<TagId, TagState>,
    frontier: Option<u64>,
    debt: f64,
    next_id: u64,
    in_flight: Option<u64>,
    events: Vec<Event>,
    stats: SchedulerStats,
}

fn to_samples(seconds: f64, sample_rate: f64) -> u64 {
    (seconds * sample_rate).round() as u64
}

impl Scheduler {
    pub fn new(cfg: SchedulerConfig, sample_rate: f64) -> Result<Self> {
        cfg.validate()?;
        let buffer = SharedBuffer::new(CircularBuffer::with_duration(cfg.buffer, sample_rate)?);
        Self::with_buffer(cfg, sample_rate, buffer)
    }

    /// Uses an existing buffer, e.g. one an ingestion thread is writing to.
    pub fn with_buffer(cfg: SchedulerConfig, sample_rate: f64, buffer: SharedBuffer) -> Result<Self> {
        cfg.validate()?;
        let window = to_samples(cfg.window, sample_rate);
        let step = window - to_samples(cfg.overlap, sample_rate);
        if step == 0 {
            return Err(Error::Config("overlap leaves no searching step at this sample rate".into()));
        }
        Ok(Self {
            window,
            step,
            before: to_samples(cfg.tracking_before, sample_rate),
            after: to_samples(cfg.tracking_after, sample_rate),
            demotion: to_samples(cfg.demotion_timeout, sample_rate),
            cfg,
            sample_rate,
            buffer,
            tags: BTreeMap::new(),
            frontier: None,
            debt: 0.0,
            next_id: 0,
            in_flight: None,
            events: Vec::new(),
            stats: SchedulerStats::default(),
        })
    }

    pub fn config(&self) -> &SchedulerConfig {
        &self.cfg
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn buffer(&self) -> &SharedBuffer {
        &self.buffer
    }

    pub fn window_samples(&self) -> u64 {
        self.window
    }

    pub fn step_samples(&self) -> u64 {
        self.step
    }

    pub fn tracking_samples(&self) -> u64 {
        self.before + self.after
    }

    pub fn frontier(&self) -> Option<u64> {
        self.frontier
    }

    pub fn debt(&self) -> f64 {
        self.debt
    }

    pub fn stats(&self) -> SchedulerStats {
        self.stats
    }

    pub fn tags(&self) -> impl Iterator<Item = &TagState> {
        self.tags.values()
    }

    pub fn tag(&self, id: &TagId) -> Option<&TagState> {
        self.tags.get(id)
    }

    /// Adds a tag in searching mode.
    pub fn add_tag(&mut self, code: Arc<TagCode>, period_seconds: f64) -> Result<()> {
        if !(period_seconds > 0.0 && period_seconds.is_finite()) {
            return Err(Error::Config(format!(
                "tag {} period must be positive, got {period_seconds}",
                code.tag_id
            )));
        }
        let period = to_samples(period_seconds, self.sample_rate).max(1);
        self.tags.insert(
            code.tag_id.clone(),
            TagState {
                code,
                period,
                mode: Mode::Searching,
                next_prediction: None,
                last_detection: None,
                miss_count: 0,
            },
        );
        Ok(())
    }

    /// Appends samples to the buffer (from the scheduler's own context).
    pub fn push_samples(&mut self, block: &RawSampleBlock) -> Result<Range<u64>> {
        let outcome = self.buffer.push(block)?;
        Ok(outcome.evicted)
    }

    pub fn read(&self, range: Range<u64>) -> Result<RawSampleBlock> {
        self.buffer.read(range)
    }

    /// Events emitted since the last call.
    pub fn drain_events(&mut self) -> Vec<Event> {
        std::mem::take(&mut self.events)
    }

    fn seconds(&self, index: u64) -> f64 {
        index as f64 / self.sample_rate
    }

    fn tracking_range(&self, prediction: u64) -> Range<u64> {
        prediction.saturating_sub(self.before)..prediction + self.after
    }

    /// Moves the frontier past gaps and evicted samples, logging what is lost.
    fn sync_frontier(&mut self, head: u64) {
        let (gaps, origin) = {
            let mut b = self.buffer.lock();
            (b.take_gaps(), b.origin())
        };
        let Some(origin) = origin else {
            return;
        };
        let mut frontier = *self.frontier.get_or_insert(origin);
        for gap in gaps {
            self.stats.gap_samples += gap.end - gap.start;
            self.events.push(Event::Gap {
                start: gap.start,
                end: gap.end,
            });
            if frontier < gap.start {
                self.drop_span(frontier, gap.start);
            }
            frontier = frontier.max(gap.end);
        }
        if frontier < head {
            self.drop_span(frontier, head);
            frontier = head;
        }
        self.set_frontier(frontier);
    }

    fn drop_span(&mut self, start: u64, end: u64) {
        log::warn!("searching fell behind: dropping samples {start}..{end}");
        self.stats.dropped_samples += end - start;
        self.events.push(Event::Dropped { start, end });
    }

    fn set_frontier(&mut self, index: u64) {
        if self.frontier != Some(index) {
            self.frontier = Some(index);
            self.events.push(Event::Frontier {
                index,
                seconds: self.seconds(index),
            });
        }
    }

    fn searching_codes(&self) -> Vec<Arc<TagCode>> {
        self.tags
            .values()
            .filter(|t| t.mode == Mode::Searching)
            .map(|t| Arc::clone(&t.code))
            .collect()
    }

    /// The oldest due prediction among tracking tags, ties by tag id.
    fn due_tracking(&self, head: u64, tail: u64) -> Option<(&TagState, u64)> {
        self.tags
            .values()
            .filter_map(|t| t.next_prediction.map(|p| (t, p)))
            .filter(|&(_, p)| {
                let r = self.tracking_range(p);
                r.end <= tail || r.start < head
            })
            .min_by_key(|&(t, p)| (p, &t.code.tag_id))
    }

    /// Picks the next task, or `None` if nothing is ready or a task is
    /// still outstanding.
    pub fn next_task(&mut self) -> Option<Task> {
        if self.in_flight.is_some() {
            return None;
        }
        let (head, tail) = self.buffer.bounds();
        self.sync_frontier(head);
        let frontier = self.frontier?;

        let search_codes = self.searching_codes();
        if search_codes.is_empty() && frontier + self.window <= tail {
            // Nothing to search for: keep the frontier at the newest full window.
            let skip = (tail - self.window - frontier) / self.step * self.step;
            self.set_frontier(frontier + skip);
        }
        let frontier = self.frontier?;
        let search_ready = !search_codes.is_empty() && frontier + self.window <= tail;
        let track = self
            .due_tracking(head, tail)
            .map(|(t, p)| (Arc::clone(&t.code), p));

        let (kind, contested) = match (search_ready, track.is_some()) {
            (false, false) => return None,
            (true, false) => (TaskKind::Searching, false),
            (false, true) => (TaskKind::Tracking, false),
            (true, true) if self.debt <= 0.0 => (TaskKind::Searching, true),
            (true, true) => (TaskKind::Tracking, true),
        };
        let id = self.next_id;
        self.next_id += 1;
        let task = match kind {
            TaskKind::Searching => Task {
                id,
                kind,
                range: frontier..frontier + self.window,
                codes: search_codes,
                contested,
                prediction: None,
            },
            TaskKind::Tracking => {
                let (code, p) = track.expect("tracking was ready");
                Task {
                    id,
                    kind,
                    range: self.tracking_range(p),
                    codes: vec![code],
                    contested,
                    prediction: Some(p),
                }
            }
        };
        self.in_flight = Some(id);
        self.events.push(Event::TaskIssued {
            task_id: id,
            kind,
            start: task.range.start,
            end: task.range.end,
            tags: task.codes.iter().map(|c| c.tag_id.clone()).collect(),
            contested,
        });
        Some(task)
    }

    fn finish(&mut self, task: &Task, expected: TaskKind, elapsed: f64) -> Result<()> {
        if self.in_flight != Some(task.id) || task.kind != expected {
            return Err(Error::UnexpectedTask { id: task.id });
        }
        self.in_flight = None;
        let elapsed = elapsed.max(0.0);
        let share = self.cfg.search_share;
        match task.kind {
            TaskKind::Searching => {
                self.stats.search_tasks += 1;
                self.stats.search_time += elapsed;
                if task.contested {
                    self.stats.contested_search_time += elapsed;
                    self.debt += elapsed * (1.0 - share);
                }
            }
            TaskKind::Tracking => {
                self.stats.track_tasks += 1;
                self.stats.track_time += elapsed;
                if task.contested {
                    self.stats.contested_track_time += elapsed;
                    self.debt -= elapsed * share;
                }
            }
        }
        self.events.push(Event::TaskCompleted {
            task_id: task.id,
            kind: task.kind,
            elapsed_seconds: elapsed,
            debt: self.debt,
        });
        Ok(())
    }

    fn record_detection(&mut self, task: &Task, det: &Detection) {
        self.stats.detections += 1;
        self.events.push(Event::Detection {
            task_id: task.id,
            kind: task.kind,
            detection: det.clone(),
        });
    }

    /// Advances the frontier by one step and moves every tag detected in
    /// the window to tracking.
    pub fn complete_search(&mut self, task: &Task, detections: &[Detection], elapsed: f64) -> Result<()> {
        self.finish(task, TaskKind::Searching, elapsed)?;
        self.stats.searched_samples += task.range.end - task.range.start;
        for det in detections.iter().filter(|d| d.accepted) {
            self.record_detection(task, det);
            let at = det.toa_samples.round().max(0.0) as u64;
            let Some(tag) = self.tags.get_mut(&det.tag_id) else {
                continue;
            };
            if tag.mode != Mode::Searching {
                continue;
            }
            tag.mode = Mode::Tracking;
            tag.next_prediction = Some(at + tag.period);
            tag.last_detection = Some(at);
            tag.miss_count = 0;
            self.events.push(Event::ModeChange {
                tag_id: det.tag_id.clone(),
                from: Mode::Searching,
                to: Mode::Tracking,
                index: at,
                next_prediction: Some(at + tag.period),
            });
        }
        if self.frontier == Some(task.range.start) {
            self.set_frontier(task.range.start + self.step);
        }
        Ok(())
    }

    /// Advances the tracked tag's prediction by one period, demoting it if
    /// it has gone unseen for longer than the timeout.
    pub fn complete_track(&mut self, task: &Task, outcome: TrackOutcome, elapsed: f64) -> Result<()> {
        self.finish(task, TaskKind::Tracking, elapsed)?;
        let code = task.codes.first().ok_or(Error::UnexpectedTask { id: task.id })?;
        let predicted = task.prediction.ok_or(Error::UnexpectedTask { id: task.id })?;
        let detection = match &outcome {
            TrackOutcome::Detected(d) if d.accepted => Some(d.clone()),
            _ => None,
        };
        if let Some(det) = &detection {
            self.record_detection(task, det);
        }
        let seconds = self.seconds(predicted);
        let demotion = self.demotion;
        let Some(tag) = self.tags.get_mut(&code.tag_id) else {
            return Ok(());
        };
        if tag.next_prediction != Some(predicted) {
            return Ok(());
        }
        let next = predicted + tag.period;
        tag.next_prediction = Some(next);
        match detection {
            Some(det) => {
                tag.miss_count = 0;
                tag.last_detection = Some(det.toa_samples.round().max(0.0) as u64);
            }
            None => {
                tag.miss_count += 1;
                self.stats.misses += 1;
                let miss_count = tag.miss_count;
                let silent = predicted.saturating_sub(tag.last_detection.unwrap_or(0));
                let demote = silent > demotion;
                if demote {
                    tag.mode = Mode::Searching;
                    tag.next_prediction = None;
                    tag.miss_count = 0;
                }
                self.events.push(Event::Miss {
                    task_id: task.id,
                    tag_id: code.tag_id.clone(),
                    predicted_index: predicted,
                    predicted_seconds: seconds,
                    evicted: matches!(outcome, TrackOutcome::Evicted),
                    miss_count,
                    next_prediction: next,
                });
                if demote {
                    self.events.push(Event::ModeChange {
                        tag_id: code.tag_id.clone(),
                        from: Mode::Tracking,
                        to: Mode::Searching,
                        index: predicted,
                        next_prediction: None,
                    });
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codegen::{gen_code, ModulationParams};

    const RATE: f64 = 1.0e6;

    fn code(seed: u64) -> Arc<TagCode> {
        Arc::new(gen_code(seed, &ModulationParams::scaled_down()).unwrap())
    }

    fn push(s: &mut Scheduler, start: u64, n: usize) {
        s.push_samples(&RawSampleBlock::new(vec![0; 2 * n], start, RATE).unwrap())
            .unwrap();
    }

    fn detection(tag: &TagCode, at: f64) -> Detection {
        Detection {
            tag_id: tag.tag_id.clone(),
            toa_seconds: at / RATE,
            peak_index: 0,
            subsample_offset: 0.0,
            w_c: 1.0,
            q: 1.0,
            p_c: 1.0,
            score: 1.0,
            accepted: true,
            partial: false,
            toa_samples: at,
            peak_value: 1.0,
        }
    }

    #[test]
    fn config_validation() {
        assert!(SchedulerConfig::default().validate().is_ok());
        let bad = SchedulerConfig {
            overlap: 0.2,
            ..SchedulerConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SchedulerConfig {
            search_share: 0.0,
            ..SchedulerConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn search_windows_advance_by_window_minus_overlap() {
        let mut s = Scheduler::new(SchedulerConfig::default(), RATE).unwrap();
        s.add_tag(code(1), 1.0).unwrap();
        push(&mut s, 0, 250_000);
        let t = s.next_task().unwrap();
        assert_eq!(t.kind, TaskKind::Searching);
        assert_eq!(t.range, 0..100_000);
        assert!(s.next_task().is_none(), "one task at a time");
        s.complete_search(&t, &[], 0.01).unwrap();
        assert_eq!(s.frontier(), Some(90_000));
        let t = s.next_task().unwrap();
        assert_eq!(t.range, 90_000..190_000);
        s.complete_search(&t, &[], 0.01).unwrap();
        assert!(s.next_task().is_none(), "third window is not fully buffered");
    }

    #[test]
    fn detection_moves_tag_to_tracking() {
        let mut s = Scheduler::new(SchedulerConfig::default(), RATE).unwrap();
        let c = code(2);
        s.add_tag(Arc::clone(&c), 8.0).unwrap();
        push(&mut s, 0, 100_000);
        let t = s.next_task().unwrap();
        s.complete_search(&t, &[detection(&c, 40_000.0)], 0.01).unwrap();
        let tag = s.tag(&c.tag_id).unwrap();
        assert_eq!(tag.mode, Mode::Tracking);
        assert_eq!(tag.next_prediction, Some(8_040_000));
    }

    #[test]
    fn tracking_is_the_fallback_and_oldest_first() {
        let mut s = Scheduler::new(SchedulerConfig::default(), RATE).unwrap();
        let (a, b) = (code(3), code(4));
        s.add_tag(Arc::clone(&a), 1.0).unwrap();
        s.add_tag(Arc::clone(&b), 1.0).unwrap();
        push(&mut s, 0, 100_000);
        let t = s.next_task().unwrap();
        s.complete_search(&t, &[detection(&b, 10_000.0), detection(&a, 20_000.0)], 0.01)
            .unwrap();
        push(&mut s, 100_000, 1_050_000);
        // No tag is searching, so the searching queue is empty.
        let t = s.next_task().unwrap();
        assert_eq!(t.kind, TaskKind::Tracking);
        assert!(!t.contested);
        assert_eq!(t.codes[0].tag_id, b.tag_id);
        assert_eq!(t.range, 1_008_000..1_020_000);
        s.complete_track(&t, TrackOutcome::Missed, 0.001).unwrap();
        let t = s.next_task().unwrap();
        assert_eq!(t.codes[0].tag_id, a.tag_id);
    }

    #[test]
    fn ties_go_to_the_smaller_tag_id() {
        let mut s = Scheduler::new(SchedulerConfig::default(), RATE).unwrap();
        let (a, b) = (code(5), code(6));
        s.add_tag(Arc::clone(&b), 1.0).unwrap();
        s.add_tag(Arc::clone(&a), 1.0).unwrap();
        push(&mut s, 0, 100_000);
        let t = s.next_task().unwrap();
        s.complete_search(&t, &[detection(&b, 500.0), detection(&a, 500.0)], 0.0)
            .unwrap();
        push(&mut s, 100_000, 1_000_000);
        let t = s.next_task().unwrap();
        assert_eq!(t.codes[0].tag_id, a.tag_id.clone().min(b.tag_id.clone()));
    }

    #[test]
    fn evicted_prediction_becomes_a_miss_one_period_later() {
        let cfg = SchedulerConfig {
            buffer: 1.0,
            ..SchedulerConfig::default()
        };
        let mut s = Scheduler::new(cfg, RATE).unwrap();
        let c = code(7);
        s.add_tag(Arc::clone(&c), 1.0).unwrap();
        push(&mut s, 0, 100_000);
        let t = s.next_task().unwrap();
        s.complete_search(&t, &[detection(&c, 1_000.0)], 0.0).unwrap();
        // Run ahead by three seconds before attempting the prediction at 1.001 s.
        for k in 0..30 {
            push(&mut s, 100_000 + k * 100_000, 100_000);
        }
        let t = s.next_task().unwrap();
        assert_eq!(t.kind, TaskKind::Tracking);
        assert!(matches!(s.read(t.range.clone()), Err(Error::Evicted { .. })));
        s.complete_track(&t, TrackOutcome::Evicted, 0.0).unwrap();
        assert_eq!(s.tag(&c.tag_id).unwrap().next_prediction, Some(2_001_000));
        assert_eq!(s.tag(&c.tag_id).unwrap().miss_count, 1);
    }

    #[test]
    fn demotion_after_timeout() {
        let cfg = SchedulerConfig {
            buffer: 400.0,
            ..SchedulerConfig::default()
        };
        let mut s = Scheduler::new(cfg, 1000.0).unwrap();
        let c = code(8);
        s.add_tag(Arc::clone(&c), 1.0).unwrap();
        push(&mut s, 0, 100);
        let t = s.next_task().unwrap();
        s.complete_search(&t, &[detection(&c, 0.0)], 0.0).unwrap();
        push(&mut s, 100, 300_000);
        let mut misses = 0;
        while s.tag(&c.tag_id).unwrap().mode == Mode::Tracking {
            let t = s.next_task().unwrap();
            if t.kind == TaskKind::Searching {
                s.complete_search(&t, &[], 0.0).unwrap();
                continue;
            }
            s.complete_track(&t, TrackOutcome::Missed, 0.0).unwrap();
            misses += 1;
        }
        // Misses at 1, 2, ... 181 s; the 181st is more than 180 s after the detection.
        assert_eq!(misses, 181);
    }

    #[test]
    fn wrong_task_is_rejected() {
        let mut s = Scheduler::new(SchedulerConfig::default(), RATE).unwrap();
        s.add_tag(code(9), 1.0).unwrap();
        push(&mut s, 0, 100_000);
        let t = s.next_task().unwrap();
        let mut other = t.clone();
        other.id += 1;
        assert!(matches!(
            s.complete_search(&other, &[], 0.0),
            Err(Error::UnexpectedTask { .. })
        ));
        assert!(s.complete_track(&t, TrackOutcome::Missed, 0.0).is_err());
        s.complete_search(&t, &[], 0.0).unwrap();
    }

    #[test]
    fn falling_behind_eviction_drops_samples() {
        let cfg = SchedulerConfig {
            buffer: 0.5,
            ..SchedulerConfig::default()
        };
        let mut s = Scheduler::new(cfg, RATE).unwrap();
        s.add_tag(code(10), 1.0).unwrap();
        push(&mut s, 0, 2_000_000);
        let t = s.next_task().unwrap();
        assert_eq!(t.range.start, 1_500_000);
        assert_eq!(s.stats().dropped_samples, 1_500_000);
        let events = s.drain_events();
        assert!(events
            .iter()
            .any(|e| matches!(e, Event::Dropped { start: 0, end: 1_500_000 })));
    }
}
