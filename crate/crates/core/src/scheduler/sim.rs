//! Offline driver: replays a recording into the buffer at a chosen
//! real-time factor and runs the scheduler loop against a detection engine
//! on a virtual clock.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{Event, Scheduler, SchedulerStats, Task, TaskKind, TrackOutcome};
use crate::detector::{DetectionConfig, Engine};
use crate::dsp::RawSampleBlock;
use crate::error::{Error, Result};

/// Deterministic task durations, seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostModel {
    pub search_base: f64,
    pub search_per_code: f64,
    pub track: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            search_base: 0.010,
            search_per_code: 0.002,
            track: 0.003,
        }
    }
}

impl CostModel {
    pub fn cost(&self, task: &Task) -> f64 {
        match task.kind {
            TaskKind::Searching => self.search_base + self.search_per_code * task.codes.len() as f64,
            TaskKind::Tracking => self.track,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Timing {
    /// Charge each task its modelled cost; the event log is reproducible.
    Model(CostModel),
    /// Charge each task its measured wall-clock time.
    Measured,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub timing: Timing,
    /// Stream seconds delivered per second of processing clock.
    pub real_time_factor: f64,
    /// Added to every processed task, to emulate a slower machine.
    pub extra_delay: f64,
    /// Ingestion block length, seconds.
    pub block: f64,
    pub detection: DetectionConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            timing: Timing::Model(CostModel::default()),
            real_time_factor: 1.0,
            extra_delay: 0.0,
            block: 0.01,
            detection: DetectionConfig::default(),
        }
    }
}

/// An event stamped with the processing clock.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedEvent {
    pub clock: f64,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub stream_samples: u64,
    pub stream_seconds: f64,
    pub searched_samples: u64,
    /// Searched samples over stream samples, percent; overlapping windows
    /// push it above 100.
    pub searched_fraction: f64,
    pub search_tasks: u64,
    pub track_tasks: u64,
    pub search_time: f64,
    pub track_time: f64,
    /// Searching share of the time spent while both queues had work.
    pub contested_search_share: Option<f64>,
    pub detections: u64,
    pub misses: u64,
    pub dropped_samples: u64,
    pub gap_samples: u64,
    pub clock: f64,
}

impl SimSummary {
    fn new(stats: &SchedulerStats, stream_samples: u64, sample_rate: f64, clock: f64) -> Self {
        let contested = stats.contested_search_time + stats.contested_track_time;
        Self {
            stream_samples,
            stream_seconds: stream_samples as f64 / sample_rate,
            searched_samples: stats.searched_samples,
            searched_fraction: if stream_samples > 0 {
                100.0 * stats.searched_samples as f64 / stream_samples as f64
            } else {
                0.0
            },
            search_tasks: stats.search_tasks,
            track_tasks: stats.track_tasks,
            search_time: stats.search_time,
            track_time: stats.track_time,
            contested_search_share: (contested > 0.0).then(|| stats.contested_search_time / contested),
            detections: stats.detections,
            misses: stats.misses,
            dropped_samples: stats.dropped_samples,
            gap_samples: stats.gap_samples,
            clock,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimOutput {
    pub events: Vec<TimedEvent>,
    pub summary: SimSummary,
}

/// Replays `samples` (interleaved I/Q starting at stream index `start`)
/// through `scheduler` until the stream ends and no task is ready.
pub fn run_simulation(
    scheduler: &mut Scheduler,
    engine: &mut Engine,
    samples: &[i16],
    start: u64,
    cfg: &SimConfig,
) -> Result<SimOutput> {
    if !(cfg.real_time_factor > 0.0 && cfg.real_time_factor.is_finite()) {
        return Err(Error::Config(format!(
            "real_time_factor must be positive and finite, got {}",
            cfg.real_time_factor
        )));
    }
    if !(cfg.block > 0.0 && cfg.extra_delay >= 0.0) {
        return Err(Error::Config("block must be > 0 and extra_delay >= 0".into()));
    }
    if samples.len() % 2 != 0 {
        return Err(Error::OddRawLength(samples.len()));
    }
    let rate = scheduler.sample_rate();
    let total = samples.len() / 2;
    let block = ((cfg.block * rate).round() as usize).max(1);
    let arrival = |end: usize| end as f64 / rate / cfg.real_time_factor;

    let mut events = Vec::new();
    let mut pushed = 0usize;
    let mut clock = 0.0f64;
    let mut demod = Default::default();
    loop {
        while pushed < total && arrival((pushed + block).min(total)) <= clock {
            let end = (pushed + block).min(total);
            let raw = samples[2 * pushed..2 * end].to_vec();
            scheduler.push_samples(&RawSampleBlock::new(raw, start + pushed as u64, rate)?)?;
            pushed = end;
        }
        let Some(task) = scheduler.next_task() else {
            events.extend(scheduler.drain_events().into_iter().map(|event| TimedEvent { clock, event }));
            if pushed >= total {
                break;
            }
            clock = clock.max(arrival((pushed + block).min(total)));
            continue;
        };
        events.extend(scheduler.drain_events().into_iter().map(|event| TimedEvent { clock, event }));

        let t0 = Instant::now();
        let window = match scheduler.read(task.range.clone()) {
            Ok(b) => Some(b),
            Err(Error::Evicted { .. }) if task.kind == TaskKind::Tracking => None,
            Err(e) => return Err(e),
        };
        let detections = match &window {
            Some(b) => {
                engine.demodulate_window_into(b, &mut demod)?;
                engine.detect(&demod, &task.codes, &cfg.detection)?
            }
            None => Vec::new(),
        };
        let elapsed = match (&window, cfg.timing) {
            (None, _) => 0.0,
            (Some(_), Timing::Model(m)) => m.cost(&task) + cfg.extra_delay,
            (Some(_), Timing::Measured) => t0.elapsed().as_secs_f64() + cfg.extra_delay,
        };
        clock += elapsed;
        match task.kind {
            TaskKind::Searching => scheduler.complete_search(&task, &detections, elapsed)?,
            TaskKind::Tracking => {
                let outcome = match (window, detections.into_iter().find(|d| d.accepted)) {
                    (None, _) => TrackOutcome::Evicted,
                    (Some(_), Some(d)) => TrackOutcome::Detected(d),
                    (Some(_), None) => TrackOutcome::Missed,
                };
                scheduler.complete_track(&task, outcome, elapsed)?;
            }
        }
        events.extend(scheduler.drain_events().into_iter().map(|event| TimedEvent { clock, event }));
    }
    let summary = SimSummary::new(&scheduler.stats(), total as u64, rate, clock);
    Ok(SimOutput { events, summary })
}
