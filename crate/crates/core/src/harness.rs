//! Throughput metrics and the pattern-count benchmark.
//!
//! The ratio is processing time per pattern relative to the length of RF
//! processed: below 1 means one tag's code can be searched for continuously
//! with time to spare.

use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::codegen::{gen_code, ModulationParams, TagCode};
use crate::detector::{Detection, DetectionConfig, Engine};
use crate::dsp::{Demodulated, Demodulator, FrontendConfig, RawSampleBlock};
use crate::error::{Error, Result};
use crate::scenario::{PacketSpec, Scenario};

/// `(total_time / n_patterns) / window_duration`.
pub fn ratio(total_time: f64, n_patterns: usize, window_duration: f64) -> Result<f64> {
    if !(total_time > 0.0) || n_patterns == 0 || !(window_duration > 0.0) {
        return Err(Error::Config(format!(
            "ratio needs positive inputs, got ({total_time}, {n_patterns}, {window_duration})"
        )));
    }
    Ok(total_time / n_patterns as f64 / window_duration)
}

/// Tags that can be searched for without falling behind when `search_share`
/// of the processor goes to searching.
pub fn throughput(ratio: f64, search_share: f64) -> Result<u64> {
    if !(search_share > 0.0 && search_share <= 1.0) {
        return Err(Error::Config(format!("search_share must be in (0, 1], got {search_share}")));
    }
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(Error::Config(format!("ratio must be positive, got {ratio}")));
    }
    // Tolerate rounding in ratios that divide the share exactly.
    Ok((search_share / ratio * (1.0 + 1e-12)).floor() as u64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub patterns: Vec<usize>,
    pub repeats: usize,
    pub windows: usize,
    /// Seconds of RF per window.
    pub window_duration: f64,
    pub seed: u64,
    /// SNR of the packet injected into every window.
    pub snr_db: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            patterns: vec![1, 2, 4, 8, 16, 32, 64, 128],
            repeats: 10,
            windows: 10,
            window_duration: 0.1,
            seed: 1,
            snr_db: 10.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimes {
    pub demodulation: f64,
    pub correlation: f64,
    pub peak_stats: f64,
}

/// One timed pass over all windows with one pattern count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub patterns: usize,
    pub repeat: usize,
    pub window_duration: f64,
    pub windows: usize,
    pub total_seconds: f64,
    pub ratio: f64,
    pub stages: StageTimes,
}

impl BenchResult {
    pub fn throughput(&self, search_share: f64) -> Result<u64> {
        throughput(self.ratio, search_share)
    }

    pub const CSV_HEADER: &'static str =
        "patterns,repeat,total_seconds,ratio,demodulation_seconds,correlation_seconds,peak_stats_seconds";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.9},{:.9},{:.9},{:.9},{:.9}",
            self.patterns,
            self.repeat,
            self.total_seconds,
            self.ratio,
            self.stages.demodulation,
            self.stages.correlation,
            self.stages.peak_stats
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternSummary {
    pub patterns: usize,
    pub repeats: usize,
    pub min_ratio: f64,
    pub median_ratio: f64,
    pub max_ratio: f64,
    pub median_total_seconds: f64,
    /// From the median ratio with half the time spent searching.
    pub throughput: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub sample_rate: f64,
    pub window_duration: f64,
    pub windows: usize,
    pub results: Vec<BenchResult>,
    pub summary: Vec<PatternSummary>,
}

impl BenchReport {
    pub fn summary_for(&self, patterns: usize) -> Option<&PatternSummary> {
        self.summary.iter().find(|s| s.patterns == patterns)
    }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

struct Window {
    block: RawSampleBlock,
    arrival: f64,
}

fn bench_windows(cfg: &BenchConfig, params: &ModulationParams, injected: &Arc<TagCode>) -> Result<Vec<Window>> {
    let rate = params.sample_rate;
    let len = (cfg.window_duration * rate).round() as usize;
    let free = len.checked_sub(params.packet_samples() + 1).ok_or_else(|| {
        Error::Config(format!(
            "a {} s window cannot hold a {} s packet",
            cfg.window_duration,
            params.packet_duration()
        ))
    })?;
    (0..cfg.windows)
        .map(|k| {
            let seed = cfg.seed.wrapping_mul(1000).wrapping_add(k as u64);
            // Spread the packet over the window with a fractional part.
            let offset = (free as f64 * (k as f64 + 0.5) / cfg.windows as f64).floor() + 0.37;
            let scenario = Scenario {
                duration_s: len as f64 / rate,
                seed,
                noise_power: 1.0,
                scale: 1000.0,
                start_time: (k * len) as u64,
                center_freq: 0.0,
                packets: vec![PacketSpec {
                    tag_id: injected.tag_id.clone(),
                    time_s: 0.0,
                    delay_samples: offset.min(free as f64),
                    snr_db: Some(cfg.snr_db),
                    gain: 1.0,
                    freq_offset_hz: 0.0,
                }],
                periodic: Vec::new(),
            };
            let synth = scenario.synthesize(params, std::slice::from_ref(injected))?;
            Ok(Window {
                arrival: synth.truth[0].arrival,
                block: RawSampleBlock::new(synth.recording.samples, scenario.start_time, rate)?,
            })
        })
        .collect()
}

fn check_window(dets: &[Detection], injected: &TagCode, arrival: f64) -> Result<()> {
    for d in dets {
        if d.tag_id == injected.tag_id {
            if !d.accepted {
                return Err(Error::Correctness(format!(
                    "injected tag {} not accepted (score {:.3})",
                    d.tag_id, d.score
                )));
            }
            if (d.toa_samples - arrival).abs() > 0.5 {
                return Err(Error::Correctness(format!(
                    "tag {} ToA off by {:.3} samples",
                    d.tag_id,
                    d.toa_samples - arrival
                )));
            }
        } else if d.accepted {
            return Err(Error::Correctness(format!("spurious detection of {}", d.tag_id)));
        }
    }
    Ok(())
}

/// Times `demodulate + detect` over seeded windows for each pattern count.
///
/// Each pattern count starts with an untimed pass that prepares the codes
/// and checks the detections against the injected packets; every timed
/// repeat must then reproduce that pass's detections exactly.
pub fn run_bench(
    cfg: &BenchConfig,
    params: &ModulationParams,
    frontend: &FrontendConfig,
    detection: &DetectionConfig,
) -> Result<BenchReport> {
    if cfg.patterns.is_empty() || cfg.patterns.contains(&0) {
        return Err(Error::Config("pattern counts must be >= 1".into()));
    }
    if cfg.repeats == 0 || cfg.windows == 0 {
        return Err(Error::Config("repeats and windows must be >= 1".into()));
    }
    let max = *cfg.patterns.iter().max().expect("nonempty");
    let codes = (0..max as u64)
        .map(|k| gen_code(cfg.seed.wrapping_add(k), params).map(Arc::new))
        .collect::<Result<Vec<_>>>()?;
    let windows = bench_windows(cfg, params, &codes[0])?;
    let rf_seconds = cfg.windows as f64 * cfg.window_duration;
    let mut engine = Engine::new(Demodulator::new(params, frontend)?);
    let mut demod = Demodulated::default();
    let mut results = Vec::new();
    let mut summary = Vec::new();

    for &p in &cfg.patterns {
        let set = &codes[..p];
        let mut reference = Vec::with_capacity(windows.len());
        for w in &windows {
            engine.demodulate_window_into(&w.block, &mut demod)?;
            let dets = engine.detect(&demod, set, detection)?;
            check_window(&dets, &codes[0], w.arrival)?;
            reference.push(dets);
        }

        let mut ratios = Vec::with_capacity(cfg.repeats);
        let mut totals = Vec::with_capacity(cfg.repeats);
        for repeat in 0..cfg.repeats {
            let mut stages = StageTimes::default();
            let mut total = Duration::ZERO;
            for (w, expected) in windows.iter().zip(&reference) {
                let t0 = Instant::now();
                engine.demodulate_window_into(&w.block, &mut demod)?;
                let t1 = Instant::now();
                let (dets, timings) = engine.detect_profiled(&demod, set, detection)?;
                total += t0.elapsed();
                stages.demodulation += (t1 - t0).as_secs_f64();
                stages.correlation += timings.correlation.as_secs_f64();
                stages.peak_stats += timings.peak_stats.as_secs_f64();
                if &dets != expected {
                    return Err(Error::Correctness(format!(
                        "detections changed between repeats ({p} patterns, repeat {repeat})"
                    )));
                }
            }
            let total = total.as_secs_f64().max(f64::MIN_POSITIVE);
            let r = ratio(total, p, rf_seconds)?;
            ratios.push(r);
            totals.push(total);
            results.push(BenchResult {
                patterns: p,
                repeat,
                window_duration: cfg.window_duration,
                windows: cfg.windows,
                total_seconds: total,
                ratio: r,
                stages,
            });
        }
        ratios.sort_by(f64::total_cmp);
        totals.sort_by(f64::total_cmp);
        let median_ratio = median(&ratios);
        log::info!("{p} patterns: median ratio {median_ratio:.5}");
        summary.push(PatternSummary {
            patterns: p,
            repeats: cfg.repeats,
            min_ratio: ratios[0],
            median_ratio,
            max_ratio: *ratios.last().expect("repeats >= 1"),
            median_total_seconds: median(&totals),
            throughput: throughput(median_ratio, 0.5)?,
        });
    }
    Ok(BenchReport {
        sample_rate: params.sample_rate,
        window_duration: cfg.window_duration,
        windows: cfg.windows,
        results,
        summary,
    })
}
