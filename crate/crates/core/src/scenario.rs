//! Synthetic recordings: packets from known codes injected into complex
//! Gaussian noise at chosen times, delays, SNRs and carrier offsets, with a
//! ground-truth list of what was injected.
//!
//! ```toml
//! duration_s = 2.0
//! seed = 1
//!
//! [[packets]]
//! tag_id = "tag-7"
//! time_s = 0.05
//! delay_samples = 0.25
//! snr_db = 10.0
//!
//! [[periodic]]
//! tag_id = "tag-8"
//! first_s = 0.3
//! period_s = 1.0
//! count = 2
//! ```

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex32;
use serde::{Deserialize, Serialize};

use crate::codegen::{apply_channel, add_noise, quantize, synth_replica, ChannelSpec, ModulationParams, SplitMix64, TagCode, TagId};
use crate::error::{Error, Result};
use crate::recording::{Recording, RecordingMeta};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketSpec {
    pub tag_id: TagId,
    /// Transmission time, seconds from the start of the recording.
    pub time_s: f64,
    /// Extra propagation delay, samples (may be fractional).
    #[serde(default)]
    pub delay_samples: f64,
    /// Per-sample SNR against the scenario noise; absent means the packet
    /// amplitude is `gain` exactly.
    #[serde(default)]
    pub snr_db: Option<f64>,
    #[serde(default = "one")]
    pub gain: f64,
    #[serde(default)]
    pub freq_offset_hz: f64,
}

/// `count` packets from one tag, `period_s` apart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodicSpec {
    pub tag_id: TagId,
    pub first_s: f64,
    pub period_s: f64,
    pub count: usize,
    #[serde(default)]
    pub delay_samples: f64,
    #[serde(default)]
    pub snr_db: Option<f64>,
    #[serde(default = "one")]
    pub gain: f64,
    #[serde(default)]
    pub freq_offset_hz: f64,
}

fn one() -> f64 {
    1.0
}

fn default_scale() -> f64 {
    1000.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub duration_s: f64,
    #[serde(default)]
    pub seed: u64,
    /// Noise power per complex sample before scaling; 0 for a clean recording.
    #[serde(default = "one")]
    pub noise_power: f64,
    /// Integer counts per unit amplitude.
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default)]
    pub start_time: u64,
    #[serde(default)]
    pub center_freq: f64,
    #[serde(default)]
    pub packets: Vec<PacketSpec>,
    #[serde(default)]
    pub periodic: Vec<PeriodicSpec>,
}

/// One injected packet as it landed in the recording.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthPacket {
    pub tag_id: TagId,
    pub seed: u64,
    /// Stream index of the first packet sample (fractional).
    pub arrival: f64,
    pub toa_seconds: f64,
    pub snr_db: Option<f64>,
    pub amplitude: f64,
    /// Part of the packet fell outside the recording.
    pub clipped: bool,
}

#[derive(Clone, Debug)]
pub struct Synthesized {
    pub recording: Recording,
    pub truth: Vec<TruthPacket>,
    /// Quantized components that hit the int16 limits.
    pub saturated: u64,
}

const CHUNK: usize = 1 << 20;
/// Leading room for the ringing of a fractional shift.
const MARGIN: usize = 32;

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Expands periodic entries into individual packets.
    pub fn all_packets(&self) -> Vec<PacketSpec> {
        let mut out = self.packets.clone();
        for p in &self.periodic {
            out.extend((0..p.count).map(|k| PacketSpec {
                tag_id: p.tag_id.clone(),
                time_s: p.first_s + k as f64 * p.period_s,
                delay_samples: p.delay_samples,
                snr_db: p.snr_db,
                gain: p.gain,
                freq_offset_hz: p.freq_offset_hz,
            }));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.duration_s >= 0.0 && self.duration_s.is_finite()) {
            return bad(format!("duration_s must be >= 0, got {}", self.duration_s));
        }
        if !(self.noise_power >= 0.0 && self.noise_power.is_finite()) {
            return bad(format!("noise_power must be >= 0, got {}", self.noise_power));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return bad(format!("scale must be positive, got {}", self.scale));
        }
        for p in &self.periodic {
            if !(p.period_s > 0.0) {
                return bad(format!("periodic {}: period_s must be positive", p.tag_id));
            }
        }
        for p in self.all_packets() {
            if !(p.time_s >= 0.0 && p.time_s.is_finite()) {
                return bad(format!("packet {}: time_s must be >= 0, got {}", p.tag_id, p.time_s));
            }
            if !(p.delay_samples >= 0.0 && p.delay_samples.is_finite()) {
                return bad(format!("packet {}: delay_samples must be >= 0", p.tag_id));
            }
            if !(p.gain > 0.0 && p.gain.is_finite()) {
                return bad(format!("packet {}: gain must be positive", p.tag_id));
            }
            match p.snr_db {
                Some(snr) if snr.is_nan() => return bad(format!("packet {}: snr_db is NaN", p.tag_id)),
                Some(snr) if snr.is_finite() && self.noise_power == 0.0 => {
                    return bad(format!(
                        "packet {}: a finite snr_db needs a nonzero noise_power",
                        p.tag_id
                    ))
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn amplitude(&self, p: &PacketSpec) -> f64 {
        match p.snr_db {
            Some(snr) if snr.is_finite() => p.gain * (self.noise_power * 10f64.powf(snr / 10.0)).sqrt(),
            _ => p.gain,
        }
    }

    /// Builds the recording. Codes are looked up by tag id in `codes`.
    pub fn synthesize(&self, params: &ModulationParams, codes: &[Arc<TagCode>]) -> Result<Synthesized> {
        self.validate()?;
        params.validate()?;
        let rate = params.sample_rate;
        let total = (self.duration_s * rate).round() as usize;

        struct Placed {
            first: i64,
            wave: Vec<Complex32>,
        }
        let mut placed = Vec::new();
        let mut truth = Vec::new();
        for p in self.all_packets() {
            let code = codes
                .iter()
                .find(|c| c.tag_id == p.tag_id)
                .ok_or_else(|| Error::Config(format!("scenario names unknown tag {}", p.tag_id)))?;
            if code.params != *params {
                return Err(Error::Config(format!("tag {} uses different modulation", p.tag_id)));
            }
            let arrival = p.time_s * rate + p.delay_samples;
            let whole = arrival.floor();
            let frac = arrival - whole;
            let replica = synth_replica(code, params.packet_samples())?;
            let amplitude = self.amplitude(&p);
            let chan = ChannelSpec {
                delay: MARGIN as f64 + frac,
                snr_db: f64::INFINITY,
                gain: amplitude,
                freq_offset: p.freq_offset_hz,
                sample_rate: rate,
            };
            let wave = apply_channel(&replica, &chan, replica.len() + 2 * MARGIN, 0)?;
            let first = whole as i64 - MARGIN as i64;
            let clipped = whole as usize + replica.len() > total;
            if clipped {
                log::warn!("packet {} at {} s runs past the end of the recording", p.tag_id, p.time_s);
            }
            truth.push(TruthPacket {
                tag_id: p.tag_id.clone(),
                seed: code.seed,
                arrival: self.start_time as f64 + arrival,
                toa_seconds: (self.start_time as f64 + arrival) / rate,
                snr_db: p.snr_db,
                amplitude,
                clipped,
            });
            placed.push(Placed { first, wave });
        }
        truth.sort_by(|a, b| a.arrival.total_cmp(&b.arrival).then_with(|| a.tag_id.cmp(&b.tag_id)));

        let mut samples = Vec::with_capacity(2 * total);
        let mut saturated = 0u64;
        let limit = i16::MAX as f64 + 0.5;
        let mut buf = Vec::with_capacity(CHUNK.min(total));
        for (idx, start) in (0..total).step_by(CHUNK).enumerate() {
            let n = CHUNK.min(total - start);
            buf.clear();
            buf.resize(n, Complex32::new(0.0, 0.0));
            let chunk_seed = SplitMix64::new(self.seed.wrapping_add(idx as u64)).next_u64();
            add_noise(&mut buf, self.noise_power, chunk_seed);
            let (lo, hi) = (start as i64, (start + n) as i64);
            for p in &placed {
                let end = p.first + p.wave.len() as i64;
                if end <= lo || p.first >= hi {
                    continue;
                }
                let from = p.first.max(lo);
                let to = end.min(hi);
                for t in from..to {
                    buf[(t - lo) as usize] += p.wave[(t - p.first) as usize];
                }
            }
            saturated += buf
                .iter()
                .flat_map(|v| [v.re, v.im])
                .filter(|&x| (x as f64 * self.scale).abs() >= limit)
                .count() as u64;
            samples.extend(quantize(&buf, self.scale));
        }
        if saturated > 0 {
            log::warn!("{saturated} sample components saturated the int16 range");
        }
        Ok(Synthesized {
            recording: Recording {
                samples,
                meta: RecordingMeta {
                    sample_rate: rate,
                    start_time: self.start_time,
                    center_freq: self.center_freq,
                    created_by: format!("atlas {}", env!("CARGO_PKG_VERSION")),
                    scale: Some(self.scale),
                },
            },
            truth,
            saturated,
        })
    }
}
