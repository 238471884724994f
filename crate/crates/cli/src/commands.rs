use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use atlas_core::codegen::TagCode;
use atlas_core::config::RunConfig;
use atlas_core::detector::{Detection, DetectionConfig, Engine};
use atlas_core::dsp::{Demodulated, Demodulator, RawSampleBlock};
use atlas_core::harness::{run_bench, BenchConfig, BenchResult};
use atlas_core::recording::{read_recording, truth_path, write_recording, Recording};
use atlas_core::scenario::Scenario;
use atlas_core::scheduler::{run_simulation, Scheduler, SimConfig, Timing};
use serde::Serialize;

use crate::{Cli, CliError, Command, ConfigArg};

type CliResult<T> = std::result::Result<T, CliError>;

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Codes { config, out } => codes(&load_config(&config)?, &out),
        Command::Generate { config, scenario, out } => generate(&load_config(&config)?, &scenario, &out),
        Command::Detect {
            config,
            recording,
            out,
            all,
            threshold,
        } => {
            let cfg = with_threshold(load_config(&config)?, threshold)?;
            detect(&cfg, &recording, out.as_deref(), all)
        }
        Command::Simulate {
            config,
            recording,
            scenario,
            events,
            summary,
            real_time_factor,
            task_delay,
            measured_timing,
            threshold,
        } => {
            let cfg = with_threshold(load_config(&config)?, threshold)?;
            let rec = match (recording, scenario) {
                (Some(r), _) => load_recording(&cfg, &r)?,
                (None, Some(s)) => Scenario::load(&s)?.synthesize(&cfg.modulation, &cfg.codes()?)?.recording,
                (None, None) => return Err(CliError::Config("one of --recording or --scenario is required".into())),
            };
            let mut sim = SimConfig {
                real_time_factor,
                extra_delay: task_delay,
                detection: cfg.detection.clone(),
                ..SimConfig::default()
            };
            if measured_timing {
                sim.timing = Timing::Measured;
            }
            simulate(&cfg, &rec, &sim, events.as_deref(), summary.as_deref())
        }
        Command::Bench {
            config,
            patterns,
            repeats,
            windows,
            out,
            summary,
        } => {
            let cfg = load_config(&config)?;
            let mut bench = BenchConfig {
                window_duration: cfg.scheduler.window,
                ..BenchConfig::default()
            };
            if let Some(p) = patterns {
                bench.patterns = p;
            }
            if let Some(r) = repeats {
                bench.repeats = r;
            }
            if let Some(w) = windows {
                bench.windows = w;
            }
            let report = run_bench(&bench, &cfg.modulation, &cfg.frontend, &cfg.detection)?;
            let mut w = output(out.as_deref())?;
            writeln!(w, "{}", BenchResult::CSV_HEADER)?;
            for r in &report.results {
                writeln!(w, "{}", r.csv_row())?;
            }
            w.flush()?;
            if let Some(path) = summary {
                fs::write(path, serde_json::to_string_pretty(&report.summary)? + "\n")?;
            }
            Ok(())
        }
    }
}

fn load_config(arg: &ConfigArg) -> CliResult<RunConfig> {
    match &arg.config {
        Some(path) => {
            if !path.exists() {
                return Err(CliError::Io(format!("{}: no such file", path.display())));
            }
            Ok(RunConfig::load(path)?)
        }
        None => Ok(RunConfig::default()),
    }
}

fn with_threshold(mut cfg: RunConfig, threshold: Option<f64>) -> CliResult<RunConfig> {
    if let Some(t) = threshold {
        cfg.detection.threshold = t;
        cfg.validate()?;
    }
    Ok(cfg)
}

fn output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(fs::File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load_recording(cfg: &RunConfig, path: &Path) -> CliResult<Recording> {
    let rec = read_recording(path)?;
    if rec.meta.sample_rate != cfg.modulation.sample_rate {
        return Err(CliError::Io(format!(
            "{}: recorded at {} samples/s but the configuration expects {}",
            path.display(),
            rec.meta.sample_rate,
            cfg.modulation.sample_rate
        )));
    }
    Ok(rec)
}

#[derive(Serialize)]
struct CodeFile<'a> {
    tag_id: &'a str,
    seed: u64,
    bits: String,
    params: &'a atlas_core::codegen::ModulationParams,
}

/// Bit `k` lands in byte `k / 8`, most significant bit first.
pub fn pack_bits(bits: &[bool]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (k, &b) in bits.iter().enumerate() {
        if b {
            out[k / 8] |= 0x80 >> (k % 8);
        }
    }
    out
}

fn codes(cfg: &RunConfig, dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    for code in cfg.codes()? {
        let file = CodeFile {
            tag_id: &code.tag_id.0,
            seed: code.seed,
            bits: code.bits.iter().map(|&b| if b { '1' } else { '0' }).collect(),
            params: &code.params,
        };
        fs::write(
            dir.join(format!("{}.json", code.tag_id)),
            serde_json::to_string_pretty(&file)? + "\n",
        )?;
        fs::write(dir.join(format!("{}.bits", code.tag_id)), pack_bits(&code.bits))?;
    }
    Ok(())
}

fn generate(cfg: &RunConfig, scenario: &Path, out: &Path) -> CliResult<()> {
    let scenario = Scenario::load(scenario)?;
    let synth = scenario.synthesize(&cfg.modulation, &cfg.codes()?)?;
    if synth.saturated > 0 {
        log::warn!("{} samples clipped at the int16 range", synth.saturated);
    }
    write_recording(out, &synth.recording)?;
    fs::write(truth_path(out), serde_json::to_string_pretty(&synth.truth)? + "\n")?;
    Ok(())
}

/// Window starts covering `[0, n)`: a fixed step, then one window flush
/// with the end if the step leaves a tail uncovered.
pub fn window_starts(n: u64, window: u64, step: u64) -> Vec<u64> {
    if n == 0 {
        return Vec::new();
    }
    if n <= window {
        return vec![0];
    }
    let mut starts: Vec<u64> = (0..).map(|k| k * step).take_while(|&s| s + window <= n).collect();
    let last = *starts.last().expect("n > window");
    if last + window < n {
        starts.push(n - window);
    }
    starts
}

/// Keeps the best-scoring accepted detection of each tag among those closer
/// than `min_gap` samples, since overlapping windows find a packet twice.
pub fn dedupe(mut dets: Vec<Detection>, min_gap: f64) -> Vec<Detection> {
    dets.sort_by(|a, b| a.tag_id.cmp(&b.tag_id).then(a.toa_samples.total_cmp(&b.toa_samples)));
    let mut out: Vec<Detection> = Vec::with_capacity(dets.len());
    for d in dets {
        match out.last_mut() {
            Some(prev)
                if prev.accepted
                    && d.accepted
                    && prev.tag_id == d.tag_id
                    && d.toa_samples - prev.toa_samples < min_gap =>
            {
                if d.score > prev.score {
                    *prev = d;
                }
            }
            _ => out.push(d),
        }
    }
    out.sort_by(|a, b| a.toa_samples.total_cmp(&b.toa_samples).then(a.tag_id.cmp(&b.tag_id)));
    out
}

fn detect_recording(
    cfg: &RunConfig,
    rec: &Recording,
    codes: &[Arc<TagCode>],
    detection: &DetectionConfig,
) -> CliResult<Vec<Detection>> {
    let rate = cfg.modulation.sample_rate;
    let window = (cfg.scheduler.window * rate).round() as u64;
    let step = ((cfg.scheduler.window - cfg.scheduler.overlap) * rate).round() as u64;
    let packet = cfg.modulation.packet_samples() as u64;
    let n = rec.len() as u64;
    let mut engine = Engine::new(Demodulator::new(&cfg.modulation, &cfg.frontend)?);
    let mut demod = Demodulated::default();
    let mut found = Vec::new();
    for start in window_starts(n, window, step) {
        let end = (start + window).min(n);
        if end - start < packet {
            continue;
        }
        let raw = rec.samples[2 * start as usize..2 * end as usize].to_vec();
        let block = RawSampleBlock::new(raw, rec.meta.start_time + start, rate)?;
        engine.demodulate_window_into(&block, &mut demod)?;
        found.extend(engine.detect(&demod, codes, detection)?);
    }
    Ok(found)
}

fn detect(cfg: &RunConfig, recording: &Path, out: Option<&Path>, all: bool) -> CliResult<()> {
    let rec = load_recording(cfg, recording)?;
    let codes = cfg.codes()?;
    let mut found = detect_recording(cfg, &rec, &codes, &cfg.detection)?;
    if !all {
        found.retain(|d| d.accepted);
    }
    let found = dedupe(found, cfg.modulation.packet_samples() as f64);
    let mut w = output(out)?;
    for d in &found {
        writeln!(w, "{}", serde_json::to_string(d)?)?;
    }
    w.flush()?;
    Ok(())
}

fn simulate(
    cfg: &RunConfig,
    rec: &Recording,
    sim: &SimConfig,
    events: Option<&Path>,
    summary: Option<&Path>,
) -> CliResult<()> {
    let rate = cfg.modulation.sample_rate;
    let mut sched = Scheduler::new(cfg.scheduler.clone(), rate)?;
    for (code, spec) in cfg.codes()?.into_iter().zip(&cfg.tags) {
        sched.add_tag(code, spec.period)?;
    }
    let mut engine = Engine::new(Demodulator::new(&cfg.modulation, &cfg.frontend)?);
    let result = run_simulation(&mut sched, &mut engine, &rec.samples, rec.meta.start_time, sim)?;
    let mut w = output(events)?;
    for e in &result.events {
        writeln!(w, "{}", serde_json::to_string(e)?)?;
    }
    w.flush()?;
    let text = serde_json::to_string_pretty(&result.summary)? + "\n";
    match summary {
        Some(p) => fs::write(p, text)?,
        None => eprint!("{text}"),
    }
    Ok(())
}
