use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const RUN: &str = r#"
[modulation]
sample_rate = 1e6
bit_rate = 125e3
freq_one = 62.5e3
freq_zero = -62.5e3
packet_bits = 1024

[[tags]]
seed = 7

[[tags]]
seed = 8
"#;

fn atlas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_atlas")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = atlas(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

struct Dir(tempfile::TempDir);

impl Dir {
    fn new() -> Self {
        let d = Dir(tempfile::tempdir().unwrap());
        fs::write(d.path("run.toml"), RUN).unwrap();
        d
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }

    fn s(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }

    fn generate(&self, scenario: &str) -> String {
        fs::write(self.path("scene.toml"), scenario).unwrap();
        ok(&["generate", "-c", &self.s("run.toml"), "-s", &self.s("scene.toml"), "-o", &self.s("rec.iq")]);
        self.s("rec.iq")
    }

    fn detect(&self, rec: &str) -> Vec<Value> {
        let out = ok(&["detect", "-c", &self.s("run.toml"), "-r", rec]);
        lines(&out.stdout)
    }
}

fn lines(bytes: &[u8]) -> Vec<Value> {
    String::from_utf8_lossy(bytes)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn truth(rec: &Path) -> Vec<Value> {
    let text = fs::read_to_string(format!("{}.truth.json", rec.display())).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn toa_error(det: &Value, truth: &Value) -> f64 {
    (det["toa_seconds"].as_f64().unwrap() - truth["toa_seconds"].as_f64().unwrap()) * 1e6
}

#[test]
fn noise_free_generate_then_detect() {
    let d = Dir::new();
    let rec = d.generate(
        "duration_s = 0.5\nseed = 1\nnoise_power = 0.0\n\
         [[packets]]\ntag_id = \"tag-7\"\ntime_s = 0.2\ndelay_samples = 0.37\n",
    );
    let dets = d.detect(&rec);
    let t = truth(Path::new(&rec));
    assert_eq!(dets.len(), 1, "{dets:?}");
    assert_eq!(dets[0]["tag_id"], "tag-7");
    assert!(toa_error(&dets[0], &t[0]).abs() <= 0.05, "{dets:?}");
}

#[test]
fn noisy_generate_then_detect() {
    let d = Dir::new();
    let rec = d.generate(
        "duration_s = 0.5\nseed = 2\n\
         [[packets]]\ntag_id = \"tag-8\"\ntime_s = 0.3\ndelay_samples = 0.8\nsnr_db = 10.0\n",
    );
    let dets = d.detect(&rec);
    let t = truth(Path::new(&rec));
    assert_eq!(dets.len(), 1, "{dets:?}");
    assert!(toa_error(&dets[0], &t[0]).abs() <= 0.5);
}

#[test]
fn two_tags_close_together_are_both_found() {
    let d = Dir::new();
    let rec = d.generate(
        "duration_s = 0.4\nseed = 3\n\
         [[packets]]\ntag_id = \"tag-7\"\ntime_s = 0.1\nsnr_db = 10.0\n\
         [[packets]]\ntag_id = \"tag-8\"\ntime_s = 0.12\nsnr_db = 10.0\n",
    );
    let dets = d.detect(&rec);
    let t = truth(Path::new(&rec));
    assert_eq!(dets.len(), 2, "{dets:?}");
    for (det, tr) in dets.iter().zip(&t) {
        assert_eq!(det["tag_id"], tr["tag_id"]);
        assert!(toa_error(det, tr).abs() <= 0.5);
    }
}

#[test]
fn all_flag_reports_rejected_candidates() {
    let d = Dir::new();
    let rec = d.generate("duration_s = 0.2\nseed = 4\n");
    assert!(d.detect(&rec).is_empty());
    let out = ok(&["detect", "-c", &d.s("run.toml"), "-r", &rec, "--all"]);
    let all = lines(&out.stdout);
    assert!(!all.is_empty());
    assert!(all.iter().all(|v| v["accepted"] == false));
}

#[test]
fn empty_recording_gives_no_output() {
    let d = Dir::new();
    let rec = d.generate("duration_s = 0.0\nseed = 1\n");
    assert_eq!(fs::metadata(&rec).unwrap().len(), 0);
    let out = ok(&["detect", "-c", &d.s("run.toml"), "-r", &rec]);
    assert!(out.stdout.is_empty());
}

#[test]
fn truncated_payload_is_an_io_error() {
    let d = Dir::new();
    let rec = d.generate("duration_s = 0.01\nseed = 1\n");
    let mut bytes = fs::read(&rec).unwrap();
    bytes.truncate(bytes.len() - 3);
    fs::write(&rec, bytes).unwrap();
    let out = atlas(&["detect", "-c", &d.s("run.toml"), "-r", &rec]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sample_rate_mismatch_is_an_io_error() {
    let d = Dir::new();
    let rec = d.generate("duration_s = 0.01\nseed = 1\n");
    fs::write(format!("{rec}.json"), r#"{"sample_rate": 2e6}"#).unwrap();
    let out = atlas(&["detect", "-c", &d.s("run.toml"), "-r", &rec]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_configuration_exits_with_2() {
    let d = Dir::new();
    let rec = d.generate("duration_s = 0.01\nseed = 1\n");
    for bad in [
        "[modulation]\nsample_rate = -1.0\n",
        "[[tags]]\nseed = 1\n[[tags]]\nseed = 1\n",
        "[scheduler]\nsearch_share = 2.0\n",
        "unknown = 1\n",
    ] {
        fs::write(d.path("bad.toml"), bad).unwrap();
        let out = atlas(&["detect", "-c", &d.s("bad.toml"), "-r", &rec]);
        assert_eq!(out.status.code(), Some(2), "{bad}");
    }
}

#[test]
fn codes_are_written_in_both_forms() {
    let d = Dir::new();
    ok(&["codes", "-c", &d.s("run.toml"), "-o", &d.s("codes")]);
    let json: Value = serde_json::from_str(&fs::read_to_string(d.path("codes/tag-7.json")).unwrap()).unwrap();
    let bits = json["bits"].as_str().unwrap();
    assert_eq!(bits.len(), 1024);
    let packed = fs::read(d.path("codes/tag-7.bits")).unwrap();
    assert_eq!(packed.len(), 128);
    for (k, c) in bits.chars().enumerate() {
        let bit = packed[k / 8] >> (7 - k % 8) & 1;
        assert_eq!(bit == 1, c == '1');
    }
}

#[test]
fn simulate_writes_events_and_summary() {
    let d = Dir::new();
    let rec = d.generate(
        "duration_s = 3.0\nseed = 5\n\
         [[periodic]]\ntag_id = \"tag-7\"\nfirst_s = 0.3\nperiod_s = 1.0\ncount = 3\nsnr_db = 10.0\n",
    );
    ok(&[
        "simulate",
        "-c",
        &d.s("run.toml"),
        "-r",
        &rec,
        "--events",
        &d.s("ev.jsonl"),
        "--summary",
        &d.s("sum.json"),
    ]);
    let summary: Value = serde_json::from_str(&fs::read_to_string(d.path("sum.json")).unwrap()).unwrap();
    assert_eq!(summary["detections"], 3);
    let events = lines(&fs::read(d.path("ev.jsonl")).unwrap());
    assert!(events.iter().any(|e| e["event"] == "mode_change" && e["to"] == "tracking"));
}

#[test]
fn outputs_are_deterministic() {
    let d = Dir::new();
    let scene = "duration_s = 1.0\nseed = 6\n\
                 [[packets]]\ntag_id = \"tag-8\"\ntime_s = 0.4\ndelay_samples = 0.5\nsnr_db = 5.0\n";
    let rec = d.generate(scene);
    let first = fs::read(&rec).unwrap();
    d.generate(scene);
    assert_eq!(first, fs::read(&rec).unwrap());
    let a = ok(&["detect", "-c", &d.s("run.toml"), "-r", &rec, "--all"]).stdout;
    let b = ok(&["detect", "-c", &d.s("run.toml"), "-r", &rec, "--all"]).stdout;
    assert_eq!(a, b);
}
