//! Recording files: a raw payload of little-endian int16 interleaved I/Q
//! pairs at `<path>`, JSON metadata at `<path>.json`, and for synthetic
//! recordings the injected packets at `<path>.truth.json`.

use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordingMeta {
    pub sample_rate: f64,
    /// Stream index of the first sample.
    #[serde(default)]
    pub start_time: u64,
    #[serde(default)]
    pub center_freq: f64,
    #[serde(default)]
    pub created_by: String,
    /// Integer counts per unit of baseband amplitude, when known.
    #[serde(default)]
    pub scale: Option<f64>,
}

impl RecordingMeta {
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(Error::Format(format!(
                "sample_rate must be positive, got {}",
                self.sample_rate
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Recording {
    /// Interleaved I/Q.
    pub samples: Vec<i16>,
    pub meta: RecordingMeta,
}

impl Recording {
    pub fn len(&self) -> usize {
        self.samples.len() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = OsString::from(path.as_os_str());
    s.push(suffix);
    PathBuf::from(s)
}

pub fn meta_path(path: &Path) -> PathBuf {
    with_suffix(path, ".json")
}

pub fn truth_path(path: &Path) -> PathBuf {
    with_suffix(path, ".truth.json")
}

pub fn encode_payload(samples: &[i16]) -> Vec<u8> {
    samples.iter().flat_map(|s| s.to_le_bytes()).collect()
}

pub fn decode_payload(bytes: &[u8]) -> Result<Vec<i16>> {
    if bytes.len() % 4 != 0 {
        return Err(Error::Format(format!(
            "payload is {} bytes, not a whole number of 4-byte I/Q pairs",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(2)
        .map(|b| i16::from_le_bytes([b[0], b[1]]))
        .collect())
}

pub fn write_recording(path: &Path, rec: &Recording) -> Result<()> {
    rec.meta.validate()?;
    if rec.samples.len() % 2 != 0 {
        return Err(Error::OddRawLength(rec.samples.len()));
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    for s in &rec.samples {
        w.write_all(&s.to_le_bytes())?;
    }
    w.flush()?;
    fs::write(meta_path(path), serde_json::to_string_pretty(&rec.meta)? + "\n")?;
    Ok(())
}

pub fn read_meta(path: &Path) -> Result<RecordingMeta> {
    let text = fs::read_to_string(meta_path(path))?;
    let meta: RecordingMeta = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", meta_path(path).display())))?;
    meta.validate()?;
    Ok(meta)
}

pub fn read_recording(path: &Path) -> Result<Recording> {
    let meta = read_meta(path)?;
    let samples = decode_payload(&fs::read(path)?)?;
    Ok(Recording { samples, meta })
}
