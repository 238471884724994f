use serde::{Deserialize, Serialize};

use super::{Mode, TaskKind};
use crate::codegen::TagId;
use crate::detector::Detection;

/// Scheduler log records, one JSON object per line. Enough to redraw a
/// timeline of windows, detections, misses and mode changes offline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    TaskIssued {
        task_id: u64,
        kind: TaskKind,
        start: u64,
        end: u64,
        tags: Vec<TagId>,
        contested: bool,
    },
    TaskCompleted {
        task_id: u64,
        kind: TaskKind,
        elapsed_seconds: f64,
        debt: f64,
    },
    Detection {
        task_id: u64,
        kind: TaskKind,
        #[serde(flatten)]
        detection: Detection,
    },
    Miss {
        task_id: u64,
        tag_id: TagId,
        predicted_index: u64,
        predicted_seconds: f64,
        evicted: bool,
        miss_count: u32,
        next_prediction: u64,
    },
    ModeChange {
        tag_id: TagId,
        from: Mode,
        to: Mode,
        index: u64,
        next_prediction: Option<u64>,
    },
    /// The start of the next searching window moved.
    Frontier { index: u64, seconds: f64 },
    /// Samples that left the buffer before searching reached them.
    Dropped { start: u64, end: u64 },
    /// Samples missing from the input stream.
    Gap { start: u64, end: u64 },
}
