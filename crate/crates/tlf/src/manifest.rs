//! Sequence manifests: loading, validation, modality resolution, and
//! prior-window lookup.
//!
//! A manifest is a UTF-8 file with one JSON object per line:
//!
//! ```json
//! {"path": "cam1/img_0001.png", "camera": "cam1", "timestamp": "2021-03-01T10:00:00Z"}
//! ```
//!
//! An optional `"modality"` key (`"day"` or `"night"`) overrides the
//! configured classification policy for that frame.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDateTime, Timelike, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::RgbImage;

/// Capture modality of a frame. Night frames come from an infrared sensor
/// and are near-greyscale; backgrounds never mix modalities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Day,
    Night,
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Modality::Day => write!(f, "day"),
            Modality::Night => write!(f, "night"),
        }
    }
}

/// How frames without an explicit modality get classified.
///
/// Serialized form: `"clock"` or `{"chroma": {"tau": 8.0}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModalityPolicy {
    /// Look at the pixels: infrared frames are near-greyscale, so a mean
    /// per-pixel channel spread below `tau` (0–255 scale) means night.
    Chroma { tau: f64 },
    /// Look at the clock: night iff the hour of the timestamp is in
    /// [18, 06).
    Clock,
}

impl Default for ModalityPolicy {
    fn default() -> Self {
        ModalityPolicy::Chroma { tau: 8.0 }
    }
}

/// One image record of a camera's time-ordered sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub path: PathBuf,
    pub camera_id: String,
    pub timestamp: DateTime<Utc>,
    pub modality: Modality,
    /// Ordinal position within this camera's time-ordered sequence.
    pub index: usize,
}

/// The window of prior same-modality frames backing a background model.
#[derive(Debug, Clone)]
pub struct PriorWindow {
    /// Exactly `k` frames, ascending by index, all strictly before the
    /// query frame and sharing its camera and modality.
    pub members: Vec<Frame>,
}

/// Result of a prior-window lookup.
#[derive(Debug, Clone)]
pub enum WindowOutcome {
    Available(PriorWindow),
    /// Fewer qualifying frames exist than the window needs.
    Unavailable { qualifying: usize, required: usize },
}

/// One line of a manifest file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub path: String,
    pub camera: String,
    pub timestamp: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modality: Option<Modality>,
}

/// Frames grouped per camera, each group sorted by timestamp with indices
/// 0..n-1. Immutable after loading; share freely across threads.
#[derive(Debug, Clone, Default)]
pub struct SequenceManifest {
    cameras: BTreeMap<String, Vec<Frame>>,
}

impl SequenceManifest {
    pub fn cameras(&self) -> impl Iterator<Item = &str> {
        self.cameras.keys().map(String::as_str)
    }

    pub fn camera_count(&self) -> usize {
        self.cameras.len()
    }

    /// Frames of one camera in index order; empty slice for unknown ids.
    pub fn frames(&self, camera: &str) -> &[Frame] {
        self.cameras.get(camera).map(Vec::as_slice).unwrap_or(&[])
    }

    /// All frames, camera groups in lexicographic id order.
    pub fn all_frames(&self) -> impl Iterator<Item = &Frame> {
        self.cameras.values().flatten()
    }

    pub fn frame_count(&self) -> usize {
        self.cameras.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.frame_count() == 0
    }

    fn resolve(&self, frame: &Frame) -> Result<&Frame> {
        self.cameras
            .get(&frame.camera_id)
            .and_then(|frames| frames.get(frame.index))
            .filter(|f| f.path == frame.path)
            .ok_or_else(|| Error::FrameNotInManifest {
                path: frame.path.clone(),
            })
    }

    /// The `k` same-camera, same-modality frames with the largest indices
    /// strictly below `frame.index`, ascending.
    ///
    /// Returns [`WindowOutcome::Unavailable`] when fewer than `k` qualify;
    /// `k == 0` is an error.
    pub fn prior_window(&self, frame: &Frame, k: usize) -> Result<WindowOutcome> {
        if k == 0 {
            return Err(Error::ZeroWindow);
        }
        let frame = self.resolve(frame)?;
        let sequence = self.frames(&frame.camera_id);
        let qualifying: Vec<&Frame> = sequence[..frame.index]
            .iter()
            .filter(|f| f.modality == frame.modality)
            .collect();
        if qualifying.len() < k {
            return Ok(WindowOutcome::Unavailable {
                qualifying: qualifying.len(),
                required: k,
            });
        }
        let members = qualifying[qualifying.len() - k..]
            .iter()
            .map(|f| (*f).clone())
            .collect();
        Ok(WindowOutcome::Available(PriorWindow { members }))
    }
}

/// Mean over pixels of `max(|R-G|, |R-B|, |G-B|)`, on the 0–255 scale.
///
/// Exact for integer-valued images: every partial sum is an integer well
/// below 2^53, so the result does not depend on pixel order.
pub fn chroma_spread(img: &RgbImage) -> f64 {
    let (h, w) = (img.height(), img.width());
    let mut sum = 0.0;
    for y in 0..h {
        for x in 0..w {
            let [r, g, b] = img.pixel(y, x);
            let spread = (r - g).abs().max((r - b).abs()).max((g - b).abs());
            sum += spread;
        }
    }
    sum / (h * w) as f64
}

pub fn classify_chroma(img: &RgbImage, tau: f64) -> Modality {
    if chroma_spread(img) < tau {
        Modality::Night
    } else {
        Modality::Day
    }
}

pub fn classify_clock(timestamp: &DateTime<Utc>) -> Modality {
    let hour = timestamp.hour();
    if !(6..18).contains(&hour) {
        Modality::Night
    } else {
        Modality::Day
    }
}

/// Classify one frame under `policy`, reading its pixels when the policy
/// needs them.
pub fn classify_modality(frame: &Frame, policy: &ModalityPolicy) -> Result<Modality> {
    match policy {
        ModalityPolicy::Chroma { tau } => {
            let img = RgbImage::load(&frame.path)?;
            Ok(classify_chroma(&img, *tau))
        }
        ModalityPolicy::Clock => Ok(classify_clock(&frame.timestamp)),
    }
}

fn parse_timestamp(raw: &str) -> std::result::Result<DateTime<Utc>, String> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Ok(dt.with_timezone(&Utc));
    }
    // bare wall-clock timestamps are treated as UTC
    NaiveDateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M:%S")
        .map(|dt| dt.and_utc())
        .map_err(|e| format!("bad timestamp {raw:?}: {e}"))
}

/// Parse, group, sort, and classify a manifest file.
///
/// Frames are grouped by camera and sorted by timestamp; ties in
/// `(camera, timestamp)` are rejected with both offending line numbers.
/// Image paths are not touched unless the chroma policy needs pixels.
pub fn load_manifest(path: &Path, policy: &ModalityPolicy) -> Result<SequenceManifest> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ManifestRecord =
            serde_json::from_str(&line).map_err(|e| Error::ManifestParse {
                path: path.to_path_buf(),
                line: line_no,
                message: e.to_string(),
            })?;
        records.push((line_no, record));
    }
    build_manifest(path, records, policy)
}

/// Assemble a manifest from already-parsed records. `line_no` is used in
/// duplicate reports.
pub fn build_manifest(
    source: &Path,
    records: Vec<(usize, ManifestRecord)>,
    policy: &ModalityPolicy,
) -> Result<SequenceManifest> {
    struct Pending {
        line: usize,
        path: PathBuf,
        camera: String,
        timestamp: DateTime<Utc>,
        modality: Option<Modality>,
    }

    let mut by_camera: BTreeMap<String, Vec<Pending>> = BTreeMap::new();
    for (line, record) in records {
        let timestamp = parse_timestamp(&record.timestamp).map_err(|message| {
            Error::ManifestParse {
                path: source.to_path_buf(),
                line,
                message,
            }
        })?;
        by_camera.entry(record.camera.clone()).or_default().push(Pending {
            line,
            path: PathBuf::from(record.path),
            camera: record.camera,
            timestamp,
            modality: record.modality,
        });
    }

    let mut cameras = BTreeMap::new();
    for (camera, mut pending) in by_camera {
        pending.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then(a.line.cmp(&b.line)));
        for pair in pending.windows(2) {
            if pair[0].timestamp == pair[1].timestamp {
                return Err(Error::DuplicateTimestamp {
                    path: source.to_path_buf(),
                    camera: camera.clone(),
                    timestamp: pair[0].timestamp.to_rfc3339(),
                    first_line: pair[0].line,
                    second_line: pair[1].line,
                });
            }
        }
        let mut frames = Vec::with_capacity(pending.len());
        for (index, p) in pending.into_iter().enumerate() {
            let modality = match p.modality {
                Some(m) => m,
                None => match policy {
                    ModalityPolicy::Chroma { tau } => {
                        let img = RgbImage::load(&p.path)?;
                        classify_chroma(&img, *tau)
                    }
                    ModalityPolicy::Clock => classify_clock(&p.timestamp),
                },
            };
            frames.push(Frame {
                path: p.path,
                camera_id: p.camera,
                timestamp: p.timestamp,
                modality,
                index,
            });
        }
        cameras.insert(camera, frames);
    }
    Ok(SequenceManifest { cameras })
}

/// Serialize frames back into manifest lines, modality written explicitly
/// so re-ingestion never needs pixel access.
pub fn manifest_lines(frames: &[&Frame]) -> String {
    let mut out = String::new();
    for frame in frames {
        let record = ManifestRecord {
            path: frame.path.to_string_lossy().into_owned(),
            camera: frame.camera_id.clone(),
            timestamp: frame.timestamp.to_rfc3339(),
            modality: Some(frame.modality),
        };
        out.push_str(&serde_json::to_string(&record).expect("record serializes"));
        out.push('\n');
    }
    out
}
