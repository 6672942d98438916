//! Materialize a chosen partition: one manifest file per subset, in the
//! same line format the ingester reads, plus a JSON report describing
//! each subset's class, size, and day/night make-up.
//!
//! The report is built from the exact [`SubsetStats`] the optimizer
//! scored, so numbers in the report and numbers behind the objective can
//! never drift apart.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::manifest::{manifest_lines, Frame, SequenceManifest};

use super::annotations::ClassSet;
use super::search::PartitionSpec;
use super::variance::{SubsetStats, VarianceTerms};

/// File names written into the output directory.
pub const SUBSET_FILES: [&str; 3] = ["train.jsonl", "val.jsonl", "test.jsonl"];
/// Report file name.
pub const REPORT_FILE: &str = "report.json";

/// Distribution summary for one subset.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SubsetReport {
    /// "train", "val", or "test".
    pub name: String,
    pub cameras: Vec<String>,
    /// Frames listed in this subset's manifest (labelled or not).
    pub images: usize,
    /// Raw pooled counts, identical to what the optimizer scored.
    pub stats: SubsetStats,
    /// Mean objects per labelled image, one entry per class.
    pub class_mean_objects: Vec<f64>,
    /// Share of this subset's objects per class (sums to 1 when any
    /// objects exist).
    pub class_share: Vec<f64>,
    /// Within each class, the share of its objects that are small,
    /// medium, and large.
    pub class_size_share: Vec<[f64; 3]>,
    /// Day fraction of each class's objects; `null` where the class is
    /// absent.
    pub class_day_ratio: Vec<Option<f64>>,
    /// Day fraction of the subset's labelled images.
    pub day_image_fraction: f64,
}

impl SubsetReport {
    fn build(name: &str, cameras: Vec<String>, images: usize, stats: &SubsetStats) -> Self {
        let n_classes = stats.n_classes();
        let total_objects: u64 = stats.class_counts.iter().sum();
        let class_share = stats
            .class_counts
            .iter()
            .map(|&c| {
                if total_objects == 0 {
                    0.0
                } else {
                    c as f64 / total_objects as f64
                }
            })
            .collect();
        let class_size_share = (0..n_classes)
            .map(|c| {
                let total = stats.class_counts[c];
                let mut share = [0.0; 3];
                if total > 0 {
                    for (s, slot) in share.iter_mut().enumerate() {
                        *slot = stats.class_size_counts[c][s] as f64 / total as f64;
                    }
                }
                share
            })
            .collect();
        SubsetReport {
            name: name.to_string(),
            cameras,
            images,
            class_mean_objects: (0..n_classes).map(|c| stats.class_mean(c)).collect(),
            class_share,
            class_size_share,
            class_day_ratio: (0..n_classes).map(|c| stats.day_ratio(c)).collect(),
            day_image_fraction: stats.day_image_fraction(),
            stats: stats.clone(),
        }
    }
}

/// The full report written next to the subset manifests.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SplitReport {
    pub classes: Vec<String>,
    pub subsets: [SubsetReport; 3],
    pub objective: f64,
    pub terms: VarianceTerms,
}

/// Write subset manifests and the distribution report into `out_dir`.
///
/// Every camera named by the partition must appear in the manifest;
/// frames keep their ingestion order (per camera, by timestamp).
pub fn emit_split(
    manifest: &SequenceManifest,
    spec: &PartitionSpec,
    classes: &ClassSet,
    out_dir: &Path,
) -> Result<(SplitReport, Vec<PathBuf>)> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut written = Vec::with_capacity(4);
    let mut reports = Vec::with_capacity(3);
    for (slot, file_name) in SUBSET_FILES.iter().enumerate() {
        let cameras = &spec.subsets[slot];
        let mut frames: Vec<&Frame> = Vec::new();
        for camera in cameras {
            let camera_frames = manifest.frames(camera);
            if camera_frames.is_empty() {
                return Err(Error::Config(format!(
                    "partition names camera {camera:?}, which has no frames in the manifest"
                )));
            }
            frames.extend(camera_frames);
        }
        let path = out_dir.join(file_name);
        std::fs::write(&path, manifest_lines(&frames)).map_err(|e| Error::io(&path, e))?;
        written.push(path);
        reports.push(SubsetReport::build(
            SUBSET_FILES[slot].trim_end_matches(".jsonl"),
            cameras.clone(),
            frames.len(),
            &spec.stats[slot],
        ));
    }

    let report = SplitReport {
        classes: classes.names().to_vec(),
        subsets: reports
            .try_into()
            .expect("exactly three subset reports were built"),
        objective: spec.objective,
        terms: spec.terms.clone(),
    };
    let path = out_dir.join(REPORT_FILE);
    let mut body =
        serde_json::to_string_pretty(&report).map_err(|e| Error::Config(e.to_string()))?;
    body.push('\n');
    std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok((report, written))
}
