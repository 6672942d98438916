//! End-to-end drivers: manifest in, feature stacks or a dataset split
//! out.
//!
//! [`run_stack`] walks every frame of a manifest, builds its temporal
//! background, colour-corrects it, computes the difference mask, and
//! writes one five-plane container per frame that has a full prior
//! window. Frames are processed in parallel; outputs are byte-identical
//! regardless of the worker count, because each frame's computation is
//! pure and writes only its own files, and the skip/failure reports are
//! sorted before they are returned.
//!
//! [`run_split`] chains annotation parsing, size clustering, camera
//! profiling, partition search, and manifest emission.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::background::{build_background, BackgroundOutcome};
use crate::color::{apply_color_correction, fit_color_matrix, DEFAULT_RIDGE, DEFAULT_SAMPLE_STRIDE};
use crate::error::{Error, Result};
use crate::image::RgbImage;
use crate::manifest::{load_manifest, Frame, ModalityPolicy, SequenceManifest};
use crate::mask::diff_mask;
use crate::split::{
    all_camera_profiles, emit_split, parse_annotations, search_partition, write_stats_csv,
    ClassSet, PartitionConstraints, PartitionSpec, SizeClusters, SplitReport,
};
use crate::stack::{assemble_stack, export_debug_pngs, write_tlf5_file};

/// Default prior-window length.
pub const DEFAULT_WINDOW: usize = 12;

/// Everything the drivers need, loadable from a flat JSON file.
/// Unset fields take the documented defaults; command-line flags
/// override file values field by field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Frame manifest to read.
    pub manifest: PathBuf,
    /// Directory that receives stacks, split manifests, and reports.
    pub out_dir: PathBuf,
    /// Prior-window length for the temporal background.
    pub window: usize,
    /// How frames without an explicit modality are classified.
    pub modality: ModalityPolicy,
    /// Pixel-grid stride for the colour-matrix fit.
    pub sample_stride: usize,
    /// Ridge term added to the colour-fit normal equations.
    pub ridge: f64,
    /// Worker threads for the stack run; 0 means all available cores.
    pub jobs: usize,
    /// Also write per-plane debug PNGs next to each stack.
    pub export_debug: bool,
    /// Directory of per-image label files (split runs).
    pub label_dir: Option<PathBuf>,
    /// Optional list of labelled images that may have zero objects.
    pub labelled_index: Option<PathBuf>,
    /// Object class names, index = class id (split runs).
    pub classes: Vec<String>,
    /// Cluster count for the object-size categories.
    pub clusters: usize,
    /// Camera counts for (train, val, test) (split runs).
    pub sizes: Option<(usize, usize, usize)>,
    /// Cameras pinned to a subset (0 = train, 1 = val, 2 = test).
    pub forced: BTreeMap<String, usize>,
    /// Cap on the labelled-image share of val and test.
    pub max_eval_fraction: f64,
    /// Weights on the class, size, and ratio variance terms.
    pub term_weights: [f64; 3],
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            manifest: PathBuf::new(),
            out_dir: PathBuf::new(),
            window: DEFAULT_WINDOW,
            modality: ModalityPolicy::default(),
            sample_stride: DEFAULT_SAMPLE_STRIDE,
            ridge: DEFAULT_RIDGE,
            jobs: 0,
            export_debug: false,
            label_dir: None,
            labelled_index: None,
            classes: Vec::new(),
            clusters: 3,
            sizes: None,
            forced: BTreeMap::new(),
            max_eval_fraction: 0.25,
            term_weights: [1.0, 1.0, 1.0],
        }
    }
}

impl PipelineConfig {
    /// Read a config from a JSON file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: PipelineConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!(
                "config {}: {e}",
                path.display()
            )))?;
        config.validate()?;
        Ok(config)
    }

    /// Check the numeric invariants shared by all drivers.
    pub fn validate(&self) -> Result<()> {
        if self.window < 1 {
            return Err(Error::Config("window must be at least 1".into()));
        }
        if self.sample_stride < 1 {
            return Err(Error::Config("sample_stride must be at least 1".into()));
        }
        if !(self.ridge.is_finite() && self.ridge >= 0.0) {
            return Err(Error::OutOfRange {
                name: "ridge",
                value: self.ridge,
            });
        }
        let f = self.max_eval_fraction;
        if !(f.is_finite() && 0.0 < f && f <= 1.0) {
            return Err(Error::OutOfRange {
                name: "max_eval_fraction",
                value: f,
            });
        }
        if let ModalityPolicy::Chroma { tau } = self.modality {
            if !(tau.is_finite() && tau >= 0.0) {
                return Err(Error::OutOfRange {
                    name: "tau",
                    value: tau,
                });
            }
        }
        Ok(())
    }
}

/// One frame skipped for lack of a full prior window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkipEntry {
    pub frame: PathBuf,
    /// Same-modality frames that were available.
    pub qualifying: usize,
    /// Window length that was required.
    pub required: usize,
}

/// One frame that errored; the run continues past it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FailEntry {
    pub frame: PathBuf,
    pub message: String,
}

/// Outcome of a [`run_stack`] call.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct StackSummary {
    pub written: usize,
    pub skipped: usize,
    pub failed: usize,
    /// Stack files created, sorted by path.
    pub outputs: Vec<PathBuf>,
    /// Skipped frames, sorted by frame path.
    pub skip_report: Vec<SkipEntry>,
    /// Failed frames, sorted by frame path.
    pub failures: Vec<FailEntry>,
}

enum FrameOutcome {
    Written(PathBuf),
    Skipped(SkipEntry),
    Failed(FailEntry),
}

fn stack_file_name(frame: &Frame) -> String {
    let stem = frame
        .path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "frame".to_string());
    // the per-camera index makes the name unique even when source stems repeat
    format!("{:05}_{stem}.tlf5", frame.index)
}

fn process_frame(
    manifest: &SequenceManifest,
    frame: &Frame,
    config: &PipelineConfig,
    camera_dir: &Path,
) -> FrameOutcome {
    let fail = |message: String| {
        FrameOutcome::Failed(FailEntry {
            frame: frame.path.clone(),
            message,
        })
    };
    let bg = match build_background(manifest, frame, config.window) {
        Ok(BackgroundOutcome::Built(bg)) => bg,
        Ok(BackgroundOutcome::Skipped { qualifying, required }) => {
            return FrameOutcome::Skipped(SkipEntry {
                frame: frame.path.clone(),
                qualifying,
                required,
            })
        }
        Err(e) => return fail(e.to_string()),
    };
    let result = (|| -> Result<PathBuf> {
        let current = RgbImage::load(&frame.path)?;
        let matrix = fit_color_matrix(&current, &bg.rgb, config.sample_stride, config.ridge)?;
        let corrected = apply_color_correction(&bg.rgb, &matrix);
        let dm = diff_mask(&current, &corrected)?;
        let stack = assemble_stack(&current, &bg, &dm, frame)?;
        let path = camera_dir.join(stack_file_name(frame));
        write_tlf5_file(&path, &stack)?;
        if config.export_debug {
            let stem = path
                .file_stem()
                .expect("stack file has a stem")
                .to_string_lossy()
                .into_owned();
            export_debug_pngs(&stack, camera_dir, &stem)?;
        }
        Ok(path)
    })();
    match result {
        Ok(path) => FrameOutcome::Written(path),
        Err(e) => fail(e.to_string()),
    }
}

/// Build one feature stack per frame with a full prior window.
///
/// Output layout: `out_dir/<camera>/<index>_<stem>.tlf5`. Frames without
/// enough prior same-modality frames are reported in `skip_report`;
/// frames that error (unreadable image, degenerate colour fit) are
/// reported in `failures` and do not stop the run.
pub fn run_stack(config: &PipelineConfig) -> Result<StackSummary> {
    config.validate()?;
    let manifest = load_manifest(&config.manifest, &config.modality)?;

    // create per-camera directories up front so workers never race on them
    let mut camera_dirs = BTreeMap::new();
    for camera in manifest.cameras() {
        let dir = config.out_dir.join(camera);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        camera_dirs.insert(camera.to_string(), dir);
    }

    let frames: Vec<&Frame> = manifest.all_frames().collect();
    let work = |frames: &[&Frame]| -> Vec<FrameOutcome> {
        frames
            .par_iter()
            .map(|frame| {
                let dir = &camera_dirs[&frame.camera_id];
                process_frame(&manifest, frame, config, dir)
            })
            .collect()
    };
    let outcomes = if config.jobs == 0 {
        work(&frames)
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| work(&frames))
    };

    let mut summary = StackSummary::default();
    for outcome in outcomes {
        match outcome {
            FrameOutcome::Written(path) => summary.outputs.push(path),
            FrameOutcome::Skipped(entry) => summary.skip_report.push(entry),
            FrameOutcome::Failed(entry) => summary.failures.push(entry),
        }
    }
    summary.outputs.sort();
    summary.skip_report.sort_by(|a, b| a.frame.cmp(&b.frame));
    summary.failures.sort_by(|a, b| a.frame.cmp(&b.frame));
    summary.written = summary.outputs.len();
    summary.skipped = summary.skip_report.len();
    summary.failed = summary.failures.len();
    Ok(summary)
}

/// Outcome of a [`run_split`] call.
#[derive(Debug, Clone, Serialize)]
pub struct SplitOutcome {
    pub partition: SplitPartitionView,
    pub report: SplitReport,
    /// Files created, in write order (three manifests, then the report).
    pub files: Vec<PathBuf>,
}

/// The partition in summary form (camera lists plus objective).
#[derive(Debug, Clone, Serialize)]
pub struct SplitPartitionView {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
    pub objective: f64,
}

fn split_inputs(config: &PipelineConfig) -> Result<(SequenceManifest, ClassSet, PathBuf)> {
    let label_dir = config
        .label_dir
        .clone()
        .ok_or_else(|| Error::Config("split needs label_dir".into()))?;
    if config.classes.is_empty() {
        return Err(Error::Config("split needs a non-empty class list".into()));
    }
    let classes = ClassSet::new(config.classes.clone())?;
    let manifest = load_manifest(&config.manifest, &config.modality)?;
    Ok((manifest, classes, label_dir))
}

fn fitted_profiles(
    manifest: &SequenceManifest,
    classes: &ClassSet,
    label_dir: &Path,
    config: &PipelineConfig,
) -> Result<Vec<crate::split::CameraProfile>> {
    if config.clusters != 3 {
        return Err(Error::Config(format!(
            "size categories need exactly 3 clusters, got {}",
            config.clusters
        )));
    }
    let dataset = parse_annotations(
        label_dir,
        manifest,
        classes,
        config.labelled_index.as_deref(),
    )?;
    let clusters = SizeClusters::fit(&dataset.areas())?;
    all_camera_profiles(&dataset, &clusters)
}

/// Search for the best partition and write the subset manifests plus the
/// distribution report into `out_dir`.
pub fn run_split(config: &PipelineConfig) -> Result<(PartitionSpec, SplitOutcome)> {
    config.validate()?;
    let (manifest, classes, label_dir) = split_inputs(config)?;
    let profiles = fitted_profiles(&manifest, &classes, &label_dir, config)?;
    let sizes = config
        .sizes
        .ok_or_else(|| Error::Config("split needs subset sizes".into()))?;
    let constraints = PartitionConstraints {
        sizes,
        forced: config.forced.clone(),
        max_eval_fraction: config.max_eval_fraction,
        term_weights: config.term_weights,
    };
    let spec = search_partition(&profiles, &constraints)?;
    let (report, files) = emit_split(&manifest, &spec, &classes, &config.out_dir)?;
    let outcome = SplitOutcome {
        partition: SplitPartitionView {
            train: spec.subsets[0].clone(),
            val: spec.subsets[1].clone(),
            test: spec.subsets[2].clone(),
            objective: spec.objective,
        },
        report,
        files,
    };
    Ok((spec, outcome))
}

/// Write the per-camera statistics table to `path`.
pub fn run_stats(config: &PipelineConfig, path: &Path) -> Result<()> {
    config.validate()?;
    let (manifest, classes, label_dir) = split_inputs(config)?;
    let profiles = fitted_profiles(&manifest, &classes, &label_dir, config)?;
    write_stats_csv(&profiles, &classes, path)
}
