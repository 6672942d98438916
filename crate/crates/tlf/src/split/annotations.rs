//! Bounding-box annotation parsing.
//!
//! Labels live one text file per image, named after the image's file
//! stem, each line `class_id cx cy w h` with center/size normalized to
//! [0, 1] by the image dimensions.
//!
//! An image counts as *labelled* when it has a label file (possibly
//! empty — genuinely empty frames carry information), or when it is
//! listed in an optional labelled-image index file (one manifest `path`
//! per line) covering images whose label files were never created.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::manifest::{Frame, SequenceManifest};

/// The ordered set of object classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassSet {
    names: Vec<String>,
}

impl ClassSet {
    pub fn new(names: Vec<String>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::Config("class set must not be empty".into()));
        }
        let mut seen = BTreeSet::new();
        for name in &names {
            if name.trim().is_empty() {
                return Err(Error::Config("class names must be non-empty".into()));
            }
            if !seen.insert(name) {
                return Err(Error::Config(format!("duplicate class name {name:?}")));
            }
        }
        Ok(ClassSet { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// One bounding box, linked to the frame it annotates.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationRecord {
    pub frame: Frame,
    pub class_id: usize,
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl AnnotationRecord {
    /// Box area normalized by the image dimensions.
    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

/// Everything the splitter needs: the boxes, which frames count as
/// labelled, and the class vocabulary.
#[derive(Debug, Clone)]
pub struct LabelledDataset {
    pub records: Vec<AnnotationRecord>,
    pub labelled_frames: Vec<Frame>,
    pub classes: ClassSet,
}

impl LabelledDataset {
    /// Distinct camera ids among labelled frames, sorted.
    pub fn cameras(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self
            .labelled_frames
            .iter()
            .map(|f| f.camera_id.as_str())
            .collect();
        set.into_iter().map(String::from).collect()
    }

    /// All normalized box areas in record order.
    pub fn areas(&self) -> Vec<f64> {
        self.records.iter().map(AnnotationRecord::area).collect()
    }
}

fn parse_label_line(
    line: &str,
    classes: &ClassSet,
    path: &Path,
    line_no: usize,
) -> Result<(usize, f64, f64, f64, f64)> {
    let fail = |message: String| Error::AnnotationParse {
        path: path.to_path_buf(),
        line: line_no,
        message,
    };
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 5 {
        return Err(fail(format!(
            "expected 5 fields `class_id cx cy w h`, got {}",
            fields.len()
        )));
    }
    let class_id: usize = fields[0]
        .parse()
        .map_err(|e| fail(format!("bad class id {:?}: {e}", fields[0])))?;
    if class_id >= classes.len() {
        return Err(fail(format!(
            "class id {class_id} out of range for {} classes",
            classes.len()
        )));
    }
    let mut coords = [0.0f64; 4];
    for (slot, field) in coords.iter_mut().zip(&fields[1..]) {
        let v: f64 = field
            .parse()
            .map_err(|e| fail(format!("bad coordinate {field:?}: {e}")))?;
        if !(0.0..=1.0).contains(&v) {
            return Err(fail(format!("coordinate {v} outside [0, 1]")));
        }
        *slot = v;
    }
    let [cx, cy, w, h] = coords;
    if w * h <= 0.0 {
        return Err(fail(format!("box has zero area (w={w}, h={h})")));
    }
    Ok((class_id, cx, cy, w, h))
}

/// Read the labelled-image index: one manifest `path` per line.
fn read_labelled_index(path: &Path) -> Result<BTreeSet<String>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut set = BTreeSet::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if !trimmed.is_empty() {
            set.insert(trimmed.to_string());
        }
    }
    Ok(set)
}

/// Walk the manifest, pair each frame with its label file by stem, and
/// parse every box.
///
/// `labelled_index` optionally names images that count as labelled even
/// without a label file. Two frames sharing a file stem would claim the
/// same label file and are rejected.
pub fn parse_annotations(
    label_dir: &Path,
    manifest: &SequenceManifest,
    classes: &ClassSet,
    labelled_index: Option<&Path>,
) -> Result<LabelledDataset> {
    let index = match labelled_index {
        Some(path) => Some(read_labelled_index(path)?),
        None => None,
    };

    // stems must be unique: the label file is addressed by stem alone
    let mut stem_owner: BTreeMap<String, &Frame> = BTreeMap::new();
    for frame in manifest.all_frames() {
        let stem = frame
            .path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        if let Some(previous) = stem_owner.get(stem.as_str()) {
            return Err(Error::AmbiguousLabelStem {
                first: previous.path.clone(),
                second: frame.path.clone(),
                stem,
            });
        }
        stem_owner.insert(stem, frame);
    }

    let mut records = Vec::new();
    let mut labelled_frames = Vec::new();
    for frame in manifest.all_frames() {
        let stem = frame
            .path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let label_path = label_dir.join(format!("{stem}.txt"));
        let in_index = index
            .as_ref()
            .is_some_and(|set| set.contains(&frame.path.to_string_lossy().into_owned()));
        let has_file = label_path.is_file();
        if !has_file && !in_index {
            continue;
        }
        labelled_frames.push(frame.clone());
        if !has_file {
            continue;
        }
        let file = std::fs::File::open(&label_path).map_err(|e| Error::io(&label_path, e))?;
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(&label_path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let (class_id, cx, cy, w, h) =
                parse_label_line(&line, classes, &label_path, idx + 1)?;
            records.push(AnnotationRecord {
                frame: frame.clone(),
                class_id,
                cx,
                cy,
                w,
                h,
            });
        }
    }

    Ok(LabelledDataset {
        records,
        labelled_frames,
        classes: classes.clone(),
    })
}
