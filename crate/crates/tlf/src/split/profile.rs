//! Per-camera annotation statistics.
//!
//! Profiles store raw integer counts — labelled images, objects per
//! class, objects per class per size category, and the day/night split of
//! both — and derive means and ratios on demand. Keeping integers (exact
//! in `f64` territory) makes every downstream statistic deterministic
//! regardless of accumulation order.

use crate::error::{Error, Result};
use crate::manifest::Modality;

use super::annotations::LabelledDataset;
use super::clusters::{assign_size, SizeClusters};

/// Raw counts for one camera.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CameraProfile {
    pub camera_id: String,
    /// Labelled images (the denominator of every per-image mean).
    pub labelled_images: u64,
    pub day_images: u64,
    pub night_images: u64,
    /// Objects per class.
    pub class_counts: Vec<u64>,
    /// Objects per class per size category (small, medium, large).
    pub class_size_counts: Vec<[u64; 3]>,
    /// Objects per class seen in day frames.
    pub class_day_counts: Vec<u64>,
    /// Objects per class seen in night frames.
    pub class_night_counts: Vec<u64>,
}

impl CameraProfile {
    /// Mean objects of `class_id` per labelled image.
    pub fn class_mean(&self, class_id: usize) -> f64 {
        self.class_counts[class_id] as f64 / self.labelled_images as f64
    }

    /// Mean objects of `class_id` in `size` per labelled image.
    pub fn class_size_mean(&self, class_id: usize, size: usize) -> f64 {
        self.class_size_counts[class_id][size] as f64 / self.labelled_images as f64
    }

    /// Fraction of this class's objects seen by day, or `None` when the
    /// camera has no objects of the class at all.
    pub fn day_ratio(&self, class_id: usize) -> Option<f64> {
        let day = self.class_day_counts[class_id];
        let night = self.class_night_counts[class_id];
        let total = day + night;
        if total == 0 {
            None
        } else {
            Some(day as f64 / total as f64)
        }
    }

    /// Multiply every count by `factor` — useful for invariance checks:
    /// all means and ratios are unchanged.
    pub fn scaled(&self, factor: u64) -> CameraProfile {
        CameraProfile {
            camera_id: self.camera_id.clone(),
            labelled_images: self.labelled_images * factor,
            day_images: self.day_images * factor,
            night_images: self.night_images * factor,
            class_counts: self.class_counts.iter().map(|&c| c * factor).collect(),
            class_size_counts: self
                .class_size_counts
                .iter()
                .map(|s| [s[0] * factor, s[1] * factor, s[2] * factor])
                .collect(),
            class_day_counts: self.class_day_counts.iter().map(|&c| c * factor).collect(),
            class_night_counts: self
                .class_night_counts
                .iter()
                .map(|&c| c * factor)
                .collect(),
        }
    }
}

/// Count one camera's labelled frames and boxes into a profile.
///
/// Errors when the camera has no labelled images — a per-image mean would
/// be undefined.
pub fn camera_profile(
    camera_id: &str,
    dataset: &LabelledDataset,
    clusters: &SizeClusters,
) -> Result<CameraProfile> {
    let n_classes = dataset.classes.len();
    let mut profile = CameraProfile {
        camera_id: camera_id.to_string(),
        labelled_images: 0,
        day_images: 0,
        night_images: 0,
        class_counts: vec![0; n_classes],
        class_size_counts: vec![[0; 3]; n_classes],
        class_day_counts: vec![0; n_classes],
        class_night_counts: vec![0; n_classes],
    };

    for frame in &dataset.labelled_frames {
        if frame.camera_id != camera_id {
            continue;
        }
        profile.labelled_images += 1;
        match frame.modality {
            Modality::Day => profile.day_images += 1,
            Modality::Night => profile.night_images += 1,
        }
    }
    if profile.labelled_images == 0 {
        return Err(Error::NoLabelledImages {
            camera: camera_id.to_string(),
        });
    }

    for record in &dataset.records {
        if record.frame.camera_id != camera_id {
            continue;
        }
        profile.class_counts[record.class_id] += 1;
        let size = assign_size(record, clusters);
        profile.class_size_counts[record.class_id][size.index()] += 1;
        match record.frame.modality {
            Modality::Day => profile.class_day_counts[record.class_id] += 1,
            Modality::Night => profile.class_night_counts[record.class_id] += 1,
        }
    }
    Ok(profile)
}

/// Profiles for every camera with labelled images, sorted by camera id.
pub fn all_camera_profiles(
    dataset: &LabelledDataset,
    clusters: &SizeClusters,
) -> Result<Vec<CameraProfile>> {
    dataset
        .cameras()
        .iter()
        .map(|camera| camera_profile(camera, dataset, clusters))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::{build_manifest, ManifestRecord, ModalityPolicy};
    use crate::split::annotations::{AnnotationRecord, ClassSet};
    use std::path::Path;

    fn toy_dataset() -> LabelledDataset {
        let classes = ClassSet::new(vec!["Adult".into(), "Chick".into()]).unwrap();
        let records_spec = [
            ("cam/a.png", "cam", "2021-01-01T12:00:00Z", Modality::Day),
            ("cam/b.png", "cam", "2021-01-01T23:00:00Z", Modality::Night),
        ];
        let manifest_records = records_spec
            .iter()
            .enumerate()
            .map(|(i, (path, camera, ts, modality))| {
                (
                    i + 1,
                    ManifestRecord {
                        path: path.to_string(),
                        camera: camera.to_string(),
                        timestamp: ts.to_string(),
                        modality: Some(*modality),
                    },
                )
            })
            .collect();
        let manifest =
            build_manifest(Path::new("synthetic"), manifest_records, &ModalityPolicy::Clock)
                .unwrap();
        let frames: Vec<_> = manifest.frames("cam").to_vec();

        // frame a (day): one Adult small box; frame b (night): three
        // Adult boxes of growing size
        let mut records = Vec::new();
        let boxes = [
            (0usize, 0, 0.05f64),
            (1, 0, 0.05),
            (1, 0, 0.3),
            (1, 0, 0.8),
        ];
        for (frame_idx, class_id, side) in boxes {
            records.push(AnnotationRecord {
                frame: frames[frame_idx].clone(),
                class_id,
                cx: 0.5,
                cy: 0.5,
                w: side,
                h: side,
            });
        }
        LabelledDataset {
            records,
            labelled_frames: frames,
            classes,
        }
    }

    fn clusters() -> SizeClusters {
        SizeClusters {
            medoids: [0.0025, 0.09, 0.64],
        }
    }

    #[test]
    fn counts_and_means_add_up() {
        let ds = toy_dataset();
        let p = camera_profile("cam", &ds, &clusters()).unwrap();
        assert_eq!(p.labelled_images, 2);
        assert_eq!((p.day_images, p.night_images), (1, 1));
        assert_eq!(p.class_counts, [4, 0]);
        assert_eq!(p.class_mean(0), 2.0);
        assert_eq!(p.class_size_counts[0], [2, 1, 1]);
        assert_eq!(p.class_day_counts, [1, 0]);
        assert_eq!(p.class_night_counts, [3, 0]);
        assert!((p.day_ratio(0).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(p.day_ratio(1), None);
        assert_eq!(p.class_size_mean(1, 0), 0.0);
    }

    #[test]
    fn published_style_ratio_reproduces() {
        // a camera whose dominant class splits 628 day / 598 night
        let p = CameraProfile {
            camera_id: "x".into(),
            labelled_images: 1072,
            day_images: 708,
            night_images: 364,
            class_counts: vec![1226],
            class_size_counts: vec![[400, 400, 426]],
            class_day_counts: vec![628],
            class_night_counts: vec![598],
        };
        let ratio = p.day_ratio(0).unwrap();
        assert!((ratio - 0.512_234_910_277_324_6).abs() < 1e-15);
    }

    #[test]
    fn unlabelled_camera_is_rejected() {
        let ds = toy_dataset();
        assert!(matches!(
            camera_profile("ghost", &ds, &clusters()),
            Err(Error::NoLabelledImages { .. })
        ));
    }

    #[test]
    fn scaling_counts_preserves_all_statistics() {
        let ds = toy_dataset();
        let p = camera_profile("cam", &ds, &clusters()).unwrap();
        let s = p.scaled(7);
        assert_eq!(s.class_mean(0), p.class_mean(0));
        assert_eq!(s.class_size_mean(0, 1), p.class_size_mean(0, 1));
        assert_eq!(s.day_ratio(0), p.day_ratio(0));
    }
}
