//! The three cross-subset variance terms that score a partition.
//!
//! Subset statistics pool raw counts over the subset's cameras — objects
//! per labelled image over the union, not an average of per-camera
//! means — so cameras weigh in proportion to their evidence. Each term
//! is a population variance (divisor 3) across the three subsets, summed
//! over classes (and size categories):
//!
//! * class term — variance of mean objects per image, per class;
//! * size term — the same split by small/medium/large;
//! * ratio term — variance of the day fraction `day/(day+night)` per
//!   class, skipping subsets where the class is absent (variance over
//!   the defined values; zero when fewer than two are defined).
//!
//! All statistics derive from integer counts, so results are identical
//! no matter how or in what order the counts were accumulated.

use crate::error::{Error, Result};

use super::profile::CameraProfile;

/// Pooled raw counts of one subset.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct SubsetStats {
    pub labelled_images: u64,
    pub day_images: u64,
    pub night_images: u64,
    pub class_counts: Vec<u64>,
    pub class_size_counts: Vec<[u64; 3]>,
    pub class_day_counts: Vec<u64>,
    pub class_night_counts: Vec<u64>,
}

impl SubsetStats {
    /// Sum the counts of the subset's cameras. Errors on an empty subset.
    pub fn pool<'a>(profiles: impl IntoIterator<Item = &'a CameraProfile>) -> Result<Self> {
        let mut iter = profiles.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::InfeasiblePartition("subset has no cameras".into()))?;
        let n_classes = first.class_counts.len();
        let mut stats = SubsetStats {
            labelled_images: first.labelled_images,
            day_images: first.day_images,
            night_images: first.night_images,
            class_counts: first.class_counts.clone(),
            class_size_counts: first.class_size_counts.clone(),
            class_day_counts: first.class_day_counts.clone(),
            class_night_counts: first.class_night_counts.clone(),
        };
        for p in iter {
            if p.class_counts.len() != n_classes {
                return Err(Error::ShapeMismatch(format!(
                    "camera {} tracks {} classes, expected {n_classes}",
                    p.camera_id,
                    p.class_counts.len()
                )));
            }
            stats.labelled_images += p.labelled_images;
            stats.day_images += p.day_images;
            stats.night_images += p.night_images;
            for c in 0..n_classes {
                stats.class_counts[c] += p.class_counts[c];
                for s in 0..3 {
                    stats.class_size_counts[c][s] += p.class_size_counts[c][s];
                }
                stats.class_day_counts[c] += p.class_day_counts[c];
                stats.class_night_counts[c] += p.class_night_counts[c];
            }
        }
        Ok(stats)
    }

    pub fn n_classes(&self) -> usize {
        self.class_counts.len()
    }

    /// Mean objects of a class per labelled image in this subset.
    pub fn class_mean(&self, class_id: usize) -> f64 {
        self.class_counts[class_id] as f64 / self.labelled_images as f64
    }

    pub fn class_size_mean(&self, class_id: usize, size: usize) -> f64 {
        self.class_size_counts[class_id][size] as f64 / self.labelled_images as f64
    }

    /// Day fraction of a class's objects, `None` when the class is absent.
    pub fn day_ratio(&self, class_id: usize) -> Option<f64> {
        let day = self.class_day_counts[class_id];
        let total = day + self.class_night_counts[class_id];
        if total == 0 {
            None
        } else {
            Some(day as f64 / total as f64)
        }
    }

    /// Fraction of labelled images captured by day.
    pub fn day_image_fraction(&self) -> f64 {
        self.day_images as f64 / (self.day_images + self.night_images) as f64
    }
}

/// The three terms of the partition objective, in natural order.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct VarianceTerms {
    pub class_term: f64,
    pub size_term: f64,
    pub ratio_term: f64,
}

impl VarianceTerms {
    /// `w₀·class + w₁·size + w₂·ratio`; the default weights are all 1.
    pub fn weighted_total(&self, weights: [f64; 3]) -> f64 {
        weights[0] * self.class_term + weights[1] * self.size_term + weights[2] * self.ratio_term
    }
}

/// Population variance of exactly three values (divisor 3).
fn population_variance_3(values: [f64; 3]) -> f64 {
    let mean = (values[0] + values[1] + values[2]) / 3.0;
    let mut acc = 0.0;
    for v in values {
        let d = v - mean;
        acc += d * d;
    }
    acc / 3.0
}

/// Variance of however many ratio values are defined, divisor = their
/// count; zero when fewer than two.
fn defined_variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mut sum = 0.0;
    for &v in values {
        sum += v;
    }
    let mean = sum / n;
    let mut acc = 0.0;
    for &v in values {
        let d = v - mean;
        acc += d * d;
    }
    acc / n
}

/// Score three pooled subsets.
pub fn variance_terms(subsets: &[SubsetStats; 3]) -> Result<VarianceTerms> {
    let n_classes = subsets[0].n_classes();
    if subsets.iter().any(|s| s.n_classes() != n_classes) {
        return Err(Error::ShapeMismatch(
            "subsets disagree on class count".into(),
        ));
    }

    let mut class_term = 0.0;
    for c in 0..n_classes {
        class_term += population_variance_3([
            subsets[0].class_mean(c),
            subsets[1].class_mean(c),
            subsets[2].class_mean(c),
        ]);
    }

    let mut size_term = 0.0;
    for c in 0..n_classes {
        for s in 0..3 {
            size_term += population_variance_3([
                subsets[0].class_size_mean(c, s),
                subsets[1].class_size_mean(c, s),
                subsets[2].class_size_mean(c, s),
            ]);
        }
    }

    let mut ratio_term = 0.0;
    for c in 0..n_classes {
        let defined: Vec<f64> = subsets.iter().filter_map(|s| s.day_ratio(c)).collect();
        ratio_term += defined_variance(&defined);
    }

    Ok(VarianceTerms {
        class_term,
        size_term,
        ratio_term,
    })
}

#[cfg(test)]
pub(crate) fn fixture_profiles() -> Vec<CameraProfile> {
    // six hand-built cameras with varied class, size, and modality mixes;
    // every statistic below is reproducible by hand from these counts
    let spec: [(&str, u64, u64, u64, [u64; 3], [[u64; 3]; 3], [u64; 3], [u64; 3]); 6] = [
        (
            "A",
            10, 6, 4,
            [20, 5, 0],
            [[10, 6, 4], [5, 0, 0], [0, 0, 0]],
            [12, 5, 0],
            [8, 0, 0],
        ),
        (
            "B",
            20, 10, 10,
            [30, 10, 8],
            [[10, 10, 10], [2, 5, 3], [8, 0, 0]],
            [15, 4, 8],
            [15, 6, 0],
        ),
        (
            "C",
            5, 5, 0,
            [12, 0, 3],
            [[2, 4, 6], [0, 0, 0], [0, 3, 0]],
            [12, 0, 3],
            [0, 0, 0],
        ),
        (
            "D",
            8, 2, 6,
            [10, 6, 2],
            [[4, 3, 3], [1, 2, 3], [0, 0, 2]],
            [3, 1, 0],
            [7, 5, 2],
        ),
        (
            "E",
            12, 8, 4,
            [25, 3, 6],
            [[20, 5, 0], [3, 0, 0], [2, 2, 2]],
            [15, 0, 6],
            [10, 3, 0],
        ),
        (
            "F",
            15, 9, 6,
            [18, 9, 12],
            [[6, 6, 6], [0, 9, 0], [4, 4, 4]],
            [9, 9, 4],
            [9, 0, 8],
        ),
    ];
    spec.into_iter()
        .map(
            |(id, images, day, night, class, sizes, day_c, night_c)| CameraProfile {
                camera_id: id.into(),
                labelled_images: images,
                day_images: day,
                night_images: night,
                class_counts: class.to_vec(),
                class_size_counts: sizes.to_vec(),
                class_day_counts: day_c.to_vec(),
                class_night_counts: night_c.to_vec(),
            },
        )
        .collect()
}
