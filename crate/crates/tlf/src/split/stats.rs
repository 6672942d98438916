//! Per-camera statistics table, written as CSV.
//!
//! One row per camera (sorted by id) plus a `total` row, with labelled
//! image counts, day/night image counts, and per-class object counts
//! broken down by capture modality and size category. The same numbers
//! feed the partition objective, so the table is the place to look when
//! a split decision needs explaining.

use std::path::Path;

use crate::error::{Error, Result};

use super::annotations::ClassSet;
use super::profile::CameraProfile;

/// Column headers: fixed prefix, then six columns per class.
fn header(classes: &ClassSet) -> Vec<String> {
    let mut cols = vec![
        "camera".to_string(),
        "labelled_images".to_string(),
        "day_images".to_string(),
        "night_images".to_string(),
    ];
    for name in classes.names() {
        for suffix in ["objects", "day", "night", "small", "medium", "large"] {
            cols.push(format!("{name}_{suffix}"));
        }
    }
    cols
}

fn row(label: &str, p: &CameraProfile) -> Vec<String> {
    let mut cols = vec![
        label.to_string(),
        p.labelled_images.to_string(),
        p.day_images.to_string(),
        p.night_images.to_string(),
    ];
    for c in 0..p.class_counts.len() {
        cols.push(p.class_counts[c].to_string());
        cols.push(p.class_day_counts[c].to_string());
        cols.push(p.class_night_counts[c].to_string());
        for s in 0..3 {
            cols.push(p.class_size_counts[c][s].to_string());
        }
    }
    cols
}

/// Sum all counts across cameras into a synthetic "total" profile.
fn totals(profiles: &[CameraProfile]) -> CameraProfile {
    let n_classes = profiles.first().map(|p| p.class_counts.len()).unwrap_or(0);
    let mut total = CameraProfile {
        camera_id: "total".to_string(),
        labelled_images: 0,
        day_images: 0,
        night_images: 0,
        class_counts: vec![0; n_classes],
        class_size_counts: vec![[0; 3]; n_classes],
        class_day_counts: vec![0; n_classes],
        class_night_counts: vec![0; n_classes],
    };
    for p in profiles {
        total.labelled_images += p.labelled_images;
        total.day_images += p.day_images;
        total.night_images += p.night_images;
        for c in 0..n_classes {
            total.class_counts[c] += p.class_counts[c];
            total.class_day_counts[c] += p.class_day_counts[c];
            total.class_night_counts[c] += p.class_night_counts[c];
            for s in 0..3 {
                total.class_size_counts[c][s] += p.class_size_counts[c][s];
            }
        }
    }
    total
}

/// Render the table to any writer. Cameras appear sorted by id; the last
/// row totals every numeric column.
pub fn render_stats_csv<W: std::io::Write>(
    profiles: &[CameraProfile],
    classes: &ClassSet,
    writer: W,
) -> Result<()> {
    for p in profiles {
        if p.class_counts.len() != classes.len() {
            return Err(Error::Config(format!(
                "camera {:?} tracks {} classes, expected {}",
                p.camera_id,
                p.class_counts.len(),
                classes.len()
            )));
        }
    }
    let mut sorted: Vec<&CameraProfile> = profiles.iter().collect();
    sorted.sort_by(|a, b| a.camera_id.cmp(&b.camera_id));

    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(header(classes))?;
    for p in &sorted {
        csv.write_record(row(&p.camera_id, p))?;
    }
    let total = totals(profiles);
    csv.write_record(row("total", &total))?;
    csv.flush()?;
    Ok(())
}

/// Write the table to `path`.
pub fn write_stats_csv(
    profiles: &[CameraProfile],
    classes: &ClassSet,
    path: &Path,
) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    render_stats_csv(profiles, classes, std::io::BufWriter::new(file))
}
