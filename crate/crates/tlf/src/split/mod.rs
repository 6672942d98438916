//! Variance-minimizing camera partitions.
//!
//! Multi-camera datasets are split train/val/test at the *camera* level
//! so no camera's imagery leaks across subsets. Among all ways to deal
//! the cameras into three subsets of prescribed sizes, the search returns
//! the one whose per-subset statistics — class distribution, object-size
//! distribution, day/night ratio — vary least across the subsets.
//!
//! The pipeline: [`annotations`] parses per-image label files,
//! [`clusters`] buckets object areas into small/medium/large via
//! k-medoids, [`profile`] aggregates per-camera counts, [`variance`]
//! scores a candidate partition, [`search`] enumerates candidates under
//! the configured constraints, and [`emit`]/[`stats`] write the results.

pub mod annotations;
pub mod clusters;
pub mod emit;
pub mod profile;
pub mod search;
pub mod stats;
pub mod variance;

pub use annotations::{parse_annotations, AnnotationRecord, ClassSet, LabelledDataset};
pub use clusters::{assign_size, kmedoids_pam, SizeCategory, SizeClusters};
pub use emit::{emit_split, SplitReport, SubsetReport, REPORT_FILE, SUBSET_FILES};
pub use profile::{all_camera_profiles, camera_profile, CameraProfile};
pub use search::{search_partition, PartitionConstraints, PartitionSpec};
pub use stats::{render_stats_csv, write_stats_csv};
pub use variance::{variance_terms, SubsetStats, VarianceTerms};
