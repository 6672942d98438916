//! Temporal feature stacks, learned channel weighting, and stratified
//! camera partitions for time-lapse wildlife imagery.
//!
//! Fixed monitoring cameras know what their empty scene looks like —
//! this crate exploits that. It converts raw time-lapse sequences into
//! five-plane feature stacks (RGB + temporal background + difference
//! mask) for detection networks, provides two differentiable layers
//! that learn how strongly the synthetic planes should be weighted, and
//! assigns whole cameras to train/validation/test subsets so that
//! evaluation measures generalization to unseen locations.
//!
//! # Module map
//!
//! The stacking pipeline, in data order:
//!
//! * [`manifest`] — JSONL frame manifests: parsing, validation,
//!   per-camera time ordering, day/night modality policies.
//! * [`image`] — `f64` RGB images and PNG/JPEG I/O.
//! * [`background`] — temporal-average backgrounds over prior
//!   same-modality frame windows; luminosity greyscale.
//! * [`color`] — global 3×3 least-squares colour correction between a
//!   frame and its background.
//! * [`mask`] — the mean-absolute-difference change mask.
//! * [`stack`] — five-plane `f32` feature stacks, the `.tlf5` binary
//!   container, and debug PNG export.
//! * [`pipeline`] — configuration plus end-to-end runners
//!   ([`pipeline::run_stack`], [`pipeline::run_split`]) with parallel,
//!   byte-deterministic execution.
//!
//! Learning support:
//!
//! * [`weighting`] — fixed sigmoid-scalar and squeeze-and-excitation
//!   channel weighting with hand-written backward passes and a
//!   finite-difference gradient checker.
//! * [`fitness`] — the scalar detection-quality score combining two
//!   mAP metrics.
//!
//! Dataset preparation:
//!
//! * [`split`] — per-camera annotation profiles, k-medoids size
//!   clusters, the cross-subset variance objective, exhaustive
//!   partition search, and split/report emission.
//!
//! # Quick start
//!
//! Build the two synthetic planes for one frame by hand:
//!
//! ```
//! use tlf::background::{luminosity_grey, temporal_average};
//! use tlf::color::{apply_color_correction, fit_color_matrix};
//! use tlf::image::RgbImage;
//! use tlf::mask::diff_mask;
//!
//! // twelve prior frames of the empty scene, plus the current frame
//! let priors: Vec<RgbImage> = (0..12)
//!     .map(|k| RgbImage::from_fn(8, 8, |y, x| {
//!         let v = (40 + k + 2 * y + 3 * x) as f64;
//!         (v, v + 10.0, v + 20.0)
//!     }))
//!     .collect();
//! let current = RgbImage::from_fn(8, 8, |y, x| {
//!     let v = (46 + 2 * y + 3 * x) as f64;
//!     if (3..5).contains(&y) && (3..5).contains(&x) {
//!         (v + 60.0, v - 20.0, v) // something moved in
//!     } else {
//!         (v, v + 10.0, v + 20.0)
//!     }
//! });
//!
//! let background = temporal_average(&priors)?;
//! let grey = luminosity_grey(&background);
//!
//! // align the background's colours with the current illumination,
//! // then measure what actually changed
//! let matrix = fit_color_matrix(&current, &background, 1, 1e-6)?;
//! let corrected = apply_color_correction(&background, &matrix);
//! let mask = diff_mask(&current, &corrected)?;
//!
//! assert_eq!(grey.dim(), (8, 8));
//! let centre = mask[(3, 3)];
//! let corner = mask[(0, 0)];
//! assert!(centre > 10.0 * corner.max(1e-9));
//! # Ok::<(), tlf::Error>(())
//! ```
//!
//! For whole sequences, prefer [`pipeline::run_stack`] over manual
//! assembly — it handles window lookup, skip accounting, parallelism,
//! and the `.tlf5` container for you. The companion book under `book/`
//! walks through every stage with runnable examples (doc-tested via the
//! `guide` crate), and the `tlf` binary in `tlf-cli` exposes the
//! pipeline as subcommands.

pub mod background;
pub mod color;
pub mod error;
pub mod fitness;
pub mod image;
pub mod manifest;
pub mod mask;
pub mod pipeline;
pub mod split;
pub mod stack;
pub mod weighting;

pub use error::{Error, Result};
