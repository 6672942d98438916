//! Temporal-average background models.
//!
//! The background for a frame is the per-pixel, per-channel arithmetic mean
//! of the prior same-modality frames in its window. For integer-valued
//! images the sums are exact in f64, so the mean is independent of frame
//! order.

use ndarray::Array3;

use crate::error::{Error, Result};
use crate::image::{GreyPlane, RgbImage};
use crate::manifest::{Frame, Modality, PriorWindow, SequenceManifest, WindowOutcome};

/// Per-pixel, per-channel mean of `images`, which must agree in shape.
pub fn temporal_average(images: &[RgbImage]) -> Result<RgbImage> {
    let first = images.first().ok_or(Error::EmptyImageList)?;
    let (h, w) = (first.height(), first.width());
    let mut acc = Array3::<f64>::zeros((3, h, w));
    for (i, img) in images.iter().enumerate() {
        if img.height() != h || img.width() != w {
            return Err(Error::ShapeMismatch(format!(
                "image {i} is {}x{} but image 0 is {}x{}",
                img.width(),
                img.height(),
                w,
                h
            )));
        }
        acc += img.data();
    }
    acc /= images.len() as f64;
    Ok(RgbImage::from_array_unchecked(acc))
}

/// Luminosity greyscale: `0.299 R + 0.587 G + 0.114 B` per pixel.
pub fn luminosity_grey(img: &RgbImage) -> GreyPlane {
    let r = img.plane(0);
    let g = img.plane(1);
    let b = img.plane(2);
    let mut grey = GreyPlane::zeros((img.height(), img.width()));
    grey.zip_mut_with(&r, |o, &v| *o = 0.299 * v);
    grey.zip_mut_with(&g, |o, &v| *o += 0.587 * v);
    grey.zip_mut_with(&b, |o, &v| *o += 0.114 * v);
    grey
}

/// A background model tied to one query frame.
#[derive(Debug, Clone)]
pub struct BackgroundModel {
    /// Mean image over the window.
    pub rgb: RgbImage,
    /// Luminosity greyscale of `rgb`.
    pub grey: GreyPlane,
    /// The frames averaged, ascending by index.
    pub window: Vec<Frame>,
    /// Modality shared by the query frame and every window member.
    pub modality: Modality,
}

/// Result of building a background for one frame.
#[derive(Debug, Clone)]
pub enum BackgroundOutcome {
    Built(BackgroundModel),
    /// Not enough prior same-modality frames existed.
    Skipped { qualifying: usize, required: usize },
}

/// Load the window images and average them.
pub fn average_window(window: &PriorWindow) -> Result<RgbImage> {
    let images: Vec<RgbImage> = window
        .members
        .iter()
        .map(|f| RgbImage::load(&f.path))
        .collect::<Result<_>>()?;
    temporal_average(&images)
}

/// Build the background for `frame` from its `k`-frame prior window, or
/// report why none exists.
pub fn build_background(
    manifest: &SequenceManifest,
    frame: &Frame,
    k: usize,
) -> Result<BackgroundOutcome> {
    match manifest.prior_window(frame, k)? {
        WindowOutcome::Unavailable { qualifying, required } => {
            Ok(BackgroundOutcome::Skipped { qualifying, required })
        }
        WindowOutcome::Available(window) => {
            let rgb = average_window(&window)?;
            let grey = luminosity_grey(&rgb);
            Ok(BackgroundOutcome::Built(BackgroundModel {
                rgb,
                grey,
                window: window.members,
                modality: frame.modality,
            }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_image(h: usize, w: usize, v: f64) -> RgbImage {
        RgbImage::from_fn(h, w, |_, _| (v, v, v))
    }

    #[test]
    fn mean_of_one_through_twelve_is_six_point_five() {
        let images: Vec<RgbImage> = (1..=12).map(|v| constant_image(4, 4, v as f64)).collect();
        let avg = temporal_average(&images).unwrap();
        for y in 0..4 {
            for x in 0..4 {
                assert_eq!(avg.pixel(y, x), [6.5, 6.5, 6.5]);
            }
        }
    }

    #[test]
    fn average_is_permutation_invariant_for_integer_images() {
        let mut images: Vec<RgbImage> = (0..12)
            .map(|i| {
                RgbImage::from_fn(5, 7, |y, x| {
                    (
                        ((i * 37 + y * 5 + x) % 256) as f64,
                        ((i * 91 + y * 3 + 2 * x) % 256) as f64,
                        ((i * 13 + 7 * y + x) % 256) as f64,
                    )
                })
            })
            .collect();
        let forward = temporal_average(&images).unwrap();
        images.reverse();
        let backward = temporal_average(&images).unwrap();
        images.swap(0, 5);
        images.swap(2, 9);
        let shuffled = temporal_average(&images).unwrap();
        assert_eq!(forward.data(), backward.data());
        assert_eq!(forward.data(), shuffled.data());
    }

    #[test]
    fn average_stays_within_input_bounds() {
        let images: Vec<RgbImage> = (0..5)
            .map(|i| {
                RgbImage::from_fn(3, 3, |y, x| {
                    let v = ((i * 50 + y * 9 + x * 3) % 256) as f64;
                    (v, 255.0 - v, v / 2.0)
                })
            })
            .collect();
        let avg = temporal_average(&images).unwrap();
        for c in 0..3 {
            for ((y, x), &v) in avg.plane(c).indexed_iter() {
                let lo = images
                    .iter()
                    .map(|im| im.pixel(y, x)[c])
                    .fold(f64::INFINITY, f64::min);
                let hi = images
                    .iter()
                    .map(|im| im.pixel(y, x)[c])
                    .fold(f64::NEG_INFINITY, f64::max);
                assert!(v >= lo && v <= hi, "({y},{x})[{c}] = {v} outside [{lo},{hi}]");
            }
        }
    }

    #[test]
    fn average_is_linear_in_inputs() {
        // mean(2a, 2b) == 2 * mean(a, b), up to float scaling which is
        // exact for powers of two
        let a = RgbImage::from_fn(4, 4, |y, x| ((y + x) as f64, x as f64, y as f64));
        let b = RgbImage::from_fn(4, 4, |y, x| ((2 * y) as f64, (3 * x) as f64, 1.0));
        let scale = |im: &RgbImage| RgbImage::from_array_unchecked(im.data() * 2.0);
        let mean = temporal_average(&[a.clone(), b.clone()]).unwrap();
        let mean_scaled = temporal_average(&[scale(&a), scale(&b)]).unwrap();
        assert_eq!(mean_scaled.data(), &(mean.data() * 2.0));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let a = constant_image(4, 4, 1.0);
        let b = constant_image(4, 5, 1.0);
        assert!(matches!(
            temporal_average(&[a, b]),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn empty_list_is_rejected() {
        assert!(matches!(temporal_average(&[]), Err(Error::EmptyImageList)));
    }

    #[test]
    fn luminosity_of_primaries() {
        let red = RgbImage::from_fn(1, 1, |_, _| (255.0, 0.0, 0.0));
        let green = RgbImage::from_fn(1, 1, |_, _| (0.0, 255.0, 0.0));
        let blue = RgbImage::from_fn(1, 1, |_, _| (0.0, 0.0, 255.0));
        assert!((luminosity_grey(&red)[(0, 0)] - 76.245).abs() < 1e-12);
        assert!((luminosity_grey(&green)[(0, 0)] - 149.685).abs() < 1e-12);
        assert!((luminosity_grey(&blue)[(0, 0)] - 29.07).abs() < 1e-12);
    }

    #[test]
    fn luminosity_weights_sum_to_one_on_grey_input() {
        let img = constant_image(3, 3, 100.0);
        let grey = luminosity_grey(&img);
        for &v in grey.iter() {
            assert!((v - 100.0).abs() < 1e-12);
        }
    }
}
