//! Greyscale difference masks.
//!
//! The mask is the per-pixel mean of absolute channel differences between
//! the current frame and the colour-corrected background — a
//! motion-likelihood plane on the 0–255 scale.

use crate::error::{Error, Result};
use crate::image::RgbImage;

pub type GreyPlane = crate::image::GreyPlane;

/// `mask[y, x] = (|ΔR| + |ΔG| + |ΔB|) / 3`, in [0, 255].
pub fn diff_mask(current: &RgbImage, corrected_bg: &RgbImage) -> Result<GreyPlane> {
    if current.width() != corrected_bg.width() || current.height() != corrected_bg.height() {
        return Err(Error::ShapeMismatch(format!(
            "current is {}x{} but background is {}x{}",
            current.width(),
            current.height(),
            corrected_bg.width(),
            corrected_bg.height()
        )));
    }
    let (h, w) = (current.height(), current.width());
    let mut mask = GreyPlane::zeros((h, w));
    for y in 0..h {
        for x in 0..w {
            let a = current.pixel(y, x);
            let b = corrected_bg.pixel(y, x);
            mask[(y, x)] =
                ((a[0] - b[0]).abs() + (a[1] - b[1]).abs() + (a[2] - b[2]).abs()) / 3.0;
        }
    }
    Ok(mask)
}
