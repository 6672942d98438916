//! Least-squares colour correction.
//!
//! A 3×3 matrix `M` is fitted so that background pixels, taken as row
//! vectors, map onto the current frame's pixels: it minimizes
//! `‖I − T·M‖²` over sampled pixels, where rows of `T` are background
//! pixels and rows of `I` are current-frame pixels. Applying `M` to the
//! background aligns its colour distribution with the current frame, so
//! the subsequent difference mask responds to motion rather than to
//! global illumination shifts.

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::image::RgbImage;

/// Ridge added to the normal equations; keeps degenerate fits finite
/// while perturbing well-conditioned solutions negligibly.
pub const DEFAULT_RIDGE: f64 = 1e-6;

/// Default pixel-sampling stride for the fit.
pub const DEFAULT_SAMPLE_STRIDE: usize = 4;

/// Minimum sampled pixels needed to constrain a 3×3 map.
const MIN_SAMPLES: usize = 3;

/// A fitted 3×3 colour map plus conditioning diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorMatrix {
    m: Matrix3<f64>,
    rank: usize,
}

impl ColorMatrix {
    pub fn identity() -> Self {
        ColorMatrix {
            m: Matrix3::identity(),
            rank: 3,
        }
    }

    /// Wrap an explicit matrix (diagnostics report full rank).
    pub fn from_matrix(m: Matrix3<f64>) -> Self {
        ColorMatrix { m, rank: 3 }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    /// Numerical rank of the normal-equations matrix the fit solved.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// True when the fit was under-constrained (rank < 3); the matrix is
    /// still finite thanks to the ridge term, but treat it with suspicion.
    pub fn is_degenerate(&self) -> bool {
        self.rank < 3
    }

    /// Frobenius distance to another matrix.
    pub fn frobenius_distance(&self, other: &Matrix3<f64>) -> f64 {
        (self.m - other).norm()
    }
}

/// Fit the colour map on pixels sampled every `sample_stride` rows and
/// columns, solving `(TᵀT + ridge·I₃)·M = TᵀI`.
///
/// With `ridge = 0` and a full-rank sample the result is the exact
/// least-squares minimizer. Shapes must match and the stride grid must
/// hit at least 3 pixels.
pub fn fit_color_matrix(
    current: &RgbImage,
    background: &RgbImage,
    sample_stride: usize,
    ridge: f64,
) -> Result<ColorMatrix> {
    if current.width() != background.width() || current.height() != background.height() {
        return Err(Error::ShapeMismatch(format!(
            "current is {}x{} but background is {}x{}",
            current.width(),
            current.height(),
            background.width(),
            background.height()
        )));
    }
    if sample_stride == 0 {
        return Err(Error::OutOfRange {
            name: "sample_stride".into(),
            value: 0.0,
        });
    }
    if !(ridge.is_finite() && ridge >= 0.0) {
        return Err(Error::OutOfRange {
            name: "ridge".into(),
            value: ridge,
        });
    }

    let mut tt = Matrix3::<f64>::zeros();
    let mut ti = Matrix3::<f64>::zeros();
    let mut samples = 0usize;
    let mut y = 0;
    while y < current.height() {
        let mut x = 0;
        while x < current.width() {
            let t = background.pixel(y, x);
            let i = current.pixel(y, x);
            for a in 0..3 {
                for b in 0..3 {
                    tt[(a, b)] += t[a] * t[b];
                    ti[(a, b)] += t[a] * i[b];
                }
            }
            samples += 1;
            x += sample_stride;
        }
        y += sample_stride;
    }
    if samples < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_SAMPLES,
            got: samples,
        });
    }

    let svd = tt.svd(false, false);
    let max_sv = svd.singular_values.max();
    let rank = if max_sv <= 0.0 {
        0
    } else {
        svd.singular_values
            .iter()
            .filter(|&&sv| sv > max_sv * 1e-12)
            .count()
    };

    let stabilized = tt + Matrix3::identity() * ridge;
    let m = stabilized.lu().solve(&ti).ok_or_else(|| {
        Error::Config(format!(
            "colour-fit normal equations are singular (rank {rank}); use a positive ridge"
        ))
    })?;
    Ok(ColorMatrix { m, rank })
}

/// Multiply every pixel row-vector by the map and clamp to [0, 255].
pub fn apply_color_correction(background: &RgbImage, map: &ColorMatrix) -> RgbImage {
    let m = map.matrix();
    RgbImage::from_fn(background.height(), background.width(), |y, x| {
        let t = background.pixel(y, x);
        let mut out = [0.0f64; 3];
        for (j, o) in out.iter_mut().enumerate() {
            *o = (t[0] * m[(0, j)] + t[1] * m[(1, j)] + t[2] * m[(2, j)]).clamp(0.0, 255.0);
        }
        (out[0], out[1], out[2])
    })
}
