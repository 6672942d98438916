//! Planar floating-point images.
//!
//! All pixel math in this crate runs on `f64` planes holding values on the
//! 0–255 scale. Quantisation to 8 bits happens only at PNG export time,
//! with round-half-to-even.

use std::path::Path;

use ndarray::{Array2, Array3, ArrayView2};

use crate::error::{Error, Result};

/// Greyscale plane, row-major `(height, width)`, values on the 0–255 scale.
pub type GreyPlane = Array2<f64>;

/// An RGB image as three stacked `f64` planes of shape `(3, height, width)`.
///
/// Values are kept real on the 0–255 scale; nothing is quantised until
/// export.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    data: Array3<f64>,
}

impl RgbImage {
    /// Build from three equally sized planes. Rejects non-finite values and
    /// values outside [0, 255].
    pub fn from_planes(r: Array2<f64>, g: Array2<f64>, b: Array2<f64>) -> Result<Self> {
        if r.dim() != g.dim() || r.dim() != b.dim() {
            return Err(Error::ShapeMismatch(format!(
                "rgb planes differ in shape: {:?} / {:?} / {:?}",
                r.dim(),
                g.dim(),
                b.dim()
            )));
        }
        let (h, w) = r.dim();
        if h == 0 || w == 0 {
            return Err(Error::ShapeMismatch("zero-sized image".into()));
        }
        let mut data = Array3::zeros((3, h, w));
        for (c, plane) in [r, g, b].into_iter().enumerate() {
            for v in plane.iter() {
                if !v.is_finite() || *v < 0.0 || *v > 255.0 {
                    return Err(Error::ShapeMismatch(format!(
                        "plane {c} holds out-of-range value {v}",
                    )));
                }
            }
            data.index_axis_mut(ndarray::Axis(0), c).assign(&plane);
        }
        Ok(Self { data })
    }

    /// Build an image by evaluating `f(row, col) -> (r, g, b)` at every pixel.
    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> (f64, f64, f64),
    ) -> Self {
        let mut data = Array3::zeros((3, height, width));
        for y in 0..height {
            for x in 0..width {
                let (r, g, b) = f(y, x);
                data[[0, y, x]] = r;
                data[[1, y, x]] = g;
                data[[2, y, x]] = b;
            }
        }
        Self { data }
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            data: Array3::zeros((3, height, width)),
        }
    }

    pub fn width(&self) -> usize {
        self.data.dim().2
    }

    pub fn height(&self) -> usize {
        self.data.dim().1
    }

    pub fn plane(&self, channel: usize) -> ArrayView2<'_, f64> {
        self.data.index_axis(ndarray::Axis(0), channel)
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    pub fn pixel(&self, y: usize, x: usize) -> [f64; 3] {
        [
            self.data[[0, y, x]],
            self.data[[1, y, x]],
            self.data[[2, y, x]],
        ]
    }

    pub(crate) fn from_array_unchecked(data: Array3<f64>) -> Self {
        Self { data }
    }

    /// Decode a raster file (PNG or JPEG) into f64 planes.
    ///
    /// Any source colour type is converted to 8-bit RGB first.
    pub fn load(path: &Path) -> Result<Self> {
        let decoded = image::open(path).map_err(|source| Error::ImageRead {
            path: path.to_path_buf(),
            source,
        })?;
        let rgb = decoded.to_rgb8();
        let (w, h) = (rgb.width() as usize, rgb.height() as usize);
        let mut data = Array3::zeros((3, h, w));
        for (x, y, px) in rgb.enumerate_pixels() {
            let (x, y) = (x as usize, y as usize);
            data[[0, y, x]] = px.0[0] as f64;
            data[[1, y, x]] = px.0[1] as f64;
            data[[2, y, x]] = px.0[2] as f64;
        }
        Ok(Self { data })
    }

    /// Write as an 8-bit PNG, quantising with [`quantize_u8`].
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let (h, w) = (self.height(), self.width());
        let mut out = image::RgbImage::new(w as u32, h as u32);
        for y in 0..h {
            for x in 0..w {
                let [r, g, b] = self.pixel(y, x);
                out.put_pixel(
                    x as u32,
                    y as u32,
                    image::Rgb([quantize_u8(r), quantize_u8(g), quantize_u8(b)]),
                );
            }
        }
        out.save(path).map_err(|source| Error::ImageRead {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Clamp to [0, 255] and round half-to-even to 8 bits.
pub fn quantize_u8(v: f64) -> u8 {
    v.clamp(0.0, 255.0).round_ties_even() as u8
}

/// Write a greyscale plane (0–255 scale) as an 8-bit PNG.
pub fn save_grey_png(plane: &GreyPlane, path: &Path) -> Result<()> {
    let (h, w) = plane.dim();
    let mut out = image::GrayImage::new(w as u32, h as u32);
    for y in 0..h {
        for x in 0..w {
            out.put_pixel(x as u32, y as u32, image::Luma([quantize_u8(plane[[y, x]])]));
        }
    }
    out.save(path).map_err(|source| Error::ImageRead {
        path: path.to_path_buf(),
        source,
    })
}
