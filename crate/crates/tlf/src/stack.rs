//! Five-channel feature stacks and their on-disk container.
//!
//! A stack holds, in fixed order, the three RGB planes of the current
//! frame, the greyscale temporal-background plane, and the difference
//! mask, all normalized to [0, 1]. The RGB planes are exact copies of the
//! normalized input — extra channels ride alongside them and are never
//! fused into them.
//!
//! # Container format ("TLF5", little-endian)
//!
//! | field        | bytes                         |
//! |--------------|-------------------------------|
//! | magic        | `54 4C 46 35` (`"TLF5"`)      |
//! | version      | u8 = 1                        |
//! | channels     | u8 = 5                        |
//! | height       | u32                           |
//! | width        | u32                           |
//! | planes       | 5 × height × width × f32, row-major, order R,G,B,T,D |
//! | provenance   | u32 length + UTF-8 JSON       |

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array3, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::background::BackgroundModel;
use crate::error::{Error, Result};
use crate::image::{quantize_u8, GreyPlane, RgbImage};
use crate::manifest::Frame;

pub const TLF5_MAGIC: [u8; 4] = *b"TLF5";
pub const TLF5_VERSION: u8 = 1;
pub const CHANNELS: usize = 5;

/// The five planes of a stack, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Plane {
    Red,
    Green,
    Blue,
    /// Greyscale temporal-average background.
    Temporal,
    /// Difference mask.
    Difference,
}

impl Plane {
    pub const ALL: [Plane; 5] = [
        Plane::Red,
        Plane::Green,
        Plane::Blue,
        Plane::Temporal,
        Plane::Difference,
    ];

    pub fn index(self) -> usize {
        match self {
            Plane::Red => 0,
            Plane::Green => 1,
            Plane::Blue => 2,
            Plane::Temporal => 3,
            Plane::Difference => 4,
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Plane::Red => "R",
            Plane::Green => "G",
            Plane::Blue => "B",
            Plane::Temporal => "T",
            Plane::Difference => "D",
        }
    }
}

/// Where a stack came from: the frame it describes and the window that
/// produced its background.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub frame_path: String,
    pub camera: String,
    pub timestamp: String,
    pub modality: String,
    pub window_size: usize,
    pub window_paths: Vec<String>,
}

impl Provenance {
    pub fn describe(frame: &Frame, window: &[Frame]) -> Self {
        Provenance {
            frame_path: frame.path.to_string_lossy().into_owned(),
            camera: frame.camera_id.clone(),
            timestamp: frame.timestamp.to_rfc3339(),
            modality: frame.modality.to_string(),
            window_size: window.len(),
            window_paths: window
                .iter()
                .map(|f| f.path.to_string_lossy().into_owned())
                .collect(),
        }
    }
}

/// A 5-plane feature stack with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    data: Array3<f32>,
    provenance: Provenance,
}

impl FeatureStack {
    /// Wrap raw planes, validating shape `(5, h, w)` and range [0, 1].
    pub fn new(data: Array3<f32>, provenance: Provenance) -> Result<Self> {
        let shape = data.shape();
        if shape[0] != CHANNELS || shape[1] == 0 || shape[2] == 0 {
            return Err(Error::ShapeMismatch(format!(
                "feature stack must be (5, h, w) with h, w > 0, got {shape:?}"
            )));
        }
        if let Some(&bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::OutOfRange {
                name: "feature-stack value",
                value: bad as f64,
            });
        }
        Ok(FeatureStack { data, provenance })
    }

    pub fn width(&self) -> usize {
        self.data.shape()[2]
    }

    pub fn height(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn plane(&self, plane: Plane) -> ArrayView2<'_, f32> {
        self.data.index_axis(ndarray::Axis(0), plane.index())
    }

    pub fn data(&self) -> &Array3<f32> {
        &self.data
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }
}

/// Build the stack for one frame: RGB = `current / 255`, plane 4 =
/// background grey / 255, plane 5 = mask / 255.
///
/// The RGB planes equal the normalized input bit-for-bit.
pub fn assemble_stack(
    current: &RgbImage,
    bg: &BackgroundModel,
    dm: &GreyPlane,
    frame: &Frame,
) -> Result<FeatureStack> {
    let (h, w) = (current.height(), current.width());
    if bg.rgb.height() != h || bg.rgb.width() != w {
        return Err(Error::ShapeMismatch(format!(
            "background is {}x{} but frame is {}x{}",
            bg.rgb.width(),
            bg.rgb.height(),
            w,
            h
        )));
    }
    if dm.dim() != (h, w) {
        return Err(Error::ShapeMismatch(format!(
            "difference mask is {:?} but frame is {}x{}",
            dm.dim(),
            w,
            h
        )));
    }
    let mut data = Array3::<f32>::zeros((CHANNELS, h, w));
    for c in 0..3 {
        let src = current.plane(c);
        let mut dst = data.index_axis_mut(ndarray::Axis(0), c);
        dst.zip_mut_with(&src, |o, &v| *o = (v / 255.0) as f32);
    }
    data.index_axis_mut(ndarray::Axis(0), Plane::Temporal.index())
        .zip_mut_with(&bg.grey.view(), |o, &v| *o = (v / 255.0) as f32);
    data.index_axis_mut(ndarray::Axis(0), Plane::Difference.index())
        .zip_mut_with(&dm.view(), |o, &v| *o = (v / 255.0) as f32);
    FeatureStack::new(data, Provenance::describe(frame, &bg.window))
}

/// Scale the temporal plane by `gain` and clamp to [0, 1]; every other
/// plane is returned untouched.
pub fn apply_value_gain(stack: &FeatureStack, gain: f64) -> Result<FeatureStack> {
    if !(gain.is_finite() && gain > 0.0) {
        return Err(Error::OutOfRange {
            name: "gain",
            value: gain,
        });
    }
    let mut out = stack.clone();
    let g = gain as f32;
    out.data
        .index_axis_mut(ndarray::Axis(0), Plane::Temporal.index())
        .mapv_inplace(|v| (v * g).clamp(0.0, 1.0));
    Ok(out)
}

/// Serialize a stack into the container format.
pub fn write_tlf5<W: Write>(writer: &mut W, stack: &FeatureStack) -> Result<()> {
    writer.write_all(&TLF5_MAGIC)?;
    writer.write_all(&[TLF5_VERSION, CHANNELS as u8])?;
    writer.write_all(&(stack.height() as u32).to_le_bytes())?;
    writer.write_all(&(stack.width() as u32).to_le_bytes())?;
    // standard layout guarantees C-contiguous (plane, row, column) order
    let contiguous = stack.data.as_standard_layout();
    let values = contiguous.as_slice().expect("standard layout is contiguous");
    let mut buf = Vec::with_capacity(values.len() * 4);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    writer.write_all(&buf)?;
    let provenance = serde_json::to_vec(&stack.provenance)
        .map_err(|e| Error::Tlf5Format(format!("provenance serialization failed: {e}")))?;
    writer.write_all(&(provenance.len() as u32).to_le_bytes())?;
    writer.write_all(&provenance)?;
    Ok(())
}

fn read_exact_or_format<R: Read>(reader: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    reader
        .read_exact(buf)
        .map_err(|e| Error::Tlf5Format(format!("truncated while reading {what}: {e}")))
}

/// Deserialize a stack from the container format.
pub fn read_tlf5<R: Read>(reader: &mut R) -> Result<FeatureStack> {
    let mut magic = [0u8; 4];
    read_exact_or_format(reader, &mut magic, "magic")?;
    if magic != TLF5_MAGIC {
        return Err(Error::Tlf5Format(format!(
            "bad magic {magic:02x?}, expected {TLF5_MAGIC:02x?}"
        )));
    }
    let mut head = [0u8; 2];
    read_exact_or_format(reader, &mut head, "version/channels")?;
    if head[0] != TLF5_VERSION {
        return Err(Error::Tlf5Format(format!(
            "unsupported version {}, expected {TLF5_VERSION}",
            head[0]
        )));
    }
    if head[1] as usize != CHANNELS {
        return Err(Error::Tlf5Format(format!(
            "unsupported channel count {}, expected {CHANNELS}",
            head[1]
        )));
    }
    let mut dim = [0u8; 4];
    read_exact_or_format(reader, &mut dim, "height")?;
    let h = u32::from_le_bytes(dim) as usize;
    read_exact_or_format(reader, &mut dim, "width")?;
    let w = u32::from_le_bytes(dim) as usize;
    if h == 0 || w == 0 || h.saturating_mul(w) > 1 << 30 {
        return Err(Error::Tlf5Format(format!("implausible dimensions {w}x{h}")));
    }
    let count = CHANNELS * h * w;
    let mut bytes = vec![0u8; count * 4];
    read_exact_or_format(reader, &mut bytes, "plane data")?;
    let values: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let data = Array3::from_shape_vec((CHANNELS, h, w), values)
        .expect("vector length matches shape");
    read_exact_or_format(reader, &mut dim, "provenance length")?;
    let plen = u32::from_le_bytes(dim) as usize;
    let mut pbytes = vec![0u8; plen];
    read_exact_or_format(reader, &mut pbytes, "provenance")?;
    let provenance: Provenance = serde_json::from_slice(&pbytes)
        .map_err(|e| Error::Tlf5Format(format!("bad provenance JSON: {e}")))?;
    FeatureStack::new(data, provenance)
}

/// Write a stack to `path`.
pub fn write_tlf5_file(path: &Path, stack: &FeatureStack) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = std::io::BufWriter::new(file);
    write_tlf5(&mut writer, stack)?;
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Read a stack from `path`.
pub fn read_tlf5_file(path: &Path) -> Result<FeatureStack> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = std::io::BufReader::new(file);
    read_tlf5(&mut reader)
}

/// Write one plane as an 8-bit greyscale PNG, values scaled ×255 and
/// rounded half-to-even.
pub fn export_plane_png(stack: &FeatureStack, plane: Plane, path: &Path) -> Result<()> {
    let view = stack.plane(plane);
    let (h, w) = (stack.height(), stack.width());
    let mut pixels = Vec::with_capacity(h * w);
    for v in view.iter() {
        pixels.push(quantize_u8(*v as f64 * 255.0));
    }
    let img = image::GrayImage::from_raw(w as u32, h as u32, pixels)
        .expect("buffer length matches dimensions");
    img.save(path).map_err(|e| Error::ImageRead {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Drop one greyscale PNG per plane (`{stem}_R.png` … `{stem}_D.png`)
/// plus an RGB composite `{stem}_RGB.png` into `dir` for visual
/// inspection. Returns the six paths written.
pub fn export_debug_pngs(stack: &FeatureStack, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    let mut written = Vec::with_capacity(6);
    for plane in Plane::ALL {
        let path = dir.join(format!("{stem}_{}.png", plane.short_name()));
        export_plane_png(stack, plane, &path)?;
        written.push(path);
    }
    let (h, w) = (stack.height(), stack.width());
    let r = stack.plane(Plane::Red);
    let g = stack.plane(Plane::Green);
    let b = stack.plane(Plane::Blue);
    let mut pixels = Vec::with_capacity(h * w * 3);
    for y in 0..h {
        for x in 0..w {
            pixels.push(quantize_u8(r[(y, x)] as f64 * 255.0));
            pixels.push(quantize_u8(g[(y, x)] as f64 * 255.0));
            pixels.push(quantize_u8(b[(y, x)] as f64 * 255.0));
        }
    }
    let img = image::RgbImage::from_raw(w as u32, h as u32, pixels)
        .expect("buffer length matches dimensions");
    let path = dir.join(format!("{stem}_RGB.png"));
    img.save(&path)
        .map_err(|e| Error::ImageRead {
            path: path.clone(),
            source: e,
        })?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::{build_background, BackgroundOutcome};
    use crate::manifest::{build_manifest, ManifestRecord, Modality, ModalityPolicy};
    use crate::mask::diff_mask;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn test_frame(path: &str) -> Frame {
        Frame {
            path: path.into(),
            camera_id: "cam".into(),
            timestamp: chrono::DateTime::parse_from_rfc3339("2021-01-01T12:00:00Z")
                .unwrap()
                .with_timezone(&chrono::Utc),
            modality: Modality::Day,
            index: 0,
        }
    }

    fn random_stack(seed: u64, h: usize, w: usize) -> FeatureStack {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = Array3::from_shape_fn((CHANNELS, h, w), |_| rng.gen_range(0.0f32..=1.0));
        let frame = test_frame("frame.png");
        FeatureStack::new(data, Provenance::describe(&frame, &[])).unwrap()
    }

    /// Synthesize a 13-frame single-camera day sequence on disk and build
    /// the stack of the final frame.
    fn end_to_end_stack(dir: &Path) -> FeatureStack {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut records = Vec::new();
        for i in 0..13 {
            let path = dir.join(format!("f{i:02}.png"));
            let img = RgbImage::from_fn(8, 8, |y, x| {
                (
                    ((i * 11 + y * 8 + x) % 256) as f64,
                    rng.gen_range(0..256) as f64,
                    ((x * 31 + i) % 256) as f64,
                )
            });
            img.save_png(&path).unwrap();
            records.push((
                i + 1,
                ManifestRecord {
                    path: path.to_string_lossy().into_owned(),
                    camera: "cam".into(),
                    timestamp: format!("2021-01-01T00:{i:02}:00Z"),
                    modality: Some(Modality::Day),
                },
            ));
        }
        let manifest =
            build_manifest(Path::new("synthetic"), records, &ModalityPolicy::Clock).unwrap();
        let frame = manifest.frames("cam")[12].clone();
        let bg = match build_background(&manifest, &frame, 12).unwrap() {
            BackgroundOutcome::Built(bg) => bg,
            BackgroundOutcome::Skipped { .. } => panic!("window should exist"),
        };
        let current = RgbImage::load(&frame.path).unwrap();
        let fit =
            crate::color::fit_color_matrix(&current, &bg.rgb, 1, crate::color::DEFAULT_RIDGE)
                .unwrap();
        let corrected = crate::color::apply_color_correction(&bg.rgb, &fit);
        let dm = diff_mask(&current, &corrected).unwrap();
        assemble_stack(&current, &bg, &dm, &frame).unwrap()
    }

    #[test]
    fn rgb_planes_equal_normalized_input_bit_for_bit() {
        let dir = tempfile::tempdir().unwrap();
        let stack = end_to_end_stack(dir.path());
        let current = RgbImage::load(Path::new(&stack.provenance().frame_path)).unwrap();
        for (plane, c) in [(Plane::Red, 0), (Plane::Green, 1), (Plane::Blue, 2)] {
            for ((y, x), &v) in stack.plane(plane).indexed_iter() {
                let expect = (current.pixel(y, x)[c] / 255.0) as f32;
                assert_eq!(v.to_bits(), expect.to_bits());
            }
        }
    }

    #[test]
    fn zero_mask_yields_zero_difference_plane() {
        let frame = test_frame("f.png");
        let current = RgbImage::from_fn(4, 4, |_, _| (10.0, 20.0, 30.0));
        let bg = BackgroundModel {
            rgb: current.clone(),
            grey: crate::background::luminosity_grey(&current),
            window: vec![],
            modality: Modality::Day,
        };
        let dm = GreyPlane::zeros((4, 4));
        let stack = assemble_stack(&current, &bg, &dm, &frame).unwrap();
        assert!(stack.plane(Plane::Difference).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn container_round_trip_is_bit_exact() {
        let stack = random_stack(1, 7, 9);
        let mut buf = Vec::new();
        write_tlf5(&mut buf, &stack).unwrap();
        let back = read_tlf5(&mut buf.as_slice()).unwrap();
        assert_eq!(back.provenance(), stack.provenance());
        for (a, b) in back.data().iter().zip(stack.data().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn file_round_trip_matches() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stack.tlf5");
        let stack = random_stack(2, 5, 5);
        write_tlf5_file(&path, &stack).unwrap();
        let back = read_tlf5_file(&path).unwrap();
        assert_eq!(back.data(), stack.data());
        assert_eq!(back.provenance(), stack.provenance());
    }

    #[test]
    fn header_layout_is_as_documented() {
        let stack = random_stack(3, 2, 3);
        let mut buf = Vec::new();
        write_tlf5(&mut buf, &stack).unwrap();
        assert_eq!(&buf[0..4], b"TLF5");
        assert_eq!(buf[4], 1);
        assert_eq!(buf[5], 5);
        assert_eq!(u32::from_le_bytes(buf[6..10].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(buf[10..14].try_into().unwrap()), 3);
        let plane_bytes = 5 * 2 * 3 * 4;
        let plen_offset = 14 + plane_bytes;
        let plen =
            u32::from_le_bytes(buf[plen_offset..plen_offset + 4].try_into().unwrap()) as usize;
        assert_eq!(buf.len(), plen_offset + 4 + plen);
        let json = std::str::from_utf8(&buf[plen_offset + 4..]).unwrap();
        assert!(json.starts_with('{') && json.ends_with('}'));
    }

    #[test]
    fn corrupt_magic_is_rejected() {
        let stack = random_stack(4, 2, 2);
        let mut buf = Vec::new();
        write_tlf5(&mut buf, &stack).unwrap();
        buf[0] = b'X';
        assert!(matches!(
            read_tlf5(&mut buf.as_slice()),
            Err(Error::Tlf5Format(_))
        ));
    }

    #[test]
    fn truncated_stream_is_rejected() {
        let stack = random_stack(5, 4, 4);
        let mut buf = Vec::new();
        write_tlf5(&mut buf, &stack).unwrap();
        buf.truncate(buf.len() / 2);
        assert!(matches!(
            read_tlf5(&mut buf.as_slice()),
            Err(Error::Tlf5Format(_))
        ));
    }

    #[test]
    fn wrong_version_is_rejected() {
        let stack = random_stack(6, 2, 2);
        let mut buf = Vec::new();
        write_tlf5(&mut buf, &stack).unwrap();
        buf[4] = 2;
        let err = read_tlf5(&mut buf.as_slice()).unwrap_err();
        assert!(err.to_string().contains("version"));
    }

    #[test]
    fn unit_gain_is_identity() {
        let stack = random_stack(7, 6, 6);
        let out = apply_value_gain(&stack, 1.0).unwrap();
        assert_eq!(out.data(), stack.data());
    }

    #[test]
    fn gain_clamps_and_touches_only_the_temporal_plane() {
        let stack = random_stack(8, 6, 6);
        let out = apply_value_gain(&stack, 2.0).unwrap();
        for plane in [Plane::Red, Plane::Green, Plane::Blue, Plane::Difference] {
            assert_eq!(out.plane(plane), stack.plane(plane), "{plane:?} changed");
        }
        for (&o, &i) in out.plane(Plane::Temporal).iter().zip(stack.plane(Plane::Temporal).iter())
        {
            assert_eq!(o, (i * 2.0).clamp(0.0, 1.0));
        }
        let half = apply_value_gain(&stack, 0.5).unwrap();
        assert_eq!(half.plane(Plane::Difference), stack.plane(Plane::Difference));
    }

    #[test]
    fn non_positive_gain_is_rejected() {
        let stack = random_stack(9, 2, 2);
        assert!(apply_value_gain(&stack, 0.0).is_err());
        assert!(apply_value_gain(&stack, -1.0).is_err());
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        let frame = test_frame("f.png");
        let mut data = Array3::<f32>::zeros((CHANNELS, 2, 2));
        data[(3, 0, 0)] = 1.5;
        assert!(FeatureStack::new(data, Provenance::describe(&frame, &[])).is_err());
    }

    #[test]
    fn wrong_plane_count_is_rejected() {
        let frame = test_frame("f.png");
        let data = Array3::<f32>::zeros((4, 2, 2));
        assert!(FeatureStack::new(data, Provenance::describe(&frame, &[])).is_err());
    }

    #[test]
    fn debug_export_writes_one_png_per_plane_plus_composite() {
        let dir = tempfile::tempdir().unwrap();
        let stack = random_stack(10, 4, 4);
        let written = export_debug_pngs(&stack, dir.path(), "frame0").unwrap();
        assert_eq!(written.len(), 6);
        for suffix in ["R", "G", "B", "T", "D", "RGB"] {
            assert!(dir.path().join(format!("frame0_{suffix}.png")).exists());
        }
        // quantization contract: PNG pixel = plane value ×255, ties-to-even
        let t_png = image::open(dir.path().join("frame0_T.png")).unwrap().to_luma8();
        let t = stack.plane(Plane::Temporal);
        for y in 0..stack.height() {
            for x in 0..stack.width() {
                assert_eq!(
                    t_png.get_pixel(x as u32, y as u32)[0],
                    crate::image::quantize_u8(t[(y, x)] as f64 * 255.0)
                );
            }
        }
    }
}
